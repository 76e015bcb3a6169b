use ilse_core::encoders::Aggregation;
use ilse_testkit::suites::{cayley_compensated, permutation_invariant, virtual_nodes_excluded};

#[test]
fn set_and_fc_encoders_ignore_layer_order() {
    for name in ["set", "fc-gin", "fc-gcn"] {
        for seed in 0..25 {
            assert!(permutation_invariant(name, seed).unwrap(), "{name} seed {seed}");
        }
    }
}

#[test]
fn cayley_encoder_is_invariant_under_compensated_permutation() {
    for agg in [Aggregation::Gin, Aggregation::Gcn] {
        for seed in 0..25 {
            assert!(cayley_compensated(agg, seed).unwrap(), "{agg:?} seed {seed}");
        }
    }
}

#[test]
fn readout_skips_virtual_nodes() {
    for seed in 0..25 {
        assert!(virtual_nodes_excluded(seed).unwrap(), "seed {seed}");
    }
}

#[test]
fn cayley_encoder_is_not_order_invariant_in_general() {
    // Sanity check that the compensated property is not vacuous.
    use ilse_core::encoders::encode_one;
    use ilse_core::model::MethodConfig;
    use ilse_core::nn::ParamStore;
    use ilse_core::rng::{stream, Stream};
    use ilse_testkit::random_stack;

    let mut method: MethodConfig = "cayley-gin".parse().unwrap();
    method.set_hidden(6);
    let mut store = ParamStore::new();
    let enc = method.build(&mut store, 12, 4, 0).unwrap();
    let stack = random_stack(&mut stream(1, Stream::Sampling), 12, 4);
    let perm: Vec<usize> = (0..12).rev().collect();
    let a = encode_one(enc.as_ref(), &store, &stack).unwrap();
    let b = encode_one(enc.as_ref(), &store, &stack.permuted(&perm)).unwrap();
    assert_ne!(a, b);
}
