use ilse_core::cayley::{build_cayley, group_size, is_connected, smallest_n_for};
use ilse_core::data::{
    decode_lrep, encode_lrep, few_shot_subset, generate_synthetic, Example, Sample, Split, SynthSpec, TaskDataset,
    TaskKind,
};
use ilse_core::encoders::LayerStack;
use ilse_core::nn::stats::spearman;
use ilse_core::nn::{AdamConfig, BlockOperator, ParamStore};
use ilse_core::IlseError;
use ndarray::Array2;
use proptest::prelude::*;

fn stack_strategy(layers: usize, dim: usize) -> impl Strategy<Value = LayerStack> {
    prop::collection::vec(-1e6f32..1e6f32, layers * dim).prop_map(move |v| {
        let data = Array2::from_shape_vec((layers, dim), v.into_iter().map(f64::from).collect()).unwrap();
        LayerStack::new(data).unwrap()
    })
}

fn split_strategy() -> impl Strategy<Value = Split> {
    prop_oneof![Just(Split::Train), Just(Split::Validation), Just(Split::Test)]
}

fn dataset_strategy() -> impl Strategy<Value = TaskDataset> {
    (any::<bool>(), 1usize..5, 1usize..6, 1usize..5, 0usize..8).prop_flat_map(|(pairs, layers, dim, classes, n)| {
        let example = if pairs {
            (stack_strategy(layers, dim), stack_strategy(layers, dim), 0f32..=1f32, split_strategy())
                .prop_map(|(a, b, gold, split)| Example {
                    sample: Sample::Pair { a, b, gold: f64::from(gold) },
                    split,
                })
                .boxed()
        } else {
            (stack_strategy(layers, dim), 0..classes, split_strategy())
                .prop_map(|(stack, label, split)| Example {
                    sample: Sample::Class { stack, label },
                    split,
                })
                .boxed()
        };
        prop::collection::vec(example, n).prop_map(move |examples| TaskDataset {
            kind: if pairs { TaskKind::PairRegression } else { TaskKind::Classification },
            layers,
            dim,
            classes: if pairs { 0 } else { classes },
            examples,
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn lrep_round_trip_is_bit_exact(ds in dataset_strategy()) {
        let bytes = encode_lrep(&ds).unwrap();
        let back = decode_lrep(&bytes).unwrap();
        prop_assert_eq!(&back, &ds);
        prop_assert_eq!(encode_lrep(&back).unwrap(), bytes);
    }

    #[test]
    fn truncation_reports_an_offset_inside_the_file(ds in dataset_strategy(), frac in 0.0f64..1.0) {
        let bytes = encode_lrep(&ds).unwrap();
        let cut = ((bytes.len() as f64) * frac) as usize;
        match decode_lrep(&bytes[..cut]) {
            Err(IlseError::Format { offset, .. }) => prop_assert!(offset as usize <= cut),
            other => prop_assert!(false, "expected format error, got {:?}", other.map(|d| d.len())),
        }
    }

    #[test]
    fn corrupted_magic_or_version_is_located(ds in dataset_strategy(), pos in 0usize..8, byte in any::<u8>()) {
        let mut bytes = encode_lrep(&ds).unwrap();
        prop_assume!(bytes[pos] != byte);
        bytes[pos] = byte;
        let want = if pos < 4 { 0 } else { 4 };
        match decode_lrep(&bytes) {
            Err(IlseError::Format { offset, .. }) => prop_assert_eq!(offset, want),
            other => prop_assert!(false, "expected format error, got {:?}", other.map(|d| d.len())),
        }
    }

    #[test]
    fn cayley_graph_invariants(n in 2u64..=16) {
        let g = build_cayley(n).unwrap();
        prop_assert_eq!(g.node_count() as u64, group_size(n).unwrap());
        prop_assert!(g.is_symmetric());
        prop_assert!(is_connected(&g.adjacency));
        if n >= 3 {
            prop_assert!(g.adjacency.iter().all(|nb| nb.len() == 4));
        }
        prop_assert_eq!(g.edge_count() * 2, g.adjacency.iter().map(Vec::len).sum::<usize>());
    }

    #[test]
    fn smallest_n_is_minimal(layers in 1u64..5000) {
        let (n, size) = smallest_n_for(layers).unwrap();
        prop_assert!(size >= layers);
        prop_assert_eq!(size, group_size(n).unwrap());
        for m in 2..n {
            prop_assert!(group_size(m).unwrap() < layers);
        }
    }

    #[test]
    fn spearman_ignores_monotone_transforms(xs in prop::collection::vec(-100.0f64..100.0, 3..30), seed in any::<u64>()) {
        let ys: Vec<f64> = xs.iter().enumerate().map(|(i, x)| x.sin() + ((seed >> (i % 60)) & 1) as f64).collect();
        prop_assume!(xs.iter().any(|&x| x != xs[0]) && ys.iter().any(|&y| y != ys[0]));
        let base = spearman(&xs, &ys).unwrap();
        let warped: Vec<f64> = xs.iter().map(|x| x.powi(3) + 2.0 * x).collect();
        prop_assert!((spearman(&warped, &ys).unwrap() - base).abs() < 1e-12);
        prop_assert!((spearman(&ys, &xs).unwrap() - base).abs() < 1e-12);
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&base));
    }

    #[test]
    fn first_adam_step_is_gradient_scale_free(g in prop::collection::vec(-5.0f64..5.0, 1..12), c in 0.01f64..100.0) {
        let step = |scale: f64, eps: f64| {
            let mut s = ParamStore::new();
            let id = s.add("w", Array2::zeros((1, g.len()))).unwrap();
            let grad = Array2::from_shape_vec((1, g.len()), g.iter().map(|v| v * scale).collect()).unwrap();
            s.accumulate_grad(id, &grad).unwrap();
            s.adam_step(&AdamConfig { eps, ..AdamConfig::new(1e-3, 0.0) }).unwrap();
            s.value(id).clone()
        };
        // first step is -lr * g / (|g| + eps) after bias correction
        for scale in [1.0, c] {
            for (x, gi) in step(scale, 1e-8).iter().zip(&g) {
                let gs = gi * scale;
                let want = -1e-3 * gs / (gs.abs() + 1e-8);
                prop_assert!((x - want).abs() <= 1e-15, "{x} vs {want}");
            }
        }
        let a = step(1.0, 0.0);
        let b = step(c, 0.0);
        for (x, y) in a.iter().zip(b.iter()) {
            prop_assert!((x - y).abs() <= 1e-15);
        }
    }

    #[test]
    fn few_shot_subsets_are_nested(k1 in 1usize..12, k2 in 1usize..12, seed in any::<u64>()) {
        let ds = generate_synthetic(&SynthSpec {
            layers: 3, dim: 4, classes: 3, n_train: 30, n_val: 3, n_test: 3, ..SynthSpec::default()
        }).unwrap();
        let (lo, hi) = (k1.min(k2), k1.max(k2));
        let small = few_shot_subset(&ds, lo, seed).unwrap();
        let big = few_shot_subset(&ds, hi, seed).unwrap();
        for e in small.examples.iter().filter(|e| e.split == Split::Train) {
            prop_assert!(big.examples.contains(e));
        }
        for count in small.class_counts(Split::Train) {
            prop_assert_eq!(count, lo.min(10));
        }
    }

    #[test]
    fn block_operator_ignores_entry_order(vals in prop::collection::vec(-1e3f64..1e3, 8), rot in 0usize..8) {
        let entries: Vec<(usize, f64)> = (0..8).map(|i| (i, 1.0 + i as f64 * 0.25)).collect();
        let mut rotated = entries.clone();
        rotated.rotate_left(rot);
        let x = Array2::from_shape_vec((8, 1), vals).unwrap();
        let a = BlockOperator::new(1, 8, vec![entries]).unwrap().apply(&x).unwrap();
        let b = BlockOperator::new(1, 8, vec![rotated]).unwrap().apply(&x).unwrap();
        prop_assert_eq!(a[[0, 0]].to_bits(), b[[0, 0]].to_bits());
    }
}
