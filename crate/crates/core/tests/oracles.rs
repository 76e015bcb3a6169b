use ilse_core::cayley::{build_cayley, group_size, smallest_n_for};
use ilse_core::nn::stats::spearman;
use ilse_testkit::group::{cayley_neighbors, diameter, sl2_elements};
use ilse_testkit::suites::{oracle_deviation, GRAD_METHODS};

#[test]
fn forward_passes_match_dense_reference() {
    for name in GRAD_METHODS {
        for seed in 0..20 {
            let dev = oracle_deviation(name, seed).unwrap();
            assert!(dev < 1e-10, "{name} seed {seed}: deviation {dev:e}");
        }
    }
}

#[test]
fn cayley_graphs_match_brute_force() {
    for n in 2..=12u64 {
        let elems = sl2_elements(n);
        let g = build_cayley(n).unwrap();
        assert_eq!(g.node_count(), elems.len(), "n = {n}");
        assert_eq!(group_size(n).unwrap(), elems.len() as u64);

        let mats: Vec<[u64; 4]> = g.nodes.iter().map(|e| [e.a, e.b, e.c, e.d]).collect();
        let mut sorted = mats.clone();
        sorted.sort_unstable();
        let mut expected = elems.clone();
        expected.sort_unstable();
        assert_eq!(sorted, expected, "node sets differ for n = {n}");

        let nb = cayley_neighbors(&mats, n);
        let mut got = g.adjacency.clone();
        got.iter_mut().for_each(|v| v.sort_unstable());
        assert_eq!(got, nb, "adjacency differs for n = {n}");
        assert_eq!(g.diameter().unwrap(), diameter(&nb).unwrap());
    }
}

#[test]
fn smallest_modulus_matches_linear_search() {
    let sizes: Vec<u64> = (1..=12).map(|n| sl2_elements(n).len() as u64).collect();
    for layers in 1..=1000u64 {
        let want = (2..=12).find(|&n| sizes[n as usize - 1] >= layers);
        if let Some(n) = want {
            assert_eq!(smallest_n_for(layers).unwrap(), (n, sizes[n as usize - 1]), "L = {layers}");
        }
    }
}

#[test]
fn spearman_matches_textbook_formula_without_ties() {
    // 1 - 6 sum d^2 / (n (n^2 - 1)) holds when there are no ties.
    let x = [0.3, -1.2, 4.0, 2.2, 0.9, -0.4, 7.5];
    let y = [1.0, 0.1, 3.0, 5.0, 2.0, -3.0, 4.0];
    let rank = |v: &[f64]| -> Vec<f64> {
        v.iter().map(|a| v.iter().filter(|b| *b < a).count() as f64 + 1.0).collect()
    };
    let (rx, ry) = (rank(&x), rank(&y));
    let n = x.len() as f64;
    let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b).powi(2)).sum();
    let want = 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
    assert!((spearman(&x, &y).unwrap() - want).abs() < 1e-12);
}
