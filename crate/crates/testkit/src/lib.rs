//! Independent reference computations and reusable check suites.
//!
//! Nothing here goes through the autodiff tape: the dense oracles recompute
//! every encoder with plain nested loops over the stored parameter values, and
//! the group oracle enumerates `SL(2, Z_n)` by brute force.

pub mod dense;
pub mod group;
pub mod suites;

use ilse_core::encoders::LayerStack;
use ilse_core::rng::Rng;
use ndarray::Array2;
use rand::Rng as _;

/// Uniform entries in `[-1, 1]`.
pub fn random_stack(rng: &mut Rng, layers: usize, dim: usize) -> LayerStack {
    let data = Array2::from_shape_simple_fn((layers, dim), || rng.random_range(-1.0..=1.0));
    LayerStack::new(data).expect("finite entries")
}

/// A uniformly random permutation of `0..n` (Fisher-Yates).
pub fn random_permutation(rng: &mut Rng, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        p.swap(i, j);
    }
    p
}

/// Largest absolute elementwise difference.
pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "length mismatch");
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Bitwise equality of two float slices.
pub fn bits_equal(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}
