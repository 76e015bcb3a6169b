//! Central finite-difference gradient checking.

use super::params::ParamStore;
use super::tape::{Tape, Var};
use crate::error::Result;

#[derive(Debug, Clone, Copy)]
pub struct GradCheck {
    /// `||analytic - numeric|| / max(||analytic||, ||numeric||)` over the flattened gradient.
    pub relative_error: f64,
    pub max_abs_diff: f64,
    pub analytic_norm: f64,
    pub numeric_norm: f64,
    pub coordinates: usize,
}

/// Compares the tape gradient of `loss_fn` against central differences with step `eps`
/// over every scalar in `store`. `loss_fn` must be deterministic.
pub fn check_gradients<F>(store: &mut ParamStore, eps: f64, mut loss_fn: F) -> Result<GradCheck>
where
    F: FnMut(&mut Tape, &ParamStore) -> Result<Var>,
{
    store.zero_grads();
    let mut tape = Tape::new();
    let loss = loss_fn(&mut tape, store)?;
    tape.backward(loss, store)?;
    let analytic = store.flat_grads();
    store.zero_grads();

    let mut eval = |store: &ParamStore| -> Result<f64> {
        let mut tape = Tape::new();
        let loss = loss_fn(&mut tape, store)?;
        Ok(tape.value(loss)[[0, 0]])
    };

    let mut numeric = Vec::with_capacity(analytic.len());
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        let count = store.value(id).len();
        for k in 0..count {
            let orig = store.value(id).as_slice().expect("standard layout")[k];
            store.value_mut(id).as_slice_mut().expect("standard layout")[k] = orig + eps;
            let plus = eval(store)?;
            store.value_mut(id).as_slice_mut().expect("standard layout")[k] = orig - eps;
            let minus = eval(store)?;
            store.value_mut(id).as_slice_mut().expect("standard layout")[k] = orig;
            numeric.push((plus - minus) / (2.0 * eps));
        }
    }

    let diff: f64 = analytic.iter().zip(&numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
    let na = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nn = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
    let scale = na.max(nn);
    let relative_error = if scale == 0.0 { 0.0 } else { diff / scale };
    let max_abs_diff = analytic.iter().zip(&numeric).map(|(a, n)| (a - n).abs()).fold(0.0, f64::max);
    Ok(GradCheck {
        relative_error,
        max_abs_diff,
        analytic_norm: na,
        numeric_norm: nn,
        coordinates: numeric.len(),
    })
}
