//! Task losses on single examples, evaluated through the tape.

use ndarray::Array2;

use super::tape::{Tape, Var};
use crate::error::{invalid, Result};

fn row(values: &[f64]) -> Array2<f64> {
    Array2::from_shape_vec((1, values.len()), values.to_vec()).expect("row shape")
}

/// `-log softmax(logits)[label]`, stabilized by max subtraction.
pub fn cross_entropy(logits: &[f64], label: usize) -> Result<f64> {
    let mut tape = Tape::new();
    let x = tape.constant(row(logits))?;
    let loss = tape.cross_entropy(x, vec![label])?;
    Ok(tape.value(loss)[[0, 0]])
}

/// Maps a cosine in [-1, 1] onto the [0, 1] gold-score range.
pub fn cosine_to_unit(tape: &mut Tape, cos: Var) -> Result<Var> {
    tape.affine(cos, 0.5, 0.5)
}

/// `((1 + cos(u, v)) / 2 - gold)^2`, averaged over rows when batched.
pub fn cosine_mse_var(tape: &mut Tape, u: Var, v: Var, gold: &[f64]) -> Result<Var> {
    let cos = tape.row_cosine(u, v)?;
    let pred = cosine_to_unit(tape, cos)?;
    let target = Array2::from_shape_vec((gold.len(), 1), gold.to_vec())
        .map_err(|e| crate::error::IlseError::InvalidArgument(e.to_string()))?;
    tape.squared_error(pred, target)
}

pub fn cosine_mse(u: &[f64], v: &[f64], gold: f64) -> Result<f64> {
    if u.len() != v.len() {
        return invalid("cosine_mse: vectors differ in length");
    }
    let mut tape = Tape::new();
    let a = tape.constant(row(u))?;
    let b = tape.constant(row(v))?;
    let loss = cosine_mse_var(&mut tape, a, b, &[gold])?;
    Ok(tape.value(loss)[[0, 0]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::IlseError;

    #[test]
    fn uniform_logits_give_log_k() {
        let l = cross_entropy(&[0.3; 4], 2).unwrap();
        assert!((l - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn saturated_logits() {
        // -log(e^10 / (e^10 + e^-10)) = log(1 + e^-20)
        let expected = (-20f64).exp().ln_1p();
        let l = cross_entropy(&[10.0, -10.0], 0).unwrap();
        assert!((l - expected).abs() < 1e-12 * expected);
        assert!((l - 2.06e-9).abs() < 1e-11);
    }

    #[test]
    fn shift_invariance() {
        let base = cross_entropy(&[0.2, -1.3, 2.5], 1).unwrap();
        for c in [-100.0, 3.7, 1e3] {
            let shifted = cross_entropy(&[0.2 + c, -1.3 + c, 2.5 + c], 1).unwrap();
            assert!((base - shifted).abs() < 1e-9);
        }
    }

    #[test]
    fn label_out_of_range() {
        assert!(matches!(cross_entropy(&[0.0, 1.0], 2), Err(IlseError::InvalidArgument(_))));
    }

    #[test]
    fn cosine_mse_cases() {
        assert!(cosine_mse(&[1.0, 2.0], &[1.0, 2.0], 1.0).unwrap() < 1e-30);
        assert!(cosine_mse(&[1.0, 0.0], &[0.0, 3.0], 0.5).unwrap().abs() < 1e-30);
        let (u, v, gold) = ([0.3, -1.2, 2.0], [1.1, 0.4, -0.7], 0.8);
        let dot = 0.3 * 1.1 - 1.2 * 0.4 - 2.0 * 0.7;
        let nu = (0.09f64 + 1.44 + 4.0).sqrt();
        let nv = (1.21f64 + 0.16 + 0.49).sqrt();
        let expected = ((1.0 + dot / (nu * nv)) / 2.0 - gold).powi(2);
        assert!((cosine_mse(&u, &v, gold).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn zero_norm_is_numeric_failure() {
        assert!(matches!(
            cosine_mse(&[0.0, 0.0], &[1.0, 0.0], 0.5),
            Err(IlseError::NumericFailure { .. })
        ));
    }
}
