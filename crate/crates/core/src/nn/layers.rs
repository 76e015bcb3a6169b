use ndarray::Array2;
use rand_distr::{Distribution, Uniform};

use super::params::{ParamId, ParamStore};
use super::tape::{Tape, Var};
use crate::error::{invalid, Result};
use crate::rng::Rng;

/// `x W + b` with `W: in x out` and `b: 1 x out`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl Linear {
    /// Weights uniform in `[-sqrt(1/fan_in), sqrt(1/fan_in)]`, zero bias.
    pub fn new(store: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize, rng: &mut Rng) -> Result<Self> {
        if fan_in == 0 || fan_out == 0 {
            return invalid(format!("{name}: zero-width linear layer"));
        }
        let bound = (1.0 / fan_in as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        let w = Array2::from_shape_simple_fn((fan_in, fan_out), || dist.sample(rng));
        let weight = store.add(&format!("{name}.weight"), w)?;
        let bias = store.add(&format!("{name}.bias"), Array2::zeros((1, fan_out)))?;
        Ok(Self {
            weight,
            bias,
            fan_in,
            fan_out,
        })
    }

    pub fn param_count(fan_in: usize, fan_out: usize) -> usize {
        fan_in * fan_out + fan_out
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let w = tape.param(store, self.weight)?;
        let b = tape.param(store, self.bias)?;
        let xw = tape.matmul(x, w)?;
        tape.add_row(xw, b)
    }
}

/// Linear layers chained with ReLU (and dropout) between them; the last layer is linear.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub dropout: f64,
}

impl Mlp {
    pub fn new(store: &mut ParamStore, name: &str, widths: &[usize], dropout: f64, rng: &mut Rng) -> Result<Self> {
        if widths.len() < 2 {
            return invalid(format!("{name}: an MLP needs at least input and output widths"));
        }
        if !(0.0..=0.3).contains(&dropout) {
            return invalid(format!("{name}: dropout {dropout} outside [0, 0.3]"));
        }
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(store, &format!("{name}.{i}"), w[0], w[1], rng))
            .collect::<Result<_>>()?;
        Ok(Self { layers, dropout })
    }

    pub fn param_count(widths: &[usize]) -> usize {
        widths.windows(2).map(|w| Linear::param_count(w[0], w[1])).sum()
    }

    pub fn out_width(&self) -> usize {
        self.layers.last().map(|l| l.fan_out).unwrap_or(0)
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            if i > 0 {
                h = tape.relu(h)?;
                h = tape.dropout(h, self.dropout)?;
            }
            h = layer.forward(tape, store, h)?;
        }
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    #[test]
    fn init_respects_fan_in_bound_and_zero_bias() {
        let mut store = ParamStore::new();
        let lin = Linear::new(&mut store, "l", 16, 8, &mut stream(3, Stream::Init)).unwrap();
        assert!(store.value(lin.weight).iter().all(|w| w.abs() <= 0.25));
        assert!(store.value(lin.bias).iter().all(|&b| b == 0.0));
        assert_eq!(store.scalar_count(), Linear::param_count(16, 8));
    }

    #[test]
    fn mlp_widths_chain() {
        let mut store = ParamStore::new();
        let mlp = Mlp::new(&mut store, "m", &[5, 7, 3], 0.1, &mut stream(1, Stream::Init)).unwrap();
        assert_eq!(mlp.layers.len(), 2);
        assert_eq!(mlp.out_width(), 3);
        assert_eq!(store.scalar_count(), Mlp::param_count(&[5, 7, 3]));
        assert!(Mlp::new(&mut store, "bad", &[5, 3], 0.5, &mut stream(1, Stream::Init)).is_err());
    }
}
