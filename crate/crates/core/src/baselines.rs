//! Comparison methods: single-layer probes, learned layer weighting, MLPs and
//! depth-wise attention. All share the stack-batch contract of
//! [`crate::encoders::LayerEncoder`].

use ndarray::Array2;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::encoders::{check_batch, LayerEncoder, HIDDEN_WIDTH};
use crate::error::{invalid, IlseError, Result};
use crate::nn::{Linear, Mlp, ParamId, ParamStore, Tape, Var};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    LastLayer,
    BestLayer,
    Weighted,
    MlpLast,
    MlpBest,
    Dwatt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub kind: BaselineKind,
    /// MLP hidden/output width and DWAtt projection width.
    pub hidden: usize,
    pub dropout: f64,
    /// Layer chosen by a sweep, for the best-layer kinds.
    pub selected_layer: Option<usize>,
}

impl BaselineConfig {
    pub fn new(kind: BaselineKind) -> Self {
        Self {
            kind,
            hidden: HIDDEN_WIDTH,
            dropout: 0.0,
            selected_layer: None,
        }
    }

    pub fn needs_selection(&self) -> bool {
        matches!(self.kind, BaselineKind::BestLayer | BaselineKind::MlpBest)
    }

    /// The single layer a layer-choosing baseline reads.
    pub fn resolve_layer(&self, layers: usize) -> Result<usize> {
        let layer = match self.kind {
            BaselineKind::LastLayer | BaselineKind::MlpLast => layers - 1,
            BaselineKind::BestLayer | BaselineKind::MlpBest => self.selected_layer.ok_or_else(|| {
                IlseError::InvalidState(format!("{:?} needs a selected layer from a sweep", self.kind))
            })?,
            _ => return invalid(format!("{:?} does not read a single layer", self.kind)),
        };
        if layer >= layers {
            return invalid(format!("selected layer {layer} outside [0, {layers})"));
        }
        Ok(layer)
    }

    /// Trainable scalars excluding the task head.
    pub fn param_count(&self, layers: usize, dim: usize) -> usize {
        let h = self.hidden;
        match self.kind {
            BaselineKind::LastLayer | BaselineKind::BestLayer => 0,
            BaselineKind::Weighted => layers,
            BaselineKind::MlpLast | BaselineKind::MlpBest => Mlp::param_count(&[dim, h, h]),
            BaselineKind::Dwatt => {
                Linear::param_count(dim, h) + Linear::param_count(h, h) + layers * h + Mlp::param_count(&[h, h, h])
            }
        }
    }
}

fn layer_rows(blocks: usize, layers: usize, layer: usize) -> Vec<usize> {
    (0..blocks).map(|b| b * layers + layer).collect()
}

/// Returns one fixed layer row per example, untouched.
#[derive(Debug, Clone)]
pub struct SingleLayer {
    layers: usize,
    dim: usize,
    pub layer: usize,
}

impl SingleLayer {
    pub fn new(layers: usize, dim: usize, layer: usize) -> Result<Self> {
        if layer >= layers {
            return invalid(format!("layer {layer} outside [0, {layers})"));
        }
        Ok(Self { layers, dim, layer })
    }

    pub fn last(layers: usize, dim: usize) -> Result<Self> {
        if layers == 0 {
            return invalid("no layers");
        }
        Self::new(layers, dim, layers - 1)
    }
}

impl LayerEncoder for SingleLayer {
    fn layers(&self) -> usize {
        self.layers
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn out_dim(&self) -> usize {
        self.dim
    }
    fn encode(&self, tape: &mut Tape, _store: &ParamStore, stacks: Var) -> Result<Var> {
        check_batch(self, tape, stacks)?;
        let blocks = tape.value(stacks).nrows() / self.layers;
        tape.gather_rows(stacks, layer_rows(blocks, self.layers, self.layer))
    }
}

/// `sum_l softmax(w)_l z_l` with exactly `L` trainable scalars.
#[derive(Debug, Clone)]
pub struct Weighted {
    layers: usize,
    dim: usize,
    pub weights: ParamId,
}

impl Weighted {
    pub fn new(store: &mut ParamStore, layers: usize, dim: usize) -> Result<Self> {
        if layers == 0 {
            return invalid("no layers");
        }
        let weights = store.add("weighted.logits", Array2::zeros((1, layers)))?;
        Ok(Self { layers, dim, weights })
    }
}

impl LayerEncoder for Weighted {
    fn layers(&self) -> usize {
        self.layers
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn out_dim(&self) -> usize {
        self.dim
    }
    fn encode(&self, tape: &mut Tape, store: &ParamStore, stacks: Var) -> Result<Var> {
        check_batch(self, tape, stacks)?;
        let blocks = tape.value(stacks).nrows() / self.layers;
        let logits = tape.param(store, self.weights)?;
        let alpha = tape.softmax_rows(logits)?;
        let per_example = tape.gather_rows(alpha, vec![0; blocks])?;
        tape.block_mix(per_example, stacks)
    }
}

/// Two-layer MLP `d -> h -> h` on one chosen layer.
#[derive(Debug, Clone)]
pub struct MlpProbe {
    layers: usize,
    dim: usize,
    pub layer: usize,
    pub mlp: Mlp,
}

impl MlpProbe {
    pub fn new(store: &mut ParamStore, config: &BaselineConfig, layers: usize, dim: usize, rng: &mut Rng) -> Result<Self> {
        let layer = config.resolve_layer(layers)?;
        let h = config.hidden;
        let mlp = Mlp::new(store, "mlp", &[dim, h, h], config.dropout, rng)?;
        Ok(Self { layers, dim, layer, mlp })
    }
}

impl LayerEncoder for MlpProbe {
    fn layers(&self) -> usize {
        self.layers
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn out_dim(&self) -> usize {
        self.mlp.out_width()
    }
    fn encode(&self, tape: &mut Tape, store: &ParamStore, stacks: Var) -> Result<Var> {
        check_batch(self, tape, stacks)?;
        let blocks = tape.value(stacks).nrows() / self.layers;
        let rows = tape.gather_rows(stacks, layer_rows(blocks, self.layers, self.layer))?;
        self.mlp.forward(tape, store, rows)
    }
}

/// Depth-wise attention after a shared `d -> w` projection.
///
/// The projected last layer forms the query; keys are learned per-layer
/// vectors; values are an MLP of each projected layer. The attended value is
/// added back onto the projected last layer.
#[derive(Debug, Clone)]
pub struct Dwatt {
    layers: usize,
    dim: usize,
    width: usize,
    pub projection: Linear,
    pub query: Linear,
    pub keys: ParamId,
    pub value: Mlp,
}

impl Dwatt {
    pub fn new(store: &mut ParamStore, config: &BaselineConfig, layers: usize, dim: usize, rng: &mut Rng) -> Result<Self> {
        if layers == 0 {
            return invalid("no layers");
        }
        let w = config.hidden;
        let projection = Linear::new(store, "dwatt.proj", dim, w, rng)?;
        let query = Linear::new(store, "dwatt.query", w, w, rng)?;
        let bound = (1.0 / w as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        let keys = store.add("dwatt.keys", Array2::from_shape_simple_fn((layers, w), || dist.sample(rng)))?;
        let value = Mlp::new(store, "dwatt.value", &[w, w, w], config.dropout, rng)?;
        Ok(Self {
            layers,
            dim,
            width: w,
            projection,
            query,
            keys,
            value,
        })
    }

    /// Attention weights over layers, `B x L`.
    pub fn attention(&self, tape: &mut Tape, store: &ParamStore, stacks: Var) -> Result<(Var, Var, Var)> {
        check_batch(self, tape, stacks)?;
        let blocks = tape.value(stacks).nrows() / self.layers;
        let projected = self.projection.forward(tape, store, stacks)?;
        let last = tape.gather_rows(projected, layer_rows(blocks, self.layers, self.layers - 1))?;
        let q = self.query.forward(tape, store, last)?;
        let keys = tape.param(store, self.keys)?;
        let scores = tape.matmul_t(q, keys)?;
        let scaled = tape.affine(scores, 1.0 / (self.width as f64).sqrt(), 0.0)?;
        let alpha = tape.softmax_rows(scaled)?;
        Ok((alpha, projected, last))
    }
}

impl LayerEncoder for Dwatt {
    fn layers(&self) -> usize {
        self.layers
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn out_dim(&self) -> usize {
        self.width
    }
    fn encode(&self, tape: &mut Tape, store: &ParamStore, stacks: Var) -> Result<Var> {
        let (alpha, projected, last) = self.attention(tape, store, stacks)?;
        let values = self.value.forward(tape, store, projected)?;
        let attended = tape.block_mix(alpha, values)?;
        tape.add(last, attended)
    }
}
