//! Method registry: names, configuration, construction and parameter counts.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{BaselineConfig, BaselineKind, Dwatt, MlpProbe, SingleLayer, Weighted};
use crate::encoders::{Aggregation, EncoderConfig, EncoderKind, GraphEncoder, LayerEncoder, SetEncoder};
use crate::error::{invalid, IlseError, Result};
use crate::nn::{Linear, ParamStore};
use crate::rng::{child_seed, stream, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodConfig {
    Encoder(EncoderConfig),
    Baseline(BaselineConfig),
}

pub const ALL_METHODS: [&str; 11] = [
    "last-layer",
    "best-layer",
    "weighted",
    "mlp-last",
    "mlp-best",
    "dwatt",
    "set",
    "fc-gin",
    "fc-gcn",
    "cayley-gin",
    "cayley-gcn",
];

pub const ILSE_METHODS: [&str; 5] = ["set", "fc-gin", "fc-gcn", "cayley-gin", "cayley-gcn"];

impl FromStr for MethodConfig {
    type Err = IlseError;

    /// Accepts kebab- or snake-case names such as `cayley-gin` or `last_layer`.
    fn from_str(name: &str) -> Result<Self> {
        let norm = name.trim().to_ascii_lowercase().replace('_', "-");
        let enc = |k, a| Ok(MethodConfig::Encoder(EncoderConfig::new(k, a)));
        let base = |k| Ok(MethodConfig::Baseline(BaselineConfig::new(k)));
        match norm.as_str() {
            "set" => enc(EncoderKind::Set, Aggregation::Gin),
            "fc-gin" => enc(EncoderKind::Fc, Aggregation::Gin),
            "fc-gcn" => enc(EncoderKind::Fc, Aggregation::Gcn),
            "cayley-gin" => enc(EncoderKind::Cayley, Aggregation::Gin),
            "cayley-gcn" => enc(EncoderKind::Cayley, Aggregation::Gcn),
            "last-layer" => base(BaselineKind::LastLayer),
            "best-layer" => base(BaselineKind::BestLayer),
            "weighted" => base(BaselineKind::Weighted),
            "mlp-last" => base(BaselineKind::MlpLast),
            "mlp-best" => base(BaselineKind::MlpBest),
            "dwatt" => base(BaselineKind::Dwatt),
            _ => invalid(format!("unknown method {name:?}; expected one of {}", ALL_METHODS.join(", "))),
        }
    }
}

impl fmt::Display for MethodConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            MethodConfig::Encoder(e) => match (e.kind, e.aggregation) {
                (EncoderKind::Set, _) => "set",
                (EncoderKind::Fc, Aggregation::Gin) => "fc-gin",
                (EncoderKind::Fc, Aggregation::Gcn) => "fc-gcn",
                (EncoderKind::Cayley, Aggregation::Gin) => "cayley-gin",
                (EncoderKind::Cayley, Aggregation::Gcn) => "cayley-gcn",
            },
            MethodConfig::Baseline(b) => match b.kind {
                BaselineKind::LastLayer => "last-layer",
                BaselineKind::BestLayer => "best-layer",
                BaselineKind::Weighted => "weighted",
                BaselineKind::MlpLast => "mlp-last",
                BaselineKind::MlpBest => "mlp-best",
                BaselineKind::Dwatt => "dwatt",
            },
        };
        f.write_str(name)
    }
}

impl MethodConfig {
    pub fn is_ilse(&self) -> bool {
        matches!(self, MethodConfig::Encoder(_))
    }

    pub fn dropout(&self) -> f64 {
        match self {
            MethodConfig::Encoder(e) => e.dropout,
            MethodConfig::Baseline(b) => b.dropout,
        }
    }

    pub fn set_dropout(&mut self, rate: f64) {
        match self {
            MethodConfig::Encoder(e) => e.dropout = rate,
            MethodConfig::Baseline(b) => b.dropout = rate,
        }
    }

    pub fn set_hidden(&mut self, width: usize) {
        match self {
            MethodConfig::Encoder(e) => e.hidden = width,
            MethodConfig::Baseline(b) => b.hidden = width,
        }
    }

    pub fn needs_selection(&self) -> bool {
        matches!(self, MethodConfig::Baseline(b) if b.needs_selection())
    }

    pub fn selected_layer(&self) -> Option<usize> {
        match self {
            MethodConfig::Baseline(b) => b.selected_layer,
            MethodConfig::Encoder(_) => None,
        }
    }

    pub fn with_selected_layer(&self, layer: usize) -> Self {
        let mut out = self.clone();
        if let MethodConfig::Baseline(b) = &mut out {
            b.selected_layer = Some(layer);
        }
        out
    }

    /// Methods whose representation is the raw layer row (no encoder parameters).
    pub fn is_raw_layer(&self) -> bool {
        matches!(
            self,
            MethodConfig::Baseline(BaselineConfig {
                kind: BaselineKind::LastLayer | BaselineKind::BestLayer,
                ..
            })
        )
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MethodConfig::Encoder(e) => e.validate(),
            MethodConfig::Baseline(b) => {
                if !(0.0..=0.3).contains(&b.dropout) {
                    return invalid(format!("dropout must be in [0, 0.3], got {}", b.dropout));
                }
                if b.hidden == 0 {
                    return invalid("hidden width must be positive");
                }
                Ok(())
            }
        }
    }

    /// Width of the representation the method produces for `dim`-wide layers.
    pub fn out_dim(&self, dim: usize) -> usize {
        match self {
            MethodConfig::Encoder(e) => e.hidden,
            MethodConfig::Baseline(b) => match b.kind {
                BaselineKind::LastLayer | BaselineKind::BestLayer | BaselineKind::Weighted => dim,
                _ => b.hidden,
            },
        }
    }

    /// Registers parameters in `store` and returns the encoder. Initialization
    /// and the Cayley layer placement both derive from `seed`.
    pub fn build(&self, store: &mut ParamStore, layers: usize, dim: usize, seed: u64) -> Result<Box<dyn LayerEncoder>> {
        self.validate()?;
        if layers == 0 || dim == 0 {
            return invalid("layer stacks must be at least 1 x 1");
        }
        let mut rng = stream(seed, Stream::Init);
        Ok(match self {
            MethodConfig::Encoder(cfg) => match cfg.kind {
                EncoderKind::Set => Box::new(SetEncoder::new(store, cfg, layers, dim, &mut rng)?),
                EncoderKind::Fc => Box::new(GraphEncoder::fully_connected(store, cfg, layers, dim, &mut rng)?),
                EncoderKind::Cayley => Box::new(GraphEncoder::cayley_for_layers(
                    store,
                    cfg,
                    layers,
                    dim,
                    child_seed(seed, Stream::Assignment as u64),
                    &mut rng,
                )?),
            },
            MethodConfig::Baseline(cfg) => match cfg.kind {
                BaselineKind::LastLayer | BaselineKind::BestLayer => {
                    Box::new(SingleLayer::new(layers, dim, cfg.resolve_layer(layers)?)?)
                }
                BaselineKind::Weighted => Box::new(Weighted::new(store, layers, dim)?),
                BaselineKind::MlpLast | BaselineKind::MlpBest => Box::new(MlpProbe::new(store, cfg, layers, dim, &mut rng)?),
                BaselineKind::Dwatt => Box::new(Dwatt::new(store, cfg, layers, dim, &mut rng)?),
            },
        })
    }
}

/// Trainable parameters a method adds on top of the frozen stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ParamCount {
    pub encoder: usize,
    pub head: usize,
}

impl ParamCount {
    pub fn total(&self) -> usize {
        self.encoder + self.head
    }
}

/// Exact encoder parameter count for `L x d` stacks (no task head).
pub fn count_params(method: &MethodConfig, layers: usize, dim: usize) -> usize {
    match method {
        MethodConfig::Encoder(e) => e.param_count(dim),
        MethodConfig::Baseline(b) => b.param_count(layers, dim),
    }
}

/// Encoder count plus a linear classification head over `classes` (0 for pair tasks).
pub fn count_params_with_head(method: &MethodConfig, layers: usize, dim: usize, classes: usize) -> ParamCount {
    let head = if classes == 0 {
        0
    } else {
        Linear::param_count(method.out_dim(dim), classes)
    };
    ParamCount {
        encoder: count_params(method, layers, dim),
        head,
    }
}
