//! Encoders that read every hidden layer of a frozen language model as one
//! structured object.
//!
//! A pooled layer stack (`L x d`) is mapped to a single task representation by
//! one of three encoders: a permutation-invariant set encoder, a message-passing
//! network over the complete graph on layers, or a message-passing network over
//! a Cayley graph of `SL(2, Z_n)` with layers placed on its nodes. Baselines,
//! a seeded training harness, the LREP dataset format and a planted-signal
//! generator are included.
//!
//! ```
//! use ilse_core::data::{generate_synthetic, SynthSpec};
//! use ilse_core::harness::{train, TrainConfig};
//!
//! let ds = generate_synthetic(&SynthSpec { n_train: 60, n_val: 12, n_test: 12, ..SynthSpec::default() })?;
//! let mut method: ilse_core::MethodConfig = "cayley-gin".parse()?;
//! method.set_hidden(16);
//! let run = train(&ds, &TrainConfig { max_epochs: 2, ..TrainConfig::new(method) })?;
//! assert!(run.test >= 0.0 && run.test <= 1.0);
//! # Ok::<(), ilse_core::IlseError>(())
//! ```

pub mod baselines;
pub mod cayley;
pub mod data;
pub mod encoders;
pub mod error;
pub mod harness;
pub mod model;
pub mod nn;
pub mod rng;

pub use cayley::{build_cayley, smallest_n_for, CayleyGraph};
pub use data::{Split, TaskDataset, TaskKind};
pub use encoders::{EncoderConfig, LayerEncoder, LayerStack};
pub use error::{IlseError, Result};
pub use harness::{train, RunMetrics, TrainConfig};
pub use model::MethodConfig;
