//! Dense f64 math with reverse-mode gradients, layers, losses and Adam.

pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod params;
pub mod stats;
pub mod tape;

pub use layers::{Linear, Mlp};
pub use params::{AdamConfig, ParamId, ParamStore};
pub use tape::{BlockOperator, Matrix, Tape, Var};
