use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

#[derive(Debug, Parser)]
#[command(name = "ilse", version, about = "Inter-layer structural encoders over frozen layer stacks")]
pub struct Cli {
    /// Root seed for every random stream.
    #[arg(long, global = true, env = "ILSE_SEED")]
    pub seed: Option<u64>,

    /// Worker threads for grid points and few-shot cells.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,

    /// JSON file whose keys mirror the flag names; explicit flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the SL(2, Z_n) Cayley graph and report its structure.
    Cayley(CayleyArgs),
    /// Write a planted-signal dataset in LREP format.
    GenSynth(GenSynthArgs),
    /// Train one method and print its metrics.
    Train(TrainCmd),
    /// Grid-search and rank several methods.
    Compare(CompareCmd),
    /// Test score versus examples per class.
    FewShot(FewShotCmd),
    /// Score each layer on its own.
    SweepLayers(SweepCmd),
}

#[derive(Debug, Args)]
#[group(multiple = false, id = "size")]
pub struct CayleyTarget {
    /// Modulus of the group.
    #[arg(long)]
    pub n: Option<u64>,
    /// Pick the smallest modulus whose graph holds this many layers.
    #[arg(long)]
    pub layers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CayleyArgs {
    #[command(flatten)]
    pub target: CayleyTarget,
    /// Write the edge list (`u v`, 0-based) here.
    #[arg(long)]
    pub edges: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

/// Applies `file` values wherever `self` has none.
pub trait Merge {
    fn merge(self, file: Self) -> Self;
}

macro_rules! optional_args {
    ($(#[$meta:meta])* pub struct $name:ident { $($(#[$fmeta:meta])* pub $field:ident : Option<$ty:ty>,)* }) => {
        $(#[$meta])*
        #[derive(Debug, Default, Clone, Args, Deserialize)]
        #[serde(default, rename_all = "kebab-case")]
        pub struct $name {
            $($(#[$fmeta])* #[arg(long)] pub $field: Option<$ty>,)*
        }

        impl $name {
            /// Field names in snake case, for config-key validation.
            pub const KEYS: &'static [&'static str] = &[$(stringify!($field)),*];
        }

        impl Merge for $name {
            fn merge(self, file: Self) -> Self {
                Self { $($field: self.$field.or(file.$field),)* }
            }
        }
    };
}

optional_args! {
    pub struct SynthArgs {
        /// classification or pair
        pub task: Option<String>,
        /// Number of layers L.
        pub layers: Option<usize>,
        /// Representation width d.
        pub dim: Option<usize>,
        /// Token draws pooled per row.
        pub tokens: Option<usize>,
        /// Class count K.
        pub classes: Option<usize>,
        /// Layer carrying the signal (default L/2).
        pub planted_layer: Option<usize>,
        pub snr: Option<f64>,
        pub leakage: Option<f64>,
        pub decay: Option<f64>,
        /// Total examples split 70/15/15; overridden per split by the next three.
        pub total: Option<usize>,
        pub n_train: Option<usize>,
        pub n_val: Option<usize>,
        pub n_test: Option<usize>,
        pub out: Option<PathBuf>,
    }
}

optional_args! {
    pub struct TrainArgs {
        /// Dataset in LREP format.
        pub data: Option<PathBuf>,
        /// Method name, e.g. cayley-gin, last-layer, dwatt.
        pub method: Option<String>,
        pub lr: Option<f64>,
        pub weight_decay: Option<f64>,
        pub dropout: Option<f64>,
        /// Hidden width of encoders and MLP probes.
        pub hidden: Option<usize>,
        pub mpnn_layers: Option<usize>,
        pub gin_depth: Option<usize>,
        /// Fixed layer for best-layer and mlp-best (skips the sweep).
        pub layer: Option<usize>,
        pub epochs: Option<usize>,
        pub patience: Option<usize>,
        pub batch_size: Option<usize>,
        /// Write JSON here instead of stdout.
        pub out: Option<PathBuf>,
    }
}

optional_args! {
    pub struct GridArgs {
        /// Comma-separated learning rates.
        pub lrs: Option<String>,
        pub weight_decays: Option<String>,
        pub dropouts: Option<String>,
        pub mpnn_layer_grid: Option<String>,
        pub gin_depth_grid: Option<String>,
    }
}

#[derive(Debug, Args)]
pub struct GenSynthArgs {
    #[command(flatten)]
    pub spec: SynthArgs,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct TrainCmd {
    #[command(flatten)]
    pub train: TrainArgs,
    /// Save the best-validation parameters.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Record wall time in the metrics (breaks byte-identical output).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct CompareCmd {
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Comma-separated method names (default: all).
    #[arg(long)]
    pub methods: Option<String>,
    /// Comma-separated seeds (default: the root seed).
    #[arg(long)]
    pub seeds: Option<String>,
    /// Print the aligned text table instead of JSON.
    #[arg(long)]
    pub text: bool,
}

#[derive(Debug, Args)]
pub struct FewShotCmd {
    #[command(flatten)]
    pub train: TrainArgs,
    /// Comma-separated examples-per-class values.
    #[arg(long, default_value = "1,2,4,8,16,32")]
    pub ks: String,
    #[arg(long)]
    pub seeds: Option<String>,
}

#[derive(Debug, Args)]
pub struct SweepCmd {
    #[command(flatten)]
    pub train: TrainArgs,
}
