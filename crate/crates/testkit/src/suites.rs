//! Check suites run by both the core integration tests and the acceptance gate.

use std::sync::Arc;

use ilse_core::baselines::{BaselineConfig, BaselineKind, Dwatt, MlpProbe, Weighted};
use ilse_core::cayley::{build_cayley, smallest_n_for};
use ilse_core::encoders::{
    assign_layers, batch_matrix, encode_one, Aggregation, EncoderConfig, EncoderKind, GraphEncoder, LayerStack,
    SetEncoder,
};
use ilse_core::model::MethodConfig;
use ilse_core::nn::gradcheck::check_gradients;
use ilse_core::nn::loss::cosine_mse_var;
use ilse_core::nn::{Linear, Matrix, ParamStore, Tape};
use ilse_core::rng::{child_seed, stream, Rng, Stream};
use ilse_core::{IlseError, Result};
use ndarray::Array2;
use rand::Rng as _;

use crate::{bits_equal, dense, group, max_abs_diff, random_permutation, random_stack};

/// Methods with trainable parameters.
pub const GRAD_METHODS: [&str; 9] = [
    "set",
    "fc-gin",
    "fc-gcn",
    "cayley-gin",
    "cayley-gcn",
    "weighted",
    "mlp-last",
    "mlp-best",
    "dwatt",
];

pub const FINITE_DIFF_STEP: f64 = 1e-6;
pub const GRAD_TOLERANCE: f64 = 1e-4;
/// Gradient norm at the finite-difference noise floor.
pub const VANISHING_GRADIENT: f64 = 1e-8;
const MAX_DRAWS: u64 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    CrossEntropy,
    CosineMse,
}

#[derive(Debug, Clone)]
pub struct GradCase {
    pub subject: String,
    pub loss: LossKind,
    pub seed: u64,
    pub layers: usize,
    pub dim: usize,
    pub relative_error: f64,
    pub gradient_norm: f64,
    /// Input draws needed to get a non-vanishing gradient.
    pub draws: usize,
}

impl GradCase {
    pub fn passed(&self) -> bool {
        self.relative_error < GRAD_TOLERANCE
    }
}

/// A small method config with structure drawn from `rng`.
fn small_method(name: &str, layers: usize, rng: &mut Rng) -> Result<MethodConfig> {
    let mut method: MethodConfig = name.parse()?;
    method.set_hidden(rng.random_range(2..=5));
    match &mut method {
        MethodConfig::Encoder(e) => {
            e.mpnn_layers = rng.random_range(1..=2);
            e.gin_mlp_depth = rng.random_range(0..=2);
        }
        MethodConfig::Baseline(b) if b.needs_selection() => b.selected_layer = Some(rng.random_range(0..layers)),
        MethodConfig::Baseline(_) => {}
    }
    Ok(method)
}

/// Gradient check of one method under one loss on random small shapes
/// (`L <= 6`, `d <= 8`). Cross-entropy adds a linear head over 3 classes.
///
/// A draw whose true gradient vanishes (both norms below [`VANISHING_GRADIENT`],
/// e.g. every ReLU dead) carries no information about correctness; it is
/// redrawn from a derived seed and the number of draws is recorded.
pub fn gradient_case(name: &str, loss: LossKind, seed: u64) -> Result<GradCase> {
    let mut case = gradient_draw(name, loss, seed, seed)?;
    for attempt in 1..MAX_DRAWS {
        if case.gradient_norm >= VANISHING_GRADIENT {
            break;
        }
        case = gradient_draw(name, loss, seed, child_seed(seed, attempt))?;
        case.draws = attempt as usize + 1;
    }
    Ok(case)
}

fn gradient_draw(name: &str, loss: LossKind, seed: u64, draw_seed: u64) -> Result<GradCase> {
    let mut rng = stream(draw_seed, Stream::Sampling);
    let layers = rng.random_range(1..=6);
    // d >= 2 keeps cosines of single-layer baselines from being constant.
    let dim = rng.random_range(2..=8);
    let batch = rng.random_range(1..=3);
    let method = small_method(name, layers, &mut rng)?;
    let mut store = ParamStore::new();
    let enc = method.build(&mut store, layers, dim, draw_seed)?;
    // Move parameters off their initial values (zero biases, zero logits).
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        store.value_mut(id).mapv_inplace(|v| v + rng.random_range(-0.3..=0.3));
    }
    let check = match loss {
        LossKind::CrossEntropy => {
            let classes = 3;
            let head = Linear::new(&mut store, "head", enc.out_dim(), classes, &mut rng)?;
            let stacks: Vec<LayerStack> = (0..batch).map(|_| random_stack(&mut rng, layers, dim)).collect();
            let labels: Vec<usize> = (0..batch).map(|_| rng.random_range(0..classes)).collect();
            let x = batch_matrix(&stacks)?;
            check_gradients(&mut store, FINITE_DIFF_STEP, |tape, store| {
                let input = tape.constant(x.clone())?;
                let h = enc.encode(tape, store, input)?;
                let z = head.forward(tape, store, h)?;
                tape.cross_entropy(z, labels.clone())
            })?
        }
        LossKind::CosineMse => {
            let stacks: Vec<LayerStack> = (0..2 * batch).map(|_| random_stack(&mut rng, layers, dim)).collect();
            let gold: Vec<f64> = (0..batch).map(|_| rng.random_range(0.0..=1.0)).collect();
            let x = batch_matrix(&stacks)?;
            check_gradients(&mut store, FINITE_DIFF_STEP, |tape, store| {
                let input = tape.constant(x.clone())?;
                let h = enc.encode(tape, store, input)?;
                let u = tape.slice_rows(h, 0, batch)?;
                let v = tape.slice_rows(h, batch, 2 * batch)?;
                cosine_mse_var(tape, u, v, &gold)
            })?
        }
    };
    Ok(GradCase {
        subject: method.to_string(),
        loss,
        seed,
        layers,
        dim,
        relative_error: check.relative_error,
        gradient_norm: check.analytic_norm.max(check.numeric_norm),
        draws: 1,
    })
}

/// Gradient check of a loss alone, with its inputs as parameters.
pub fn loss_gradient_case(loss: LossKind, seed: u64) -> Result<GradCase> {
    let mut rng = stream(seed, Stream::Sampling);
    let rows = rng.random_range(1..=4);
    let cols = rng.random_range(2..=8);
    let mut store = ParamStore::new();
    let draw = |rng: &mut Rng| Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-2.0..=2.0));
    let check = match loss {
        LossKind::CrossEntropy => {
            let logits = store.add("logits", draw(&mut rng))?;
            let labels: Vec<usize> = (0..rows).map(|_| rng.random_range(0..cols)).collect();
            check_gradients(&mut store, FINITE_DIFF_STEP, |tape, store| {
                let z = tape.param(store, logits)?;
                tape.cross_entropy(z, labels.clone())
            })?
        }
        LossKind::CosineMse => {
            let u = store.add("u", draw(&mut rng))?;
            let v = store.add("v", draw(&mut rng))?;
            let gold: Vec<f64> = (0..rows).map(|_| rng.random_range(0.0..=1.0)).collect();
            check_gradients(&mut store, FINITE_DIFF_STEP, |tape, store| {
                let a = tape.param(store, u)?;
                let b = tape.param(store, v)?;
                cosine_mse_var(tape, a, b, &gold)
            })?
        }
    };
    Ok(GradCase {
        subject: "loss".into(),
        loss,
        seed,
        layers: rows,
        dim: cols,
        relative_error: check.relative_error,
        gradient_norm: check.analytic_norm.max(check.numeric_norm),
        draws: 1,
    })
}

/// Every method under both losses plus both losses alone, for `seeds`.
pub fn gradient_suite(seeds: std::ops::Range<u64>) -> Result<Vec<GradCase>> {
    let mut out = Vec::new();
    for loss in [LossKind::CrossEntropy, LossKind::CosineMse] {
        for seed in seeds.clone() {
            for name in GRAD_METHODS {
                out.push(gradient_case(name, loss, seed)?);
            }
            out.push(loss_gradient_case(loss, seed)?);
        }
    }
    Ok(out)
}

fn encoder_config(kind: EncoderKind, aggregation: Aggregation, rng: &mut Rng) -> EncoderConfig {
    EncoderConfig {
        mpnn_layers: rng.random_range(1..=2),
        hidden: rng.random_range(2..=6),
        gin_mlp_depth: rng.random_range(0..=2),
        ..EncoderConfig::new(kind, aggregation)
    }
}

/// Largest deviation between the tape forward pass and the dense oracle for
/// one encoder or baseline (`name` as in the method registry).
pub fn oracle_deviation(name: &str, seed: u64) -> Result<f64> {
    let mut rng = stream(seed, Stream::Sampling);
    let layers = rng.random_range(1..=9);
    let dim = rng.random_range(1..=8);
    let stack = random_stack(&mut rng, layers, dim);
    let mut store = ParamStore::new();
    let mut init = stream(seed, Stream::Init);
    let perturb = |store: &mut ParamStore, rng: &mut Rng| {
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            store.value_mut(id).mapv_inplace(|v| v + rng.random_range(-0.2..=0.2));
        }
    };
    let (got, want) = match name {
        "set" => {
            let cfg = encoder_config(EncoderKind::Set, Aggregation::Gin, &mut rng);
            let enc = SetEncoder::new(&mut store, &cfg, layers, dim, &mut init)?;
            perturb(&mut store, &mut rng);
            (encode_one(&enc, &store, &stack)?, dense::set_encoder(&store, &enc, &stack))
        }
        "fc-gin" | "fc-gcn" => {
            let agg = if name == "fc-gin" { Aggregation::Gin } else { Aggregation::Gcn };
            let cfg = encoder_config(EncoderKind::Fc, agg, &mut rng);
            let enc = GraphEncoder::fully_connected(&mut store, &cfg, layers, dim, &mut init)?;
            perturb(&mut store, &mut rng);
            let nb = dense::complete_neighbors(layers);
            (encode_one(&enc, &store, &stack)?, dense::graph_encoder(&store, &enc, &nb, None, &stack))
        }
        "cayley-gin" | "cayley-gcn" => {
            let agg = if name == "cayley-gin" { Aggregation::Gin } else { Aggregation::Gcn };
            let cfg = encoder_config(EncoderKind::Cayley, agg, &mut rng);
            let enc = GraphEncoder::cayley_for_layers(&mut store, &cfg, layers, dim, seed, &mut init)?;
            perturb(&mut store, &mut rng);
            let a = enc.assignment().expect("cayley assignment");
            let n = a.graph.modulus;
            let mats: Vec<group::Mat> = a.graph.nodes.iter().map(|g| [g.a, g.b, g.c, g.d]).collect();
            let nb = group::cayley_neighbors(&mats, n);
            (
                encode_one(&enc, &store, &stack)?,
                dense::graph_encoder(&store, &enc, &nb, Some(&a.layer_to_node), &stack),
            )
        }
        "weighted" => {
            let enc = Weighted::new(&mut store, layers, dim)?;
            perturb(&mut store, &mut rng);
            (encode_one(&enc, &store, &stack)?, dense::weighted(&store, &enc, &stack))
        }
        "mlp-last" | "mlp-best" => {
            let cfg = BaselineConfig {
                hidden: rng.random_range(2..=6),
                selected_layer: Some(rng.random_range(0..layers)),
                ..BaselineConfig::new(if name == "mlp-last" { BaselineKind::MlpLast } else { BaselineKind::MlpBest })
            };
            let enc = MlpProbe::new(&mut store, &cfg, layers, dim, &mut init)?;
            perturb(&mut store, &mut rng);
            (encode_one(&enc, &store, &stack)?, dense::mlp_probe(&store, &enc, &stack))
        }
        "dwatt" => {
            let cfg = BaselineConfig {
                hidden: rng.random_range(2..=6),
                ..BaselineConfig::new(BaselineKind::Dwatt)
            };
            let enc = Dwatt::new(&mut store, &cfg, layers, dim, &mut init)?;
            perturb(&mut store, &mut rng);
            (encode_one(&enc, &store, &stack)?, dense::dwatt(&store, &enc, &stack))
        }
        other => return Err(IlseError::InvalidArgument(format!("no oracle for {other}"))),
    };
    Ok(max_abs_diff(&got, &want))
}

/// Set and FC encoders give bitwise-identical output on a layer-permuted stack.
pub fn permutation_invariant(name: &str, seed: u64) -> Result<bool> {
    let mut rng = stream(seed, Stream::Sampling);
    let layers = rng.random_range(2..=12);
    let dim = rng.random_range(1..=8);
    let method = small_method(name, layers, &mut rng)?;
    let mut store = ParamStore::new();
    let enc = method.build(&mut store, layers, dim, seed)?;
    let stack = random_stack(&mut rng, layers, dim);
    let perm = random_permutation(&mut rng, layers);
    Ok(bits_equal(
        &encode_one(enc.as_ref(), &store, &stack)?,
        &encode_one(enc.as_ref(), &store, &stack.permuted(&perm))?,
    ))
}

/// The Cayley encoder is unchanged when layers and their node assignment are
/// permuted together, so each layer keeps its node.
pub fn cayley_compensated(aggregation: Aggregation, seed: u64) -> Result<bool> {
    let mut rng = stream(seed, Stream::Sampling);
    let layers = rng.random_range(2..=30);
    let dim = rng.random_range(1..=6);
    let cfg = encoder_config(EncoderKind::Cayley, aggregation, &mut rng);
    let (n, _) = smallest_n_for(layers as u64)?;
    let graph = Arc::new(build_cayley(n)?);
    let assignment = assign_layers(layers, Arc::clone(&graph), seed)?;
    let perm = random_permutation(&mut rng, layers);
    let stack = random_stack(&mut rng, layers, dim);

    let mut s1 = ParamStore::new();
    let e1 = GraphEncoder::cayley(&mut s1, &cfg, assignment.clone(), dim, &mut stream(seed, Stream::Init))?;
    let mut s2 = ParamStore::new();
    let e2 = GraphEncoder::cayley(&mut s2, &cfg, assignment.permuted(&perm)?, dim, &mut stream(seed, Stream::Init))?;
    Ok(bits_equal(
        &encode_one(&e1, &s1, &stack)?,
        &encode_one(&e2, &s2, &stack.permuted(&perm))?,
    ))
}

/// The readout ignores virtual nodes: it lists only real nodes, and arbitrary
/// values written into virtual-node features leave the output bit-identical.
pub fn virtual_nodes_excluded(seed: u64) -> Result<bool> {
    let mut rng = stream(seed, Stream::Sampling);
    let layers = rng.random_range(1..=40);
    let dim = rng.random_range(1..=6);
    let cfg = encoder_config(EncoderKind::Cayley, Aggregation::Gin, &mut rng);
    let mut store = ParamStore::new();
    let enc = GraphEncoder::cayley_for_layers(&mut store, &cfg, layers, dim, seed, &mut stream(seed, Stream::Init))?;
    let a = enc.assignment().expect("cayley assignment");
    let nodes = enc.node_count();

    let listed: Vec<usize> = enc.readout().entries()[0].iter().map(|&(v, _)| v).collect();
    let mut real: Vec<usize> = a.layer_to_node.clone();
    real.sort_unstable();
    let mut listed_sorted = listed.clone();
    listed_sorted.sort_unstable();
    if listed_sorted != real || a.virtual_count() != nodes - layers {
        return Ok(false);
    }

    let stack = random_stack(&mut rng, layers, dim);
    let mut tape = Tape::new();
    let x = tape.constant(stack.matrix().clone())?;
    let h = enc.encode_nodes(&mut tape, &store, x)?;
    let clean: Matrix = tape.value(h).clone();
    let mut dirty = clean.clone();
    for v in (0..nodes).filter(|&v| a.virtual_mask[v]) {
        dirty.row_mut(v).mapv_inplace(|_| rng.random_range(-1e3..=1e3));
    }
    let r_clean = enc.readout().apply(&clean)?;
    let r_dirty = enc.readout().apply(&dirty)?;
    Ok(bits_equal(r_clean.as_slice().unwrap(), r_dirty.as_slice().unwrap()))
}
