//! Training, evaluation, layer sweeps, grid search, few-shot curves and
//! method comparison.

use std::fmt::Write as _;
use std::time::Instant;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{BaselineConfig, BaselineKind};
use crate::data::{few_shot_subset, Sample, Split, TaskDataset, TaskKind};
use crate::encoders::{batch_matrix, LayerEncoder, LayerStack};
use crate::error::{invalid, IlseError, Result};
use crate::model::{count_params_with_head, MethodConfig};
use crate::nn::loss::cosine_mse_var;
use crate::nn::stats::{pearson, spearman};
use crate::nn::{AdamConfig, Linear, Matrix, ParamStore, Tape, Var};
use crate::rng::{child_seed, stream, Stream};

const EVAL_CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub method: MethodConfig,
    pub lr: f64,
    pub weight_decay: f64,
    /// Defaults to 64 for classification and 256 for pair tasks.
    #[serde(default)]
    pub batch_size: Option<usize>,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    /// Fill `wall_ms` in the metrics. Off by default so metrics are reproducible.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub record_wall_time: bool,
}

impl TrainConfig {
    pub fn new(method: MethodConfig) -> Self {
        Self {
            method,
            lr: 1e-3,
            weight_decay: 0.0,
            batch_size: None,
            max_epochs: 30,
            patience: 10,
            seed: 0,
            record_wall_time: false,
        }
    }

    pub fn batch_size_for(&self, kind: TaskKind) -> usize {
        self.batch_size.unwrap_or(match kind {
            TaskKind::Classification => 64,
            TaskKind::PairRegression => 256,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.method.validate()?;
        if !self.lr.is_finite() || self.lr <= 0.0 {
            return invalid(format!("learning rate must be positive, got {}", self.lr));
        }
        if self.weight_decay.is_nan() || self.weight_decay < 0.0 {
            return invalid("weight decay must be non-negative");
        }
        if self.batch_size == Some(0) {
            return invalid("batch size must be positive");
        }
        if self.patience == 0 {
            return invalid("patience must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    Spearman,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    EarlyStopped,
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training loss; absent for the untrained evaluation at epoch 0.
    pub train_loss: Option<f64>,
    pub val: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub method: String,
    pub config: TrainConfig,
    pub metric: Metric,
    pub params: usize,
    pub head_params: usize,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub val_best: f64,
    pub test: f64,
    /// Pearson correlation on the test split (pair tasks only).
    pub test_pearson: Option<f64>,
    pub seed: u64,
    pub status: RunStatus,
    pub failure: Option<String>,
    pub near_chance: bool,
    pub wall_ms: Option<u64>,
}

impl RunMetrics {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }
}

/// Split scores. `pearson` is only computed for pair tasks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub primary: f64,
    pub pearson: Option<f64>,
}

/// A trained method: encoder, optional classification head and parameters.
pub struct TrainedModel {
    pub method: MethodConfig,
    pub encoder: Box<dyn LayerEncoder>,
    pub head: Option<Linear>,
    pub store: ParamStore,
}

impl TrainedModel {
    /// Builds an untrained model for `dataset`'s shape.
    pub fn new(method: &MethodConfig, dataset: &TaskDataset, seed: u64) -> Result<Self> {
        let mut store = ParamStore::new();
        let encoder = method.build(&mut store, dataset.layers, dataset.dim, seed)?;
        let head = match dataset.kind {
            TaskKind::Classification => {
                let mut rng = stream(child_seed(seed, 1), Stream::Init);
                Some(Linear::new(&mut store, "head", encoder.out_dim(), dataset.classes, &mut rng)?)
            }
            TaskKind::PairRegression => None,
        };
        Ok(Self {
            method: method.clone(),
            encoder,
            head,
            store,
        })
    }

    pub fn head_params(&self) -> usize {
        self.head.as_ref().map_or(0, |h| Linear::param_count(h.fan_in, h.fan_out))
    }

    pub fn encoder_params(&self) -> usize {
        self.store.scalar_count() - self.head_params()
    }

    /// `B x out_dim` representations in evaluation mode.
    pub fn represent(&self, stacks: &[&LayerStack]) -> Result<Matrix> {
        let mut parts = Vec::new();
        for chunk in stacks.chunks(EVAL_CHUNK) {
            let mut tape = Tape::new();
            let x = tape.constant(batch_matrix(chunk.iter().copied())?)?;
            let h = self.encoder.encode(&mut tape, &self.store, x)?;
            parts.push(tape.value(h).clone());
        }
        concat(parts, self.encoder.out_dim())
    }

    /// Class logits (classification only), evaluation mode.
    pub fn logits(&self, stacks: &[&LayerStack]) -> Result<Matrix> {
        let head = match &self.head {
            Some(h) => h,
            None => return Err(IlseError::InvalidState("model has no classification head".into())),
        };
        let mut parts = Vec::new();
        for chunk in stacks.chunks(EVAL_CHUNK) {
            let mut tape = Tape::new();
            let x = tape.constant(batch_matrix(chunk.iter().copied())?)?;
            let h = self.encoder.encode(&mut tape, &self.store, x)?;
            let z = head.forward(&mut tape, &self.store, h)?;
            parts.push(tape.value(z).clone());
        }
        concat(parts, head.fan_out)
    }

    fn training_loss(&self, tape: &mut Tape, dataset: &TaskDataset, batch: &[usize]) -> Result<Var> {
        match dataset.kind {
            TaskKind::Classification => {
                let (stacks, labels): (Vec<&LayerStack>, Vec<usize>) = batch
                    .iter()
                    .map(|&i| match &dataset.examples[i].sample {
                        Sample::Class { stack, label } => (stack, *label),
                        Sample::Pair { .. } => unreachable!("validated dataset"),
                    })
                    .unzip();
                let x = tape.constant(batch_matrix(stacks)?)?;
                let h = self.encoder.encode(tape, &self.store, x)?;
                let head = self.head.as_ref().expect("classification head");
                let z = head.forward(tape, &self.store, h)?;
                tape.cross_entropy(z, labels)
            }
            TaskKind::PairRegression => {
                let (pairs, gold) = pair_batch(dataset, batch);
                let stacks = pairs.iter().map(|p| p.0).chain(pairs.iter().map(|p| p.1));
                let x = tape.constant(batch_matrix(stacks)?)?;
                let h = self.encoder.encode(tape, &self.store, x)?;
                let n = batch.len();
                let u = tape.slice_rows(h, 0, n)?;
                let v = tape.slice_rows(h, n, 2 * n)?;
                cosine_mse_var(tape, u, v, &gold)
            }
        }
    }
}

fn concat(parts: Vec<Matrix>, width: usize) -> Result<Matrix> {
    if parts.is_empty() {
        return Ok(Array2::zeros((0, width)));
    }
    let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
    ndarray::concatenate(ndarray::Axis(0), &views).map_err(|e| IlseError::InvalidArgument(e.to_string()))
}

fn pair_batch<'a>(dataset: &'a TaskDataset, batch: &[usize]) -> (Vec<(&'a LayerStack, &'a LayerStack)>, Vec<f64>) {
    batch
        .iter()
        .map(|&i| match &dataset.examples[i].sample {
            Sample::Pair { a, b, gold } => ((a, b), *gold),
            Sample::Class { .. } => unreachable!("validated dataset"),
        })
        .unzip()
}

fn row_cosines(u: &Matrix, v: &Matrix) -> Result<Vec<f64>> {
    u.rows()
        .into_iter()
        .zip(v.rows())
        .map(|(a, b)| {
            let na = a.dot(&a).sqrt();
            let nb = b.dot(&b).sqrt();
            if na == 0.0 || nb == 0.0 {
                return Err(IlseError::NumericFailure {
                    op: "cosine".into(),
                    detail: "zero-norm representation".into(),
                });
            }
            Ok(a.dot(&b) / (na * nb))
        })
        .collect()
}

/// Index of the first maximal entry.
fn argmax(row: ndarray::ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Accuracy (classification) or Spearman (pairs) on one split.
///
/// A constant prediction vector has no rank correlation; it scores 0.
pub fn evaluate(model: &TrainedModel, dataset: &TaskDataset, split: Split) -> Result<Score> {
    let idx = dataset.split_indices(split);
    if idx.is_empty() {
        return invalid(format!("{split:?} split is empty"));
    }
    match dataset.kind {
        TaskKind::Classification => {
            let (stacks, labels): (Vec<&LayerStack>, Vec<usize>) = idx
                .iter()
                .map(|&i| match &dataset.examples[i].sample {
                    Sample::Class { stack, label } => (stack, *label),
                    Sample::Pair { .. } => unreachable!("validated dataset"),
                })
                .unzip();
            let logits = model.logits(&stacks)?;
            let correct = logits
                .rows()
                .into_iter()
                .zip(&labels)
                .filter(|(row, &l)| argmax(row.view()) == l)
                .count();
            Ok(Score {
                primary: correct as f64 / labels.len() as f64,
                pearson: None,
            })
        }
        TaskKind::PairRegression => {
            let (pairs, gold) = pair_batch(dataset, &idx);
            let a: Vec<&LayerStack> = pairs.iter().map(|p| p.0).collect();
            let b: Vec<&LayerStack> = pairs.iter().map(|p| p.1).collect();
            let cos = row_cosines(&model.represent(&a)?, &model.represent(&b)?)?;
            let or_zero = |r: Result<f64>| match r {
                Err(IlseError::UndefinedCorrelation(_)) => Ok(0.0),
                other => other,
            };
            Ok(Score {
                primary: or_zero(spearman(&cos, &gold))?,
                pearson: Some(or_zero(pearson(&cos, &gold))?),
            })
        }
    }
}

fn check_dataset(dataset: &TaskDataset) -> Result<()> {
    dataset.validate()?;
    let sizes = dataset.split_sizes();
    if sizes.train == 0 || sizes.validation == 0 || sizes.test == 0 {
        return invalid(format!(
            "train, validation and test splits must be non-empty (got {} / {} / {})",
            sizes.train, sizes.validation, sizes.test
        ));
    }
    if dataset.kind == TaskKind::Classification && dataset.classes < 2 {
        return invalid("classification needs at least two classes");
    }
    Ok(())
}

/// A finished run: metrics plus the best-validation model.
pub struct TrainedRun {
    pub metrics: RunMetrics,
    pub model: TrainedModel,
}

/// Trains with Adam and early stopping on validation; reports the test score of
/// the best-validation parameters.
pub fn train(dataset: &TaskDataset, config: &TrainConfig) -> Result<RunMetrics> {
    train_model(dataset, config).map(|r| r.metrics)
}

pub fn train_model(dataset: &TaskDataset, config: &TrainConfig) -> Result<TrainedRun> {
    let start = Instant::now();
    config.validate()?;
    check_dataset(dataset)?;

    let mut config = config.clone();
    if config.method.needs_selection() && config.method.selected_layer().is_none() {
        let sweep = layer_sweep(dataset, &config)?;
        config.method = config.method.with_selected_layer(sweep.best_layer);
    }

    let mut model = TrainedModel::new(&config.method, dataset, config.seed)?;
    let expected = count_params_with_head(&config.method, dataset.layers, dataset.dim, dataset.classes);
    if expected.encoder != model.encoder_params() || expected.head != model.head_params() {
        return Err(IlseError::InvariantViolation(format!(
            "parameter count {} + {} differs from formula {} + {}",
            model.encoder_params(),
            model.head_params(),
            expected.encoder,
            expected.head
        )));
    }

    let initial = evaluate(&model, dataset, Split::Validation)?;
    let mut epochs = vec![EpochRecord {
        epoch: 0,
        train_loss: None,
        val: initial.primary,
    }];
    let mut best = (0usize, initial.primary, model.store.clone());
    let mut status = RunStatus::Completed;
    let mut failure = None;

    if model.store.is_empty() {
        // Nothing to fit (raw layer on a pair task).
    } else {
        let adam = AdamConfig::new(config.lr, config.weight_decay);
        let batch_size = config.batch_size_for(dataset.kind);
        let mut order = dataset.split_indices(Split::Train);
        let mut shuffle_rng = stream(config.seed, Stream::Shuffle);
        let mut dropout_rng = Some(stream(config.seed, Stream::Dropout));
        let mut since_best = 0;

        'epochs: for epoch in 1..=config.max_epochs {
            order.shuffle(&mut shuffle_rng);
            let mut loss_sum = 0.0;
            for batch in order.chunks(batch_size) {
                let mut tape = Tape::training(dropout_rng.take().expect("dropout stream"));
                let step = model
                    .training_loss(&mut tape, dataset, batch)
                    .and_then(|loss| {
                        let value = tape.value(loss)[[0, 0]];
                        tape.backward(loss, &mut model.store)?;
                        Ok(value)
                    })
                    .and_then(|value| model.store.adam_step(&adam).map(|_| value))
                    .and_then(|value| {
                        if model.store.flat_values().iter().all(|v| v.is_finite()) {
                            Ok(value)
                        } else {
                            Err(IlseError::NumericFailure {
                                op: "adam".into(),
                                detail: "non-finite parameter after update".into(),
                            })
                        }
                    });
                dropout_rng = tape.into_rng();
                match step {
                    Ok(v) => loss_sum += v * batch.len() as f64,
                    Err(e @ IlseError::NumericFailure { .. }) => {
                        status = RunStatus::Diverged;
                        failure = Some(e.to_string());
                        break 'epochs;
                    }
                    Err(e) => return Err(e),
                }
            }
            let val = match evaluate(&model, dataset, Split::Validation) {
                Ok(s) => s.primary,
                Err(e @ IlseError::NumericFailure { .. }) => {
                    status = RunStatus::Diverged;
                    failure = Some(e.to_string());
                    break;
                }
                Err(e) => return Err(e),
            };
            epochs.push(EpochRecord {
                epoch,
                train_loss: Some(loss_sum / order.len() as f64),
                val,
            });
            if val > best.1 {
                best = (epoch, val, model.store.clone());
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= config.patience {
                    status = RunStatus::EarlyStopped;
                    break;
                }
            }
        }
    }

    model.store.load_values_from(&best.2)?;
    let test = evaluate(&model, dataset, Split::Test)?;
    let (metric, near_chance) = match dataset.kind {
        TaskKind::Classification => (Metric::Accuracy, best.1 <= 1.0 / dataset.classes as f64 + 0.02),
        TaskKind::PairRegression => (Metric::Spearman, best.1.abs() < 0.05),
    };
    let metrics = RunMetrics {
        method: config.method.to_string(),
        metric,
        params: model.encoder_params(),
        head_params: model.head_params(),
        epochs,
        best_epoch: best.0,
        val_best: best.1,
        test: test.primary,
        test_pearson: test.pearson,
        seed: config.seed,
        status,
        failure,
        near_chance,
        wall_ms: config.record_wall_time.then(|| start.elapsed().as_millis() as u64),
        config,
    };
    Ok(TrainedRun { metrics, model })
}

// ---------------------------------------------------------------------------
// Layer sweep

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSweep {
    /// Validation score per layer.
    pub scores: Vec<f64>,
    pub best_layer: usize,
}

/// Scores every single layer on validation: a trained linear probe for
/// classification, raw cosine Spearman for pairs. Ties go to the deeper layer.
pub fn layer_sweep(dataset: &TaskDataset, base: &TrainConfig) -> Result<LayerSweep> {
    check_dataset(dataset)?;
    let scores = (0..dataset.layers)
        .map(|layer| {
            let method = MethodConfig::Baseline(BaselineConfig {
                selected_layer: Some(layer),
                ..BaselineConfig::new(BaselineKind::BestLayer)
            });
            match dataset.kind {
                TaskKind::Classification => {
                    let cfg = TrainConfig {
                        method,
                        record_wall_time: false,
                        ..base.clone()
                    };
                    train(dataset, &cfg).map(|m| m.val_best)
                }
                TaskKind::PairRegression => {
                    let model = TrainedModel::new(&method, dataset, base.seed)?;
                    evaluate(&model, dataset, Split::Validation).map(|s| s.primary)
                }
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut best_layer = 0;
    for (l, &s) in scores.iter().enumerate() {
        if s >= scores[best_layer] {
            best_layer = l;
        }
    }
    Ok(LayerSweep { scores, best_layer })
}

// ---------------------------------------------------------------------------
// Grid search

/// Hyperparameter axes. An empty axis keeps the base configuration's value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    #[serde(default)]
    pub lrs: Vec<f64>,
    #[serde(default)]
    pub weight_decays: Vec<f64>,
    #[serde(default)]
    pub dropouts: Vec<f64>,
    #[serde(default)]
    pub mpnn_layers: Vec<usize>,
    #[serde(default)]
    pub gin_mlp_depths: Vec<usize>,
}

fn axis<T: Clone>(values: &[T], fallback: T) -> Vec<T> {
    if values.is_empty() {
        vec![fallback]
    } else {
        values.to_vec()
    }
}

impl GridSpec {
    /// Cartesian product in a fixed order. Graph-only axes apply to graph
    /// encoders; GIN depth applies to GIN aggregation only.
    pub fn expand(&self, base: &TrainConfig) -> Vec<TrainConfig> {
        use crate::encoders::{Aggregation, EncoderKind};
        let graph = match &base.method {
            MethodConfig::Encoder(e) if e.kind != EncoderKind::Set => Some(e.clone()),
            _ => None,
        };
        let layers = match &graph {
            Some(e) => axis(&self.mpnn_layers, e.mpnn_layers),
            None => vec![0],
        };
        let depths = match &graph {
            Some(e) if e.aggregation == Aggregation::Gin => axis(&self.gin_mlp_depths, e.gin_mlp_depth),
            Some(e) => vec![e.gin_mlp_depth],
            None => vec![0],
        };
        let mut out = Vec::new();
        for &lr in &axis(&self.lrs, base.lr) {
            for &wd in &axis(&self.weight_decays, base.weight_decay) {
                for &dropout in &axis(&self.dropouts, base.method.dropout()) {
                    for &m in &layers {
                        for &depth in &depths {
                            let mut cfg = TrainConfig {
                                lr,
                                weight_decay: wd,
                                ..base.clone()
                            };
                            cfg.method.set_dropout(dropout);
                            if let MethodConfig::Encoder(e) = &mut cfg.method {
                                if graph.is_some() {
                                    e.mpnn_layers = m;
                                    e.gin_mlp_depth = depth;
                                }
                            }
                            out.push(cfg);
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOutcome {
    pub best_index: usize,
    pub trace: Vec<RunMetrics>,
}

impl GridOutcome {
    pub fn best(&self) -> &RunMetrics {
        &self.trace[self.best_index]
    }
}

fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| IlseError::InvalidArgument(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Runs every configuration and keeps the best validation score. Ties go to
/// the earlier grid point; diverged runs are never selected.
pub fn grid_search(dataset: &TaskDataset, grid: &[TrainConfig], jobs: usize) -> Result<GridOutcome> {
    if grid.is_empty() {
        return invalid("empty grid");
    }
    let trace = with_jobs(jobs, || grid.par_iter().map(|cfg| train(dataset, cfg)).collect::<Result<Vec<_>>>())??;
    let mut best: Option<usize> = None;
    for (i, run) in trace.iter().enumerate() {
        if run.status == RunStatus::Diverged {
            continue;
        }
        if best.is_none_or(|b| run.val_best > trace[b].val_best) {
            best = Some(i);
        }
    }
    match best {
        Some(best_index) => Ok(GridOutcome { best_index, trace }),
        None => Err(IlseError::SearchFailure(format!("all {} grid points diverged", trace.len()))),
    }
}

// ---------------------------------------------------------------------------
// Few-shot curves

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FewShotPoint {
    pub k: usize,
    pub scores: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Test score versus examples-per-class. For each seed the subset sampler and
/// the training run share the seed.
pub fn few_shot_curve(
    dataset: &TaskDataset,
    base: &TrainConfig,
    ks: &[usize],
    seeds: &[u64],
    jobs: usize,
) -> Result<Vec<FewShotPoint>> {
    if seeds.is_empty() || ks.is_empty() {
        return invalid("few-shot curve needs at least one k and one seed");
    }
    let cells: Vec<(usize, u64)> = ks.iter().flat_map(|&k| seeds.iter().map(move |&s| (k, s))).collect();
    let scores = with_jobs(jobs, || {
        cells
            .par_iter()
            .map(|&(k, seed)| {
                let subset = few_shot_subset(dataset, k, seed)?;
                train(&subset, &TrainConfig { seed, ..base.clone() }).map(|m| m.test)
            })
            .collect::<Result<Vec<f64>>>()
    })??;
    Ok(ks
        .iter()
        .zip(scores.chunks(seeds.len()))
        .map(|(&k, s)| {
            let (mean, std) = mean_std(s);
            FewShotPoint {
                k,
                scores: s.to_vec(),
                mean,
                std,
            }
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Comparison

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: String,
    pub params: usize,
    pub head_params: usize,
    pub val_mean: f64,
    pub test_mean: f64,
    pub test_std: f64,
    pub test_scores: Vec<f64>,
    pub near_chance: bool,
    /// Selected configuration per seed.
    pub selected: Vec<TrainConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub metric: Metric,
    pub seeds: Vec<u64>,
    pub rows: Vec<ComparisonRow>,
}

/// Grid-searches each method per seed and ranks methods by mean test score.
/// Equal means keep the input order.
pub fn compare_methods(
    dataset: &TaskDataset,
    methods: &[MethodConfig],
    base: &TrainConfig,
    grid: &GridSpec,
    seeds: &[u64],
    jobs: usize,
) -> Result<ComparisonReport> {
    if methods.is_empty() || seeds.is_empty() {
        return invalid("comparison needs at least one method and one seed");
    }
    let mut rows = Vec::with_capacity(methods.len());
    for method in methods {
        let mut bests = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let cfg = TrainConfig {
                method: method.clone(),
                seed,
                ..base.clone()
            };
            bests.push(grid_search(dataset, &grid.expand(&cfg), jobs)?.best().clone());
        }
        let tests: Vec<f64> = bests.iter().map(|m| m.test).collect();
        let (test_mean, test_std) = mean_std(&tests);
        let (val_mean, _) = mean_std(&bests.iter().map(|m| m.val_best).collect::<Vec<_>>());
        rows.push(ComparisonRow {
            method: method.to_string(),
            params: bests[0].params,
            head_params: bests[0].head_params,
            val_mean,
            test_mean,
            test_std,
            test_scores: tests,
            near_chance: bests.iter().any(|m| m.near_chance),
            selected: bests.into_iter().map(|m| m.config).collect(),
        });
    }
    rows.sort_by(|a, b| b.test_mean.total_cmp(&a.test_mean));
    Ok(ComparisonReport {
        metric: match dataset.kind {
            TaskKind::Classification => Metric::Accuracy,
            TaskKind::PairRegression => Metric::Spearman,
        },
        seeds: seeds.to_vec(),
        rows,
    })
}

impl ComparisonReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialize")
    }

    /// Aligned plain-text table; scores are shown x100.
    pub fn to_text(&self) -> String {
        let metric = match self.metric {
            Metric::Accuracy => "acc",
            Metric::Spearman => "spearman",
        };
        let width = self.rows.iter().map(|r| r.method.len()).max().unwrap_or(6).max(6);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:>10}  {:>6}  {:>9}  {:>14}",
            "method",
            "params",
            "head",
            "val",
            format!("test {metric}")
        );
        for r in &self.rows {
            let flag = if r.near_chance { "  near chance" } else { "" };
            let _ = writeln!(
                out,
                "{:<width$}  {:>10}  {:>6}  {:>9.2}  {:>7.2} ± {:<4.2}{flag}",
                r.method,
                r.params,
                r.head_params,
                100.0 * r.val_mean,
                100.0 * r.test_mean,
                100.0 * r.test_std,
            );
        }
        out
    }
}
