//! Task datasets, the LREP binary format, the planted-signal generator and
//! few-shot subsampling.
//!
//! LREP layout (little-endian):
//!
//! ```text
//! "LREP"  u32 version=1  u8 kind (0 classification, 1 pair)
//! u32 L   u32 d   u32 K (0 for pairs)   u64 N
//! N records:
//!   classification: L*d f32, u32 label, u8 split
//!   pair:           2*L*d f32 (a then b), f32 gold, u8 split
//! ```
//!
//! Split tags: 0 train, 1 validation, 2 test. Values are `f32` on disk and
//! `f64` in memory; the generator rounds through `f32` so files round-trip
//! exactly.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::encoders::LayerStack;
use crate::error::{invalid, IlseError, Result};
use crate::rng::{child_seed, stream, Rng, Stream};

pub const LREP_MAGIC: &[u8; 4] = b"LREP";
pub const LREP_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Classification,
    PairRegression,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    fn tag(self) -> u8 {
        match self {
            Split::Train => 0,
            Split::Validation => 1,
            Split::Test => 2,
        }
    }

    fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Split::Train),
            1 => Some(Split::Validation),
            2 => Some(Split::Test),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sample {
    Class { stack: LayerStack, label: usize },
    Pair { a: LayerStack, b: LayerStack, gold: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub sample: Sample,
    pub split: Split,
}

impl Example {
    pub fn label(&self) -> Option<usize> {
        match &self.sample {
            Sample::Class { label, .. } => Some(*label),
            Sample::Pair { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskDataset {
    pub kind: TaskKind,
    pub layers: usize,
    pub dim: usize,
    /// Class count; 0 for pair regression.
    pub classes: usize,
    pub examples: Vec<Example>,
}

impl TaskDataset {
    pub fn empty(kind: TaskKind, layers: usize, dim: usize, classes: usize) -> Self {
        Self {
            kind,
            layers,
            dim,
            classes,
            examples: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn split_indices(&self, split: Split) -> Vec<usize> {
        (0..self.examples.len()).filter(|&i| self.examples[i].split == split).collect()
    }

    pub fn split_sizes(&self) -> SplitSizes {
        let count = |s| self.examples.iter().filter(|e| e.split == s).count();
        SplitSizes {
            train: count(Split::Train),
            validation: count(Split::Validation),
            test: count(Split::Test),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.dim == 0 {
            return invalid("dataset needs L >= 1 and d >= 1");
        }
        match self.kind {
            TaskKind::Classification if self.classes == 0 => return invalid("classification needs K >= 1"),
            TaskKind::PairRegression if self.classes != 0 => return invalid("pair datasets carry K = 0"),
            _ => {}
        }
        let shape_ok = |s: &LayerStack| s.layers() == self.layers && s.dim() == self.dim;
        for (i, e) in self.examples.iter().enumerate() {
            match (&e.sample, self.kind) {
                (Sample::Class { stack, label }, TaskKind::Classification) => {
                    if !shape_ok(stack) {
                        return invalid(format!("example {i}: stack shape differs"));
                    }
                    if *label >= self.classes {
                        return invalid(format!("example {i}: label {label} >= K = {}", self.classes));
                    }
                }
                (Sample::Pair { a, b, gold }, TaskKind::PairRegression) => {
                    if !shape_ok(a) || !shape_ok(b) {
                        return invalid(format!("example {i}: stack shape differs"));
                    }
                    if !(0.0..=1.0).contains(gold) {
                        return invalid(format!("example {i}: gold {gold} outside [0, 1]"));
                    }
                }
                _ => return invalid(format!("example {i}: sample kind does not match dataset")),
            }
        }
        Ok(())
    }

    /// Examples per class within one split.
    pub fn class_counts(&self, split: Split) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for e in self.examples.iter().filter(|e| e.split == split) {
            if let Some(l) = e.label() {
                counts[l] += 1;
            }
        }
        counts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SplitSizes {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

// ---------------------------------------------------------------------------
// LREP

fn put_stack(out: &mut Vec<u8>, stack: &LayerStack) {
    for &v in stack.matrix().iter() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
}

/// Serializes a dataset to LREP bytes.
pub fn encode_lrep(dataset: &TaskDataset) -> Result<Vec<u8>> {
    dataset.validate()?;
    let mut out = Vec::new();
    out.extend_from_slice(LREP_MAGIC);
    out.extend_from_slice(&LREP_VERSION.to_le_bytes());
    out.push(match dataset.kind {
        TaskKind::Classification => 0,
        TaskKind::PairRegression => 1,
    });
    for v in [dataset.layers, dataset.dim, dataset.classes] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&(dataset.examples.len() as u64).to_le_bytes());
    for e in &dataset.examples {
        match &e.sample {
            Sample::Class { stack, label } => {
                put_stack(&mut out, stack);
                out.extend_from_slice(&(*label as u32).to_le_bytes());
            }
            Sample::Pair { a, b, gold } => {
                put_stack(&mut out, a);
                put_stack(&mut out, b);
                out.extend_from_slice(&(*gold as f32).to_le_bytes());
            }
        }
        out.push(e.split.tag());
    }
    Ok(out)
}

pub fn write_lrep<W: Write>(mut out: W, dataset: &TaskDataset) -> Result<()> {
    out.write_all(&encode_lrep(dataset)?)?;
    Ok(())
}

pub fn write_lrep_file(path: &Path, dataset: &TaskDataset) -> Result<()> {
    std::fs::write(path, encode_lrep(dataset)?)?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn fail<T>(&self, at: usize, reason: impl Into<String>) -> Result<T> {
        Err(IlseError::Format {
            offset: at as u64,
            reason: reason.into(),
        })
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return self.fail(self.pos, format!("truncated payload: needed {n} more bytes"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f32(&mut self) -> Result<f32> {
        let at = self.pos;
        let v = f32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes"));
        if !v.is_finite() {
            return self.fail(at, "non-finite float");
        }
        Ok(v)
    }

    fn stack(&mut self, layers: usize, dim: usize) -> Result<LayerStack> {
        let data = (0..layers * dim).map(|_| self.f32().map(f64::from)).collect::<Result<Vec<_>>>()?;
        LayerStack::new(Array2::from_shape_vec((layers, dim), data).expect("shape checked"))
    }
}

/// Parses LREP bytes. Errors carry the byte offset of the offending field.
pub fn decode_lrep(bytes: &[u8]) -> Result<TaskDataset> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != LREP_MAGIC {
        return r.fail(0, "bad magic, expected \"LREP\"");
    }
    let version = r.u32()?;
    if version != LREP_VERSION {
        return r.fail(4, format!("unsupported version {version}"));
    }
    let kind = match r.u8()? {
        0 => TaskKind::Classification,
        1 => TaskKind::PairRegression,
        other => return r.fail(8, format!("unknown task kind {other}")),
    };
    let layers = r.u32()? as usize;
    let dim = r.u32()? as usize;
    let classes_at = r.pos;
    let classes = r.u32()? as usize;
    let count = r.u64()?;
    if layers == 0 || dim == 0 {
        return r.fail(9, "L and d must be positive");
    }
    match kind {
        TaskKind::Classification if classes == 0 => return r.fail(classes_at, "classification needs K >= 1"),
        TaskKind::PairRegression if classes != 0 => return r.fail(classes_at, "pair task must have K = 0"),
        _ => {}
    }
    let record = match kind {
        TaskKind::Classification => 4 * layers * dim + 5,
        TaskKind::PairRegression => 8 * layers * dim + 5,
    };
    let remaining = (bytes.len() - r.pos) as u128;
    if (count as u128) * (record as u128) > remaining {
        return r.fail(r.pos, format!("header promises {count} records but payload is truncated"));
    }

    let mut examples = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let sample = match kind {
            TaskKind::Classification => {
                let stack = r.stack(layers, dim)?;
                let at = r.pos;
                let label = r.u32()? as usize;
                if label >= classes {
                    return r.fail(at, format!("label {label} >= K = {classes}"));
                }
                Sample::Class { stack, label }
            }
            TaskKind::PairRegression => {
                let a = r.stack(layers, dim)?;
                let b = r.stack(layers, dim)?;
                let at = r.pos;
                let gold = f64::from(r.f32()?);
                if !(0.0..=1.0).contains(&gold) {
                    return r.fail(at, format!("gold score {gold} outside [0, 1]"));
                }
                Sample::Pair { a, b, gold }
            }
        };
        let at = r.pos;
        let tag = r.u8()?;
        let split = match Split::from_tag(tag) {
            Some(s) => s,
            None => return r.fail(at, format!("unknown split tag {tag}")),
        };
        examples.push(Example { sample, split });
    }
    if r.pos != bytes.len() {
        return r.fail(r.pos, "trailing bytes after last record");
    }
    Ok(TaskDataset {
        kind,
        layers,
        dim,
        classes,
        examples,
    })
}

pub fn read_lrep<R: Read>(mut input: R) -> Result<TaskDataset> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    decode_lrep(&bytes)
}

pub fn read_lrep_file(path: &Path) -> Result<TaskDataset> {
    decode_lrep(&std::fs::read(path)?)
}

// ---------------------------------------------------------------------------
// Planted-signal generator

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub task: TaskKind,
    pub layers: usize,
    pub dim: usize,
    /// Token draws averaged into each pooled row.
    pub tokens: usize,
    /// Class count (classification only).
    pub classes: usize,
    /// Layer carrying the full-strength signal; defaults to `L / 2`.
    pub planted_layer: Option<usize>,
    pub snr: f64,
    /// Fraction of the signal seen by the planted layer's neighbours.
    pub leakage: f64,
    /// Further per-layer attenuation with distance from the planted layer.
    pub decay: f64,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            task: TaskKind::Classification,
            layers: 12,
            dim: 32,
            tokens: 8,
            classes: 6,
            planted_layer: None,
            snr: 4.0,
            leakage: 0.3,
            decay: 0.5,
            n_train: 600,
            n_val: 150,
            n_test: 150,
            seed: 0,
        }
    }
}

impl SynthSpec {
    /// Splits `total` examples 70/15/15.
    pub fn with_total(mut self, total: usize) -> Self {
        self.n_train = total * 70 / 100;
        self.n_val = total * 15 / 100;
        self.n_test = total - self.n_train - self.n_val;
        self
    }

    pub fn planted(&self) -> usize {
        self.planted_layer.unwrap_or(self.layers / 2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.dim == 0 || self.tokens == 0 {
            return invalid("L, d and T must be positive");
        }
        if self.planted() >= self.layers {
            return invalid(format!("planted layer {} outside [0, {})", self.planted(), self.layers));
        }
        if !self.snr.is_finite() || self.snr < 0.0 {
            return invalid("snr must be finite and non-negative");
        }
        if !(0.0..1.0).contains(&self.leakage) {
            return invalid("leakage must be in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.decay) {
            return invalid("decay must be in [0, 1]");
        }
        if self.task == TaskKind::Classification {
            if self.classes < 2 {
                return invalid("need at least two classes");
            }
            if self.classes > self.dim {
                return invalid(format!(
                    "K = {} orthogonal class directions do not fit in d = {}",
                    self.classes, self.dim
                ));
            }
        }
        if self.task == TaskKind::PairRegression && self.dim < 2 {
            return invalid("pair generation needs d >= 2");
        }
        Ok(())
    }

    /// Signal amplitude at `layer`.
    pub fn amplitude(&self, layer: usize) -> f64 {
        let planted = self.planted();
        if layer == planted {
            self.snr
        } else {
            let dist = layer.abs_diff(planted) as i32;
            self.snr * self.leakage * self.decay.powi(dist - 1)
        }
    }
}

fn gaussian_vec(rng: &mut Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) {
    let n = dot(v, v).sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

/// `k` orthonormal vectors by Gram-Schmidt on Gaussian draws.
fn orthonormal(rng: &mut Rng, k: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    while basis.len() < k {
        let mut v = gaussian_vec(rng, dim);
        for b in &basis {
            let p = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
        if dot(&v, &v).sqrt() > 1e-6 {
            normalize(&mut v);
            basis.push(v);
        }
    }
    basis
}

/// One pooled stack: row `l` is `amplitude(l) * direction` plus the mean of `T`
/// token-noise draws scaled so the pooled noise has unit variance per coordinate.
fn pooled_stack(spec: &SynthSpec, direction: &[f64], rng: &mut Rng) -> Result<LayerStack> {
    let token_scale = (spec.tokens as f64).sqrt();
    let mut data = Array2::zeros((spec.layers, spec.dim));
    for l in 0..spec.layers {
        let amp = spec.amplitude(l);
        let mut acc = vec![0.0; spec.dim];
        for _ in 0..spec.tokens {
            for (a, &u) in acc.iter_mut().zip(direction) {
                let noise: f64 = StandardNormal.sample(rng);
                *a += amp * u + token_scale * noise;
            }
        }
        for (j, a) in acc.into_iter().enumerate() {
            data[[l, j]] = f64::from((a / spec.tokens as f64) as f32);
        }
    }
    LayerStack::new(data)
}

/// Generates a dataset whose task signal lives at one known layer.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<TaskDataset> {
    spec.validate()?;
    let mut rng = stream(spec.seed, Stream::Synth);
    let splits = [
        (Split::Train, spec.n_train),
        (Split::Validation, spec.n_val),
        (Split::Test, spec.n_test),
    ];
    match spec.task {
        TaskKind::Classification => {
            let directions = orthonormal(&mut rng, spec.classes, spec.dim);
            let mut ds = TaskDataset::empty(TaskKind::Classification, spec.layers, spec.dim, spec.classes);
            for (split, size) in splits {
                // Balanced labels per split, then shuffled: exact stratification.
                let mut labels: Vec<usize> = (0..size).map(|i| i % spec.classes).collect();
                labels.shuffle(&mut rng);
                for label in labels {
                    let stack = pooled_stack(spec, &directions[label], &mut rng)?;
                    ds.examples.push(Example {
                        sample: Sample::Class { stack, label },
                        split,
                    });
                }
            }
            Ok(ds)
        }
        TaskKind::PairRegression => {
            let mut ds = TaskDataset::empty(TaskKind::PairRegression, spec.layers, spec.dim, 0);
            for (split, size) in splits {
                for _ in 0..size {
                    let c: f64 = rng.random_range(-1.0..=1.0);
                    let mut u = gaussian_vec(&mut rng, spec.dim);
                    normalize(&mut u);
                    let mut w = gaussian_vec(&mut rng, spec.dim);
                    let p = dot(&w, &u);
                    w.iter_mut().zip(&u).for_each(|(x, y)| *x -= p * y);
                    normalize(&mut w);
                    let s = (1.0 - c * c).max(0.0).sqrt();
                    let v: Vec<f64> = u.iter().zip(&w).map(|(a, b)| c * a + s * b).collect();
                    let a = pooled_stack(spec, &u, &mut rng)?;
                    let b = pooled_stack(spec, &v, &mut rng)?;
                    let gold = f64::from(((1.0 + c) / 2.0) as f32).clamp(0.0, 1.0);
                    ds.examples.push(Example {
                        sample: Sample::Pair { a, b, gold },
                        split,
                    });
                }
            }
            Ok(ds)
        }
    }
}

// ---------------------------------------------------------------------------
// Few-shot

/// Keeps `min(k, available)` training examples per class; validation and test
/// are untouched and original order is preserved.
///
/// Each class is shuffled with its own seeded stream and truncated, so for a
/// fixed seed the subset for `k1 <= k2` is contained in the subset for `k2`.
pub fn few_shot_subset(dataset: &TaskDataset, k: usize, seed: u64) -> Result<TaskDataset> {
    if dataset.kind != TaskKind::Classification {
        return invalid("few-shot sampling is defined per label; pair datasets are not supported");
    }
    if k == 0 {
        return invalid("k must be at least 1");
    }
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); dataset.classes];
    for i in dataset.split_indices(Split::Train) {
        if let Some(l) = dataset.examples[i].label() {
            per_class[l].push(i);
        }
    }
    let mut keep = vec![false; dataset.examples.len()];
    for (class, mut idx) in per_class.into_iter().enumerate() {
        idx.shuffle(&mut stream(child_seed(seed, class as u64), Stream::Shuffle));
        for i in idx.into_iter().take(k) {
            keep[i] = true;
        }
    }
    let examples = dataset
        .examples
        .iter()
        .enumerate()
        .filter(|(i, e)| e.split != Split::Train || keep[*i])
        .map(|(_, e)| e.clone())
        .collect();
    Ok(TaskDataset {
        examples,
        ..dataset.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> SynthSpec {
        SynthSpec {
            layers: 4,
            dim: 6,
            classes: 3,
            n_train: 30,
            n_val: 9,
            n_test: 9,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn round_trip_is_byte_exact() {
        for task in [TaskKind::Classification, TaskKind::PairRegression] {
            let ds = generate_synthetic(&SynthSpec { task, ..small_spec() }).unwrap();
            let bytes = encode_lrep(&ds).unwrap();
            let back = decode_lrep(&bytes).unwrap();
            assert_eq!(back, ds);
            assert_eq!(encode_lrep(&back).unwrap(), bytes);
        }
    }

    #[test]
    fn bad_magic_at_offset_zero() {
        let ds = generate_synthetic(&small_spec()).unwrap();
        let mut bytes = encode_lrep(&ds).unwrap();
        bytes[0] = b'X';
        assert!(matches!(decode_lrep(&bytes), Err(IlseError::Format { offset: 0, .. })));
    }

    #[test]
    fn bad_version_and_truncation() {
        let ds = generate_synthetic(&small_spec()).unwrap();
        let bytes = encode_lrep(&ds).unwrap();
        let mut v = bytes.clone();
        v[4] = 9;
        assert!(matches!(decode_lrep(&v), Err(IlseError::Format { offset: 4, .. })));
        let cut = &bytes[..bytes.len() - 10];
        assert!(matches!(decode_lrep(cut), Err(IlseError::Format { offset: 29, .. })));
        assert!(matches!(decode_lrep(&bytes[..6]), Err(IlseError::Format { offset: 4, .. })));
    }

    #[test]
    fn non_finite_float_reports_its_offset() {
        let ds = generate_synthetic(&small_spec()).unwrap();
        let mut bytes = encode_lrep(&ds).unwrap();
        bytes[33..37].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(decode_lrep(&bytes), Err(IlseError::Format { offset: 33, .. })));
    }

    #[test]
    fn empty_dataset_is_valid() {
        let ds = TaskDataset::empty(TaskKind::Classification, 3, 2, 4);
        let bytes = encode_lrep(&ds).unwrap();
        assert_eq!(bytes.len(), 29);
        assert_eq!(decode_lrep(&bytes).unwrap(), ds);
    }

    #[test]
    fn generator_is_deterministic_and_stratified() {
        let a = generate_synthetic(&small_spec()).unwrap();
        let b = generate_synthetic(&small_spec()).unwrap();
        assert_eq!(encode_lrep(&a).unwrap(), encode_lrep(&b).unwrap());
        assert_eq!(a.split_sizes(), SplitSizes { train: 30, validation: 9, test: 9 });
        assert_eq!(a.class_counts(Split::Train), vec![10, 10, 10]);
        let c = generate_synthetic(&SynthSpec { seed: 1, ..small_spec() }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn too_many_classes_rejected() {
        let spec = SynthSpec {
            classes: 40,
            dim: 16,
            ..SynthSpec::default()
        };
        assert!(matches!(generate_synthetic(&spec), Err(IlseError::InvalidArgument(_))));
    }

    #[test]
    fn amplitudes_follow_distance() {
        let s = SynthSpec::default();
        assert_eq!(s.planted(), 6);
        assert_eq!(s.amplitude(6), 4.0);
        assert!((s.amplitude(5) - 1.2).abs() < 1e-15);
        assert!((s.amplitude(8) - 0.6).abs() < 1e-15);
        assert!((s.amplitude(11) - 4.0 * 0.3 * 0.5f64.powi(4)).abs() < 1e-15);
    }

    #[test]
    fn with_total_uses_70_15_15() {
        let s = SynthSpec::default().with_total(1000);
        assert_eq!((s.n_train, s.n_val, s.n_test), (700, 150, 150));
    }

    #[test]
    fn few_shot_basics() {
        let ds = generate_synthetic(&small_spec()).unwrap();
        let one = few_shot_subset(&ds, 1, 5).unwrap();
        assert_eq!(one.split_sizes().train, 3);
        assert_eq!(one.split_sizes().validation, 9);
        let all = few_shot_subset(&ds, 1000, 5).unwrap();
        assert_eq!(all, ds);
        assert!(few_shot_subset(&ds, 0, 5).is_err());
        let pairs = generate_synthetic(&SynthSpec {
            task: TaskKind::PairRegression,
            ..small_spec()
        })
        .unwrap();
        assert!(few_shot_subset(&pairs, 2, 0).is_err());
    }
}
