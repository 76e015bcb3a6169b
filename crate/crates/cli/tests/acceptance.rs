//! Acceptance gate. Each test checks one criterion and writes a single
//! `PASS`/`FAIL` line straight to stderr so it shows even when output is captured.

use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use ilse_core::cayley::{build_cayley, group_size, is_connected, smallest_n_for};
use ilse_core::data::{
    decode_lrep, encode_lrep, few_shot_subset, generate_synthetic, SynthSpec, TaskKind,
};
use ilse_core::encoders::Aggregation;
use ilse_core::harness::{layer_sweep, train, TrainConfig};
use ilse_core::model::{count_params, MethodConfig, ILSE_METHODS};
use ilse_core::rng::{stream, Stream};
use ilse_core::IlseError;
use ilse_testkit::group::sl2_elements;
use ilse_testkit::suites::{cayley_compensated, gradient_suite, permutation_invariant, virtual_nodes_excluded};
use rand::Rng as _;

fn report(criterion: &str, pass: bool, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "[acceptance] {status} {criterion}: {detail}");
    assert!(pass, "{criterion}: {detail}");
}

#[test]
fn cayley_structure() {
    let start = Instant::now();
    let mut problems = Vec::new();
    for n in 2..=12u64 {
        let g = build_cayley(n).unwrap();
        let formula = group_size(n).unwrap() as usize;
        let brute = sl2_elements(n).len();
        if g.node_count() != formula || formula != brute {
            problems.push(format!("n={n}: built {} formula {formula} brute {brute}", g.node_count()));
        }
        if n >= 3 && !g.adjacency.iter().all(|nb| nb.len() == 4) {
            problems.push(format!("n={n}: not 4-regular"));
        }
        if !is_connected(&g.adjacency) {
            problems.push(format!("n={n}: disconnected"));
        }
        let diam = g.diameter().unwrap() as f64;
        let bound = 4.0 * (formula as f64).log2();
        if diam > bound {
            problems.push(format!("n={n}: diameter {diam} > {bound:.1}"));
        }
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(30) {
        problems.push(format!("runtime {elapsed:?} > 30 s"));
    }
    report(
        "cayley structure n=2..12",
        problems.is_empty(),
        &format!("{} problems, {:.2?}{}", problems.len(), elapsed, problems.first().map(|p| format!("; {p}")).unwrap_or_default()),
    );
}

#[test]
fn padding_arithmetic() {
    let got: Vec<(u64, u64, u64)> = [25u64, 27, 33]
        .iter()
        .map(|&l| {
            let (_, size) = smallest_n_for(l).unwrap();
            (l, size, size - l)
        })
        .collect();
    let want = vec![(25, 48, 23), (27, 48, 21), (33, 48, 15)];
    report(
        "padding arithmetic L=25/27/33",
        got == want && group_size(4).unwrap() == 48,
        &format!("(L, nodes, virtual) = {got:?}"),
    );
}

#[test]
fn weighted_parameter_counts() {
    let method: MethodConfig = "weighted".parse().unwrap();
    let got: Vec<usize> = [25, 27, 33].iter().map(|&l| count_params(&method, l, 1024)).collect();
    report("weighted parameter counts", got == [25, 27, 33], &format!("{got:?}"));
}

#[test]
fn gradient_suite_20_seeds() {
    let start = Instant::now();
    let cases = gradient_suite(0..20).unwrap();
    let elapsed = start.elapsed();
    let worst = cases.iter().map(|c| c.relative_error).fold(0.0, f64::max);
    let failed = cases.iter().filter(|c| !c.passed()).count();
    let redrawn = cases.iter().filter(|c| c.draws > 1).count();
    report(
        "gradient suite (rel err < 1e-4)",
        failed == 0 && elapsed < Duration::from_secs(120),
        &format!(
            "{} cases, {failed} failed, worst {worst:.2e}, {redrawn} redrawn for vanishing gradient, {elapsed:.2?}",
            cases.len()
        ),
    );
}

#[test]
fn permutation_properties() {
    let mut failures = Vec::new();
    for seed in 0..20 {
        for name in ["set", "fc-gin", "fc-gcn"] {
            if !permutation_invariant(name, seed).unwrap() {
                failures.push(format!("{name} invariance seed {seed}"));
            }
        }
        for agg in [Aggregation::Gin, Aggregation::Gcn] {
            if !cayley_compensated(agg, seed).unwrap() {
                failures.push(format!("cayley {agg:?} compensated seed {seed}"));
            }
        }
        if !virtual_nodes_excluded(seed).unwrap() {
            failures.push(format!("virtual exclusion seed {seed}"));
        }
    }
    report(
        "permutation properties (bitwise)",
        failures.is_empty(),
        &format!("{} failures {:?}", failures.len(), failures),
    );
}

/// Pinned desk-scale protocol for the planted experiments.
fn planted_spec(seed: u64) -> SynthSpec {
    SynthSpec {
        layers: 12,
        dim: 32,
        classes: 6,
        snr: 4.0,
        leakage: 0.3,
        n_train: 600,
        n_val: 150,
        n_test: 150,
        seed,
        ..SynthSpec::default()
    }
}

fn planted_config(name: &str, seed: u64) -> TrainConfig {
    let mut method: MethodConfig = name.parse().unwrap();
    method.set_hidden(64);
    TrainConfig {
        lr: 3e-3,
        max_epochs: 30,
        patience: 10,
        seed,
        ..TrainConfig::new(method)
    }
}

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

/// Mean test accuracies from the seeded runs of this protocol, recorded
/// before freezing. Guarded with a loose band since BLAS-free matmul kernels
/// can still differ across CPU feature sets.
const PINNED: [(&str, f64); 6] = [
    ("last-layer", 0.1653),
    ("set", 0.8853),
    ("fc-gin", 0.8373),
    ("fc-gcn", 0.8533),
    ("cayley-gin", 0.8840),
    ("cayley-gcn", 0.8640),
];
const PIN_BAND: f64 = 0.05;

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[test]
fn planted_signal_experiment() {
    let start = Instant::now();
    let mut means = Vec::new();
    let mut recovered = 0;
    let mut sweep_layers = Vec::new();
    let datasets: Vec<_> = SEEDS.iter().map(|&s| generate_synthetic(&planted_spec(s)).unwrap()).collect();
    for name in std::iter::once("last-layer").chain(ILSE_METHODS) {
        let scores: Vec<f64> = SEEDS
            .iter()
            .zip(&datasets)
            .map(|(&s, ds)| train(ds, &planted_config(name, s)).unwrap().test)
            .collect();
        means.push((name, mean(&scores)));
    }
    for (&s, ds) in SEEDS.iter().zip(&datasets) {
        let sweep = layer_sweep(ds, &planted_config("best-layer", s)).unwrap();
        sweep_layers.push(sweep.best_layer);
        if sweep.best_layer == planted_spec(s).planted() {
            recovered += 1;
        }
    }
    let elapsed = start.elapsed();
    let last = means[0].1;
    let margins_ok = means[1..].iter().all(|(_, m)| m - last >= 0.10);
    let pinned_ok = means
        .iter()
        .zip(PINNED)
        .all(|((name, m), (pname, p))| *name == pname && (m - p).abs() <= PIN_BAND);
    let table: Vec<String> = means.iter().map(|(n, m)| format!("{n}={:.2}", 100.0 * m)).collect();
    report(
        "planted signal: each ILSE encoder >= last-layer + 10 pts, sweep recovers l* in >= 4/5",
        margins_ok && recovered >= 4 && pinned_ok && elapsed < Duration::from_secs(900),
        &format!(
            "mean test acc {}; sweep argmax {:?} (l* = 6, {recovered}/5); pinned within {PIN_BAND}: {pinned_ok}; {elapsed:.1?}",
            table.join(" "),
            sweep_layers
        ),
    );
}

#[test]
fn few_shot_property() {
    let start = Instant::now();
    let mut violations = 0;
    let mut pairs = Vec::new();
    for &s in &SEEDS {
        let ds = generate_synthetic(&planted_spec(s)).unwrap();
        let last_full = train(&ds, &planted_config("last-layer", s)).unwrap().test;
        let subset = few_shot_subset(&ds, 32, s).unwrap();
        let cayley_k32 = train(&subset, &planted_config("cayley-gin", s)).unwrap().test;
        if cayley_k32 < last_full {
            violations += 1;
        }
        pairs.push((cayley_k32, last_full));
    }
    let elapsed = start.elapsed();
    let m_cayley = mean(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
    let m_last = mean(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
    report(
        "few-shot: cayley-gin at k=32 >= last-layer on full data",
        m_cayley >= m_last && violations <= 1 && elapsed < Duration::from_secs(600),
        &format!(
            "mean {:.2} vs {:.2}, {violations} violating seeds, {elapsed:.1?}",
            100.0 * m_cayley,
            100.0 * m_last
        ),
    );
}

fn ilse(args: &[&str], dir: &Path) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_ilse"))
        .args(args)
        .current_dir(dir)
        .env_remove("ILSE_SEED")
        .output()
        .expect("run ilse");
    (out.status.code().unwrap_or(-1), out.stdout)
}

#[test]
fn cli_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let small = [
        "--layers", "6", "--dim", "8", "--classes", "3", "--n-train", "60", "--n-val", "15", "--n-test", "15",
    ];
    let mut gen_a = vec!["--seed", "7", "gen-synth", "--out", "a.lrep"];
    gen_a.extend(small);
    let mut gen_b = vec!["--seed", "7", "gen-synth", "--out", "b.lrep"];
    gen_b.extend(small);
    let mut problems = Vec::new();
    let (ca, _) = ilse(&gen_a, d);
    let (cb, _) = ilse(&gen_b, d);
    if ca != 0 || cb != 0 || std::fs::read(d.join("a.lrep")).unwrap() != std::fs::read(d.join("b.lrep")).unwrap() {
        problems.push("gen-synth".to_string());
    }
    let invocations: Vec<Vec<&str>> = vec![
        vec!["--seed", "7", "cayley", "--layers", "25", "--json"],
        vec!["--seed", "7", "train", "--data", "a.lrep", "--method", "cayley-gin", "--hidden", "8", "--epochs", "3"],
        vec!["--seed", "7", "train", "--data", "a.lrep", "--method", "dwatt", "--hidden", "8", "--epochs", "3"],
        vec!["--seed", "7", "sweep-layers", "--data", "a.lrep", "--epochs", "3"],
        vec!["--seed", "7", "few-shot", "--data", "a.lrep", "--method", "set", "--hidden", "8", "--epochs", "2", "--ks", "1,4", "--seeds", "1,2"],
        vec![
            "--seed", "7", "--jobs", "2", "compare", "--data", "a.lrep", "--methods", "last-layer,weighted,fc-gcn",
            "--hidden", "8", "--epochs", "2", "--lrs", "0.001,0.01",
        ],
    ];
    for args in &invocations {
        let first = ilse(args, d);
        let second = ilse(args, d);
        if first.0 != 0 || first != second || first.1.is_empty() {
            problems.push(args[2].to_string());
        }
    }
    report(
        "CLI determinism (byte-identical JSON)",
        problems.is_empty(),
        &format!("{} invocations checked, differing: {problems:?}", invocations.len() + 1),
    );
}

#[test]
fn lrep_round_trip_and_corruption() {
    let mut rng = stream(2024, Stream::Sampling);
    let mut failures = Vec::new();
    for i in 0..50 {
        let task = if i % 2 == 0 { TaskKind::Classification } else { TaskKind::PairRegression };
        let dim = rng.random_range(2..=12);
        let spec = SynthSpec {
            task,
            layers: rng.random_range(1..=10),
            dim,
            tokens: rng.random_range(1..=4),
            classes: rng.random_range(2..=dim.min(6)),
            n_train: rng.random_range(0..=12),
            n_val: rng.random_range(0..=4),
            n_test: rng.random_range(0..=4),
            seed: rng.random(),
            ..SynthSpec::default()
        };
        let ds = generate_synthetic(&SynthSpec { planted_layer: Some(0), ..spec }).unwrap();
        let bytes = encode_lrep(&ds).unwrap();
        match decode_lrep(&bytes) {
            Ok(back) if back == ds && encode_lrep(&back).unwrap() == bytes => {}
            _ => failures.push(format!("dataset {i}: round trip")),
        }
        let corruptions: [(usize, u8, u64); 3] = [(0, b'Z', 0), (4, 0xFF, 4), (8, 7, 8)];
        for (pos, byte, want) in corruptions {
            let mut bad = bytes.clone();
            bad[pos] = byte;
            match decode_lrep(&bad) {
                Err(IlseError::Format { offset, .. }) if offset == want => {}
                other => failures.push(format!("dataset {i}: byte {pos} gave {:?}", other.err())),
            }
        }
        match decode_lrep(&bytes[..bytes.len().min(20)]) {
            Err(IlseError::Format { offset, .. }) if offset <= 20 => {}
            other => failures.push(format!("dataset {i}: short header gave {:?}", other.err())),
        }
    }
    report(
        "LREP round trip (50 datasets) and header corruption",
        failures.is_empty(),
        &format!("{} failures {:?}", failures.len(), failures.iter().take(3).collect::<Vec<_>>()),
    );
}
