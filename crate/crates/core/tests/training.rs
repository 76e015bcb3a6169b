use ilse_core::data::{few_shot_subset, generate_synthetic, Split, SynthSpec, TaskDataset, TaskKind};
use ilse_core::harness::{evaluate, grid_search, layer_sweep, train, train_model, RunStatus, TrainConfig};
use ilse_core::nn::ParamStore;
use ilse_core::{IlseError, MethodConfig};

fn planted(task: TaskKind, seed: u64) -> TaskDataset {
    generate_synthetic(&SynthSpec {
        task,
        layers: 8,
        dim: 16,
        classes: if task == TaskKind::Classification { 4 } else { 0 },
        n_train: 240,
        n_val: 60,
        n_test: 60,
        seed,
        ..SynthSpec::default()
    })
    .unwrap()
}

fn config(name: &str, seed: u64) -> TrainConfig {
    let mut method: MethodConfig = name.parse().unwrap();
    method.set_hidden(32);
    TrainConfig {
        lr: 3e-3,
        max_epochs: 15,
        seed,
        ..TrainConfig::new(method)
    }
}

#[test]
fn training_loss_decreases() {
    let ds = planted(TaskKind::Classification, 0);
    for name in ["set", "fc-gcn", "cayley-gin", "dwatt"] {
        let m = train(&ds, &config(name, 0)).unwrap();
        let losses: Vec<f64> = m.epochs.iter().filter_map(|e| e.train_loss).collect();
        assert!(losses.last().unwrap() < &losses[0], "{name}: {losses:?}");
    }
}

#[test]
fn runs_are_reproducible() {
    let ds = planted(TaskKind::Classification, 1);
    let a = train(&ds, &config("cayley-gcn", 7)).unwrap();
    let b = train(&ds, &config("cayley-gcn", 7)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_json(), b.to_json());
    let c = train(&ds, &config("cayley-gcn", 8)).unwrap();
    assert_ne!(a.epochs, c.epochs);
}

#[test]
fn sweep_finds_the_planted_layer() {
    for seed in 0..3 {
        let ds = planted(TaskKind::Classification, seed);
        let sweep = layer_sweep(&ds, &config("best-layer", seed)).unwrap();
        assert_eq!(sweep.best_layer, 4, "seed {seed}: {:?}", sweep.scores);
        let pairs = planted(TaskKind::PairRegression, seed);
        assert_eq!(layer_sweep(&pairs, &config("best-layer", seed)).unwrap().best_layer, 4);
    }
}

#[test]
fn encoders_beat_last_layer_on_planted_classification() {
    let ds = planted(TaskKind::Classification, 2);
    let last = train(&ds, &config("last-layer", 2)).unwrap().test;
    for name in ["set", "fc-gin", "cayley-gcn"] {
        let score = train(&ds, &config(name, 2)).unwrap().test;
        assert!(score > last + 0.2, "{name}: {score} vs last layer {last}");
    }
}

#[test]
fn pair_training_beats_raw_last_layer() {
    let ds = planted(TaskKind::PairRegression, 3);
    let raw = train(&ds, &config("last-layer", 3)).unwrap();
    let enc = train(&ds, &config("cayley-gin", 3)).unwrap();
    assert!(enc.test > raw.test + 0.2, "{} vs {}", enc.test, raw.test);
    assert!(enc.test_pearson.unwrap() > raw.test_pearson.unwrap());
}

#[test]
fn checkpoint_reproduces_evaluation() {
    let ds = planted(TaskKind::Classification, 4);
    let mut run = train_model(&ds, &config("fc-gin", 4)).unwrap();
    let before = evaluate(&run.model, &ds, Split::Test).unwrap();
    let mut bytes = Vec::new();
    run.model.store.write_checkpoint(&mut bytes).unwrap();
    let loaded = ParamStore::read_checkpoint(bytes.as_slice()).unwrap();
    run.model.store.load_values_from(&loaded).unwrap();
    let after = evaluate(&run.model, &ds, Split::Test).unwrap();
    assert_eq!(before, after);
    assert_eq!(before.primary, run.metrics.test);
}

#[test]
fn few_shot_with_all_data_equals_full_training() {
    let ds = planted(TaskKind::Classification, 5);
    let cfg = config("weighted", 5);
    let full = train(&ds, &cfg).unwrap();
    let subset = few_shot_subset(&ds, 10_000, 5).unwrap();
    assert_eq!(train(&subset, &cfg).unwrap(), full);
}

#[test]
fn diverging_grid_is_a_search_failure() {
    let ds = planted(TaskKind::Classification, 6);
    let cfg = TrainConfig {
        lr: 1e306,
        ..config("mlp-last", 6)
    };
    let run = train(&ds, &cfg).unwrap();
    assert_eq!(run.status, RunStatus::Diverged);
    assert!(run.failure.is_some());
    assert!(matches!(grid_search(&ds, &[cfg], 1), Err(IlseError::SearchFailure(_))));
}

#[test]
fn parameter_counts_in_metrics_match_formula() {
    let ds = planted(TaskKind::Classification, 7);
    for name in ["weighted", "mlp-last", "set", "cayley-gin"] {
        let cfg = TrainConfig { max_epochs: 1, ..config(name, 7) };
        let m = train(&ds, &cfg).unwrap();
        let want = ilse_core::model::count_params_with_head(&cfg.method, 8, 16, 4);
        assert_eq!((m.params, m.head_params), (want.encoder, want.head), "{name}");
    }
}
