mod args;

use std::fmt::Display;
use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Map, Value};

use ilse_core::cayley::{build_cayley, group_size, smallest_n_for};
use ilse_core::data::{generate_synthetic, read_lrep_file, write_lrep_file, SynthSpec, TaskKind};
use ilse_core::encoders::EncoderKind;
use ilse_core::harness::{
    compare_methods, few_shot_curve, layer_sweep, train_model, GridSpec, RunStatus, TrainConfig,
};
use ilse_core::model::ALL_METHODS;
use ilse_core::{IlseError, MethodConfig, TaskDataset};

use args::{Cli, Command, GridArgs, Merge, SynthArgs, TrainArgs};

/// Largest group the `cayley` subcommand will materialize.
const MAX_CAYLEY_NODES: u64 = 2_000_000;
/// Diameter is reported up to this modulus.
const MAX_DIAMETER_N: u64 = 12;

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Display) -> Self {
        Self {
            code: 2,
            message: message.to_string(),
        }
    }

    fn io(message: impl Display) -> Self {
        Self {
            code: 3,
            message: message.to_string(),
        }
    }
}

impl From<IlseError> for Failure {
    fn from(e: IlseError) -> Self {
        let code = match e {
            IlseError::InvalidArgument(_) | IlseError::InvalidState(_) => 2,
            IlseError::Io(_) | IlseError::Format { .. } => 3,
            IlseError::NumericFailure { .. } | IlseError::UndefinedCorrelation(_) | IlseError::SearchFailure(_) => 4,
            IlseError::InvariantViolation(_) => 1,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

/// Parsed `--config` file: an object whose keys mirror flag names.
struct ConfigFile(Map<String, Value>);

impl ConfigFile {
    fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self(Map::new()));
        };
        let text = std::fs::read_to_string(path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
        match serde_json::from_str(&text) {
            Ok(Value::Object(map)) => Ok(Self(map)),
            Ok(_) => Err(Failure::usage("config file must hold a JSON object")),
            Err(e) => Err(Failure::usage(format!("config file: {e}"))),
        }
    }

    /// Rejects keys that are not flags of the running subcommand.
    fn check_keys(&self, known: &[&[&str]]) -> CliResult<()> {
        for key in self.0.keys() {
            let snake = key.replace('-', "_");
            if snake != "seed" && snake != "jobs" && !known.iter().any(|set| set.contains(&snake.as_str())) {
                return Err(Failure::usage(format!("unknown config key {key:?}")));
            }
        }
        Ok(())
    }

    fn section<T: DeserializeOwned>(&self) -> CliResult<T> {
        serde_json::from_value(Value::Object(self.0.clone())).map_err(|e| Failure::usage(format!("config file: {e}")))
    }

    fn get<T: DeserializeOwned>(&self, key: &str) -> CliResult<Option<T>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => serde_json::from_value(v.clone())
                .map(Some)
                .map_err(|e| Failure::usage(format!("config key {key:?}: {e}"))),
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let config = ConfigFile::load(cli.config.as_deref())?;
    let seed = match cli.seed {
        Some(s) => s,
        None => config.get("seed")?.unwrap_or(0),
    };
    let jobs = config.get::<usize>("jobs")?.filter(|_| cli.jobs == 1).unwrap_or(cli.jobs);
    if jobs == 0 {
        return Err(Failure::usage("--jobs must be at least 1"));
    }

    match cli.command {
        Command::Cayley(a) => {
            config.check_keys(&[&["n", "layers", "edges", "json"]])?;
            let n = a.target.n.or(config.get("n")?);
            let layers = a.target.layers.or(config.get("layers")?);
            let edges = a.edges.or(config.get("edges")?);
            cmd_cayley(n, layers, edges.as_deref(), a.json || config.get("json")?.unwrap_or(false))
        }
        Command::GenSynth(a) => {
            config.check_keys(&[SynthArgs::KEYS, &["json"]])?;
            let spec = a.spec.merge(config.section()?);
            cmd_gen_synth(spec, seed, a.json || config.get("json")?.unwrap_or(false))
        }
        Command::Train(a) => {
            config.check_keys(&[TrainArgs::KEYS, &["checkpoint", "timing"]])?;
            let args = a.train.merge(config.section()?);
            let checkpoint = a.checkpoint.or(config.get("checkpoint")?);
            let timing = a.timing || config.get("timing")?.unwrap_or(false);
            cmd_train(args, seed, checkpoint.as_deref(), timing)
        }
        Command::Compare(a) => {
            config.check_keys(&[TrainArgs::KEYS, GridArgs::KEYS, &["methods", "seeds", "text"]])?;
            let args = a.train.merge(config.section()?);
            let grid = a.grid.merge(config.section()?);
            let methods = a.methods.or(config.get("methods")?);
            let seeds = a.seeds.or(config.get("seeds")?);
            let text = a.text || config.get("text")?.unwrap_or(false);
            cmd_compare(args, grid, methods, seeds, seed, jobs, text)
        }
        Command::FewShot(a) => {
            config.check_keys(&[TrainArgs::KEYS, &["ks", "seeds"]])?;
            let args = a.train.merge(config.section()?);
            let ks = config.get::<String>("ks")?.filter(|_| a.ks == "1,2,4,8,16,32").unwrap_or(a.ks);
            let seeds = a.seeds.or(config.get("seeds")?);
            cmd_few_shot(args, &ks, seeds, seed, jobs)
        }
        Command::SweepLayers(a) => {
            config.check_keys(&[TrainArgs::KEYS])?;
            let args = a.train.merge(config.section()?);
            cmd_sweep(args, seed)
        }
    }
}

fn parse_list<T: std::str::FromStr>(flag: &str, text: &str) -> CliResult<Vec<T>>
where
    T::Err: Display,
{
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|e| Failure::usage(format!("--{flag}: {s:?}: {e}"))))
        .collect()
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, format!("{text}\n")).map_err(|e| Failure::io(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{text}").map_err(Failure::io)
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable output")
}

fn cmd_cayley(n: Option<u64>, layers: Option<usize>, edges: Option<&Path>, as_json: bool) -> CliResult<()> {
    let (n, layers) = match (n, layers) {
        (Some(n), None) => (n, None),
        (None, Some(l)) => (smallest_n_for(l as u64)?.0, Some(l)),
        _ => return Err(Failure::usage("give exactly one of --n or --layers")),
    };
    let size = group_size(n)?;
    if size > MAX_CAYLEY_NODES {
        return Err(Failure::usage(format!("|SL(2, Z_{n})| = {size} exceeds the {MAX_CAYLEY_NODES}-node limit")));
    }
    let graph = build_cayley(n)?;
    let histogram = graph.degree_histogram();
    let diameter = if n <= MAX_DIAMETER_N { Some(graph.diameter()?) } else { None };
    if let Some(path) = edges {
        let file = std::fs::File::create(path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
        graph.write_edge_list(std::io::BufWriter::new(file))?;
    }
    let virtual_nodes = layers.map(|l| graph.node_count() - l);
    if as_json {
        let hist: Map<String, Value> = histogram.iter().map(|(d, c)| (d.to_string(), json!(c))).collect();
        let report = json!({
            "n": n,
            "nodes": graph.node_count(),
            "edges": graph.edge_count(),
            "degree_histogram": hist,
            "diameter": diameter,
            "layers": layers,
            "virtual_nodes": virtual_nodes,
        });
        return emit(None, &to_json(&report));
    }
    let mut text = format!("n = {n}\nnodes = {}\nedges = {}\n", graph.node_count(), graph.edge_count());
    let hist: Vec<String> = histogram.iter().map(|(d, c)| format!("{d}:{c}")).collect();
    text.push_str(&format!("degree histogram = {}\n", hist.join(" ")));
    match diameter {
        Some(d) => text.push_str(&format!("diameter = {d}\n")),
        None => text.push_str(&format!("diameter = skipped (n > {MAX_DIAMETER_N})\n")),
    }
    if let (Some(l), Some(v)) = (layers, virtual_nodes) {
        text.push_str(&format!("layers = {l}\nvirtual nodes = {v}\n"));
    }
    emit(None, text.trim_end())
}

fn synth_spec(a: &SynthArgs, seed: u64) -> CliResult<SynthSpec> {
    let task = match a.task.as_deref().map(|t| t.to_ascii_lowercase()) {
        None => TaskKind::Classification,
        Some(t) if t == "classification" => TaskKind::Classification,
        Some(t) if t == "pair" || t == "pair-regression" || t == "sts" => TaskKind::PairRegression,
        Some(t) => return Err(Failure::usage(format!("--task {t:?}: expected classification or pair"))),
    };
    let d = SynthSpec::default();
    let mut spec = SynthSpec {
        task,
        layers: a.layers.unwrap_or(d.layers),
        dim: a.dim.unwrap_or(d.dim),
        tokens: a.tokens.unwrap_or(d.tokens),
        classes: if task == TaskKind::PairRegression { 0 } else { a.classes.unwrap_or(d.classes) },
        planted_layer: a.planted_layer,
        snr: a.snr.unwrap_or(d.snr),
        leakage: a.leakage.unwrap_or(d.leakage),
        decay: a.decay.unwrap_or(d.decay),
        seed,
        ..d
    };
    if let Some(total) = a.total {
        spec = spec.with_total(total);
    }
    spec.n_train = a.n_train.unwrap_or(spec.n_train);
    spec.n_val = a.n_val.unwrap_or(spec.n_val);
    spec.n_test = a.n_test.unwrap_or(spec.n_test);
    Ok(spec)
}

fn cmd_gen_synth(a: SynthArgs, seed: u64, as_json: bool) -> CliResult<()> {
    let spec = synth_spec(&a, seed)?;
    let out = a.out.clone().ok_or_else(|| Failure::usage("--out is required"))?;
    let ds = generate_synthetic(&spec)?;
    write_lrep_file(&out, &ds)?;
    let sizes = ds.split_sizes();
    if as_json {
        let summary = json!({
            "path": out.display().to_string(),
            "task": spec.task,
            "examples": ds.len(),
            "layers": ds.layers,
            "dim": ds.dim,
            "classes": ds.classes,
            "planted_layer": spec.planted(),
            "splits": sizes,
            "seed": seed,
        });
        return emit(None, &to_json(&summary));
    }
    emit(
        None,
        &format!(
            "wrote {}\nN = {}  L = {}  d = {}  K = {}  planted layer = {}\ntrain / val / test = {} / {} / {}",
            out.display(),
            ds.len(),
            ds.layers,
            ds.dim,
            ds.classes,
            spec.planted(),
            sizes.train,
            sizes.validation,
            sizes.test
        ),
    )
}

fn load_dataset(a: &TrainArgs) -> CliResult<TaskDataset> {
    let path = a.data.as_ref().ok_or_else(|| Failure::usage("--data is required"))?;
    Ok(read_lrep_file(path)?)
}

fn method_config(name: &str, a: &TrainArgs) -> CliResult<MethodConfig> {
    let mut method: MethodConfig = name.parse()?;
    if let Some(h) = a.hidden {
        method.set_hidden(h);
    }
    if let Some(p) = a.dropout {
        method.set_dropout(p);
    }
    if let MethodConfig::Encoder(e) = &mut method {
        if e.kind != EncoderKind::Set {
            e.mpnn_layers = a.mpnn_layers.unwrap_or(e.mpnn_layers);
            e.gin_mlp_depth = a.gin_depth.unwrap_or(e.gin_mlp_depth);
        }
    }
    if let Some(l) = a.layer {
        if !method.needs_selection() {
            return Err(Failure::usage(format!("--layer only applies to best-layer and mlp-best, not {method}")));
        }
        method = method.with_selected_layer(l);
    }
    method.validate()?;
    Ok(method)
}

fn train_config(method: MethodConfig, a: &TrainArgs, seed: u64) -> TrainConfig {
    let d = TrainConfig::new(method);
    TrainConfig {
        lr: a.lr.unwrap_or(d.lr),
        weight_decay: a.weight_decay.unwrap_or(d.weight_decay),
        batch_size: a.batch_size.or(d.batch_size),
        max_epochs: a.epochs.unwrap_or(d.max_epochs),
        patience: a.patience.unwrap_or(d.patience),
        seed,
        ..d
    }
}

fn cmd_train(a: TrainArgs, seed: u64, checkpoint: Option<&Path>, timing: bool) -> CliResult<()> {
    let ds = load_dataset(&a)?;
    let name = a.method.clone().ok_or_else(|| Failure::usage("--method is required"))?;
    let mut cfg = train_config(method_config(&name, &a)?, &a, seed);
    cfg.record_wall_time = timing;
    let run = train_model(&ds, &cfg)?;
    if let Some(path) = checkpoint {
        let file = std::fs::File::create(path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
        run.model.store.write_checkpoint(std::io::BufWriter::new(file))?;
    }
    emit(a.out.as_deref(), &run.metrics.to_json())?;
    if run.metrics.status == RunStatus::Diverged {
        return Err(Failure {
            code: 4,
            message: format!("training diverged: {}", run.metrics.failure.unwrap_or_default()),
        });
    }
    Ok(())
}

fn seeds_or_root(list: Option<String>, seed: u64) -> CliResult<Vec<u64>> {
    match list {
        Some(s) => {
            let seeds = parse_list("seeds", &s)?;
            if seeds.is_empty() {
                return Err(Failure::usage("--seeds is empty"));
            }
            Ok(seeds)
        }
        None => Ok(vec![seed]),
    }
}

fn cmd_compare(
    a: TrainArgs,
    g: GridArgs,
    methods: Option<String>,
    seeds: Option<String>,
    seed: u64,
    jobs: usize,
    text: bool,
) -> CliResult<()> {
    let ds = load_dataset(&a)?;
    let names: Vec<String> = match methods {
        Some(m) => parse_list("methods", &m)?,
        None => ALL_METHODS.iter().map(|s| s.to_string()).collect(),
    };
    let methods = names.iter().map(|n| method_config(n, &a)).collect::<CliResult<Vec<_>>>()?;
    let grid = GridSpec {
        lrs: g.lrs.as_deref().map(|s| parse_list("lrs", s)).transpose()?.unwrap_or_default(),
        weight_decays: g.weight_decays.as_deref().map(|s| parse_list("weight-decays", s)).transpose()?.unwrap_or_default(),
        dropouts: g.dropouts.as_deref().map(|s| parse_list("dropouts", s)).transpose()?.unwrap_or_default(),
        mpnn_layers: g.mpnn_layer_grid.as_deref().map(|s| parse_list("mpnn-layer-grid", s)).transpose()?.unwrap_or_default(),
        gin_mlp_depths: g.gin_depth_grid.as_deref().map(|s| parse_list("gin-depth-grid", s)).transpose()?.unwrap_or_default(),
    };
    let seeds = seeds_or_root(seeds, seed)?;
    let base = train_config(methods[0].clone(), &a, seed);
    let report = compare_methods(&ds, &methods, &base, &grid, &seeds, jobs)?;
    let body = if text { report.to_text() } else { report.to_json() };
    emit(a.out.as_deref(), body.trim_end())
}

fn cmd_few_shot(a: TrainArgs, ks: &str, seeds: Option<String>, seed: u64, jobs: usize) -> CliResult<()> {
    let ds = load_dataset(&a)?;
    let name = a.method.clone().ok_or_else(|| Failure::usage("--method is required"))?;
    let cfg = train_config(method_config(&name, &a)?, &a, seed);
    let ks: Vec<usize> = parse_list("ks", ks)?;
    let seeds = seeds_or_root(seeds, seed)?;
    let curve = few_shot_curve(&ds, &cfg, &ks, &seeds, jobs)?;
    let report = json!({ "method": name, "seeds": seeds, "points": curve });
    emit(a.out.as_deref(), &to_json(&report))
}

fn cmd_sweep(a: TrainArgs, seed: u64) -> CliResult<()> {
    let ds = load_dataset(&a)?;
    let method: MethodConfig = "best-layer".parse()?;
    let cfg = train_config(method, &a, seed);
    let sweep = layer_sweep(&ds, &cfg)?;
    let report = json!({ "seed": seed, "scores": sweep.scores, "best_layer": sweep.best_layer });
    emit(a.out.as_deref(), &to_json(&report))
}
