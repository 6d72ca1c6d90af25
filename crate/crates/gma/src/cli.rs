//! The `gma` command line. [`run`] parses arguments, executes one
//! subcommand and returns the process exit code: 0 on success, 1 for
//! invalid input or configuration, 2 for numeric failures.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gma_core::augment::{apply_gma_random, random_indicator, verify_equivalence, AugOp, EquivalenceReport, GdaKind, GdaSpec};
use gma_core::gradsuite;
use gma_core::message::build_messages;
use gma_core::model::Variant;
use gma_core::synthetic::{self, random_graph, RandomGraphLimits};
use gma_core::trainer::{
    self, classifier_accuracy, dataset_messages, embed_all, kfold_split, stream_rng, FoldExecutor, Mode, RunReport,
    TrainConfig,
};
use gma_core::{AttributedGraph, GraphDataset, MessageFn};
use serde::Serialize;
use serde_json::Value;

use crate::checkpoint::Checkpoint;
use crate::error::{GmaError, Result};
use crate::exec::Parallel;
use crate::io::{self, Format, MessagesJson};

#[derive(Debug, Parser)]
#[command(name = "gma", version, about = "Graph message augmentation and message-level contrastive learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the message matrix of one graph.
    BuildMessages(BuildArgs),
    /// Apply random message augmentation to one graph.
    Augment(AugmentArgs),
    /// Check graph-level and message-level augmentation agree.
    Verify(VerifyArgs),
    /// Finite-difference checks of the differentiation engine.
    Gradcheck(GradcheckArgs),
    /// Train and evaluate with k-fold cross-validation.
    Train(TrainArgs),
    /// Re-evaluate a checkpoint.
    Eval(EvalArgs),
    /// Validate run reports and tabulate them.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum MessageKind {
    Concat,
    Gcn,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum OpName {
    Drop,
    Perturb,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum FormatArg {
    Tu,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum AugmentorArg {
    Random,
    Attgma,
}

#[derive(Debug, Args, Serialize)]
struct BuildArgs {
    /// A graph JSON object, or a dataset JSON file.
    #[arg(long = "in")]
    input: PathBuf,
    /// Graph to use when the input is a dataset.
    #[arg(long, default_value_t = 0)]
    graph: usize,
    #[arg(long, value_enum, default_value_t = MessageKind::Concat)]
    message_fn: MessageKind,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct AugmentArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 0)]
    graph: usize,
    #[arg(long, value_enum)]
    op: OpName,
    #[arg(long)]
    rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    noise_std: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct VerifyArgs {
    /// TU directory or JSON file; random graphs when omitted.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// `all` or a comma-separated list of node-set, edge-set, node-attr,
    /// edge-attr, subgraph.
    #[arg(long, default_value = "all")]
    kinds: String,
    #[arg(long, default_value = "drop,perturb")]
    ops: String,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Bit rate of the sampled augmentations.
    #[arg(long, default_value_t = 0.3)]
    rate: f64,
    #[arg(long, default_value_t = 1.0)]
    noise_std: f64,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Debug, Args, Serialize)]
struct GradcheckArgs {
    /// `all` or a comma-separated list of check names.
    #[arg(long, default_value = "all")]
    suite: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct DataArgs {
    /// TU directory, JSON file, or `synthetic[:N]` for cycles versus stars.
    #[arg(long)]
    dataset: String,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Replace node features with one-hot in-degree capped at this value.
    #[arg(long)]
    degree_features: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// d, p or m.
    #[arg(long)]
    variant: Option<String>,
    /// unsupervised or semi.
    #[arg(long)]
    task: Option<String>,
    #[arg(long, value_enum)]
    augmentor: Option<AugmentorArg>,
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    label_fraction: Option<f64>,
    /// 5 layers, 128 hidden units, 500 epochs, before other overrides.
    #[arg(long)]
    paper_scale: bool,
    /// JSON object merged over the defaults; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Record wall-clock time in the report (breaks byte-identical output).
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct ReportArgs {
    /// Run report JSON files.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    csv: bool,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
}

fn echo<T: Serialize>(err: &mut dyn Write, what: &str, value: &T) {
    let text = serde_json::to_string(value).unwrap_or_default();
    let _ = writeln!(err, "{what}: {text}");
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// Writes to `path`, or to `out` when there is none.
fn emit(out: &mut dyn Write, path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| GmaError::io(p, e)),
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| GmaError::io("<stdout>", e)),
    }
}

fn format_of(f: Option<FormatArg>) -> Option<Format> {
    f.map(|f| match f {
        FormatArg::Tu => Format::Tu,
        FormatArg::Json => Format::Json,
    })
}

/// Loads a dataset, bidirects it, and applies degree features if asked.
fn load_data(args: &DataArgs) -> Result<(GraphDataset, String)> {
    let (ds, name) = if let Some(rest) = args.dataset.strip_prefix("synthetic") {
        let n = match rest.strip_prefix(':') {
            Some(n) => n
                .parse()
                .map_err(|_| GmaError::Usage(format!("bad synthetic size '{n}'")))?,
            None if rest.is_empty() => 200,
            None => return Err(GmaError::Usage(format!("unknown dataset '{}'", args.dataset))),
        };
        (synthetic::cycles_vs_stars(n, &mut stream_rng(0, 7))?, "synthetic".to_string())
    } else {
        io::load_dataset(Path::new(&args.dataset), format_of(args.format))?
    };
    let ds = ds.to_bidirected();
    let ds = match args.degree_features {
        Some(max) => ds.with_degree_features(max)?,
        None => ds,
    };
    Ok((ds, name))
}

fn build_messages_cmd(a: &BuildArgs, out: &mut dyn Write) -> Result<()> {
    let g = io::load_graph(&a.input, a.graph)?;
    let f = match a.message_fn {
        MessageKind::Concat => MessageFn::Concat,
        MessageKind::Gcn => MessageFn::GcnWeighted,
    };
    let m = build_messages(&g, f)?;
    emit(out, a.out.as_deref(), &to_json(&MessagesJson::from_messages(&m)))
}

fn aug_op(op: OpName, noise_std: f64) -> Result<AugOp> {
    Ok(match op {
        OpName::Drop => AugOp::Drop,
        OpName::Perturb => AugOp::perturb(noise_std)?,
    })
}

fn augment_cmd(a: &AugmentArgs, out: &mut dyn Write) -> Result<()> {
    let g = io::load_graph(&a.input, a.graph)?;
    let m = build_messages(&g, MessageFn::Concat)?;
    let mut rng = stream_rng(a.seed, 0);
    let theta = random_indicator((m.num_rows(), m.width()), a.rate, &mut rng)?;
    let rows = apply_gma_random(m.rows(), &theta, aug_op(a.op, a.noise_std)?, &mut rng)?;
    let augmented = m.with_rows(rows)?;
    emit(out, a.out.as_deref(), &to_json(&MessagesJson::from_messages(&augmented)))
}

fn parse_list<T>(text: &str, all: &[T], parse: impl Fn(&str) -> Result<T>) -> Result<Vec<T>>
where
    T: Copy,
{
    if text == "all" {
        return Ok(all.to_vec());
    }
    text.split(',').map(|s| parse(s.trim())).collect()
}

#[derive(Debug, Serialize)]
struct VerifyTrial {
    trial: usize,
    graph: usize,
    #[serde(flatten)]
    report: EquivalenceReport,
}

#[derive(Debug, Serialize)]
struct VerifyReport {
    trials: usize,
    checks: usize,
    skipped: usize,
    max_aggregate_diff: f64,
    pass: bool,
    results: Vec<VerifyTrial>,
}

fn verify_cmd(a: &VerifyArgs, out: &mut dyn Write) -> Result<()> {
    let kinds = parse_list(&a.kinds, &GdaKind::ALL, |s| Ok(s.parse::<GdaKind>()?))?;
    let ops = parse_list(&a.ops, &[OpName::Drop, OpName::Perturb], |s| match s {
        "drop" => Ok(OpName::Drop),
        "perturb" => Ok(OpName::Perturb),
        other => Err(GmaError::Usage(format!("unknown op '{other}'"))),
    })?;
    let ops: Vec<AugOp> = ops.iter().map(|&o| aug_op(o, a.noise_std)).collect::<Result<_>>()?;
    if !(0.0..=1.0).contains(&a.rate) {
        return Err(GmaError::Usage(format!("rate must lie in [0, 1], got {}", a.rate)));
    }
    let dataset = match &a.dataset {
        Some(p) => {
            let ds = io::load_dataset(p, format_of(a.format))?.0;
            if ds.is_empty() {
                return Err(GmaError::Usage("dataset has no graphs".into()));
            }
            Some(ds)
        }
        None => None,
    };
    let trial = |t: usize| -> Result<Vec<VerifyTrial>> {
        let mut rng = stream_rng(a.seed, t as u64);
        let (graph, g): (usize, AttributedGraph) = match &dataset {
            Some(ds) => (t % ds.len(), ds.graphs()[t % ds.len()].clone()),
            None => (t, random_graph(&RandomGraphLimits::default(), &mut rng)),
        };
        let mut rows = Vec::new();
        for &kind in &kinds {
            let spec = GdaSpec::random(kind, &g, a.rate, &mut rng);
            for &op in &ops {
                let seed = rand_seed(a.seed, t, rows.len());
                rows.push(VerifyTrial {
                    trial: t,
                    graph,
                    report: verify_equivalence(&g, &spec, op, seed)?,
                });
            }
        }
        Ok(rows)
    };
    let results: Vec<VerifyTrial> = Parallel::new(a.jobs)?
        .run(a.trials, trial)
        .into_iter()
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let report = VerifyReport {
        trials: a.trials,
        checks: results.len(),
        skipped: results.iter().filter(|r| r.report.skipped.is_some()).count(),
        max_aggregate_diff: results.iter().map(|r| r.report.max_aggregate_diff).fold(0.0, f64::max),
        pass: results.iter().all(|r| r.report.pass),
        results,
    };
    let text = to_json(&report);
    match &a.report {
        Some(p) => {
            emit(out, Some(p), &text)?;
            let _ = writeln!(
                out,
                "verify: {} checks, {} skipped, max diff {:e}, {}",
                report.checks,
                report.skipped,
                report.max_aggregate_diff,
                if report.pass { "pass" } else { "FAIL" }
            );
        }
        None => emit(out, None, &text)?,
    }
    if report.pass {
        Ok(())
    } else {
        Err(GmaError::CheckFailed("equivalence check failed".into()))
    }
}

/// Noise seed of one check: distinct per trial and position.
fn rand_seed(seed: u64, trial: usize, k: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ ((trial as u64) << 8) ^ k as u64
}

fn gradcheck_cmd(a: &GradcheckArgs, out: &mut dyn Write) -> Result<()> {
    let names: Vec<&str> = a.suite.split(',').map(str::trim).collect();
    let results = gradsuite::run(&names, a.seed)?;
    for r in &results {
        let _ = writeln!(
            out,
            "{:<28} {:.3e} {}",
            r.name,
            r.max_rel_error,
            if r.pass { "ok" } else { "FAIL" }
        );
    }
    if let Some(p) = &a.report {
        io::write_json(p, &results)?;
    }
    if results.iter().all(|r| r.pass) {
        Ok(())
    } else {
        Err(GmaError::CheckFailed(format!(
            "gradient check above {:e}",
            gradsuite::SUITE_TOL
        )))
    }
}

/// Recursively overlays `patch` onto `base`.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn train_config(a: &TrainArgs) -> Result<TrainConfig> {
    let mut cfg = TrainConfig::default();
    if a.paper_scale {
        cfg = cfg.paper_scale();
    }
    if let Some(path) = &a.config {
        let mut base = serde_json::to_value(&cfg).expect("config serializes");
        let patch: Value = io::read_json(path)?;
        if !patch.is_object() {
            return Err(GmaError::Usage(format!("{}: config must be a JSON object", path.display())));
        }
        merge(&mut base, patch);
        cfg = io::parse_json(&base.to_string(), path)?;
    }
    if let Some(v) = &a.variant {
        cfg.variant = v.parse::<Variant>()?;
    }
    if let Some(t) = &a.task {
        cfg.mode = t.parse::<Mode>()?;
    }
    match a.augmentor {
        Some(AugmentorArg::Random) => cfg.attgma.enabled = false,
        Some(AugmentorArg::Attgma) => cfg.attgma.enabled = true,
        None => {}
    }
    macro_rules! set {
        ($flag:expr, $field:expr) => {
            if let Some(v) = $flag {
                $field = v;
            }
        };
    }
    set!(a.rate, cfg.rate);
    set!(a.alpha, cfg.loss.alpha);
    set!(a.tau, cfg.loss.tau);
    set!(a.epochs, cfg.epochs);
    set!(a.seed, cfg.seed);
    set!(a.lr, cfg.learning_rate);
    set!(a.hidden, cfg.hidden);
    set!(a.layers, cfg.layers);
    set!(a.folds, cfg.folds);
    set!(a.label_fraction, cfg.label_fraction);
    if let Some(b) = a.batch_size {
        cfg.batch_size = Some(b);
    }
    Ok(cfg)
}

fn check_jobs(jobs: usize) -> Result<()> {
    if jobs == 0 {
        return Err(GmaError::Usage("--jobs must be at least 1".into()));
    }
    Ok(())
}

fn train_cmd(a: &TrainArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    check_jobs(a.jobs)?;
    let cfg = train_config(a)?;
    let (ds, name) = load_data(&a.data)?;
    let resolved = cfg.resolved(ds.node_dim() + ds.edge_dim());
    resolved.validate()?;
    echo(err, "resolved config", &resolved);
    let exec = Parallel::new(a.jobs)?;
    let start = Instant::now();
    let outcome = trainer::train(&ds, &name, &resolved, &exec)?;
    let mut report = outcome.report;
    if a.timing {
        report.wall_s = Some(start.elapsed().as_secs_f64());
    }
    if let Some(p) = &a.checkpoint {
        let mut ck = Checkpoint::new(&name, &report.config, &outcome.models)?;
        ck.degree_features = a.data.degree_features;
        ck.save(p)?;
    }
    emit(out, a.out.as_deref(), &to_json(&report))
}

fn eval_cmd(a: &EvalArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    check_jobs(a.jobs)?;
    let ck = Checkpoint::load(&a.checkpoint)?;
    if a.data.degree_features != ck.degree_features {
        return Err(GmaError::Usage(format!(
            "checkpoint was trained with degree features {:?}, got {:?}",
            ck.degree_features, a.data.degree_features
        )));
    }
    let (ds, _) = load_data(&a.data)?;
    let spec = &ck.spec;
    if (ds.node_dim(), ds.edge_dim(), ds.num_classes()) != (spec.node_dim, spec.edge_dim, spec.num_classes) {
        return Err(GmaError::Usage(format!(
            "dataset has d={}, p={}, {} classes; checkpoint expects d={}, p={}, {} classes",
            ds.node_dim(),
            ds.edge_dim(),
            ds.num_classes(),
            spec.node_dim,
            spec.edge_dim,
            spec.num_classes
        )));
    }
    let cfg = &ck.config;
    echo(err, "resolved config", cfg);
    let models = ck.models()?;
    let labels = ds.labels()?;
    let messages = dataset_messages(&ds)?;
    let exec = Parallel::new(a.jobs)?;
    let folds = match cfg.mode {
        Mode::Unsupervised => {
            let emb = embed_all(&models[0], &messages, 256)?;
            trainer::probe_folds(&emb, &labels, ds.num_classes(), cfg, &exec)?
        }
        Mode::SemiSupervised => {
            let splits = kfold_split(&labels, cfg.folds, cfg.seed)?;
            if splits.len() != models.len() {
                return Err(GmaError::Usage(format!(
                    "{} fold models for {} folds",
                    models.len(),
                    splits.len()
                )));
            }
            exec.run(splits.len(), |k| classifier_accuracy(&models[k], &messages, &splits[k].1, &labels))
                .into_iter()
                .collect::<gma_core::Result<Vec<_>>>()?
        }
    };
    let report = RunReport::new(cfg.mode.name(), &ck.dataset, folds, cfg.clone());
    emit(out, a.out.as_deref(), &to_json(&report))
}

#[derive(Debug, Serialize)]
struct ReportRow {
    task: String,
    dataset: String,
    variant: Variant,
    augmentor: &'static str,
    folds: usize,
    mean_acc: f64,
    std_acc: f64,
    seed: u64,
}

fn report_cmd(a: &ReportArgs, out: &mut dyn Write) -> Result<()> {
    let mut rows = Vec::new();
    for p in &a.inputs {
        let r: RunReport = io::read_json(p)?;
        r.validate(a.tol)
            .map_err(|e| GmaError::Usage(format!("{}: {e}", p.display())))?;
        rows.push(ReportRow {
            task: r.task,
            dataset: r.dataset,
            variant: r.variant,
            augmentor: if r.config.attgma.enabled { "attgma" } else { "random" },
            folds: r.folds.len(),
            mean_acc: r.mean_acc,
            std_acc: r.std_acc,
            seed: r.seed,
        });
    }
    if a.csv {
        let mut text = String::from("task,dataset,variant,augmentor,folds,mean_acc,std_acc,seed\n");
        for r in &rows {
            text.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.task, r.dataset, r.variant, r.augmentor, r.folds, r.mean_acc, r.std_acc, r.seed
            ));
        }
        emit(out, None, &text)
    } else {
        emit(out, None, &to_json(&rows))
    }
}

/// Runs the command line `args` (including the program name), writing
/// results to `out` and diagnostics to `err`. Returns the exit code.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{e}");
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::BuildMessages(a) => {
            echo(err, "build-messages", a);
            build_messages_cmd(a, out)
        }
        Command::Augment(a) => {
            echo(err, "augment", a);
            augment_cmd(a, out)
        }
        Command::Verify(a) => {
            echo(err, "verify", a);
            check_jobs(a.jobs).and_then(|_| verify_cmd(a, out))
        }
        Command::Gradcheck(a) => {
            echo(err, "gradcheck", a);
            gradcheck_cmd(a, out)
        }
        Command::Train(a) => train_cmd(a, out, err),
        Command::Eval(a) => eval_cmd(a, out, err),
        Command::Report(a) => {
            echo(err, "report", a);
            report_cmd(a, out)
        }
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
