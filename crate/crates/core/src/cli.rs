//! The `vpo` command-line front end.
//!
//! Every command that writes an artifact also writes a run manifest next to
//! it (`<stem>.manifest.json`) holding the resolved arguments, seeds, input
//! and output paths and the tool version. Manifests carry no timestamps, so
//! reruns with the same flags produce byte-identical files.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::data::{
    attach_targets, generate_synthetic, load_dataset, load_policy, save_dataset, save_policy,
    Dataset, GenConfig, IngestOptions, VoteTotalLaw,
};
use crate::error::{Result, VpoError};
use crate::eval::{
    ablate_c, classify_margin_series, exact_win_rate, margin_by_gap, sampled_win_rate,
    DivergenceThresholds,
};
use crate::losses::{gradcheck, LossConfig};
use crate::policy::{PolicyRole, TabularPolicy};
use crate::trainer::{train, OptimizerKind, TrainConfig, TrainReport};
use crate::vote_model::{EstimatorConfig, DEFAULT_SCORE_BASE};

#[derive(Debug, Parser, Serialize)]
#[command(name = "vpo", version, about = "Vote-based preference optimization on tabular policies")]
pub struct Cli {
    /// Worker threads for parallel sections; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Command {
    /// Write a reference (or initial) policy checkpoint.
    InitPolicy(InitPolicyArgs),
    /// Generate a synthetic voted-preference dataset with ground truth.
    GenData(GenDataArgs),
    /// Attach posterior-mean target preferences to a dataset.
    Targets(TargetsArgs),
    /// Train a policy and write its checkpoint and margin trace.
    Train(TrainArgs),
    /// Win rate of one policy against another under the ground truth.
    Eval(EvalArgs),
    /// Classify a margin trace, or report margins by vote-gap group.
    Margins(MarginsArgs),
    /// Retrain across prior strengths c and tabulate win rates.
    AblateC(AblateArgs),
    /// Compare analytic and finite-difference gradients for every loss.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct InitPolicyArgs {
    #[arg(long)]
    pub contexts: usize,
    #[arg(long)]
    pub candidates: usize,
    /// Logits are drawn from [-scale, scale]; 0 gives the uniform policy.
    #[arg(long, default_value_t = 0.0)]
    pub scale: f64,
    #[arg(long, default_value = "reference")]
    pub role: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct GenDataArgs {
    #[arg(long, default_value_t = 50)]
    pub contexts: usize,
    #[arg(long, default_value_t = 4)]
    pub candidates: usize,
    #[arg(long, default_value_t = 5)]
    pub pairs_per_context: usize,
    /// Vote-total law: `fixed:N` or `uniform:LOW:HIGH`.
    #[arg(long, default_value = "uniform:10:200")]
    pub votes: String,
    #[arg(long, default_value_t = 1.0)]
    pub reward_scale: f64,
    #[arg(long, default_value_t = 0.0)]
    pub label_noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct TargetsArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Strength of the symmetric Beta(c, c) prior.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// Base for converting `s1`/`s2` score records into pseudo-votes.
    #[arg(long, default_value_t = DEFAULT_SCORE_BASE)]
    pub score_base: f64,
}

#[derive(Debug, Args, Serialize, Clone)]
pub struct TrainFlags {
    #[arg(long, default_value = "vdpo")]
    pub loss: String,
    #[arg(long, default_value_t = 0.1)]
    pub beta: f64,
    /// Smoothing / noise level for cdpo and rdpo.
    #[arg(long, default_value_t = 0.0)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1)]
    pub epochs: usize,
    /// Exact number of update steps (overrides --epochs).
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, default_value_t = 8)]
    pub batch_size: usize,
    /// Defaults to 0.1 for sgd and 0.01 for rmsprop.
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long, default_value = "rmsprop")]
    pub optimizer: String,
    #[arg(long, default_value_t = 0.99)]
    pub rmsprop_decay: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub rmsprop_eps: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// Shuffle seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub trace_every: usize,
}

impl TrainFlags {
    pub fn to_config(&self) -> Result<TrainConfig> {
        let optimizer: OptimizerKind = self.optimizer.parse()?;
        let cfg = TrainConfig {
            loss: LossConfig::new(self.loss.parse()?, self.beta, self.epsilon)?,
            estimator: EstimatorConfig::new(self.c)?,
            epochs: self.epochs,
            steps: self.steps,
            batch_size: self.batch_size,
            learning_rate: self.lr.unwrap_or(optimizer.default_learning_rate()),
            optimizer,
            rmsprop_decay: self.rmsprop_decay,
            rmsprop_epsilon: self.rmsprop_eps,
            shuffle_seed: self.seed,
            trace_every: self.trace_every,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Reference checkpoint; the uniform policy of the dataset's shape if absent.
    #[arg(long = "ref")]
    pub reference: Option<PathBuf>,
    /// Initial policy; the reference if absent.
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Train on this pair alone.
    #[arg(long)]
    pub single_pair: Option<usize>,
    #[command(flatten)]
    pub flags: TrainFlags,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub pi: PathBuf,
    #[arg(long)]
    pub baseline: PathBuf,
    /// Dataset whose ground-truth sidecar acts as the judge.
    #[arg(long)]
    pub data: PathBuf,
    /// Use this many sampled duels instead of the exact computation.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct MarginsArgs {
    /// Trace CSV to classify.
    #[arg(long, conflicts_with_all = ["pi", "data"])]
    pub trace: Option<PathBuf>,
    #[arg(long, requires = "data")]
    pub pi: Option<PathBuf>,
    #[arg(long = "ref")]
    pub reference: Option<PathBuf>,
    #[arg(long, requires = "pi")]
    pub data: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    pub beta: f64,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub slope_tol: Option<f64>,
    #[arg(long)]
    pub value_cap: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct AblateArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long = "ref")]
    pub reference: Option<PathBuf>,
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "0.3,1,10,30,100")]
    pub c_values: Vec<f64>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub flags: TrainFlags,
}

#[derive(Debug, Args, Serialize)]
pub struct GradcheckArgs {
    /// Random cases per loss kind.
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-5)]
    pub h: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
}

/// Sidecar describing how an artifact was produced.
#[derive(Debug, Serialize)]
pub struct RunManifest<'a, C: Serialize> {
    pub command: &'a str,
    pub config: &'a C,
    pub seeds: serde_json::Value,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub tool_version: &'static str,
}

pub fn manifest_path(artifact: impl AsRef<Path>) -> PathBuf {
    artifact.as_ref().with_extension("manifest.json")
}

fn write_manifest<C: Serialize>(
    command: &str,
    config: &C,
    seeds: serde_json::Value,
    inputs: &[&Path],
    outputs: &[&Path],
) -> Result<()> {
    let show = |ps: &[&Path]| ps.iter().map(|p| p.display().to_string()).collect();
    let manifest = RunManifest {
        command,
        config,
        seeds,
        inputs: show(inputs),
        outputs: show(outputs),
        tool_version: env!("CARGO_PKG_VERSION"),
    };
    for out in outputs {
        let path = manifest_path(out);
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        std::fs::write(&path, text).map_err(|e| VpoError::io(&path, e))?;
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| VpoError::io(path, e))
}

fn emit_json<W: Write, T: Serialize>(out: &mut W, value: &T, file: Option<&Path>) -> Result<String> {
    let text = serde_json::to_string(value)?;
    writeln!(out, "{text}").map_err(|e| VpoError::io("<stdout>", e))?;
    if let Some(path) = file {
        write_text(path, &format!("{text}\n"))?;
    }
    Ok(text)
}

fn read_dataset(path: &Path) -> Result<Dataset> {
    let (ds, stats) = load_dataset(path, &IngestOptions::default())?;
    if stats.clamped_votes > 0 || stats.unknown_fields > 0 {
        log::warn!(
            "{}: {} negative votes clamped, {} unknown fields ignored",
            path.display(),
            stats.clamped_votes,
            stats.unknown_fields
        );
    }
    Ok(ds)
}

fn reference_for(path: Option<&Path>, ds: &Dataset) -> Result<TabularPolicy> {
    match path {
        Some(p) => load_policy(p),
        None => {
            let (x, k) = ds.shape();
            TabularPolicy::uniform(x, k, PolicyRole::Reference)
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_from<I, T, W>(args: I, out: &mut W) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
    W: Write,
{
    let cli = Cli::try_parse_from(args).map_err(|e| VpoError::Config(e.to_string()))?;
    run(&cli, out)
}

/// Runs a parsed command, writing reports to `out`.
pub fn run<W: Write>(cli: &Cli, out: &mut W) -> Result<()> {
    let mut buf = Vec::new();
    let result = match cli.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| VpoError::param("threads", e.to_string()))?;
            pool.install(|| dispatch(&cli.command, &mut buf))
        }
        None => dispatch(&cli.command, &mut buf),
    };
    out.write_all(&buf).map_err(|e| VpoError::io("<stdout>", e))?;
    result
}

fn dispatch<W: Write>(command: &Command, out: &mut W) -> Result<()> {
    match command {
        Command::InitPolicy(a) => cmd_init_policy(a),
        Command::GenData(a) => cmd_gen_data(a, out),
        Command::Targets(a) => cmd_targets(a, out),
        Command::Train(a) => cmd_train(a, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Margins(a) => cmd_margins(a, out),
        Command::AblateC(a) => cmd_ablate_c(a, out),
        Command::Gradcheck(a) => cmd_gradcheck(a, out),
    }
}

fn cmd_init_policy(a: &InitPolicyArgs) -> Result<()> {
    let role: PolicyRole = a.role.parse()?;
    if !(a.scale.is_finite() && a.scale >= 0.0) {
        return Err(VpoError::param("scale", "must be finite and >= 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let policy = TabularPolicy::random(a.contexts, a.candidates, a.scale, role, &mut rng)?;
    save_policy(&policy, &a.out)?;
    write_manifest("init-policy", a, json!({ "seed": a.seed }), &[], &[&a.out])
}

pub fn cmd_gen_data<W: Write>(a: &GenDataArgs, out: &mut W) -> Result<()> {
    let cfg = GenConfig {
        num_contexts: a.contexts,
        num_candidates: a.candidates,
        pairs_per_context: a.pairs_per_context,
        vote_total: a.votes.parse::<VoteTotalLaw>()?,
        reward_scale: a.reward_scale,
        label_noise: a.label_noise,
        seed: a.seed,
    };
    let ds = generate_synthetic(&cfg)?;
    save_dataset(&ds, &a.out)?;
    write_manifest("gen-data", &cfg, json!({ "seed": a.seed }), &[], &[&a.out])?;
    emit_json(out, &json!({ "pairs": ds.len(), "out": a.out }), None)?;
    Ok(())
}

pub fn cmd_targets<W: Write>(a: &TargetsArgs, out: &mut W) -> Result<()> {
    let cfg = EstimatorConfig::new(a.c)?;
    let opts = IngestOptions {
        score_base: a.score_base,
    };
    let (ds, stats) = load_dataset(&a.input, &opts)?;
    let ds = attach_targets(&ds, cfg);
    save_dataset(&ds, &a.out)?;
    write_manifest("targets", a, json!({}), &[&a.input], &[&a.out])?;
    emit_json(
        out,
        &json!({
            "pairs": ds.len(),
            "clamped_votes": stats.clamped_votes,
            "unknown_fields": stats.unknown_fields,
            "out": a.out,
        }),
        None,
    )?;
    Ok(())
}

pub fn cmd_train<W: Write>(a: &TrainArgs, out: &mut W) -> Result<()> {
    let cfg = a.flags.to_config()?;
    let mut ds = read_dataset(&a.data)?;
    if let Some(i) = a.single_pair {
        ds = ds.single_pair(i)?;
    }
    let reference = reference_for(a.reference.as_deref(), &ds)?;
    let init = match &a.init {
        Some(p) => load_policy(p)?,
        None => reference.clone(),
    };
    let (pi, report) = train(&ds, &reference, &init, &cfg)?;
    save_policy(&pi, &a.out)?;
    let mut outputs = vec![a.out.as_path()];
    if let Some(trace) = &a.trace {
        report.save(trace)?;
        outputs.push(trace);
    }
    let mut inputs = vec![a.data.as_path()];
    inputs.extend(a.reference.as_deref());
    inputs.extend(a.init.as_deref());
    write_manifest(
        "train",
        &json!({ "args": a, "resolved": cfg }),
        json!({ "shuffle": cfg.shuffle_seed }),
        &inputs,
        &outputs,
    )?;
    let last = report.last().expect("trace has an initial record");
    emit_json(out, last, None)?;
    Ok(())
}

pub fn cmd_eval<W: Write>(a: &EvalArgs, out: &mut W) -> Result<()> {
    let pi = load_policy(&a.pi)?;
    let baseline = load_policy(&a.baseline)?;
    let ds = read_dataset(&a.data)?;
    let truth = ds.ground_truth.as_ref().ok_or_else(|| {
        VpoError::Config(format!(
            "{} has no ground-truth sidecar; win rates need a synthetic dataset",
            a.data.display()
        ))
    })?;
    let result = match a.samples {
        Some(n) => {
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            sampled_win_rate(&pi, &baseline, truth, n, &mut rng)?
        }
        None => exact_win_rate(&pi, &baseline, truth)?,
    };
    emit_json(out, &result, a.out.as_deref())?;
    if let Some(path) = &a.out {
        write_manifest(
            "eval",
            a,
            json!({ "seed": a.seed }),
            &[&a.pi, &a.baseline, &a.data],
            &[path],
        )?;
    }
    Ok(())
}

pub fn cmd_margins<W: Write>(a: &MarginsArgs, out: &mut W) -> Result<()> {
    let text_inputs: Vec<&Path>;
    if let Some(trace) = &a.trace {
        let report = TrainReport::load(trace)?;
        let defaults = DivergenceThresholds::for_beta(a.beta);
        let th = DivergenceThresholds {
            window: a.window.unwrap_or(defaults.window),
            slope_tol: a.slope_tol.unwrap_or(defaults.slope_tol),
            value_cap: a.value_cap.unwrap_or(defaults.value_cap),
        };
        let verdict = classify_margin_series(&report.margin_series(), th)?;
        emit_json(out, &verdict, a.out.as_deref())?;
        text_inputs = vec![trace];
    } else if let (Some(pi_path), Some(data)) = (&a.pi, &a.data) {
        let ds = read_dataset(data)?;
        let pi = load_policy(pi_path)?;
        let reference = reference_for(a.reference.as_deref(), &ds)?;
        let gaps = margin_by_gap(&pi, &reference, &ds, a.beta)?;
        emit_json(out, &gaps, a.out.as_deref())?;
        text_inputs = vec![pi_path, data];
    } else {
        return Err(VpoError::Config(
            "margins needs either --trace or both --pi and --data".into(),
        ));
    }
    if let Some(path) = &a.out {
        write_manifest("margins", a, json!({}), &text_inputs, &[path])?;
    }
    Ok(())
}

pub fn cmd_ablate_c<W: Write>(a: &AblateArgs, out: &mut W) -> Result<()> {
    let cfg = a.flags.to_config()?;
    let ds = read_dataset(&a.data)?;
    let reference = reference_for(a.reference.as_deref(), &ds)?;
    let init = match &a.init {
        Some(p) => load_policy(p)?,
        None => reference.clone(),
    };
    let rows = ablate_c(&ds, &reference, &init, &cfg, &a.c_values)?;
    let file = std::fs::File::create(&a.out).map_err(|e| VpoError::io(&a.out, e))?;
    let mut w = csv::Writer::from_writer(file);
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| VpoError::io(&a.out, e))?;
    let mut inputs = vec![a.data.as_path()];
    inputs.extend(a.reference.as_deref());
    inputs.extend(a.init.as_deref());
    write_manifest(
        "ablate-c",
        &json!({ "args": a, "resolved": cfg }),
        json!({ "shuffle": cfg.shuffle_seed }),
        &inputs,
        &[&a.out],
    )?;
    emit_json(out, &rows, None)?;
    Ok(())
}

pub fn cmd_gradcheck<W: Write>(a: &GradcheckArgs, out: &mut W) -> Result<()> {
    if a.trials == 0 {
        return Err(VpoError::param("trials", "must be >= 1"));
    }
    let report = gradcheck(a.trials, a.seed, a.h)?;
    let per_kind: serde_json::Map<String, serde_json::Value> = report
        .per_kind_worst
        .iter()
        .map(|(k, e)| (k.to_string(), json!(e)))
        .collect();
    emit_json(
        out,
        &json!({
            "trials_per_loss": report.trials,
            "worst_rel_error": report.worst_rel_error,
            "worst_loss": report.worst_kind,
            "worst_trial": report.worst_trial,
            "per_loss": per_kind,
            "passed": report.passed(a.tol),
        }),
        None,
    )?;
    if report.passed(a.tol) {
        Ok(())
    } else {
        Err(VpoError::GradCheck(format!(
            "worst relative error {:.3e} ({} trial {}) exceeds {:.1e}",
            report.worst_rel_error, report.worst_kind, report.worst_trial, a.tol
        )))
    }
}
