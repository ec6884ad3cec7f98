//! The `hitmac` command line.
//!
//! ```text
//! hitmac simulate --policy ilp --episodes 20 --seed 1 --out ilp.csv --trace ilp.jsonl
//! hitmac train executor --episodes 2000 --workers 1 --out executor.json
//! hitmac train coordinator --executor executor.json --out coordinator.json
//! hitmac eval --coordinator coordinator.json --sweep targets=3..7 --out sweep.csv
//! hitmac gradcheck --sensors 2 --targets 3
//! ```
//!
//! Every output file carries the hash of the run manifest, which is written
//! next to the main output as `<out>.manifest.json` before any episode runs.
//! Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 numeric divergence.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::eval::{evaluate, run_sweep, write_eval_csv, EvalRow, GoalSource, Hierarchy, Policy, Sweep};
use crate::manifest::RunManifest;
use crate::nn::{Checkpoint, ParamStore, Probe};
use crate::policy::{CoordinatorNet, COORDINATOR_PREFIX};
use crate::training::{
    loss_grad_check, train_coordinator, train_executor, write_progress_csv, ExecutorSource,
    FrozenExecutor, Stage, TrainConfig, TrainResult,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "hitmac", version, about = "Directional sensor coverage: simulation, training, evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a training-free policy and summarize coverage.
    Simulate(SimulateArgs),
    /// Train one level of the hierarchy.
    Train {
        #[arg(value_enum)]
        stage: StageArg,
        #[command(flatten)]
        args: TrainArgs,
    },
    /// Evaluate a trained coordinator, optionally over a sweep of team sizes.
    Eval(EvalArgs),
    /// Finite-difference check of both training losses at initialization.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StageArg {
    Executor,
    Coordinator,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON file with optional "env" and "train" sections.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    sensors: Option<usize>,
    #[arg(long)]
    targets: Option<usize>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// random, scripted or ilp.
    #[arg(long)]
    policy: String,
    #[arg(long, default_value_t = 20)]
    episodes: u64,
    /// Summary CSV (stdout if absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON-lines trace of every step.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    episodes: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Checkpoint to write; progress goes to `<out>.progress.csv`.
    #[arg(long)]
    out: PathBuf,
    /// Executors for stage two: "scripted" or a checkpoint path.
    #[arg(long)]
    executor: Option<String>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    coordinator: PathBuf,
    /// "scripted" or an executor checkpoint path.
    #[arg(long, default_value = "scripted")]
    executor: String,
    /// `targets=A..B` or `sensors=A..B`; empty evaluates the base setting only.
    #[arg(long, default_value = "")]
    sweep: String,
    #[arg(long, default_value_t = 20)]
    episodes: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 1e-4)]
    eps: f64,
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
    /// Hidden width; defaults to the training configuration.
    #[arg(long)]
    hidden: Option<usize>,
    /// Entries probed per parameter array (all when absent).
    #[arg(long)]
    sample: Option<usize>,
    /// Rollout length behind each loss (steps, or macro-steps for the coordinator).
    #[arg(long, default_value_t = 10)]
    steps: usize,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConfigFile {
    env: EnvConfig,
    train: TrainConfig,
}

impl Common {
    /// File values over defaults, then flags over file values.
    fn resolve(&self) -> Result<(EnvConfig, TrainConfig)> {
        let file = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Usage(format!("cannot read config {}: {e}", path.display())))?;
                serde_json::from_str::<ConfigFile>(&text)
                    .map_err(|e| Error::Usage(format!("bad config {}: {e}", path.display())))?
            }
            None => ConfigFile::default(),
        };
        let mut env = file.env;
        let mut train = file.train;
        if let Some(seed) = self.seed {
            env.seed = seed;
            train.seed = seed;
        }
        if let Some(n) = self.sensors {
            env.n_sensors = n;
        }
        if let Some(m) = self.targets {
            env.n_targets = m;
        }
        env.validate().map_err(usage)?;
        Ok((env, train))
    }
}

fn usage(e: Error) -> Error {
    match e {
        Error::InvalidConfig(msg) | Error::InvalidArgument(msg) => Error::Usage(msg),
        other => other,
    }
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn executor_source(spec: &str) -> Result<ExecutorSource> {
    if spec == "scripted" {
        return Ok(ExecutorSource::Scripted);
    }
    let path = PathBuf::from(spec);
    if !path.is_file() {
        return Err(Error::Usage(format!("executor checkpoint {spec} not found")));
    }
    Ok(ExecutorSource::Checkpoint(path))
}

fn load_frozen(source: &ExecutorSource) -> Result<FrozenExecutor> {
    FrozenExecutor::resolve(source).map_err(|e| match e {
        Error::Io(_) | Error::Json(_) | Error::InvalidArgument(_) | Error::Shape(_) => {
            Error::Usage(format!("unusable executor checkpoint: {e}"))
        }
        other => other,
    })
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let command_line: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Simulate(a) => simulate(a, command_line),
        Command::Train { stage, args } => train(stage, args, command_line),
        Command::Eval(a) => eval(a, command_line),
        Command::Gradcheck(a) => gradcheck(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("hitmac: {e}");
            match e {
                Error::Usage(_) => EXIT_USAGE,
                Error::Divergence(_) => EXIT_DIVERGENCE,
                _ => EXIT_FAILURE,
            }
        }
    }
}

fn simulate(a: SimulateArgs, command: Vec<String>) -> Result<i32> {
    let policy: Policy = a.policy.parse()?;
    if a.episodes == 0 {
        return Err(Error::Usage("--episodes must be at least 1".into()));
    }
    let (env, _) = a.common.resolve()?;
    let manifest = RunManifest::new(command, env.clone(), None, vec![env.seed])
        .with_setting("command", "simulate")?
        .with_setting("policy", policy)?
        .with_setting("episodes", a.episodes)?;
    if let Some(anchor) = a.out.as_ref().or(a.trace.as_ref()) {
        manifest.save(sidecar(anchor, ".manifest.json"))?;
    }
    let hash = manifest.hash.clone();

    let mut trace_out = a.trace.as_deref().map(create).transpose()?;
    let summary = evaluate(&env, env.seed, a.episodes, &mut policy.clone(), |trace| {
        if let Some(out) = trace_out.as_mut() {
            trace.write_jsonl(out, Some(&hash))?;
        }
        Ok(())
    })?;
    if let Some(mut out) = trace_out {
        out.flush()?;
    }
    let row = EvalRow {
        policy: policy.to_string(),
        n_sensors: env.n_sensors,
        n_targets: env.n_targets,
        summary,
    };
    write_rows(a.out.as_deref(), &[row], &hash)?;
    Ok(EXIT_OK)
}

fn write_rows(out: Option<&Path>, rows: &[EvalRow], hash: &str) -> Result<()> {
    match out {
        Some(path) => {
            let mut w = create(path)?;
            write_eval_csv(&mut w, rows, Some(hash))?;
            w.flush()?;
        }
        None => write_eval_csv(std::io::stdout().lock(), rows, Some(hash))?,
    }
    Ok(())
}

fn train(stage: StageArg, a: TrainArgs, command: Vec<String>) -> Result<i32> {
    let (env, mut config) = a.common.resolve()?;
    config.stage = match stage {
        StageArg::Executor => Stage::Executor,
        StageArg::Coordinator => Stage::Coordinator,
    };
    if let Some(e) = a.episodes {
        config.episodes = e;
    }
    if let Some(w) = a.workers {
        config.workers = w;
    }
    if let Some(spec) = &a.executor {
        config.executor = executor_source(spec)?;
    }
    config.validate().map_err(usage)?;

    let mut manifest = RunManifest::new(command, env.clone(), Some(config.clone()), vec![config.seed])
        .with_setting("command", "train")?;
    let frozen = match (&config.stage, &config.executor) {
        (Stage::Coordinator, ExecutorSource::Checkpoint(path)) => {
            manifest = manifest.with_input(path)?;
            Some(load_frozen(&config.executor)?)
        }
        (Stage::Coordinator, ExecutorSource::Scripted) => Some(FrozenExecutor::Scripted),
        (Stage::Executor, _) => None,
    };
    manifest.save(sidecar(&a.out, ".manifest.json"))?;

    let result = match frozen {
        Some(executor) => train_coordinator(&env, &config, &executor)?,
        None => train_executor(&env, &config)?,
    };
    finish_training(&a.out, result, manifest)
}

fn finish_training(out: &Path, result: TrainResult, mut manifest: RunManifest) -> Result<i32> {
    let mut ckpt = result.checkpoint.clone();
    ckpt.manifest = Some(manifest.hash.clone());
    ckpt.save(out)?;
    let mut progress = create(&sidecar(out, ".progress.csv"))?;
    write_progress_csv(&mut progress, &result.progress, Some(&manifest.hash))?;
    progress.flush()?;
    manifest.finish();
    manifest.save(sidecar(out, ".manifest.json"))?;
    if let Some(reason) = &result.diverged {
        eprintln!("hitmac: training diverged ({reason}); last finite parameters saved");
        return Ok(EXIT_DIVERGENCE);
    }
    if let Some((first, last)) = result.reward_trend(0.1) {
        println!("mean reward: first 10% {first:.4}, last 10% {last:.4}");
    }
    println!("{} updates; checkpoint {}", result.updates, out.display());
    Ok(EXIT_OK)
}

fn eval(a: EvalArgs, command: Vec<String>) -> Result<i32> {
    let (env, _) = a.common.resolve()?;
    let sweep = Sweep::parse_optional(&a.sweep)?;
    if a.episodes == 0 {
        return Err(Error::Usage("--episodes must be at least 1".into()));
    }
    if !a.coordinator.is_file() {
        return Err(Error::Usage(format!(
            "coordinator checkpoint {} not found",
            a.coordinator.display()
        )));
    }
    let source = executor_source(&a.executor)?;
    let mut manifest = RunManifest::new(command, env.clone(), None, vec![env.seed])
        .with_setting("command", "eval")?
        .with_setting("episodes", a.episodes)?
        .with_setting("sweep", &a.sweep)?
        .with_input(&a.coordinator)?;
    if let ExecutorSource::Checkpoint(path) = &source {
        manifest = manifest.with_input(path)?;
    }
    if let Some(out) = &a.out {
        manifest.save(sidecar(out, ".manifest.json"))?;
    }

    let ckpt = Checkpoint::load(&a.coordinator)
        .map_err(|e| Error::Usage(format!("unusable coordinator checkpoint: {e}")))?;
    let store = ParamStore::from_checkpoint(&ckpt, COORDINATOR_PREFIX).map_err(usage)?;
    let net = CoordinatorNet::from_store(&store).map_err(usage)?;
    let hierarchy = Hierarchy::new(GoalSource::Learned(net, store), load_frozen(&source)?);
    let rows = run_sweep(&env, sweep.as_ref(), env.seed, a.episodes, &hierarchy)?;
    write_rows(a.out.as_deref(), &rows, &manifest.hash)?;
    Ok(EXIT_OK)
}

fn gradcheck(a: GradcheckArgs) -> Result<i32> {
    let (env, config) = a.common.resolve()?;
    if !(a.eps > 0.0 && a.eps <= 1e-2) {
        return Err(Error::Usage(format!("--eps {} outside (0, 0.01]", a.eps)));
    }
    let hidden = a.hidden.unwrap_or(config.hidden);
    let probe = a.sample.map_or(Probe::All, Probe::PerParam);
    let mut ok = true;
    for stage in [Stage::Executor, Stage::Coordinator] {
        let r = loss_grad_check(stage, &env, hidden, env.seed, a.steps, a.eps, probe)?;
        let pass = r.max_rel_error < a.tolerance;
        ok &= pass;
        println!(
            "{:<11} {} entries  max relative error {:.3e}  {}",
            format!("{stage:?}").to_lowercase(),
            r.checked,
            r.max_rel_error,
            if pass { "ok" } else { "FAIL" }
        );
        if let Some((name, idx)) = &r.worst {
            println!(
                "            worst {name}[{idx}]: analytic {:.6e}, numeric {:.6e}",
                r.worst_values.0, r.worst_values.1
            );
        }
        for (name, rel) in &r.per_param {
            println!("            {name:<36} {rel:.3e}");
        }
    }
    Ok(if ok { EXIT_OK } else { EXIT_FAILURE })
}
