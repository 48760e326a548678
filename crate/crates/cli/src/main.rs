//! `ludbfp`: dataset generation, per-flow analysis, policy training,
//! evaluation reports and feature importance.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 some flow analyses
//! failed (timeouts, memory cap, analysis errors).

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use ludbfp_core::ludb::Budget;
use ludbfp_core::netmodel::ServerGraph;
use ludbfp_core::prolong::Method;
use ludbfp_policy::importance::permutation_importance;
use ludbfp_policy::train::{analysis_config, five_server_family, train, EpisodeLog, Instance, TrainConfig};
use ludbfp_policy::{Checkpoint, GnnPredictor};

use ludbfp_cli::analyze::{analyze_all, AnalyzeOptions};
use ludbfp_cli::dataset::{self, Profile};
use ludbfp_cli::{evaluate, metrics, UsageError};

#[derive(Parser)]
#[command(name = "ludbfp", version, about = "FIFO delay bounds with flow prolongation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded dataset of random networks.
    Generate(GenerateArgs),
    /// Bound the delay of every flow of a dataset with one method.
    Analyze(AnalyzeArgs),
    /// Train the prolongation policy with REINFORCE.
    Train(TrainArgs),
    /// Aggregate metrics files into a report.
    Evaluate(EvaluateArgs),
    /// Permutation feature importance of a trained policy.
    Importance(ImportanceArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Profile::Train)]
    profile: Profile,
    /// Server count range, e.g. `5-15`.
    #[arg(long, value_parser = parse_range)]
    servers: Option<(usize, usize)>,
    #[arg(long, value_parser = parse_range)]
    flows: Option<(usize, usize)>,
    #[arg(long, value_parser = parse_range)]
    path_len: Option<(usize, usize)>,
}

#[derive(Args)]
struct Limits {
    /// Per-flow time budget in seconds.
    #[arg(long)]
    timeout_s: Option<f64>,
    /// Per-flow memory budget in MiB, counted by the analysis itself.
    #[arg(long)]
    mem_cap_mb: Option<usize>,
    /// Tighten every delay LP over a θ grid with this many points per θ.
    #[arg(long)]
    theta_grid: Option<usize>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Dataset directory or single network file.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// ludb-ff, fp-exhaustive, fp-heuristic, rnd-fp, rnd-hfp or deepfp.
    #[arg(long, default_value = "ludb-ff")]
    method: String,
    /// Alternative budget of rnd-fp, rnd-hfp and deepfp.
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    workers: Option<usize>,
    /// Trained policy for deepfp.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[command(flatten)]
    limits: Limits,
}

#[derive(Args)]
struct TrainArgs {
    /// Training networks; the randomized five-server family when absent.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Checkpoint to write; the training log goes next to it.
    #[arg(long)]
    out: PathBuf,
    /// Resume from this checkpoint.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 2000)]
    episodes: u64,
    #[arg(long, default_value_t = 16)]
    hidden: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Family instances when no dataset is given.
    #[arg(long, default_value_t = 200)]
    pool: u64,
    /// Save a checkpoint every this many episodes.
    #[arg(long, default_value_t = 100)]
    checkpoint_every: u64,
    /// Subtract a moving-average reward baseline.
    #[arg(long)]
    baseline: bool,
    #[arg(long, default_value_t = 30.0)]
    timeout_s: f64,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Metrics files.
    #[arg(long = "in", required = true, num_args = 1..)]
    input: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ImportanceArgs {
    /// Evaluation networks; the randomized five-server family when absent.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Family instances when no dataset is given.
    #[arg(long, default_value_t = 100)]
    pool: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once('-').unwrap_or((s, s));
    let a: usize = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b: usize = b.trim().parse().map_err(|e| format!("{e}"))?;
    Ok((a, b))
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn write_or_print(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_generate(a: GenerateArgs) -> Result<ExitCode> {
    let mut cfg = dataset::profile_config(a.profile, a.seed);
    if let Some((lo, hi)) = a.servers {
        cfg.servers = lo..=hi;
    }
    if let Some((lo, hi)) = a.flows {
        cfg.flows = lo..=hi;
    }
    if let Some((lo, hi)) = a.path_len {
        cfg.path_len = lo..=hi;
    }
    let files = dataset::write_dataset(&a.out, &cfg, a.count)?;
    eprintln!("wrote {} networks to {}", files.len(), a.out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_analyze(a: AnalyzeArgs) -> Result<ExitCode> {
    let method = Method::parse(&a.method, a.k).map_err(|e| usage(e.to_string()))?;
    let predictor = match (method, &a.checkpoint) {
        (Method::DeepFp(_), None) => return Err(usage("deepfp needs --checkpoint")),
        (_, Some(p)) => Some(GnnPredictor::new(
            Checkpoint::load(p).with_context(|| format!("loading {}", p.display()))?.params,
        )),
        _ => None,
    };
    let nets = dataset::load(&a.input)?;
    let opts = AnalyzeOptions {
        method,
        seed: a.seed,
        timeout: a.limits.timeout_s.map(Duration::from_secs_f64),
        mem_cap_bytes: a.limits.mem_cap_mb.map(|m| m << 20),
        workers: a
            .workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
        theta_grid: a.limits.theta_grid,
        predictor,
    };
    let done = metrics::existing_keys(&a.out)?;
    let name = method.to_string();
    let rows = analyze_all(&nets, &opts, |net, foi| {
        done.contains(&(net.to_string(), foi.to_string(), name.clone()))
    });
    metrics::append(&a.out, &rows)?;
    let failed = rows.iter().filter(|r| !r.success).count();
    eprintln!("{} rows, {failed} failed", rows.len());
    Ok(if failed > 0 { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn instances(input: &Option<PathBuf>, pool: u64, first_seed: u64) -> Result<Vec<Instance>> {
    let cfg = analysis_config();
    let nets: Vec<ServerGraph> = match input {
        Some(p) => dataset::load(p)?.into_iter().map(|(_, n)| n).collect(),
        None => (first_seed..first_seed + pool).map(five_server_family).collect(),
    };
    let mut out = Vec::with_capacity(nets.len());
    for net in nets {
        match Instance::new(net, &cfg, &Budget::unlimited()) {
            Ok(i) => out.push(i),
            Err(e) => eprintln!("skipping instance: {e}"),
        }
    }
    if out.is_empty() {
        return Err(usage("no usable training instances"));
    }
    Ok(out)
}

fn log_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".log.tsv");
    PathBuf::from(s)
}

fn cmd_train(a: TrainArgs) -> Result<ExitCode> {
    if !(a.lr >= 0.0 && a.lr.is_finite()) {
        return Err(usage("--lr must be a nonnegative number"));
    }
    let pool = instances(&a.input, a.pool, 0)?;
    let cfg = TrainConfig {
        lr: a.lr,
        episodes: a.episodes,
        seed: a.seed,
        hidden: a.hidden,
        baseline: a.baseline,
        episode_timeout: Some(Duration::from_secs_f64(a.timeout_s)),
        ..Default::default()
    };
    let mut ck = match &a.checkpoint {
        Some(p) => Some(Checkpoint::load(p).with_context(|| format!("loading {}", p.display()))?),
        None => None,
    };
    let log = log_path(&a.out);
    let fresh = ck.is_none();
    let mut file = OpenOptions::new()
        .create(true)
        .write(true)
        .append(!fresh)
        .truncate(fresh)
        .open(&log)?;
    if fresh || file.metadata()?.len() == 0 {
        writeln!(file, "{}", EpisodeLog::HEADER)?;
    }
    let analysis = analysis_config();
    let mut skipped = 0u64;
    loop {
        let at = ck.as_ref().map_or(0, |c| c.episode);
        if at >= cfg.episodes && ck.is_some() {
            break;
        }
        let until = (at + a.checkpoint_every.max(1)).min(cfg.episodes);
        let mut io = Ok(());
        let next = train(&cfg, &pool, &analysis, ck.take(), Some(until), |l, _| {
            skipped += l.skipped as u64;
            if io.is_ok() {
                io = writeln!(file, "{}", l.to_line());
            }
        })?;
        io?;
        next.save(&a.out)?;
        ck = Some(next);
    }
    eprintln!("trained {} episodes, {skipped} skipped; checkpoint {}", cfg.episodes, a.out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<ExitCode> {
    let mut rows = Vec::new();
    for p in &a.input {
        rows.extend(metrics::read(p)?);
    }
    let r = evaluate::report(&rows);
    write_or_print(&a.out, &r.text)?;
    Ok(ExitCode::SUCCESS)
}

const FEATURE_NAMES: [&str; 7] = [
    "kind_server",
    "kind_flow",
    "kind_prolongation",
    "rate",
    "latency_or_burst",
    "hops_or_position",
    "foi_flag",
];

fn cmd_importance(a: ImportanceArgs) -> Result<ExitCode> {
    let ck = Checkpoint::load(&a.checkpoint).with_context(|| format!("loading {}", a.checkpoint.display()))?;
    let pool = instances(&a.input, a.pool, 1_000_000)?;
    let cfg = analysis_config();
    let mut scores = Vec::new();
    for (f, name) in FEATURE_NAMES.iter().enumerate() {
        let v = permutation_importance(&pool, &ck.params, None, f, Some(a.seed), &cfg)?;
        scores.push((v, f, *name));
    }
    scores.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
    let mut text = String::from("feature\tname\timportance\n");
    for (v, f, name) in scores {
        text.push_str(&format!("{f}\t{name}\t{v:.6}\n"));
    }
    write_or_print(&a.out, &text)?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Train(a) => cmd_train(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Importance(a) => cmd_importance(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
