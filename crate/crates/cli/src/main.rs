use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use roamtell::harness::{
    read_logs, replay, report, run_episode_with, sweep, write_report_csv, write_sweep_csv, AgentKind, EpisodeConfig,
    EpisodeLog, RunOptions, WorldSource,
};
use roamtell::rewards::RewardKind;
use roamtell::speaker::{CaptionerSpec, SpeakerPolicy};
use roamtell::world::{generate_world, WorldParams};

/// `println!` that tolerates a closed stdout (e.g. piped into `head`).
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

/// Exit code for invalid arguments or configuration.
const EXIT_CONFIG: u8 = 1;
/// Exit code for failures while running.
const EXIT_RUNTIME: u8 = 2;

#[derive(Parser)]
#[command(name = "roamtell", version, about = "Explore-and-describe episodes on procedural grid worlds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a procedural world and write it as JSON.
    GenerateEnv(GenerateArgs),
    /// Run one episode and write its JSONL log.
    Run(RunArgs),
    /// Evaluate a grid of speaker policies over several seeds.
    Sweep(SweepArgs),
    /// Aggregate episode logs into a CSV table and a JSON summary.
    Report(ReportArgs),
    /// Recompute the metrics of a log and optionally re-simulate it.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Side of the square world, meters.
    #[arg(long, default_value_t = 12.0)]
    extent: f64,
    #[arg(long, default_value_t = 4)]
    rooms: usize,
    #[arg(long, default_value_t = 8)]
    objects: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct EpisodeArgs {
    /// World JSON file; a world is generated from --world-seed otherwise.
    #[arg(long)]
    env: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    world_seed: u64,
    /// JSON file with a full or partial episode configuration; flags given
    /// explicitly override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps: Option<usize>,
    /// curiosity | coverage | anticipation | impact-grid | impact-dme
    #[arg(long)]
    reward: Option<String>,
    /// navigator | random
    #[arg(long)]
    agent: Option<String>,
    /// always | depth | object | activation
    #[arg(long)]
    speaker: Option<String>,
    #[arg(long)]
    threshold: Option<f64>,
    /// template | external:<tcp://host:port | exec:program args>
    #[arg(long)]
    captioner: Option<String>,
    /// Global map side in cells (odd).
    #[arg(long)]
    map_size: Option<usize>,
    /// Odometry noise, meters per step (rotation noise scales with it).
    #[arg(long)]
    odometry_sigma: Option<f64>,
    #[arg(long)]
    scan_match: Option<bool>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    episode: EpisodeArgs,
    /// Output log path (JSONL).
    #[arg(long)]
    out: PathBuf,
    /// Write PGM map snapshots every N steps next to the log.
    #[arg(long)]
    snapshot_every: Option<usize>,
    /// Write every A* plan as a JSON list of {t, cells}.
    #[arg(long)]
    dump_plans: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    episode: EpisodeArgs,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',', required = true)]
    seeds: Vec<u64>,
    /// Comma-separated policies such as always,depth:1.0,object:3.
    #[arg(long, value_delimiter = ',', default_value = "always,depth:1,depth:2,depth:3,object:1,object:3,object:5,activation:4.5,activation:5,activation:5.5")]
    grid: Vec<String>,
    /// Output directory for sweep.csv and the per-seed traces.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(required = true)]
    logs: Vec<PathBuf>,
    /// Output directory for report.csv and summary.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReplayArgs {
    log: PathBuf,
    /// Re-run the episode from the header and compare logs byte for byte.
    #[arg(long)]
    resimulate: bool,
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<roamtell::Error> for Failure {
    fn from(e: roamtell::Error) -> Self {
        use roamtell::Error as E;
        let code = match e {
            E::InvalidParameter(_) | E::InvalidWorld(_) | E::UnsupportedVersion { .. } | E::GenerationFailed { .. } => {
                EXIT_CONFIG
            }
            _ => EXIT_RUNTIME,
        };
        Failure { code, error: e.into() }
    }
}

fn config_error(error: anyhow::Error) -> Failure {
    Failure { code: EXIT_CONFIG, error }
}

fn runtime_error(error: anyhow::Error) -> Failure {
    Failure { code: EXIT_RUNTIME, error }
}

type CliResult<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::GenerateEnv(a) => generate_env(a),
        Command::Run(a) => run(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Report(a) => run_report(a),
        Command::Replay(a) => run_replay(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn generate_env(a: GenerateArgs) -> CliResult {
    let world = generate_world(a.seed, &WorldParams::new(a.extent, a.rooms, a.objects))?;
    world.save(&a.out)?;
    say!("{} ({} x {} cells, {} objects, hash {})", a.out.display(), world.width(), world.height(), world.objects().len(), world.content_hash()?);
    Ok(())
}

fn episode_config(a: &EpisodeArgs) -> CliResult<EpisodeConfig> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(config_error)?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display())).map_err(config_error)?
        }
        None => EpisodeConfig::default(),
    };
    if let Some(env) = &a.env {
        if !env.is_file() {
            return Err(config_error(anyhow::anyhow!("world file {} not found", env.display())));
        }
        cfg.world = WorldSource::File { path: env.clone() };
    } else if a.config.is_none() {
        cfg.world = WorldSource::Generated { seed: a.world_seed, params: WorldParams::new(12.0, 4, 8) };
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(s) = a.steps {
        cfg.steps = s;
    }
    if let Some(r) = &a.reward {
        cfg.reward = r.parse::<RewardKind>()?;
    }
    if let Some(agent) = &a.agent {
        cfg.agent = match agent.as_str() {
            "navigator" => AgentKind::Navigator,
            "random" => AgentKind::Random,
            other => return Err(config_error(anyhow::anyhow!("unknown agent '{other}' (navigator | random)"))),
        };
    }
    match (&a.speaker, a.threshold) {
        (Some(name), t) => cfg.speaker = SpeakerPolicy::from_parts(name, t)?,
        (None, Some(t)) => cfg.speaker = SpeakerPolicy::from_parts(cfg.speaker.name(), Some(t))?,
        (None, None) => {}
    }
    if let Some(c) = &a.captioner {
        cfg.captioner = c.parse::<CaptionerSpec>()?;
    }
    if let Some(m) = a.map_size {
        cfg.map_size = m;
    }
    if let Some(s) = a.odometry_sigma {
        cfg.odometry.sigma_translation = s;
        cfg.odometry.sigma_rotation = s;
    }
    if a.scan_match.is_some() {
        cfg.scan_match = a.scan_match;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(a: RunArgs) -> CliResult {
    let cfg = episode_config(&a.episode)?;
    let snapshot_dir = a.snapshot_every.map(|_| snapshot_dir_for(&a.out));
    let opts = RunOptions { snapshot_every: a.snapshot_every, snapshot_dir, record_plans: a.dump_plans.is_some() };
    let (log, plans) = run_episode_with(&cfg, &opts)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| runtime_error(e.into()))?;
    }
    log.save(&a.out)?;
    if let Some(path) = &a.dump_plans {
        let dump: Vec<_> = plans.iter().map(|(t, cells)| serde_json::json!({ "t": t, "cells": cells })).collect();
        std::fs::write(path, serde_json::to_string(&dump).map_err(|e| runtime_error(e.into()))?)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(runtime_error)?;
    }
    let r = &log.footer.report;
    say!(
        "{}: {} steps{}, area_seen {:.2} m2, pct_area_seen {:.3}, loquacity {:.2}, ed_s {:.4}, sha256 {}",
        a.out.display(),
        log.steps.len(),
        log.footer.termination.map_or(String::new(), |t| format!(" (stopped early: {t:?})")),
        r.area_seen,
        r.pct_area_seen,
        r.loquacity,
        r.ed_s,
        log.sha256()?
    );
    Ok(())
}

fn snapshot_dir_for(log: &Path) -> PathBuf {
    let stem = log.file_stem().map_or("episode".into(), |s| s.to_string_lossy().into_owned());
    log.with_file_name(format!("{stem}_maps"))
}

fn run_sweep(a: SweepArgs) -> CliResult {
    let cfg = episode_config(&a.episode)?;
    let grid: Vec<SpeakerPolicy> = a.grid.iter().map(|s| s.parse()).collect::<Result<_, _>>()?;
    let (rows, traces) = sweep(&cfg, &grid, &a.seeds)?;
    std::fs::create_dir_all(&a.out).map_err(|e| runtime_error(e.into()))?;
    let csv = a.out.join("sweep.csv");
    write_sweep_csv(&csv, &rows)?;
    for (seed, trace) in a.seeds.iter().zip(&traces) {
        if let Some(log) = trace {
            log.save(a.out.join(format!("trace_seed{seed}.jsonl")))?;
        }
    }
    let failed = rows.iter().filter(|r| r.status != "ok").count();
    say!("{}: {} rows, {} failed", csv.display(), rows.len(), failed);
    Ok(())
}

fn run_report(a: ReportArgs) -> CliResult {
    let logs = read_logs(&a.logs)?;
    let (rows, summary) = report(&logs)?;
    std::fs::create_dir_all(&a.out).map_err(|e| runtime_error(e.into()))?;
    write_report_csv(a.out.join("report.csv"), &rows)?;
    let text = serde_json::to_string_pretty(&summary).map_err(|e| runtime_error(e.into()))?;
    std::fs::write(a.out.join("summary.json"), &text).map_err(|e| runtime_error(e.into()))?;
    say!("{text}");
    Ok(())
}

fn run_replay(a: ReplayArgs) -> CliResult {
    let log = EpisodeLog::load(&a.log)?;
    let out = replay(&log, a.resimulate)?;
    say!("{}", serde_json::to_string_pretty(&out.recomputed).map_err(|e| runtime_error(e.into()))?);
    if !out.footer_matches {
        return Err(runtime_error(anyhow::anyhow!("{}: recomputed metrics differ from the footer", a.log.display())));
    }
    match (out.resimulated_identical, out.first_divergence) {
        (Some(false), Some(t)) => Err(runtime_error(anyhow::anyhow!("{}: re-simulation diverges at step {t}", a.log.display()))),
        (Some(false), None) => Err(runtime_error(anyhow::anyhow!("{}: re-simulation differs from the log", a.log.display()))),
        (Some(true), _) => {
            eprintln!("re-simulation reproduces {} byte for byte", a.log.display());
            Ok(())
        }
        (None, _) => Ok(()),
    }
}
