//! `dfpas`: batch driver that writes sweep results as CSV.
//!
//! Exit codes: 0 success, 1 a validation criterion failed, 2 bad
//! configuration or I/O, 3 numerical failure.

use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use dfpas_core::bench::{
    attenuation_curve, emit_csv, emit_json, multi_oma, run_sweep, write_csv, Pipeline, ResultRow, ScenarioConfig,
    SchemeId, TraceDocument, TRACE_SCHEMA_VERSION,
};
use dfpas_core::validation::{run_all, run_criterion, ValidationOptions};
use dfpas_core::Error;

#[derive(Parser)]
#[command(name = "dfpas", version, about = "Dual-fed pinching-antenna simulator and optimizer")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Power left in the waveguide versus propagation distance.
    Attenuation {
        #[command(flatten)]
        io: IoArgs,
        /// Largest distance in meters.
        #[arg(long, default_value_t = 30.0)]
        max_length: f64,
        #[arg(long, default_value_t = 301)]
        points: usize,
    },
    /// Single-waveguide ergodic rate, closed form and Monte Carlo.
    ErateSingle(RunArgs),
    /// Multi-waveguide ergodic rate, closed form and Monte Carlo.
    ErateMulti(RunArgs),
    /// Single-waveguide TDMA sum rate per scheme.
    OptimizeSingle(RunArgs),
    /// Multi-waveguide joint optimization per scheme.
    OptimizeMulti {
        #[command(flatten)]
        run: RunArgs,
        /// Write the DF-PAS optimizer trace for the first seed as JSON.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run the pipeline named in the config file.
    Sweep(RunArgs),
    /// Run acceptance criteria and print PASS/FAIL per criterion.
    Validate {
        /// Monte Carlo drops per estimate.
        #[arg(long, default_value_t = ValidationOptions::default().drops)]
        drops: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Criterion id such as A3; repeatable. Default: all.
        #[arg(long = "criterion")]
        criteria: Vec<String>,
    },
}

#[derive(Args)]
struct IoArgs {
    /// TOML experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV destination; `-` or absent means the config's `output`, else stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    io: IoArgs,
    /// Replace the config's seed list with this single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo drops per estimate.
    #[arg(long)]
    drops: Option<usize>,
    /// Write runtime_ms = 0 so reruns are byte-identical.
    #[arg(long)]
    no_runtime: bool,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Numerical(_) | Error::Singularity(_) | Error::Dimension(_)) => 3,
        _ => 2,
    }
}

fn load_config(run: &RunArgs, pipeline: Option<Pipeline>) -> anyhow::Result<ScenarioConfig> {
    let mut cfg = match (&run.io.config, pipeline) {
        (Some(path), _) => {
            let mut cfg = ScenarioConfig::load(path)?;
            if let Some(p) = pipeline {
                cfg.pipeline = p;
            }
            cfg
        }
        (None, Some(p)) => {
            let mut cfg = ScenarioConfig::new(p);
            if matches!(p, Pipeline::SingleTdma | Pipeline::MultiOma) {
                cfg.schemes = SchemeId::ALL.to_vec();
            }
            cfg
        }
        (None, None) => {
            return Err(Error::Config {
                field: "config".into(),
                message: "`sweep` needs --config".into(),
            }
            .into())
        }
    };
    if let Some(seed) = run.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(drops) = run.drops {
        cfg.montecarlo.num_drops = drops;
    }
    if run.no_runtime {
        cfg.record_runtime = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_rows(rows: &[ResultRow], out: Option<&Path>) -> anyhow::Result<()> {
    match out {
        Some(path) if path != Path::new("-") => {
            emit_csv(rows, path)?;
            log::info!("wrote {} rows to {}", rows.len(), path.display());
        }
        _ => write_csv(rows, io::stdout().lock(), Path::new("<stdout>"))?,
    }
    Ok(())
}

fn run_pipeline(run: &RunArgs, pipeline: Option<Pipeline>) -> anyhow::Result<ScenarioConfig> {
    let cfg = load_config(run, pipeline)?;
    let rows = run_sweep(&cfg)?;
    let out = run.io.out.as_deref().or(cfg.output.as_deref());
    write_rows(&rows, out)?;
    Ok(cfg)
}

fn write_trace(cfg: &ScenarioConfig, path: &Path) -> anyhow::Result<()> {
    let seed = cfg.seeds.first().copied().unwrap_or(0);
    let scenario = cfg.scenario.multi_scenario(seed)?;
    let out = multi_oma(&scenario, SchemeId::DfPas, &cfg.optimizer, seed)?;
    let opt = out.optimization.context("DF-PAS run has no optimizer result")?;
    let doc = TraceDocument {
        schema_version: TRACE_SCHEMA_VERSION,
        scheme: SchemeId::DfPas.to_string(),
        seed,
        scenario: cfg.scenario.clone(),
        optimizer: cfg.optimizer.clone(),
        feeds: out.state.feeds.iter().map(|f| f.indicator()).collect(),
        positions_m: out.state.positions.clone(),
        per_user_rate: out.report.per_user_rate.clone(),
        sum_rate: out.report.sum_rate,
        phase_one_rate: Some(opt.phase_one_rate),
        converged: Some(opt.converged),
        warnings: opt.warnings,
        trace: opt.trace,
    };
    emit_json(&doc, path)?;
    log::info!("wrote trace to {}", path.display());
    Ok(())
}

fn validate(drops: usize, seed: u64, criteria: &[String]) -> anyhow::Result<bool> {
    let opts = ValidationOptions { drops, seed };
    let reports = if criteria.is_empty() {
        run_all(&opts)?
    } else {
        criteria
            .iter()
            .map(|id| run_criterion(id, &opts))
            .collect::<Result<_, _>>()?
    };
    for r in &reports {
        println!("{r}");
        for d in &r.details {
            println!("    {d}");
        }
    }
    Ok(reports.iter().all(|r| r.passed))
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring the worker pool")?;
    }
    match cli.command {
        Command::Attenuation { io, max_length, points } => {
            let params = match &io.config {
                Some(path) => ScenarioConfig::load(path)?.scenario,
                None => Default::default(),
            };
            let rows = attenuation_curve(&params, max_length, points)?;
            write_rows(&rows, io.out.as_deref())?;
        }
        Command::ErateSingle(run) => {
            run_pipeline(&run, Some(Pipeline::ErgodicSingle))?;
        }
        Command::ErateMulti(run) => {
            run_pipeline(&run, Some(Pipeline::ErgodicMulti))?;
        }
        Command::OptimizeSingle(run) => {
            run_pipeline(&run, Some(Pipeline::SingleTdma))?;
        }
        Command::OptimizeMulti { run, trace } => {
            let cfg = run_pipeline(&run, Some(Pipeline::MultiOma))?;
            if let Some(path) = trace {
                write_trace(&cfg, &path)?;
            }
        }
        Command::Sweep(run) => {
            run_pipeline(&run, None)?;
        }
        Command::Validate { drops, seed, criteria } => return validate(drops, seed, &criteria),
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
