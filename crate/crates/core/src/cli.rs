//! The `flycap` command line: `simulate`, `sweep` and `report`.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::metrics::Summary;
use crate::plot;
use crate::sim;
use crate::sweep;
use crate::trace::SimTrace;

#[derive(Debug, Parser)]
#[command(name = "flycap", version, about = "Flying-capacitor balancing of parallel/series Li-ion packs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario and write its trace, metrics and plots.
    Simulate(RunArgs),
    /// Run the [sweep] and/or [efficiency] grids of a config.
    Sweep(SweepArgs),
    /// Recompute metrics and plots from a stored trace.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (default: the config's `out`, else ./out).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Timestep in seconds.
    #[arg(long)]
    pub dt: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Worker threads (default: available cores).
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Trace CSV written by `simulate`.
    pub trace: PathBuf,
    /// Output directory (default: the trace's directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Settling threshold as a SoC fraction.
    #[arg(long, default_value_t = 0.02)]
    pub threshold: f64,
}

/// Parses `args` and runs the command, returning the process exit status.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Report(args) => cmd_report(args),
    }
}

fn load_config(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(dt) = args.dt {
        cfg.dt = dt;
    }
    Ok(cfg)
}

fn out_dir(args: &RunArgs, cfg: &RunConfig) -> Result<PathBuf> {
    let dir = args
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    ensure_dir(&dir)?;
    Ok(dir)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let md = fs::metadata(dir).map_err(|e| Error::io(dir, e))?;
    if md.permissions().readonly() {
        return Err(Error::config(format!(
            "output directory {} is not writable",
            dir.display()
        )));
    }
    Ok(())
}

fn write(path: PathBuf, body: &str) -> Result<()> {
    fs::write(&path, body).map_err(|e| Error::io(&path, e))
}

/// Metrics, convergence table, text report and plots derived from `trace`.
pub fn write_report(trace: &SimTrace, threshold: f64, dir: &Path) -> Result<Summary> {
    let summary = Summary::from_trace(trace, threshold);
    write(dir.join("metrics.csv"), &summary.to_csv_string())?;
    write(dir.join("convergence.csv"), &summary.convergence.to_csv_string())?;
    write(dir.join("report.txt"), &summary.to_text())?;
    plot::write_all(trace, dir)?;
    Ok(summary)
}

pub fn cmd_simulate(args: &RunArgs) -> Result<()> {
    let cfg = load_config(args)?;
    let scenario = cfg.scenario()?;
    let dir = out_dir(args, &cfg)?;
    let out = sim::simulate(&scenario, &cfg.options())?;
    out.trace.write_csv(dir.join("trace.csv"))?;
    out.trace.write_events_csv(dir.join("events.csv"))?;
    let threshold = scenario.balancer.map_or(0.02, |b| b.soc_threshold);
    let summary = write_report(&out.trace, threshold, &dir)?;
    println!(
        "{} steps, {} switch events, max KCL residual {:.2e}",
        out.steps,
        out.trace.events.len(),
        out.max_kcl_residual
    );
    print!("{}", summary.to_text());
    println!("wrote {}", dir.display());
    Ok(())
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let cfg = load_config(&args.run)?;
    let workers = args
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if workers == 0 {
        return Err(Error::config("--workers must be >= 1"));
    }
    let spec = cfg.sweep_spec()?;
    if spec.is_none() && cfg.efficiency.is_none() {
        return Err(Error::config(
            "config has neither a [sweep] nor an [efficiency] section",
        ));
    }
    let dir = out_dir(&args.run, &cfg)?;
    if let Some(spec) = spec {
        let rows = sweep::run_sweep(&spec, workers)?;
        write(dir.join("sweep.csv"), &sweep::sweep_csv_string(&rows))?;
        let trends = sweep::trend_summary(&spec, &rows);
        write(dir.join("trends.txt"), &trends)?;
        print!("{}", sweep::sweep_csv_string(&rows));
        print!("{trends}");
    }
    if let Some(study) = &cfg.efficiency {
        let study = sweep::EfficiencyStudy {
            dt: cfg.dt,
            ..study.clone()
        };
        let rows = sweep::run_efficiency_study(&study, workers)?;
        let csv = sweep::efficiency_csv_string(&rows);
        write(dir.join("efficiency.csv"), &csv)?;
        print!("{csv}");
    }
    println!("wrote {}", dir.display());
    Ok(())
}

pub fn cmd_report(args: &ReportArgs) -> Result<()> {
    if !(args.threshold > 0.0 && args.threshold < 1.0) {
        return Err(Error::config("--threshold must lie in (0, 1)"));
    }
    let trace = SimTrace::read_csv(&args.trace)?;
    let dir = match &args.out {
        Some(d) => d.clone(),
        None => args
            .trace
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from(".")),
    };
    ensure_dir(&dir)?;
    let summary = write_report(&trace, args.threshold, &dir)?;
    print!("{}", summary.to_text());
    println!("wrote {}", dir.display());
    Ok(())
}
