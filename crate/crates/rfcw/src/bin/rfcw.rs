use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use rfcw::interface::{execute, write_outcome, Command, RunConfig};

#[derive(Parser)]
#[command(name = "rfcw", version, about = "Metastability of the random-field Curie-Weiss model")]
struct Cli {
    /// Configuration file (key = value with [sections]).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Free energy table, critical points and barrier.
    Landscape,
    /// Closed-form capacity and mean-time predictions.
    Predict,
    /// Exact capacity and mean hitting time of the lumped chain.
    Exact,
    /// Flow lower bound and test-function upper bound on the capacity.
    Bounds,
    /// Monte Carlo hitting times.
    Simulate,
    /// Exact, bounds, formula and Monte Carlo side by side.
    Validate,
    /// Convergence sweep over the configured system sizes.
    Report,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Landscape => Command::Landscape,
            Cmd::Predict => Command::Predict,
            Cmd::Exact => Command::Exact,
            Cmd::Bounds => Command::Bounds,
            Cmd::Simulate => Command::Simulate,
            Cmd::Validate => Command::Validate,
            Cmd::Report => Command::Report,
        }
    }
}

fn run(cli: &Cli) -> rfcw::Result<()> {
    if let Some(k) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| rfcw::Error::InvalidParameter(format!("thread pool: {e}")))?;
    }
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    let t = Instant::now();
    let outcome = execute(cli.command.into(), &cfg)?;
    write_outcome(&cfg.out, &outcome, t.elapsed().as_secs_f64())?;
    let text = serde_json::to_string_pretty(&outcome.record.payload)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rfcw: {e}");
            ExitCode::from(if e.is_domain() { 2 } else { 1 })
        }
    }
}
