//! `igc`: deterministic tables and checks for the igc-core examples.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use report::{emit, inputs_hash, render_csv, render_json};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Args, Serialize)]
pub struct RunConfig {
    /// Seed for every randomized instance.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Tolerance for the command's checks (each command has its own default).
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Output file; standard output when absent.
    #[serde(skip)]
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[serde(skip)]
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

impl RunConfig {
    pub fn tol_or(&self, default: f64) -> f64 {
        self.tol.unwrap_or(default)
    }
}

#[derive(Debug, Parser, Serialize)]
#[command(name = "igc", version, about = "Information geometry on finite sample spaces and 1-D grids")]
struct Cli {
    #[command(flatten)]
    config: RunConfig,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Orlicz norms and steepness profiles on a quadrature grid.
    #[command(subcommand)]
    Orlicz(commands::OrliczCommand),
    /// Closed-form `cosh - 1` profile of the non-steep example.
    Steepness(commands::SteepnessArgs),
    /// Exponential and mixture charts of a random pair.
    Chart(commands::SizeArgs),
    /// KL divergence directly and as a Bregman divergence.
    Div(commands::SizeArgs),
    /// Pythagorean identity on a random and an orthogonal triple.
    Pyth(commands::SizeArgs),
    /// Hilbert-bundle transport between random densities.
    Transport(commands::TransportArgs),
    /// Integral curves: geodesics, heat flow, natural-gradient ascent.
    #[command(subcommand)]
    Flow(commands::FlowCommand),
    /// Deformed exponential families.
    #[command(subcommand)]
    Deformed(commands::DeformedCommand),
}

impl Command {
    fn name(&self) -> String {
        match self {
            Command::Orlicz(c) => format!("orlicz {}", c.name()),
            Command::Steepness(_) => "steepness".into(),
            Command::Chart(_) => "chart".into(),
            Command::Div(_) => "div".into(),
            Command::Pyth(_) => "pyth".into(),
            Command::Transport(_) => "transport".into(),
            Command::Flow(c) => format!("flow {}", c.name()),
            Command::Deformed(c) => format!("deformed {}", c.name()),
        }
    }
}

#[derive(Serialize)]
struct Inputs<'a> {
    version: &'a str,
    config: &'a RunConfig,
    command: &'a Command,
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("IGC_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| format!("IGC_THREADS must be a positive integer, got {raw:?}"))?;
    if threads == 0 {
        return Err("IGC_THREADS must be at least 1".into());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    let outcome = match commands::run(&cli.command, &cli.config) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(if e.is_usage() { 2 } else { 1 });
        }
    };
    let name = cli.command.name();
    let hash = inputs_hash(&Inputs {
        version: env!("CARGO_PKG_VERSION"),
        config: &cli.config,
        command: &cli.command,
    });
    let text = match cli.config.format {
        Format::Json => render_json(&name, &hash, &outcome),
        Format::Csv => render_csv(&outcome),
    };
    if let Err(e) = emit(&text, cli.config.out.as_deref()) {
        eprintln!("error: cannot write output: {e}");
        return ExitCode::from(1);
    }
    for c in outcome.checks.iter().filter(|c| !c.pass) {
        eprintln!("check failed: {} = {} (tolerance {})", c.name, c.value, c.tol);
    }
    if outcome.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
