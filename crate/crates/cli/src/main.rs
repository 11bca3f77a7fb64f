//! `frontlab`: reproducible pulled-front experiments from the command line.

mod commands;
mod gnuplot;
mod output;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;

/// Environment variable capping the number of worker threads.
pub const WORKERS_ENV: &str = "FRONTLAB_WORKERS";

#[derive(Parser, Debug)]
#[command(
    name = "frontlab",
    version,
    about = "Fisher-KPP pulled-front experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Critical point and expansion coefficients of a dispersion relation.
    Dispersion(DispersionArgs),
    /// Tabulate the critical travelling wave and Φ.
    Wave(WaveArgs),
    /// Run the lattice model and record level positions.
    Simulate(SimulateArgs),
    /// Reach times of the solvable front.
    Solvable(SolvableArgs),
    /// Fit the large-time expansion of δ_t to simulated traces.
    Fit(FitArgs),
    /// Numerical checks of the two-level and profile predictions.
    Check {
        #[command(subcommand)]
        check: CheckCommand,
    },
}

#[derive(Subcommand, Debug)]
enum CheckCommand {
    /// s_t = μ^(α) - μ^(β) - (W^(α) - W^(β)) against c0 + c1/t.
    Conj1(Conj1Args),
    /// Distance of the simulated profile from the first-order correction.
    Thm2(Thm2Args),
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Continuum,
    Lattice,
    Solvable,
}

#[derive(Args, Debug, Serialize)]
pub struct DispersionArgs {
    #[arg(long, value_enum)]
    pub model: ModelKind,
    /// Space step (lattice) or coupling (solvable).
    #[arg(long)]
    pub a: Option<f64>,
    /// Time step (lattice).
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct WaveArgs {
    /// Grid as x_lo:x_hi:h.
    #[arg(long, default_value = "-50:25:0.005", value_parser = parse_grid)]
    pub grid: (f64, f64, f64),
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.3,0.5,0.7,0.9")]
    pub alpha: Vec<f64>,
    #[arg(long, default_value = "wave.csv")]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 0.1)]
    pub a: f64,
    /// Time step; a comma-separated list runs a sweep, one front per worker.
    #[arg(long, value_delimiter = ',', default_value = "0.002")]
    pub b: Vec<f64>,
    #[arg(long)]
    pub tmax: f64,
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.3,0.5,0.7,0.99")]
    pub alphas: Vec<f64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Steps between samples.
    #[arg(long, default_value_t = 50)]
    pub stride: usize,
    /// Reference speed for η; defaults to v_c of the lattice.
    #[arg(long)]
    pub v_ref: Option<f64>,
    /// `step`, or `exptail:A:kappa` for h0 = min(1, A x^κ e^{-x}).
    #[arg(long, default_value = "step")]
    pub ic: String,
    /// Also emit a gnuplot script of μ^(1/2) - μ^(α) versus 1/t.
    #[arg(long)]
    pub gnuplot: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum SolvableMethod {
    Ode,
    Cascade,
}

#[derive(Args, Debug, Serialize)]
pub struct SolvableArgs {
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
    #[arg(long)]
    pub xmax: usize,
    #[arg(long, default_value_t = 5e-4)]
    pub dt: f64,
    #[arg(long, value_enum, default_value = "ode")]
    pub method: SolvableMethod,
    #[arg(long)]
    pub out: PathBuf,
    /// Fit range x_lo:x_hi.
    #[arg(long, value_parser = parse_usize_range)]
    pub fit: Option<(usize, usize)>,
    /// Fit the ln x coefficient instead of fixing it at 3/2.
    #[arg(long)]
    pub free_log: bool,
    #[arg(long)]
    pub json: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum FitModelArg {
    A,
    B,
    C,
}

#[derive(Args, Debug, Serialize)]
pub struct FitArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "c")]
    pub model: FitModelArg,
    #[arg(long, value_parser = parse_range)]
    pub window: (f64, f64),
    /// Levels to fit; defaults to every μ column.
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    /// Lattice parameters, read from the input manifest when omitted.
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub json: bool,
    /// Emit a gnuplot script of t(δ_t - C) versus t.
    #[arg(long)]
    pub gnuplot: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct Conj1Args {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0.3,0.7")]
    pub alphas: Vec<f64>,
    #[arg(long, default_value = "200:2000", value_parser = parse_range)]
    pub window: (f64, f64),
    /// Write (1/t, s_t) to this CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct Thm2Args {
    #[arg(long, default_value_t = 0.1)]
    pub a: f64,
    #[arg(long, default_value_t = 0.002)]
    pub b: f64,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long, default_value_t = 3.0)]
    pub x0: f64,
    #[arg(long, default_value_t = 61)]
    pub nx: usize,
    #[arg(long, value_delimiter = ',', default_value = "250,500,1000,2000")]
    pub times: Vec<f64>,
    #[arg(long, default_value_t = 50)]
    pub stride: usize,
    #[arg(long)]
    pub json: bool,
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected lo:hi, got {s:?}"))?;
    let lo: f64 = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
    let hi: f64 = b.trim().parse().map_err(|e| format!("{b:?}: {e}"))?;
    Ok((lo, hi))
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = parse_pair(s)?;
    if lo.is_nan() || hi.is_nan() || lo >= hi {
        return Err(format!("empty range {s:?}"));
    }
    Ok((lo, hi))
}

fn parse_usize_range(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected lo:hi, got {s:?}"))?;
    let lo: usize = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
    let hi: usize = b.trim().parse().map_err(|e| format!("{b:?}: {e}"))?;
    if lo >= hi {
        return Err(format!("empty range {s:?}"));
    }
    Ok((lo, hi))
}

fn parse_grid(s: &str) -> Result<(f64, f64, f64), String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected x_lo:x_hi:h, got {s:?}"));
    }
    let v = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<Vec<f64>, String>>()?;
    Ok((v[0], v[1], v[2]))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Dispersion(a) => commands::dispersion(&a),
        Command::Wave(a) => commands::wave(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Solvable(a) => commands::solvable(&a),
        Command::Fit(a) => commands::fit(&a),
        Command::Check { check } => match check {
            CheckCommand::Conj1(a) => commands::conj1(&a),
            CheckCommand::Thm2(a) => commands::thm2(&a),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(commands::Failure::Usage(msg)) => {
            use clap::CommandFactory;
            Cli::command()
                .error(clap::error::ErrorKind::ArgumentConflict, msg)
                .exit()
        }
        Err(commands::Failure::Domain(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
