mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::RunConfig;

/// Admissible radii, coverings, bootstrap exponents and heat-flow experiments
/// on model Riemannian manifolds.
#[derive(Parser)]
#[command(name = "riemheat", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Sample the admissible radius field and check its regularity.
    Radius(RadiusArgs),
    /// Build a (k, eps)-admissible covering and certify its overlap.
    Cover(CoverArgs),
    /// Print the bootstrap exponent table.
    Exponents(ExponentArgs),
    /// Solve the forced heat equation and run the estimate checks.
    Solve(SolveArgs),
    /// Run an acceptance suite; exits 0 iff every criterion passes.
    Verify(VerifyArgs),
}

#[derive(Args, Serialize)]
struct Common {
    /// JSON config with flat keys; flags override its entries.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct ModelArgs {
    /// e.g. euclidean, perturbed-euclidean(0.1,1), hyperbolic-halfplane, hyperbolic-ball, flat-torus(6.283)
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    box_lo: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    box_hi: Option<Vec<f64>>,
    /// Periodic working box (perturbed model).
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    periodic: bool,
}

#[derive(Args, Serialize)]
struct FieldArgs {
    /// Sample counts, e.g. 16x16.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    grid_lo: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    grid_hi: Option<Vec<f64>>,
    #[arg(long)]
    m: Option<u32>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    sample_density: Option<f64>,
    #[arg(long)]
    bisection_tol: Option<f64>,
    #[arg(long)]
    max_radius: Option<f64>,
}

#[derive(Args, Serialize)]
struct RadiusArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    field: FieldArgs,
}

#[derive(Args, Serialize)]
struct CoverArgs {
    #[command(flatten)]
    #[serde(flatten)]
    radius: RadiusArgs,
    /// Covering level.
    #[arg(long)]
    k: Option<u32>,
}

#[derive(Args, Serialize)]
struct ExponentArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
    #[arg(long)]
    m: Option<u32>,
    #[arg(long)]
    n: Option<u32>,
    /// Rational, e.g. 4, 5/2 or 2.5.
    #[arg(long)]
    r: Option<String>,
    /// sections or functions.
    #[arg(long)]
    variant: Option<String>,
}

#[derive(Args, Serialize)]
struct SolveArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelArgs,
    /// scalar or one-form.
    #[arg(long)]
    kind: Option<String>,
    /// Cells per axis.
    #[arg(long)]
    cells: Option<usize>,
    /// Target spacing; overrides `cells`.
    #[arg(long)]
    h: Option<f64>,
    /// Solver sub-box of the working box (needed for the global estimate
    /// unless the model is periodic).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    solve_lo: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    solve_hi: Option<Vec<f64>>,
    /// zero, eigen, or a JSON object such as
    /// {"name":"bump","center":[0,0],"radius":1,"amplitude":1,"profile":{"kind":"constant"}}
    #[arg(long)]
    forcing: Option<String>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    dt: Option<f64>,
    /// Also run the local and global estimate experiments.
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    estimates: bool,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    center: Option<Vec<f64>>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    r: Option<String>,
    #[arg(long)]
    s: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    field: FieldArgs,
}

#[derive(Args, Serialize)]
struct VerifyArgs {
    /// exponents, radius, covering, volume, norms, heat or all.
    suite: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
}

fn configure_threads() -> riemheat::Result<()> {
    if let Ok(v) = std::env::var("MP_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| riemheat::Error::Config(format!("MP_THREADS = `{v}` must be a positive integer")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| riemheat::Error::Config(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> riemheat::Result<bool> {
    configure_threads()?;
    match cli.command {
        Command::Radius(a) => commands::radius(&RunConfig::load(a.common.config.as_deref(), &a)?),
        Command::Cover(a) => commands::cover(&RunConfig::load(a.radius.common.config.as_deref(), &a)?),
        Command::Exponents(a) => commands::exponents(&RunConfig::load(a.common.config.as_deref(), &a)?),
        Command::Solve(a) => commands::solve(&RunConfig::load(a.common.config.as_deref(), &a)?),
        Command::Verify(a) => commands::verify(&RunConfig::load(a.common.config.as_deref(), &a)?),
    }
}

/// Exit codes: 0 success, 1 failed checks, 2 config error, 3 domain error,
/// 4 any other error.
fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                riemheat::Error::Config(_) | riemheat::Error::Json(_) => 2,
                riemheat::Error::Domain(_) => 3,
                _ => 4,
            })
        }
    }
}
