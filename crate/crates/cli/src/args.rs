use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rrdelay::sweep::SweepParam;
use rrdelay::UtilityFamily;
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "rrdelay", version, about = "Equilibrium reinsurance and investment under bounded wealth memory")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// JSON model configuration. Defaults to the bundled base parameters for `--family`.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Output directory, created if missing.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,

    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Time step. Euler step for `simulate` and the Monte Carlo check,
    /// backward ODE step otherwise.
    #[arg(long, global = true)]
    pub dt: Option<f64>,

    #[arg(long, global = true)]
    pub n_paths: Option<usize>,

    #[arg(long, global = true, value_enum)]
    pub family: Option<FamilyArg>,

    /// Risk-aversion case. `custom` keeps the points of `--config`.
    #[arg(long, global = true, value_enum)]
    pub case: Option<CaseArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    #[value(name = "exp", alias = "exponential")]
    Exp,
    Power,
}

impl From<FamilyArg> for UtilityFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Exp => UtilityFamily::Exponential,
            FamilyArg::Power => UtilityFamily::Power,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CaseArg {
    #[value(name = "I")]
    I,
    #[value(name = "II")]
    II,
    Custom,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Equilibrium strategy over a time grid.
    Strategy(StrategyArgs),
    /// One-at-a-time parameter sweep of the strategy at t = 0.
    Sweep(SweepArgs),
    /// Simulate the delayed wealth under the equilibrium strategy.
    Simulate(SimulateArgs),
    /// Residual, Monte Carlo and sensitivity checks with a PASS/FAIL report.
    Verify(VerifyArgs),
    /// Regenerate the sweep data behind every figure panel.
    ReproduceFigures(FiguresArgs),
    /// Re-run the invocation recorded in a manifest.
    Rerun(RerunArgs),
}

#[derive(Debug, Args)]
pub struct StrategyArgs {
    /// Comma-separated times; an empty string gives a header-only CSV.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "t_steps")]
    pub t: Option<String>,

    /// Uniform grid of `n + 1` points over [0, T]. Default 20.
    #[arg(long)]
    pub t_steps: Option<usize>,

    /// Wealth state. Also adds a `pi_fraction` column.
    #[arg(long, allow_hyphen_values = true)]
    pub x: Option<f64>,

    /// Integrated memory state (power family only).
    #[arg(long, allow_hyphen_values = true)]
    pub m1: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_parser = parse_param)]
    pub param: SweepParam,

    /// `lo,hi`. Defaults bracket the base value.
    #[arg(long, allow_hyphen_values = true)]
    pub range: Option<String>,

    #[arg(long, default_value_t = rrdelay::sweep::DEFAULT_SWEEP_POINTS)]
    pub points: usize,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Number of leading paths written as CSV.
    #[arg(long, default_value_t = 1)]
    pub write_paths: usize,

    /// Backward ODE step for the power strategy.
    #[arg(long)]
    pub ode_dt: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Which {
    Eq21,
    Eq36,
    Coeff,
    Fk,
    Figures,
    All,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(value_enum, default_value = "all")]
    pub which: Which,

    /// Points per axis of the (t, x, m1) residual grid.
    #[arg(long, default_value_t = 10)]
    pub grid_n: usize,

    #[arg(long)]
    pub ode_dt: Option<f64>,

    /// Relative perturbation of kappa in the ansatz, e.g. 0.01. The check must then fail.
    #[arg(long, allow_hyphen_values = true)]
    pub fault_kappa: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FiguresArgs {
    /// Directory holding `table1_exponential.json` and `table1_power.json`.
    /// Defaults to the copies compiled into the binary.
    #[arg(long, value_name = "DIR")]
    pub config_dir: Option<PathBuf>,

    #[arg(long, default_value_t = rrdelay::sweep::DEFAULT_SWEEP_POINTS)]
    pub points: usize,
}

#[derive(Debug, Args)]
pub struct RerunArgs {
    pub manifest: PathBuf,
}

fn parse_param(s: &str) -> Result<SweepParam, String> {
    s.parse().map_err(|e: rrdelay::Error| e.to_string())
}
