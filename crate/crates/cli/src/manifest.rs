use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rrdelay::sweep::{CaseSpec, SweepParam};
use rrdelay::ModelInputs;
use serde::{Deserialize, Serialize};

use crate::args::Which;

pub const MANIFEST_SUFFIX: &str = ".manifest.json";

/// Fully resolved subcommand options. Together with the configuration this is
/// everything an output depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Invocation {
    Strategy {
        t_grid: Vec<f64>,
        x: f64,
        m1: f64,
        pi_fraction: bool,
        ode_dt: f64,
    },
    Sweep {
        param: SweepParam,
        lo: f64,
        hi: f64,
        points: usize,
        dt: f64,
        cases: Vec<CaseSpec>,
    },
    Simulate {
        dt: f64,
        n_paths: usize,
        seed: u64,
        write_paths: usize,
        ode_dt: f64,
    },
    Verify {
        which: Which,
        grid_n: usize,
        ode_dt: f64,
        fault_kappa: Option<f64>,
        fk_dt: f64,
        n_paths: usize,
        seed: u64,
        figure_points: usize,
        figure_dt: f64,
    },
    ReproduceFigures {
        points: usize,
        dt: f64,
    },
}

impl Invocation {
    pub fn name(&self) -> &'static str {
        match self {
            Invocation::Strategy { .. } => "strategy",
            Invocation::Sweep { .. } => "sweep",
            Invocation::Simulate { .. } => "simulate",
            Invocation::Verify { .. } => "verify",
            Invocation::ReproduceFigures { .. } => "reproduce-figures",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Invocation::Simulate { seed, .. } | Invocation::Verify { seed, .. } => Some(*seed),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ResolvedConfig {
    Model(ModelInputs),
    Figures { exponential: ModelInputs, power: ModelInputs },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub timestamp: String,
    pub subcommand: String,
    pub seed: Option<u64>,
    pub invocation: Invocation,
    pub config: ResolvedConfig,
    /// Paths relative to the output directory.
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(invocation: Invocation, config: ResolvedConfig, outputs: Vec<String>) -> Self {
        RunManifest {
            tool: "rrdelay".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339(),
            subcommand: invocation.name().to_string(),
            seed: invocation.seed(),
            invocation,
            config,
            outputs,
        }
    }

    pub fn path_in(&self, out: &Path) -> PathBuf {
        out.join(format!("{}{MANIFEST_SUFFIX}", self.subcommand))
    }

    pub fn write(&self, out: &Path) -> Result<PathBuf> {
        let path = self.path_in(out);
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }
}
