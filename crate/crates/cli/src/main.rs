//! `rrdelay` command-line interface.
//!
//! Exit codes: 0 success, 1 validation error, 2 verification FAIL, 3 runtime error.

mod args;
mod commands;
mod manifest;

use std::path::Path;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use manifest::RunManifest;

const EXIT_INVALID: u8 = 1;
const EXIT_FAIL: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

/// Bad input that is not already a model validation error.
#[derive(Debug)]
pub struct Invalid(pub String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

fn exit_code(err: &anyhow::Error) -> u8 {
    use rrdelay::Error as E;
    for cause in err.chain() {
        if cause.is::<Invalid>() {
            return EXIT_INVALID;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Domain { .. }
                | E::Infeasible(_)
                | E::FamilyMismatch { .. }
                | E::NearZeroWealth { .. }
                | E::OutOfRange { .. }
                | E::Config(_) => EXIT_INVALID,
                _ => EXIT_RUNTIME,
            };
        }
    }
    EXIT_RUNTIME
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let (invocation, config) = match &cli.command {
        Command::Rerun(a) => {
            let m = RunManifest::read(&a.manifest).map_err(|e| Invalid(format!("{e:#}")))?;
            (m.invocation, m.config)
        }
        cmd => commands::resolve(&cli.global, cmd)?,
    };
    let out = cli.global.out.as_path();
    let outcome = commands::execute(&invocation, &config, out)?;
    let outputs = outcome.outputs.iter().map(|p| relative(p, out)).collect();
    let manifest = RunManifest::new(invocation, config, outputs);
    let path = manifest.write(out)?;
    for p in &outcome.outputs {
        println!("wrote {}", p.display());
    }
    println!("wrote {}", path.display());
    if !outcome.pass {
        eprintln!("verification FAIL; see {}", out.display());
    }
    Ok(outcome.pass)
}

fn relative(p: &Path, base: &Path) -> String {
    p.strip_prefix(base).unwrap_or(p).to_string_lossy().into_owned()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INVALID } else { 0 });
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAIL),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
