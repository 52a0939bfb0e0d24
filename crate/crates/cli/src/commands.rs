use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use rrdelay::exputil::{exp_pi_fraction, exp_strategy, DEFAULT_X_FLOOR};
use rrdelay::model::DelayConstants;
use rrdelay::powutil::{power_strategy, solve_g_system, PowerState};
use rrdelay::simulate::{mc_reward, path_seed, simulate_path, SimConfig, StrategySource};
use rrdelay::sweep::{
    check_figures, compute_figures, reproduce_figures, run_sweep, sweep_values, write_sweep_csv, CaseSpec, FigureBases,
    DEFAULT_SWEEP_DT,
};
use rrdelay::verify::{
    coefficient_match_check, feynman_kac_check, feynman_kac_compare, residual_eq21, residual_eq36, AnsatzSource,
    GridSpec, SweepSpec,
};
use rrdelay::{ModelInputs, ModelParams, RiskCase, UtilityFamily};
use serde_json::{json, Value};

use crate::args::{CaseArg, Command, FiguresArgs, GlobalOpts, Which};
use crate::manifest::{Invocation, ResolvedConfig};
use crate::Invalid;

pub const DEFAULT_SEED: u64 = 20_240_601;
pub const DEFAULT_ODE_DT: f64 = 1e-4;
pub const DEFAULT_SIM_DT: f64 = 1e-3;
pub const DEFAULT_SIM_PATHS: usize = 10_000;
pub const DEFAULT_VERIFY_PATHS: usize = 20_000;
const DEFAULT_T_STEPS: usize = 20;

/// Scaled residual bound for both pseudo-HJB checks.
pub const RESIDUAL_TOL: f64 = 1e-6;
/// Maximiser must land within one coarse cell of the candidate.
pub const CELL_TOL: f64 = 1.0;
pub const COEFF_TOL: f64 = 1e-8;

pub const BUNDLED_EXPONENTIAL: &str = include_str!("../../../configs/table1_exponential.json");
pub const BUNDLED_POWER: &str = include_str!("../../../configs/table1_power.json");

pub fn bundled(family: UtilityFamily) -> ModelInputs {
    let text = match family {
        UtilityFamily::Exponential => BUNDLED_EXPONENTIAL,
        UtilityFamily::Power => BUNDLED_POWER,
    };
    ModelInputs::from_json_str(text).expect("bundled configs parse")
}

pub struct Outcome {
    pub outputs: Vec<PathBuf>,
    pub pass: bool,
}

fn resolve_model(g: &GlobalOpts) -> Result<ModelInputs> {
    let mut inputs = match &g.config {
        Some(path) => ModelInputs::from_path(path).map_err(|e| Invalid(e.to_string()))?,
        None => bundled(g.family.map_or(UtilityFamily::Exponential, Into::into)),
    };
    if let Some(f) = g.family {
        inputs.risk_aversion.family = f.into();
    }
    match g.case {
        Some(CaseArg::I) => inputs = inputs.with_points(&RiskCase::I.points()),
        Some(CaseArg::II) => inputs = inputs.with_points(&RiskCase::II.points()),
        Some(CaseArg::Custom) if g.config.is_none() => {
            return Err(Invalid("--case custom needs --config".into()).into());
        }
        _ => {}
    }
    inputs.clone().build()?;
    Ok(inputs)
}

fn parse_list(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| v.parse::<f64>().map_err(|e| Invalid(format!("{what}: {v:?}: {e}")).into()))
        .collect()
}

/// Turns command-line arguments into a self-contained invocation.
pub fn resolve(g: &GlobalOpts, cmd: &Command) -> Result<(Invocation, ResolvedConfig)> {
    if let Command::ReproduceFigures(args) = cmd {
        return resolve_figures(g, args);
    }
    let model = resolve_model(g)?;
    let seed = g.seed.unwrap_or(DEFAULT_SEED);
    let inv = match cmd {
        Command::Strategy(a) => {
            let t_grid = match &a.t {
                Some(s) => parse_list(s, "--t")?,
                None => sweep_values(0.0, model.horizon, a.t_steps.unwrap_or(DEFAULT_T_STEPS) + 1),
            };
            let m10 = model.delay.stationary_memory(model.x0);
            Invocation::Strategy {
                t_grid,
                x: a.x.unwrap_or(model.x0),
                m1: a.m1.unwrap_or(m10),
                pi_fraction: a.x.is_some(),
                ode_dt: g.dt.unwrap_or(DEFAULT_ODE_DT),
            }
        }
        Command::Sweep(a) => {
            let (lo, hi) = match &a.range {
                Some(s) => match parse_list(s, "--range")?[..] {
                    [lo, hi] if lo <= hi => (lo, hi),
                    _ => return Err(Invalid(format!("--range wants lo,hi with lo <= hi, got {s:?}")).into()),
                },
                None => a.param.default_range(),
            };
            let cases = match (g.case, &g.config) {
                (Some(CaseArg::I), _) => vec![CaseSpec::from(RiskCase::I)],
                (Some(CaseArg::II), _) => vec![CaseSpec::from(RiskCase::II)],
                (Some(CaseArg::Custom), _) | (None, Some(_)) => vec![CaseSpec {
                    label: "custom".into(),
                    points: model.risk_aversion.points.iter().map(|&[g, p]| (g, p)).collect(),
                }],
                (None, None) => vec![CaseSpec::from(RiskCase::I), CaseSpec::from(RiskCase::II)],
            };
            Invocation::Sweep {
                param: a.param,
                lo,
                hi,
                points: a.points,
                dt: g.dt.unwrap_or(DEFAULT_SWEEP_DT),
                cases,
            }
        }
        Command::Simulate(a) => Invocation::Simulate {
            dt: g.dt.unwrap_or(DEFAULT_SIM_DT),
            n_paths: g.n_paths.unwrap_or(DEFAULT_SIM_PATHS),
            seed,
            write_paths: a.write_paths,
            ode_dt: a.ode_dt.unwrap_or(DEFAULT_ODE_DT),
        },
        Command::Verify(a) => Invocation::Verify {
            which: a.which,
            grid_n: a.grid_n,
            ode_dt: a.ode_dt.unwrap_or(DEFAULT_ODE_DT),
            fault_kappa: a.fault_kappa,
            fk_dt: g.dt.unwrap_or(DEFAULT_SIM_DT),
            n_paths: g.n_paths.unwrap_or(DEFAULT_VERIFY_PATHS),
            seed,
            figure_points: rrdelay::sweep::DEFAULT_SWEEP_POINTS,
            figure_dt: DEFAULT_SWEEP_DT,
        },
        Command::ReproduceFigures(_) | Command::Rerun(_) => unreachable!("handled by the caller"),
    };
    Ok((inv, ResolvedConfig::Model(model)))
}

fn resolve_figures(g: &GlobalOpts, a: &FiguresArgs) -> Result<(Invocation, ResolvedConfig)> {
    let load = |family: UtilityFamily, file: &str| -> Result<ModelInputs> {
        let inputs = match &a.config_dir {
            Some(dir) => ModelInputs::from_path(&dir.join(file)).map_err(|e| Invalid(e.to_string()))?,
            None => bundled(family),
        };
        if inputs.risk_aversion.family != family {
            return Err(Invalid(format!("{file}: expected the {family} family")).into());
        }
        inputs.clone().build()?;
        Ok(inputs)
    };
    let exponential = load(UtilityFamily::Exponential, "table1_exponential.json")?;
    let power = load(UtilityFamily::Power, "table1_power.json")?;
    let inv = Invocation::ReproduceFigures {
        points: a.points,
        dt: g.dt.unwrap_or(DEFAULT_SWEEP_DT),
    };
    Ok((inv, ResolvedConfig::Figures { exponential, power }))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn model_of(cfg: &ResolvedConfig) -> Result<ModelParams> {
    match cfg {
        ResolvedConfig::Model(m) => Ok(m.clone().build()?),
        ResolvedConfig::Figures { .. } => Err(Invalid("this subcommand needs a single model configuration".into()).into()),
    }
}

pub fn execute(inv: &Invocation, cfg: &ResolvedConfig, out: &Path) -> Result<Outcome> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    match inv {
        Invocation::Strategy {
            t_grid,
            x,
            m1,
            pi_fraction,
            ode_dt,
        } => strategy(&model_of(cfg)?, t_grid, *x, *m1, *pi_fraction, *ode_dt, out),
        Invocation::Sweep {
            param,
            lo,
            hi,
            points,
            dt,
            cases,
        } => {
            let ResolvedConfig::Model(base) = cfg else {
                return Err(Invalid("sweep needs a single model configuration".into()).into());
            };
            let rows = run_sweep(base, *param, &sweep_values(*lo, *hi, *points), cases, *dt);
            let path = out.join(format!("sweep_{param}.csv"));
            write_sweep_csv(&rows, create(&path)?)?;
            Ok(Outcome {
                outputs: vec![path],
                pass: true,
            })
        }
        Invocation::Simulate {
            dt,
            n_paths,
            seed,
            write_paths,
            ode_dt,
        } => simulate(&model_of(cfg)?, *dt, *n_paths, *seed, *write_paths, *ode_dt, out),
        Invocation::Verify { .. } => verify(&model_of(cfg)?, inv, out),
        Invocation::ReproduceFigures { points, dt } => {
            let ResolvedConfig::Figures { exponential, power } = cfg else {
                return Err(Invalid("reproduce-figures needs the exponential and power configurations".into()).into());
            };
            let bases = FigureBases {
                exponential: exponential.clone(),
                power: power.clone(),
            };
            let written = reproduce_figures(&bases, out, *points, *dt)?;
            let panels: Vec<_> = written.iter().map(|(p, _)| p.clone()).collect();
            let report = check_figures(&panels);
            let report_path = out.join("figures_report.json");
            write_json(&report_path, &report)?;
            let mut outputs: Vec<PathBuf> = written.into_iter().map(|(_, p)| p).collect();
            outputs.push(report_path);
            Ok(Outcome { outputs, pass: true })
        }
    }
}

fn strategy_source(params: &ModelParams, ode_dt: f64) -> Result<StrategySource> {
    Ok(match params.family() {
        UtilityFamily::Exponential => StrategySource::Exponential,
        UtilityFamily::Power => StrategySource::Power(Arc::new(solve_g_system(params, ode_dt)?)),
    })
}

fn strategy(params: &ModelParams, t_grid: &[f64], x: f64, m1: f64, with_fraction: bool, ode_dt: f64, out: &Path) -> Result<Outcome> {
    let source = strategy_source(params, ode_dt)?;
    let path = out.join("strategy.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    let mut header = vec!["t", "q_hat", "pi_amount"];
    if with_fraction {
        header.push("pi_fraction");
    }
    w.write_record(&header)?;
    for &t in t_grid {
        let (u, fraction) = match &source {
            StrategySource::Power(sol) => {
                let u = power_strategy(sol, params, &PowerState::new(t, x, m1))?;
                if with_fraction && (x.is_nan() || x.abs() < DEFAULT_X_FLOOR) {
                    return Err(rrdelay::Error::NearZeroWealth { x, floor: DEFAULT_X_FLOOR }.into());
                }
                (u, u.pi_amount / x)
            }
            _ => {
                let u = exp_strategy(params, t)?;
                let f = if with_fraction { exp_pi_fraction(params, t, x, DEFAULT_X_FLOOR)? } else { f64::NAN };
                (u, f)
            }
        };
        let mut row = vec![t.to_string(), u.q.to_string(), u.pi_amount.to_string()];
        if with_fraction {
            row.push(fraction.to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(Outcome {
        outputs: vec![path],
        pass: true,
    })
}

fn simulate(params: &ModelParams, dt: f64, n_paths: usize, seed: u64, write_paths: usize, ode_dt: f64, out: &Path) -> Result<Outcome> {
    let cfg = SimConfig::new(dt, n_paths, seed, strategy_source(params, ode_dt)?);
    let mut outputs = Vec::new();
    let k = write_paths.min(n_paths);
    if k > 0 {
        let dir = out.join("paths");
        std::fs::create_dir_all(&dir)?;
        for i in 0..k {
            let p = simulate_path(params, &cfg, path_seed(seed, i as u64))?;
            let path = dir.join(format!("path_{i}.csv"));
            p.write_csv(create(&path)?)?;
            outputs.push(path);
        }
    }
    // A single path has no standard error; the summary then only echoes the run.
    let (estimate, fk) = if n_paths >= 2 {
        let est = mc_reward(params, &cfg)?;
        let fk = feynman_kac_compare(params, &cfg, &est)?;
        (Some(est), Some(fk))
    } else {
        (None, None)
    };
    let summary = json!({
        "family": params.family(),
        "dt": dt,
        "n_paths": n_paths,
        "seed": seed,
        "estimate": estimate,
        "feynman_kac": fk,
    });
    let path = out.join("simulate.json");
    write_json(&path, &summary)?;
    outputs.push(path);
    Ok(Outcome { outputs, pass: true })
}

fn verify(params: &ModelParams, inv: &Invocation, out: &Path) -> Result<Outcome> {
    let &Invocation::Verify {
        which,
        grid_n,
        ode_dt,
        fault_kappa,
        fk_dt,
        n_paths,
        seed,
        figure_points,
        figure_dt,
    } = inv
    else {
        unreachable!()
    };
    let wants = |w: Which| which == w || which == Which::All;
    let params = match fault_kappa {
        Some(eps) => {
            let d = *params.derived();
            params.clone().with_constants_override(DelayConstants {
                kappa: (1.0 + eps) * d.kappa,
                ..d
            })
        }
        None => params.clone(),
    };
    let source = match params.family() {
        UtilityFamily::Exponential => AnsatzSource::Exponential,
        UtilityFamily::Power => AnsatzSource::Power(Arc::new(solve_g_system(&params, ode_dt)?)),
    };
    let grid = GridSpec::standard(&params, grid_n);
    let mut outputs = Vec::new();
    let mut checks = serde_json::Map::new();

    if wants(Which::Eq21) {
        let res = residual_eq21(&params, &source, &grid)?;
        let path = out.join("eq21_residuals.csv");
        res.write_csv(create(&path)?)?;
        outputs.push(path);
        let pass = res.max_scaled() <= RESIDUAL_TOL && res.m2_spread() <= RESIDUAL_TOL && !res.nodes.is_empty();
        checks.insert(
            "eq21".into(),
            json!({
                "pass": pass,
                "tolerance": { "max_scaled": RESIDUAL_TOL, "m2_spread": RESIDUAL_TOL },
                "nodes": res.nodes.len(),
                "skipped": res.skipped,
                "max_scaled": res.max_scaled(),
                "max_abs": res.max_abs(),
                "rms": res.rms(),
                "m2_spread": res.m2_spread(),
                "warnings": res.warnings,
            }),
        );
    }
    if wants(Which::Eq36) {
        let res = residual_eq36(&params, &source, &grid, SweepSpec::default())?;
        let path = out.join("eq36_residuals.csv");
        res.write_csv(create(&path)?)?;
        outputs.push(path);
        let pass = res.max_scaled_sup() <= RESIDUAL_TOL
            && res.max_cell_distance() <= CELL_TOL
            && res.all_concave()
            && !res.nodes.is_empty();
        checks.insert(
            "eq36".into(),
            json!({
                "pass": pass,
                "tolerance": { "max_scaled_sup": RESIDUAL_TOL, "max_cell_distance": CELL_TOL },
                "nodes": res.nodes.len(),
                "skipped": res.skipped,
                "max_scaled_sup": res.max_scaled_sup(),
                "max_cell_distance": res.max_cell_distance(),
                "max_refined_distance": res.max_refined_distance(),
                "all_concave": res.all_concave(),
                "sweep": res.sweep,
            }),
        );
    }
    if wants(Which::Coeff) {
        let entry = if params.family() == UtilityFamily::Exponential {
            let mut rows = Vec::new();
            for &gamma in params.dist().gammas() {
                for &t in &grid.t {
                    rows.push(coefficient_match_check(&params, gamma, t, 1.0)?);
                }
            }
            let worst = |f: fn(&rrdelay::verify::CoefficientReport) -> f64| rows.iter().map(f).fold(0.0, f64::max);
            let (slope, intercept) = (worst(|r| r.scaled_slope()), worst(|r| r.scaled_intercept()));
            json!({
                "pass": slope <= COEFF_TOL && intercept <= COEFF_TOL,
                "tolerance": COEFF_TOL,
                "max_scaled_slope": slope,
                "max_scaled_intercept": intercept,
                "rows": rows,
            })
        } else if which == Which::Coeff {
            return Err(Invalid("coeff applies to the exponential family only".into()).into());
        } else {
            json!({ "pass": true, "skipped": "exponential family only" })
        };
        checks.insert("coeff".into(), entry);
    }
    if wants(Which::Fk) {
        let strategy = match &source {
            AnsatzSource::Exponential => StrategySource::Exponential,
            AnsatzSource::Power(sol) => StrategySource::Power(sol.clone()),
        };
        let report = feynman_kac_check(&params, &SimConfig::new(fk_dt, n_paths, seed, strategy))?;
        let mut v = serde_json::to_value(&report)?;
        v["rule"] = Value::from(format!(
            "|mc - Y| <= 3 SE + {} * dt * |Y|",
            rrdelay::verify::FK_DT_ALLOWANCE
        ));
        checks.insert("fk".into(), v);
    }
    if wants(Which::Figures) {
        let bases = FigureBases {
            exponential: bundled(UtilityFamily::Exponential),
            power: bundled(UtilityFamily::Power),
        };
        let report = check_figures(&compute_figures(&bases, figure_points, figure_dt));
        checks.insert("figures".into(), serde_json::to_value(&report)?);
    }

    let pass = checks.values().all(|c| c["pass"].as_bool() == Some(true));
    let report = json!({
        "family": params.family(),
        "which": which,
        "fault_kappa": fault_kappa,
        "pass": pass,
        "checks": checks,
    });
    let path = out.join("verify_report.json");
    write_json(&path, &report)?;
    outputs.push(path);
    Ok(Outcome { outputs, pass })
}
