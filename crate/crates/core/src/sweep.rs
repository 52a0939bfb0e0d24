//! One-parameter sensitivity sweeps of the initial strategy `(q_hat(0), pi_hat(0))`
//! and the figure panels built from them.
//!
//! Each sweep point rebuilds the model, so the delay constants are re-solved
//! and, under power utility, the `g` system is re-integrated. `pi_hat(0)` is
//! reported both as an amount and as a proportion of `x0`; the state is
//! `(x0, m10)` with `m10` recomputed from the swept delay parameters.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ModelInputs;
use crate::error::{Error, Result};
use crate::exputil::exp_strategy;
use crate::model::{Control, ModelParams, RiskCase, UtilityFamily};
use crate::powutil::{power_strategy, solve_g_system, PowerState};

/// Absolute tolerance below which a change of sign between neighbouring sweep
/// points is treated as noise.
pub const NOISE_BAND: f64 = 1e-10;

/// ODE step used for power sweep points.
pub const DEFAULT_SWEEP_DT: f64 = 1e-3;

pub const DEFAULT_SWEEP_POINTS: usize = 41;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    Alpha,
    Beta,
    H,
    Mu1,
    Mu2,
    Eta2,
    R,
    Mu,
    Sigma,
}

impl SweepParam {
    pub const ALL: [SweepParam; 9] = [
        SweepParam::Alpha,
        SweepParam::Beta,
        SweepParam::H,
        SweepParam::Mu1,
        SweepParam::Mu2,
        SweepParam::Eta2,
        SweepParam::R,
        SweepParam::Mu,
        SweepParam::Sigma,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Alpha => "alpha",
            SweepParam::Beta => "beta",
            SweepParam::H => "h",
            SweepParam::Mu1 => "mu1",
            SweepParam::Mu2 => "mu2",
            SweepParam::Eta2 => "eta2",
            SweepParam::R => "r",
            SweepParam::Mu => "mu",
            SweepParam::Sigma => "sigma",
        }
    }

    /// Default range, bracketing the base parameter set.
    pub fn default_range(self) -> (f64, f64) {
        match self {
            SweepParam::Alpha => (0.05, 1.2),
            SweepParam::Beta => (0.0, 0.5),
            SweepParam::H => (0.25, 4.0),
            SweepParam::Mu1 => (0.05, 0.2),
            SweepParam::Mu2 => (0.1, 0.4),
            SweepParam::Eta2 => (0.3, 0.8),
            SweepParam::R => (0.02, 0.18),
            SweepParam::Mu => (0.12, 0.4),
            SweepParam::Sigma => (0.3, 1.0),
        }
    }

    /// Sets the parameter. Under power utility `eta1` follows `eta2` so that
    /// `eta = 0` keeps holding.
    pub fn apply(self, inputs: &mut ModelInputs, value: f64) {
        match self {
            SweepParam::Alpha => inputs.delay.alpha = value,
            SweepParam::Beta => inputs.delay.beta = value,
            SweepParam::H => inputs.delay.h = value,
            SweepParam::Mu1 => inputs.insurance.mu1 = value,
            SweepParam::Mu2 => inputs.insurance.mu2 = value,
            SweepParam::Eta2 => {
                inputs.insurance.eta2 = value;
                if inputs.risk_aversion.family == UtilityFamily::Power {
                    inputs.insurance.eta1 = value;
                }
            }
            SweepParam::R => inputs.financial.r = value,
            SweepParam::Mu => inputs.financial.mu = value,
            SweepParam::Sigma => inputs.financial.sigma = value,
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SweepParam::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::domain("parameter", format!("unknown sweep parameter {s:?}")))
    }
}

/// `n` evenly spaced values over `[lo, hi]`.
pub fn sweep_values(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// A named risk-aversion distribution to sweep under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSpec {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl From<RiskCase> for CaseSpec {
    fn from(case: RiskCase) -> Self {
        CaseSpec {
            label: case.label().to_string(),
            points: case.points().to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InitialStrategy {
    pub q_hat: f64,
    pub pi_amount: f64,
    /// `pi_amount / x0`
    pub pi: f64,
}

/// `(q_hat(0), pi_hat(0))` at `(x0, m10)`.
pub fn initial_strategy(params: &ModelParams, dt: f64) -> Result<InitialStrategy> {
    let ctrl: Control = match params.family() {
        UtilityFamily::Exponential => exp_strategy(params, 0.0)?,
        UtilityFamily::Power => {
            let sol = solve_g_system(params, dt)?;
            if let Some(ex) = sol.explosion() {
                return Err(Error::Exploded { t: ex.t });
            }
            power_strategy(&sol, params, &PowerState::new(0.0, params.x0(), params.m10()))?
        }
    };
    Ok(InitialStrategy {
        q_hat: ctrl.q,
        pi_amount: ctrl.pi_amount,
        pi: ctrl.pi_amount / params.x0(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub param_value: f64,
    pub case: String,
    pub q_hat_0: Option<f64>,
    pub pi_amount_0: Option<f64>,
    pub pi_0: Option<f64>,
    /// Why the point could not be evaluated.
    pub invalid: Option<String>,
}

/// Sweeps `param` over `values` for every case; invalid points become rows
/// with a reason instead of aborting the run. Rows are ordered by value, then case.
pub fn run_sweep(base: &ModelInputs, param: SweepParam, values: &[f64], cases: &[CaseSpec], dt: f64) -> Vec<SweepRow> {
    let jobs: Vec<(f64, &CaseSpec)> = values.iter().flat_map(|&v| cases.iter().map(move |c| (v, c))).collect();
    jobs.par_iter()
        .map(|&(value, case)| {
            let mut inputs = base.clone().with_points(&case.points);
            param.apply(&mut inputs, value);
            let res = inputs.build().and_then(|p| initial_strategy(&p, dt));
            match res {
                Ok(s) => SweepRow {
                    param_value: value,
                    case: case.label.clone(),
                    q_hat_0: Some(s.q_hat),
                    pi_amount_0: Some(s.pi_amount),
                    pi_0: Some(s.pi),
                    invalid: None,
                },
                Err(e) => SweepRow {
                    param_value: value,
                    case: case.label.clone(),
                    q_hat_0: None,
                    pi_amount_0: None,
                    pi_0: None,
                    invalid: Some(e.to_string()),
                },
            }
        })
        .collect()
}

pub fn write_sweep_csv<W: std::io::Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["param_value", "case", "q_hat_0", "pi_amount_0", "pi_0", "invalid"])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.param_value.to_string(),
            r.case.clone(),
            opt(r.q_hat_0),
            opt(r.pi_amount_0),
            opt(r.pi_0),
            r.invalid.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    QHat,
    Pi,
}

impl Quantity {
    fn of(self, row: &SweepRow) -> Option<f64> {
        match self {
            Quantity::QHat => row.q_hat_0,
            Quantity::Pi => row.pi_0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Increasing,
    Decreasing,
    /// Decreasing, then increasing, with the minimum strictly inside the range.
    InteriorMinimum,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PanelSpec {
    pub figure: u8,
    pub panel: char,
    pub family: UtilityFamily,
    pub param: SweepParam,
    pub quantity: Quantity,
    pub cases: Vec<RiskCase>,
    pub expected: Shape,
}

impl PanelSpec {
    pub fn file_name(&self) -> String {
        format!("fig{}_{}.csv", self.figure, self.panel)
    }
}

fn expected_shape(family: UtilityFamily, param: SweepParam) -> Shape {
    use SweepParam::*;
    match (family, param) {
        (UtilityFamily::Exponential, Alpha) => Shape::InteriorMinimum,
        (UtilityFamily::Exponential, _) => Shape::Decreasing,
        (UtilityFamily::Power, Alpha | Mu2 | R | Sigma) => Shape::Decreasing,
        (UtilityFamily::Power, _) => Shape::Increasing,
    }
}

/// Panel layout of the six sensitivity figures.
pub fn figure_panels() -> Vec<PanelSpec> {
    use Quantity::*;
    use SweepParam::*;
    let both = vec![RiskCase::I, RiskCase::II];
    let (exp, pow) = (UtilityFamily::Exponential, UtilityFamily::Power);
    let mut layout: Vec<(u8, char, UtilityFamily, SweepParam, Quantity, Vec<RiskCase>)> = Vec::new();
    for (panel, param, q) in [('a', Alpha, QHat), ('b', Beta, QHat), ('c', H, QHat), ('d', Alpha, Pi), ('e', Beta, Pi), ('f', H, Pi)] {
        layout.push((1, panel, exp, param, q, both.clone()));
    }
    for (panel, q, case) in [('a', QHat, RiskCase::I), ('b', QHat, RiskCase::II), ('c', Pi, RiskCase::I), ('d', Pi, RiskCase::II)] {
        layout.push((2, panel, pow, Alpha, q, vec![case]));
    }
    for (panel, param, q) in [('a', Beta, QHat), ('b', Beta, Pi), ('c', H, QHat), ('d', H, Pi)] {
        layout.push((3, panel, pow, param, q, both.clone()));
    }
    for (panel, param) in [('a', Mu1), ('b', Mu2), ('c', Eta2)] {
        layout.push((4, panel, pow, param, QHat, both.clone()));
    }
    for (panel, param, case) in [
        ('a', Mu1, RiskCase::I),
        ('b', Mu2, RiskCase::I),
        ('c', Eta2, RiskCase::I),
        ('d', Mu1, RiskCase::II),
        ('e', Mu2, RiskCase::II),
        ('f', Eta2, RiskCase::II),
    ] {
        layout.push((5, panel, pow, param, Pi, vec![case]));
    }
    for (panel, param, q) in [('a', R, QHat), ('b', Mu, QHat), ('c', Sigma, QHat), ('d', R, Pi), ('e', Mu, Pi), ('f', Sigma, Pi)] {
        layout.push((6, panel, pow, param, q, both.clone()));
    }
    layout
        .into_iter()
        .map(|(figure, panel, family, param, quantity, cases)| PanelSpec {
            figure,
            panel,
            family,
            param,
            quantity,
            cases,
            expected: expected_shape(family, param),
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct PanelSeries {
    pub case: RiskCase,
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PanelData {
    pub spec: PanelSpec,
    pub param_values: Vec<f64>,
    pub series: Vec<PanelSeries>,
}

impl PanelData {
    /// `param_value,case_I[,case_II]`; empty cells mark invalid points.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![self.spec.param.name().to_string()];
        header.extend(self.series.iter().map(|s| format!("case_{}", s.case.label())));
        w.write_record(&header)?;
        for (k, v) in self.param_values.iter().enumerate() {
            let mut row = vec![v.to_string()];
            row.extend(self.series.iter().map(|s| s.values[k].map(|x| x.to_string()).unwrap_or_default()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Base inputs for the two families.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureBases {
    pub exponential: ModelInputs,
    pub power: ModelInputs,
}

impl Default for FigureBases {
    fn default() -> Self {
        FigureBases {
            exponential: ModelInputs::table1(UtilityFamily::Exponential, RiskCase::I),
            power: ModelInputs::table1(UtilityFamily::Power, RiskCase::I),
        }
    }
}

type SweepCache = Vec<((UtilityFamily, SweepParam), Vec<f64>, Vec<SweepRow>)>;

/// Computes every panel. Sweeps shared between panels are run once.
pub fn compute_figures(bases: &FigureBases, points: usize, dt: f64) -> Vec<PanelData> {
    let panels = figure_panels();
    let mut cache: SweepCache = Vec::new();
    let cases: Vec<CaseSpec> = [RiskCase::I, RiskCase::II].into_iter().map(CaseSpec::from).collect();
    let mut out = Vec::with_capacity(panels.len());
    for spec in panels {
        let key = (spec.family, spec.param);
        if !cache.iter().any(|(k, _, _)| *k == key) {
            let base = match spec.family {
                UtilityFamily::Exponential => &bases.exponential,
                UtilityFamily::Power => &bases.power,
            };
            let (lo, hi) = spec.param.default_range();
            let values = sweep_values(lo, hi, points);
            let rows = run_sweep(base, spec.param, &values, &cases, dt);
            cache.push((key, values, rows));
        }
        let (_, values, rows) = cache.iter().find(|(k, _, _)| *k == key).unwrap();
        let series = spec
            .cases
            .iter()
            .map(|&case| PanelSeries {
                case,
                values: rows.iter().filter(|r| r.case == case.label()).map(|r| spec.quantity.of(r)).collect(),
            })
            .collect();
        out.push(PanelData {
            spec,
            param_values: values.clone(),
            series,
        });
    }
    out
}

/// Writes `fig{N}_{panel}.csv` for every panel into `dir`.
pub fn reproduce_figures(bases: &FigureBases, dir: &Path, points: usize, dt: f64) -> Result<Vec<(PanelData, PathBuf)>> {
    std::fs::create_dir_all(dir)?;
    compute_figures(bases, points, dt)
        .into_iter()
        .map(|panel| {
            let path = dir.join(panel.spec.file_name());
            panel.write_csv(std::fs::File::create(&path)?)?;
            Ok((panel, path))
        })
        .collect()
}

/// Number of neighbouring pairs that move against `shape` by more than `band`.
/// Missing points break the series into separately checked runs.
pub fn shape_violations(values: &[f64], shape: Shape, band: f64) -> usize {
    let steps: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    match shape {
        Shape::Increasing => steps.iter().filter(|d| **d < -band).count(),
        Shape::Decreasing => steps.iter().filter(|d| **d > band).count(),
        Shape::InteriorMinimum => {
            let argmin = values
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .unwrap_or(0);
            let edge = usize::from(argmin == 0 || argmin + 1 >= values.len());
            edge + steps[..argmin].iter().filter(|d| **d > band).count() + steps[argmin..].iter().filter(|d| **d < -band).count()
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ShapeCheck {
    pub panel: String,
    pub case: RiskCase,
    pub expected: Shape,
    pub invalid_points: usize,
    pub violations: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct OrderCheck {
    pub figure: u8,
    pub family: UtilityFamily,
    pub param: SweepParam,
    pub quantity: Quantity,
    /// Points where case (I) is not strictly below case (II).
    pub violations: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FigureReport {
    pub shapes: Vec<ShapeCheck>,
    pub ordering: Vec<OrderCheck>,
    pub pass: bool,
}

/// Shape of every series, and case (I) below case (II) wherever both are computed.
pub fn check_figures(panels: &[PanelData]) -> FigureReport {
    let mut shapes = Vec::new();
    for p in panels {
        for s in &p.series {
            let present: Vec<f64> = s.values.iter().flatten().copied().collect();
            let invalid = s.values.len() - present.len();
            let violations = shape_violations(&present, p.spec.expected, NOISE_BAND);
            shapes.push(ShapeCheck {
                panel: format!("fig{}_{}", p.spec.figure, p.spec.panel),
                case: s.case,
                expected: p.spec.expected,
                invalid_points: invalid,
                violations,
                pass: violations == 0 && invalid == 0,
            });
        }
    }

    // Panels drawn per case are paired through (figure, param, quantity).
    let mut ordering: Vec<OrderCheck> = Vec::new();
    let mut seen: Vec<(u8, SweepParam, Quantity)> = Vec::new();
    for p in panels {
        let key = (p.spec.figure, p.spec.param, p.spec.quantity);
        if seen.contains(&key) {
            continue;
        }
        seen.push(key);
        let series: Vec<&PanelSeries> = panels
            .iter()
            .filter(|o| (o.spec.figure, o.spec.param, o.spec.quantity) == key)
            .flat_map(|o| o.series.iter())
            .collect();
        let find = |c: RiskCase| series.iter().find(|s| s.case == c);
        if let (Some(one), Some(two)) = (find(RiskCase::I), find(RiskCase::II)) {
            let violations = one
                .values
                .iter()
                .zip(&two.values)
                .filter(|(a, b)| !matches!((a, b), (Some(a), Some(b)) if a < b))
                .count();
            ordering.push(OrderCheck {
                figure: p.spec.figure,
                family: p.spec.family,
                param: p.spec.param,
                quantity: p.spec.quantity,
                violations,
                pass: violations == 0,
            });
        }
    }
    let pass = shapes.iter().all(|s| s.pass) && ordering.iter().all(|o| o.pass);
    FigureReport { shapes, ordering, pass }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn parses_parameter_names() {
        for p in SweepParam::ALL {
            assert_eq!(p.name().parse::<SweepParam>().unwrap(), p);
        }
        assert!("gamma".parse::<SweepParam>().is_err());
    }

    #[test]
    fn default_ranges_contain_base_point() {
        let base = ModelInputs::table1(UtilityFamily::Exponential, RiskCase::I);
        let at = |p: SweepParam| match p {
            SweepParam::Alpha => base.delay.alpha,
            SweepParam::Beta => base.delay.beta,
            SweepParam::H => base.delay.h,
            SweepParam::Mu1 => base.insurance.mu1,
            SweepParam::Mu2 => base.insurance.mu2,
            SweepParam::Eta2 => base.insurance.eta2,
            SweepParam::R => base.financial.r,
            SweepParam::Mu => base.financial.mu,
            SweepParam::Sigma => base.financial.sigma,
        };
        for p in SweepParam::ALL {
            let (lo, hi) = p.default_range();
            assert!(lo <= at(p) && at(p) <= hi, "{p}");
        }
        let (lo, hi) = SweepParam::Alpha.default_range();
        assert!(lo < 2f64.ln() / 2.0 && 2f64.ln() / 2.0 < hi);
        let (lo, hi) = SweepParam::H.default_range();
        assert!(lo < -2.0 * 0.4f64.ln() && -2.0 * 0.4f64.ln() < hi);
    }

    #[test]
    fn eta_co_moves_under_power() {
        let mut inputs = ModelInputs::table1(UtilityFamily::Power, RiskCase::I);
        SweepParam::Eta2.apply(&mut inputs, 0.6);
        assert_eq!(inputs.insurance.eta1, 0.6);
        let mut inputs = ModelInputs::table1(UtilityFamily::Exponential, RiskCase::I);
        SweepParam::Eta2.apply(&mut inputs, 0.6);
        assert_eq!(inputs.insurance.eta1, 0.3);
    }

    #[test]
    fn base_point_matches_closed_form() {
        let p = ModelParams::table1_exponential(RiskCase::I);
        let s = initial_strategy(&p, DEFAULT_SWEEP_DT).unwrap();
        assert_relative_eq!(s.q_hat, 0.291_510_714_328_845_56, max_relative = 1e-12);
        assert_relative_eq!(s.pi, s.pi_amount / 0.6, max_relative = 1e-15);
    }

    #[test]
    fn invalid_points_are_reported() {
        let base = ModelInputs::table1(UtilityFamily::Exponential, RiskCase::I);
        let rows = run_sweep(&base, SweepParam::Eta2, &[0.1, 0.5], &[RiskCase::I.into()], DEFAULT_SWEEP_DT);
        assert_eq!(rows.len(), 2);
        assert!(rows[0].invalid.as_deref().unwrap().contains("eta2"));
        assert!(rows[1].invalid.is_none());
        let rows = run_sweep(&base, SweepParam::Mu, &[0.05], &[RiskCase::I.into()], DEFAULT_SWEEP_DT);
        assert!(rows[0].q_hat_0.is_none());
    }

    #[test]
    fn exponential_alpha_minimum_near_threshold() {
        let base = ModelInputs::table1(UtilityFamily::Exponential, RiskCase::I);
        let values = sweep_values(0.05, 1.2, 231);
        let rows = run_sweep(&base, SweepParam::Alpha, &values, &[RiskCase::I.into()], DEFAULT_SWEEP_DT);
        let q: Vec<f64> = rows.iter().map(|r| r.q_hat_0.unwrap()).collect();
        assert_eq!(shape_violations(&q, Shape::InteriorMinimum, NOISE_BAND), 0);
        let k = q.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert!((values[k] - 2f64.ln() / 2.0).abs() <= 0.005 + 1e-12, "{}", values[k]);
    }

    #[test]
    fn shape_counting() {
        assert_eq!(shape_violations(&[3.0, 2.0, 2.0, 1.0], Shape::Decreasing, 0.0), 0);
        assert_eq!(shape_violations(&[3.0, 2.0, 2.5, 1.0], Shape::Decreasing, 0.0), 1);
        assert_eq!(shape_violations(&[1.0, 1.0 - 1e-12, 2.0], Shape::Increasing, NOISE_BAND), 0);
        assert_eq!(shape_violations(&[3.0, 1.0, 2.0], Shape::InteriorMinimum, 0.0), 0);
        assert_eq!(shape_violations(&[1.0, 2.0, 3.0], Shape::InteriorMinimum, 0.0), 1);
        assert_eq!(shape_violations(&[3.0, 1.0, 2.0, 1.5], Shape::InteriorMinimum, 0.0), 1);
    }

    #[test]
    fn layout_has_every_panel() {
        let panels = figure_panels();
        let count = |f: u8| panels.iter().filter(|p| p.figure == f).count();
        assert_eq!([count(1), count(2), count(3), count(4), count(5), count(6)], [6, 4, 4, 3, 6, 6]);
        assert!(panels.iter().filter(|p| p.figure == 1).all(|p| p.family == UtilityFamily::Exponential));
        assert!(panels.iter().filter(|p| p.figure > 1).all(|p| p.family == UtilityFamily::Power));
    }

    #[test]
    fn small_figure_run_has_expected_shapes() {
        let panels = compute_figures(&FigureBases::default(), 9, 1e-2);
        let report = check_figures(&panels);
        assert!(report.pass, "{report:#?}");
        assert_eq!(report.ordering.len(), 6 + 2 + 4 + 3 + 3 + 6);
    }

    #[test]
    fn panel_csv_header() {
        let panels = compute_figures(&FigureBases::default(), 3, 0.5);
        let fig2b = panels.iter().find(|p| p.spec.file_name() == "fig2_b.csv").unwrap();
        let mut buf = Vec::new();
        fig2b.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("alpha,case_II\n"));
        assert_eq!(text.lines().count(), 4);
    }
}
