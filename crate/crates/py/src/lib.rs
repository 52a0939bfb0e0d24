//! Python bindings. Results that are plain records come back as dicts and lists.

use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use rrdelay::exputil::{exp_sensitivity, exp_strategy, exp_value};
use rrdelay::powutil::{power_strategy, power_value, solve_g_system, varpi_at, PowerOdeSolution, PowerState};
use rrdelay::simulate::{mc_reward, path_seed, simulate_path as sim_path, SimConfig, StrategySource};
use rrdelay::sweep::{reproduce_figures as figures, run_sweep, sweep_values, CaseSpec, FigureBases, SweepParam};
use rrdelay::verify::{feynman_kac_compare, residual_eq21 as eq21, residual_eq36 as eq36, AnsatzSource, GridSpec, SweepSpec};
use rrdelay::{Error, ModelInputs, ModelParams, RiskCase, UtilityFamily};

const DEFAULT_ODE_DT: f64 = 1e-4;
const DEFAULT_SEED: u64 = 20_240_601;

fn err(e: Error) -> PyErr {
    match e {
        Error::Domain { .. }
        | Error::Infeasible(_)
        | Error::FamilyMismatch { .. }
        | Error::NearZeroWealth { .. }
        | Error::OutOfRange { .. }
        | Error::Config(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Hands a serializable record to Python through `json.loads`.
fn to_py<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse_family(s: &str) -> PyResult<UtilityFamily> {
    match s {
        "exp" | "exponential" => Ok(UtilityFamily::Exponential),
        "power" => Ok(UtilityFamily::Power),
        _ => Err(PyValueError::new_err(format!("unknown family {s:?}; use 'exponential' or 'power'"))),
    }
}

fn parse_case(s: &str) -> PyResult<RiskCase> {
    match s {
        "I" => Ok(RiskCase::I),
        "II" => Ok(RiskCase::II),
        _ => Err(PyValueError::new_err(format!("unknown case {s:?}; use 'I' or 'II'"))),
    }
}

/// A validated model. Power solutions are cached per step size.
#[pyclass(module = "rrdelay_py", frozen)]
struct Model {
    params: ModelParams,
    cache: Mutex<Option<(f64, Arc<PowerOdeSolution>)>>,
}

impl Model {
    fn new(params: ModelParams) -> Self {
        Model {
            params,
            cache: Mutex::new(None),
        }
    }

    fn solution(&self, dt: f64) -> PyResult<Arc<PowerOdeSolution>> {
        let mut cache = self.cache.lock().unwrap();
        if let Some((cached, sol)) = cache.as_ref() {
            if *cached == dt {
                return Ok(sol.clone());
            }
        }
        let sol = Arc::new(solve_g_system(&self.params, dt).map_err(err)?);
        *cache = Some((dt, sol.clone()));
        Ok(sol)
    }

    fn strategy_source(&self, ode_dt: f64) -> PyResult<StrategySource> {
        Ok(match self.params.family() {
            UtilityFamily::Exponential => StrategySource::Exponential,
            UtilityFamily::Power => StrategySource::Power(self.solution(ode_dt)?),
        })
    }

    fn ansatz(&self, ode_dt: f64) -> PyResult<AnsatzSource> {
        Ok(match self.params.family() {
            UtilityFamily::Exponential => AnsatzSource::Exponential,
            UtilityFamily::Power => AnsatzSource::Power(self.solution(ode_dt)?),
        })
    }
}

#[pymethods]
impl Model {
    /// Base parameter set for `family` ("exponential" or "power") and case "I" or "II".
    #[staticmethod]
    #[pyo3(signature = (family = "exponential", case = "I"))]
    fn table1(family: &str, case: &str) -> PyResult<Self> {
        let inputs = ModelInputs::table1(parse_family(family)?, parse_case(case)?);
        Ok(Model::new(inputs.build().map_err(err)?))
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inputs = ModelInputs::from_json_str(text).map_err(err)?;
        Ok(Model::new(inputs.build().map_err(err)?))
    }

    #[staticmethod]
    fn from_file(path: PathBuf) -> PyResult<Self> {
        let inputs = ModelInputs::from_path(&path).map_err(err)?;
        Ok(Model::new(inputs.build().map_err(err)?))
    }

    fn to_json(&self) -> PyResult<String> {
        self.params.inputs().to_json_pretty().map_err(err)
    }

    /// Same model with a different risk-aversion distribution `[(gamma, p), ...]`.
    fn with_points(&self, points: Vec<(f64, f64)>) -> PyResult<Self> {
        let inputs = self.params.inputs().clone().with_points(&points);
        Ok(Model::new(inputs.build().map_err(err)?))
    }

    #[getter]
    fn family(&self) -> String {
        self.params.family().to_string()
    }

    #[getter]
    fn horizon(&self) -> f64 {
        self.params.horizon()
    }

    #[getter]
    fn x0(&self) -> f64 {
        self.params.x0()
    }

    #[getter]
    fn m10(&self) -> f64 {
        self.params.m10()
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.params.kappa()
    }

    #[getter]
    fn mean_gamma(&self) -> f64 {
        self.params.dist().mean_gamma()
    }

    #[getter]
    fn constants<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, self.params.derived())
    }

    #[getter]
    fn coeffs<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, self.params.coeffs())
    }

    /// `(q_hat, pi_amount)` at time `t`. The state `(x, m1)` matters only
    /// under power utility and defaults to `(x0, m10)`.
    #[pyo3(signature = (t, x = None, m1 = None, ode_dt = DEFAULT_ODE_DT))]
    fn strategy(&self, t: f64, x: Option<f64>, m1: Option<f64>, ode_dt: f64) -> PyResult<(f64, f64)> {
        let u = match self.params.family() {
            UtilityFamily::Exponential => exp_strategy(&self.params, t).map_err(err)?,
            UtilityFamily::Power => {
                let state = PowerState::new(t, x.unwrap_or(self.params.x0()), m1.unwrap_or(self.params.m10()));
                power_strategy(&*self.solution(ode_dt)?, &self.params, &state).map_err(err)?
            }
        };
        Ok((u.q, u.pi_amount))
    }

    /// Equilibrium value `V(t, x, m1)`.
    #[pyo3(signature = (t, x, m1, ode_dt = DEFAULT_ODE_DT))]
    fn value(&self, t: f64, x: f64, m1: f64, ode_dt: f64) -> PyResult<f64> {
        match self.params.family() {
            UtilityFamily::Exponential => exp_value(&self.params, t, x, m1).map_err(err),
            UtilityFamily::Power => {
                power_value(&*self.solution(ode_dt)?, &self.params, &PowerState::new(t, x, m1)).map_err(err)
            }
        }
    }

    /// Signs of the delay sensitivities and the thresholds (exponential only).
    fn sensitivity<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &exp_sensitivity(&self.params).map_err(err)?)
    }

    /// Backward ODE solution (power only).
    #[pyo3(signature = (dt = DEFAULT_ODE_DT))]
    fn solve(&self, dt: f64) -> PyResult<PowerSolution> {
        Ok(PowerSolution { sol: self.solution(dt)? })
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(family={}, kappa={}, mean_gamma={})",
            self.params.family(),
            self.params.kappa(),
            self.params.dist().mean_gamma()
        )
    }
}

#[pyclass(module = "rrdelay_py", frozen)]
struct PowerSolution {
    sol: Arc<PowerOdeSolution>,
}

#[pymethods]
impl PowerSolution {
    /// Node times, descending from the horizon.
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.sol.times().to_vec()
    }

    #[getter]
    fn varpi(&self) -> Vec<f64> {
        self.sol.varpi_nodes().to_vec()
    }

    #[getter]
    fn gammas(&self) -> Vec<f64> {
        self.sol.gammas().to_vec()
    }

    /// Earliest time the solution covers; the start time unless it exploded.
    #[getter]
    fn earliest(&self) -> f64 {
        self.sol.earliest()
    }

    #[getter]
    fn exploded(&self) -> bool {
        self.sol.explosion().is_some()
    }

    fn g_at(&self, t: f64) -> PyResult<Vec<f64>> {
        self.sol.g_at(t).map_err(err)
    }

    fn varpi_at(&self, t: f64) -> PyResult<f64> {
        varpi_at(&self.sol, t).map_err(err)
    }
}

/// Monte Carlo estimate at `(0, x0, m10)` with the Feynman-Kac comparison.
#[pyfunction]
#[pyo3(signature = (model, dt = 1e-3, n_paths = 10_000, seed = DEFAULT_SEED, ode_dt = DEFAULT_ODE_DT))]
fn simulate<'py>(py: Python<'py>, model: &Model, dt: f64, n_paths: usize, seed: u64, ode_dt: f64) -> PyResult<Bound<'py, PyAny>> {
    let cfg = SimConfig::new(dt, n_paths, seed, model.strategy_source(ode_dt)?);
    let (est, fk) = py.detach(|| {
        let est = mc_reward(&model.params, &cfg)?;
        let fk = feynman_kac_compare(&model.params, &cfg, &est)?;
        Ok::<_, Error>((est, fk))
    })
    .map_err(err)?;
    to_py(py, &serde_json::json!({ "estimate": est, "feynman_kac": fk }))
}

/// Path number `index` of the run with `seed`, as a dict of columns.
#[pyfunction]
#[pyo3(signature = (model, dt = 1e-3, seed = DEFAULT_SEED, index = 0, ode_dt = DEFAULT_ODE_DT))]
fn simulate_path<'py>(py: Python<'py>, model: &Model, dt: f64, seed: u64, index: u64, ode_dt: f64) -> PyResult<Bound<'py, PyAny>> {
    let cfg = SimConfig::new(dt, 1, seed, model.strategy_source(ode_dt)?);
    let path = sim_path(&model.params, &cfg, path_seed(seed, index)).map_err(err)?;
    to_py(py, &path)
}

/// Residual summaries of the equilibrium conditions on the standard grid.
#[pyfunction]
#[pyo3(signature = (model, grid_n = 10, ode_dt = DEFAULT_ODE_DT))]
fn residuals<'py>(py: Python<'py>, model: &Model, grid_n: usize, ode_dt: f64) -> PyResult<Bound<'py, PyAny>> {
    let source = model.ansatz(ode_dt)?;
    let grid = GridSpec::standard(&model.params, grid_n);
    let (r21, r36) = py
        .detach(|| Ok::<_, Error>((eq21(&model.params, &source, &grid)?, eq36(&model.params, &source, &grid, SweepSpec::default())?)))
        .map_err(err)?;
    to_py(
        py,
        &serde_json::json!({
            "nodes": r21.nodes.len(),
            "eq21_max_scaled": r21.max_scaled(),
            "eq21_m2_spread": r21.m2_spread(),
            "eq36_max_scaled_sup": r36.max_scaled_sup(),
            "eq36_max_cell_distance": r36.max_cell_distance(),
            "eq36_all_concave": r36.all_concave(),
        }),
    )
}

/// Strategy at `t = 0` along one parameter. `cases` defaults to the model's own distribution.
#[pyfunction]
#[pyo3(signature = (model, param, lo = None, hi = None, points = 41, cases = None, dt = 1e-3))]
#[allow(clippy::too_many_arguments)]
fn sweep<'py>(
    py: Python<'py>,
    model: &Model,
    param: &str,
    lo: Option<f64>,
    hi: Option<f64>,
    points: usize,
    cases: Option<Vec<String>>,
    dt: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let param: SweepParam = param.parse().map_err(err)?;
    let (dlo, dhi) = param.default_range();
    let cases: Vec<CaseSpec> = match cases {
        Some(names) => names.iter().map(|c| parse_case(c).map(CaseSpec::from)).collect::<PyResult<_>>()?,
        None => vec![CaseSpec {
            label: "custom".into(),
            points: model.params.dist().points().collect(),
        }],
    };
    let values = sweep_values(lo.unwrap_or(dlo), hi.unwrap_or(dhi), points);
    let rows = py.detach(|| run_sweep(model.params.inputs(), param, &values, &cases, dt));
    to_py(py, &rows)
}

/// Writes one CSV per figure panel into `out_dir` and returns the paths.
#[pyfunction]
#[pyo3(signature = (out_dir, points = 41, dt = 1e-3))]
fn reproduce_figures(py: Python<'_>, out_dir: PathBuf, points: usize, dt: f64) -> PyResult<Vec<PathBuf>> {
    let bases = FigureBases::default();
    std::fs::create_dir_all(&out_dir).map_err(|e| err(e.into()))?;
    let written = py.detach(|| figures(&bases, &out_dir, points, dt)).map_err(err)?;
    Ok(written.into_iter().map(|(_, p)| p).collect())
}

#[pymodule]
pub fn rrdelay_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Model>()?;
    m.add_class::<PowerSolution>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_path, m)?)?;
    m.add_function(wrap_pyfunction!(residuals, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(reproduce_figures, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
