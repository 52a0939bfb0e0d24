//! Euler–Maruyama simulation of the controlled wealth equation with memory.
//!
//! With `L = h/dt` and constant pre-history `x0`:
//!
//! ```text
//! X_{k+1}  = X_k + [A X_k + pi_k(mu - r) + B M1_k + C M2_k + a eta + a eta2 q_k] dt
//!                + b q_k sqrt(dt) Z1 + pi_k sigma sqrt(dt) Z2
//! M1_{k+1} = M1_k + (X_k - alpha M1_k - e^{-alpha h} M2_k) dt
//! M2_k     = X_{k-L}  (x0 for k < L)
//! ```
//!
//! where `pi_k` is the risky amount. Path `i` of a run with seed `s` draws from
//! ChaCha8 seeded with [`path_seed`]`(s, i)`; `Z1` uses stream 0 and `Z2`
//! stream 1 of that generator.

use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exputil::{exp_strategy, DEFAULT_X_FLOOR};
use crate::model::{Control, ModelParams, UtilityFamily};
use crate::powutil::{power_control, steps_for, varpi_at, PowerOdeSolution};

/// Control as a function of `(t, x, m1, m2)`.
pub type ControlFn = dyn Fn(f64, f64, f64, f64) -> Control + Send + Sync;

#[derive(Clone)]
pub enum StrategySource {
    Exponential,
    Power(Arc<PowerOdeSolution>),
    External(Arc<ControlFn>),
}

impl std::fmt::Debug for StrategySource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StrategySource::Exponential => f.write_str("Exponential"),
            StrategySource::Power(_) => f.write_str("Power"),
            StrategySource::External(_) => f.write_str("External"),
        }
    }
}

impl StrategySource {
    pub fn external(f: impl Fn(f64, f64, f64, f64) -> Control + Send + Sync + 'static) -> Self {
        StrategySource::External(Arc::new(f))
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub strategy: StrategySource,
    pub x_floor: f64,
}

impl SimConfig {
    pub fn new(dt: f64, n_paths: usize, seed: u64, strategy: StrategySource) -> Self {
        SimConfig {
            dt,
            n_paths,
            seed,
            strategy,
            x_floor: DEFAULT_X_FLOOR,
        }
    }
}

/// `splitmix64(seed + (index + 1) * 0x9E3779B97F4A7C15)`.
pub fn path_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Serialize)]
pub struct SimPath {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub m1: Vec<f64>,
    pub m2: Vec<f64>,
    pub q: Vec<f64>,
    pub pi_amount: Vec<f64>,
    /// `X(T) + beta M1(T)`; `None` after a domain exit.
    pub w_terminal: Option<f64>,
    pub seed: u64,
    /// Time at which `x + beta m1 <= 0` was met under the power strategy.
    /// Arrays stop at that node.
    pub domain_exit: Option<f64>,
    #[serde(skip)]
    dt: f64,
    #[serde(skip)]
    alpha: f64,
    #[serde(skip)]
    x0: f64,
    #[serde(skip)]
    lag: usize,
}

impl SimPath {
    /// Writes `t,X,M1,M2,q,pi_amount`. Controls at the last node are left empty.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "X", "M1", "M2", "q", "pi_amount"])?;
        for k in 0..self.t.len() {
            let ctrl = |v: &Vec<f64>| v.get(k).map(|c| c.to_string()).unwrap_or_default();
            w.write_record([
                self.t[k].to_string(),
                self.x[k].to_string(),
                self.m1[k].to_string(),
                self.m2[k].to_string(),
                ctrl(&self.q),
                ctrl(&self.pi_amount),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Investment proportion at node `k`; needs `|X_k| >= x_floor`.
    pub fn pi_fraction(&self, k: usize, x_floor: f64) -> Result<f64> {
        let x = self.x[k];
        if !(x.abs() >= x_floor) {
            return Err(Error::NearZeroWealth { x, floor: x_floor });
        }
        Ok(self.pi_amount[k] / x)
    }
}

/// Trapezoidal `∫_{-h}^0 e^{alpha s} X(t_k + s) ds` over the stored path; the
/// part of the window before time 0 is integrated exactly against `x0`.
pub fn m1_quadrature(path: &SimPath, k: usize) -> f64 {
    let (dt, alpha, x0) = (path.dt, path.alpha, path.x0);
    let first = k.saturating_sub(path.lag);
    let pre_len = (path.lag - (k - first)) as f64 * dt;
    let t_k = k as f64 * dt;
    // ∫_{-h}^{-t_k} e^{alpha s} ds
    let pre = if pre_len <= 0.0 {
        0.0
    } else if alpha == 0.0 {
        x0 * pre_len
    } else {
        let h = path.lag as f64 * dt;
        x0 * ((-alpha * t_k).exp() - (-alpha * h).exp()) / alpha
    };
    let mut sum = 0.0;
    for j in first..k {
        let a = (-alpha * (k - j) as f64 * dt).exp() * path.x[j];
        let b = (-alpha * (k - j - 1) as f64 * dt).exp() * path.x[j + 1];
        sum += 0.5 * (a + b) * dt;
    }
    pre + sum
}

enum Controls {
    Fixed(Vec<Control>),
    Power(Vec<f64>),
    External(Arc<ControlFn>),
}

/// Per-run data shared by every path.
struct Plan<'a> {
    params: &'a ModelParams,
    steps: usize,
    lag: usize,
    dt: f64,
    controls: Controls,
}

struct PathEnd {
    x: f64,
    m1: f64,
    exit: Option<f64>,
    /// `∫ (q^2 + (pi x)^2) dt`
    admissibility: f64,
    min_q: f64,
}

impl<'a> Plan<'a> {
    fn new(params: &'a ModelParams, cfg: &SimConfig) -> Result<Self> {
        let steps = steps_for(params.horizon(), cfg.dt, "dt")?;
        let lag = steps_for(params.delay().h, cfg.dt, "dt")?;
        let dt = params.horizon() / steps as f64;
        let times = (0..steps).map(|k| k as f64 * dt);
        let controls = match &cfg.strategy {
            StrategySource::Exponential => {
                params.check_family(UtilityFamily::Exponential)?;
                Controls::Fixed(times.map(|t| exp_strategy(params, t)).collect::<Result<_>>()?)
            }
            StrategySource::Power(sol) => {
                params.check_family(UtilityFamily::Power)?;
                if sol.gammas() != params.dist().gammas() || (sol.horizon() - params.horizon()).abs() > 1e-12 {
                    return Err(Error::domain("strategy", "power solution was built for different parameters"));
                }
                Controls::Power(times.map(|t| varpi_at(sol, t)).collect::<Result<_>>()?)
            }
            StrategySource::External(f) => Controls::External(f.clone()),
        };
        Ok(Plan {
            params,
            steps,
            lag,
            dt,
            controls,
        })
    }

    fn control(&self, k: usize, x: f64, m1: f64, m2: f64) -> Option<Control> {
        match &self.controls {
            Controls::Fixed(c) => Some(c[k]),
            Controls::Power(varpi) => {
                let w = x + self.params.delay().beta * m1;
                (w > 0.0).then(|| power_control(self.params, w, varpi[k]))
            }
            Controls::External(f) => Some(f(k as f64 * self.dt, x, m1, m2)),
        }
    }

    /// Runs one path; `visit(k, x, m1, m2, control)` sees each node, with
    /// `None` control at the final node or at a domain exit.
    fn drive(&self, seed: u64, mut visit: impl FnMut(usize, f64, f64, f64, Option<Control>)) -> PathEnd {
        let p = self.params;
        let d = p.derived();
        let c = p.coeffs();
        let f = p.financial();
        let delay = p.delay();
        let decay = delay.decay();
        let drift0 = c.a * c.eta;
        let ins_drift = c.a * p.insurance().eta2;
        let dt = self.dt;
        let sq = dt.sqrt();
        let x0 = p.x0();

        let mut z1 = ChaCha8Rng::seed_from_u64(seed);
        let mut z2 = z1.clone();
        z1.set_stream(0);
        z2.set_stream(1);

        // history[k % lag] holds X_k for the last `lag` nodes.
        let mut history = vec![x0; self.lag];
        let (mut x, mut m1) = (x0, p.m10());
        let mut admissibility = 0.0;
        let mut min_q = f64::INFINITY;
        for k in 0..self.steps {
            let slot = k % self.lag;
            let m2 = if k >= self.lag { history[slot] } else { x0 };
            let Some(u) = self.control(k, x, m1, m2) else {
                visit(k, x, m1, m2, None);
                return PathEnd {
                    x,
                    m1,
                    exit: Some(k as f64 * dt),
                    admissibility,
                    min_q,
                };
            };
            visit(k, x, m1, m2, Some(u));
            history[slot] = x;
            let e1: f64 = z1.sample(StandardNormal);
            let e2: f64 = z2.sample(StandardNormal);
            let drift = d.net_growth * x + u.pi_amount * (f.mu - f.r) + d.average_weight * m1 + d.absolute_weight * m2 + drift0 + ins_drift * u.q;
            let next_x = x + drift * dt + c.b * u.q * sq * e1 + u.pi_amount * f.sigma * sq * e2;
            m1 += (x - delay.alpha * m1 - decay * m2) * dt;
            x = next_x;
            admissibility += (u.q * u.q + u.pi_amount * u.pi_amount) * dt;
            min_q = min_q.min(u.q);
        }
        let k = self.steps;
        let m2 = if k >= self.lag { history[k % self.lag] } else { x0 };
        let exit = match self.controls {
            Controls::Power(_) if x + delay.beta * m1 <= 0.0 => Some(p.horizon()),
            _ => None,
        };
        visit(k, x, m1, m2, None);
        PathEnd {
            x,
            m1,
            exit,
            admissibility,
            min_q,
        }
    }
}

/// Simulates one path with the given per-path seed.
pub fn simulate_path(params: &ModelParams, cfg: &SimConfig, seed: u64) -> Result<SimPath> {
    let plan = Plan::new(params, cfg)?;
    let n = plan.steps + 1;
    let mut path = SimPath {
        t: Vec::with_capacity(n),
        x: Vec::with_capacity(n),
        m1: Vec::with_capacity(n),
        m2: Vec::with_capacity(n),
        q: Vec::with_capacity(n),
        pi_amount: Vec::with_capacity(n),
        w_terminal: None,
        seed,
        domain_exit: None,
        dt: plan.dt,
        alpha: params.delay().alpha,
        x0: params.x0(),
        lag: plan.lag,
    };
    let end = plan.drive(seed, |k, x, m1, m2, u| {
        path.t.push(k as f64 * plan.dt);
        path.x.push(x);
        path.m1.push(m1);
        path.m2.push(m2);
        if let Some(u) = u {
            path.q.push(u.q);
            path.pi_amount.push(u.pi_amount);
        }
    });
    path.domain_exit = end.exit;
    if end.exit.is_none() {
        path.w_terminal = Some(end.x + params.delay().beta * end.m1);
    }
    Ok(path)
}

#[derive(Debug, Clone, Serialize)]
pub struct GammaEstimate {
    pub gamma: f64,
    pub prob: f64,
    /// Sample mean of `phi^gamma(w_T)`.
    pub mean: f64,
    pub se: f64,
    /// `(phi^gamma)^{-1}(mean)`
    pub certainty_equivalent: f64,
    pub ce_se: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Admissibility {
    /// Sample mean of `∫ (q^2 + (pi x)^2) dt`.
    pub mean: f64,
    pub se: f64,
    /// Smallest retention seen on any path.
    pub min_q: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct McEstimate {
    /// `Σ_i (phi^{gamma_i})^{-1}(y_i) p_i`
    pub mean: f64,
    /// Delta-method standard error of `mean`.
    pub se: f64,
    /// Paths used in the estimate.
    pub n_paths: usize,
    pub per_gamma: Vec<GammaEstimate>,
    pub excluded_paths: usize,
    pub admissibility: Admissibility,
}

fn mean_se(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Monte Carlo estimate of the aggregated reward at `(0, x0, m10)`.
pub fn mc_reward(params: &ModelParams, cfg: &SimConfig) -> Result<McEstimate> {
    if cfg.n_paths < 2 {
        return Err(Error::domain("n_paths", format!("need at least 2 paths, got {}", cfg.n_paths)));
    }
    let plan = Plan::new(params, cfg)?;
    let beta = params.delay().beta;
    let ends: Vec<PathEnd> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| plan.drive(path_seed(cfg.seed, i), |_, _, _, _, _| {}))
        .collect();

    let family = params.family();
    let dist = params.dist();
    let kept: Vec<f64> = ends
        .iter()
        .filter(|e| e.exit.is_none())
        .map(|e| e.x + beta * e.m1)
        .filter(|&w| family == UtilityFamily::Exponential || w > 0.0)
        .collect();
    let excluded = ends.len() - kept.len();
    if kept.len() < 2 {
        return Err(Error::domain("simulation", format!("{excluded} of {} paths left the domain", ends.len())));
    }

    let mut per_gamma = Vec::with_capacity(dist.len());
    let mut slopes = Vec::with_capacity(dist.len());
    for (gamma, prob) in dist.points() {
        let ys: Vec<f64> = kept.iter().map(|&w| family.eval(gamma, w)).collect::<Result<_>>()?;
        let (mean, se) = mean_se(ys.iter().copied());
        let ce = family.inverse(gamma, mean)?;
        let slope = family.iota(gamma, mean)?;
        per_gamma.push(GammaEstimate {
            gamma,
            prob,
            mean,
            se,
            certainty_equivalent: ce,
            ce_se: slope.abs() * se,
        });
        slopes.push(slope);
    }
    let total: f64 = per_gamma.iter().map(|g| g.certainty_equivalent * g.prob).sum();
    // Linearized per-path contribution; the components share paths, so the
    // standard error comes from their sum rather than a root-sum-square.
    let linear = kept.iter().map(|&w| {
        per_gamma
            .iter()
            .zip(&slopes)
            .map(|(g, s)| g.prob * s * family.eval(g.gamma, w).unwrap_or(f64::NAN))
            .sum::<f64>()
    });
    let (_, se) = mean_se(linear);

    let (adm_mean, adm_se) = mean_se(ends.iter().map(|e| e.admissibility));
    let min_q = ends.iter().map(|e| e.min_q).fold(f64::INFINITY, f64::min);
    Ok(McEstimate {
        mean: total,
        se,
        n_paths: kept.len(),
        per_gamma,
        excluded_paths: excluded,
        admissibility: Admissibility {
            mean: adm_mean,
            se: adm_se,
            min_q,
        },
    })
}

/// Terminal payoffs `w_T` of the first `n` paths, `None` for domain exits.
pub fn terminal_payoffs(params: &ModelParams, cfg: &SimConfig, n: usize) -> Result<Vec<Option<f64>>> {
    let plan = Plan::new(params, cfg)?;
    let beta = params.delay().beta;
    Ok((0..n as u64)
        .into_par_iter()
        .map(|i| {
            let e = plan.drive(path_seed(cfg.seed, i), |_, _, _, _, _| {});
            e.exit.is_none().then_some(e.x + beta * e.m1)
        })
        .collect())
}
