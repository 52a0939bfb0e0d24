//! Numerical checks of the equilibrium conditions.
//!
//! All residuals are reported both raw and divided by a scale: the sum of the
//! absolute values of the individual terms that should cancel. A scaled
//! residual near machine epsilon means the cancellation is exact.

use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exputil::{exp_ansatz_y, exp_strategy, ExpAnsatz};
use crate::model::{Control, ModelParams, UtilityFamily};
use crate::powutil::{power_ansatz_y, power_strategy, PowerOdeSolution, PowerState};
use crate::simulate::{mc_reward, McEstimate, SimConfig, StrategySource};

/// Allowance per unit `dt` (relative to `|Y|`) added to the Monte Carlo tolerance.
pub const FK_DT_ALLOWANCE: f64 = 1.0;

/// Value and partial derivatives of a field at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Partials {
    pub value: f64,
    pub t: f64,
    pub x: f64,
    pub xx: f64,
    pub m1: f64,
}

/// A scalar function of `(t, x, m1)` with the derivatives the generator needs.
pub trait ScalarField: Sync {
    fn partials(&self, t: f64, x: f64, m1: f64) -> Result<Partials>;

    fn value(&self, t: f64, x: f64, m1: f64) -> Result<f64> {
        Ok(self.partials(t, x, m1)?.value)
    }
}

/// `Y^gamma` for exponential utility with analytic derivatives.
#[derive(Debug, Clone, Copy)]
pub struct ExpYField {
    ansatz: ExpAnsatz,
    beta: f64,
    /// Multiplies the value of `g1` but not its time derivative; 1 except for
    /// fault injection.
    pub g1_scale: f64,
}

impl ExpYField {
    pub fn new(params: &ModelParams, gamma: f64) -> Result<Self> {
        Ok(ExpYField {
            ansatz: ExpAnsatz::new(params, gamma)?,
            beta: params.delay().beta,
            g1_scale: 1.0,
        })
    }
}

impl ScalarField for ExpYField {
    fn partials(&self, t: f64, x: f64, m1: f64) -> Result<Partials> {
        let w = x + self.beta * m1;
        let g1 = self.g1_scale * self.ansatz.g1(t);
        let dg1 = self.ansatz.dg1(t);
        let z = g1 * w + self.ansatz.g2(t);
        let y = -z.exp() / self.ansatz.gamma;
        if !y.is_finite() {
            return Err(Error::Overflow("exponential ansatz"));
        }
        Ok(Partials {
            value: y,
            t: (dg1 * w + self.ansatz.dg2(t)) * y,
            x: g1 * y,
            xx: g1 * g1 * y,
            m1: self.beta * g1 * y,
        })
    }
}

/// Exponential equilibrium value `U` with analytic derivatives.
#[derive(Debug, Clone, Copy)]
pub struct ExpUField {
    kappa: f64,
    a_eta: f64,
    drift: f64,
    beta: f64,
    horizon: f64,
}

impl ExpUField {
    pub fn new(params: &ModelParams) -> Result<Self> {
        params.check_family(UtilityFamily::Exponential)?;
        let c = params.coeffs();
        Ok(ExpUField {
            kappa: params.kappa(),
            a_eta: c.a * c.eta,
            drift: 0.5 * params.total_price_sq() / params.dist().mean_gamma(),
            beta: params.delay().beta,
            horizon: params.horizon(),
        })
    }
}

impl ScalarField for ExpUField {
    fn partials(&self, t: f64, x: f64, m1: f64) -> Result<Partials> {
        let tau = self.horizon - t;
        let grow = (self.kappa * tau).exp();
        let w = x + self.beta * m1;
        let integral = if self.kappa == 0.0 { tau } else { (self.kappa * tau).exp_m1() / self.kappa };
        Ok(Partials {
            value: w * grow + self.a_eta * integral + self.drift * tau,
            t: -self.kappa * w * grow - self.a_eta * grow - self.drift,
            x: grow,
            xx: 0.0,
            m1: self.beta * grow,
        })
    }
}

/// Three-point time derivative of `f(g(t))` on the stored power solution,
/// central where possible and one-sided at the ends.
fn time_derivative(sol: &PowerOdeSolution, t: f64, f: impl Fn(&[f64]) -> f64) -> Result<f64> {
    let h = sol.dt();
    let (lo, hi) = (sol.earliest(), sol.horizon());
    let at = |s: f64| sol.g_at(s).map(|g| f(&g));
    if t + h <= hi + 1e-12 && t - h >= lo - 1e-12 {
        Ok((at((t + h).min(hi))? - at((t - h).max(lo))?) / (2.0 * h))
    } else if t + h > hi + 1e-12 {
        Ok((3.0 * at(t)? - 4.0 * at(t - h)? + at(t - 2.0 * h)?) / (2.0 * h))
    } else {
        Ok((-3.0 * at(t)? + 4.0 * at(t + h)? - at(t + 2.0 * h)?) / (2.0 * h))
    }
}

/// `Y^{gamma_i}` under power utility; the time derivative is a finite
/// difference of the stored ODE solution.
#[derive(Debug, Clone)]
pub struct PowerYField {
    sol: Arc<PowerOdeSolution>,
    index: usize,
    gamma: f64,
    beta: f64,
}

impl PowerYField {
    pub fn new(sol: Arc<PowerOdeSolution>, params: &ModelParams, index: usize) -> Result<Self> {
        let gamma = *sol
            .gammas()
            .get(index)
            .ok_or_else(|| Error::domain("gamma index", format!("{index} out of range")))?;
        Ok(PowerYField {
            sol,
            index,
            gamma,
            beta: params.delay().beta,
        })
    }
}

impl ScalarField for PowerYField {
    fn partials(&self, t: f64, x: f64, m1: f64) -> Result<Partials> {
        let w = x + self.beta * m1;
        if !(w > 0.0) {
            return Err(Error::domain("state", format!("x + beta m1 must be > 0, got {w}")));
        }
        let gam = self.gamma;
        let gp = self.sol.g_at(t)?[self.index].powf(gam);
        let dgp = time_derivative(&self.sol, t, |g| g[self.index].powf(gam))?;
        let yx = gp * w.powf(-gam);
        Ok(Partials {
            value: gp * w.powf(1.0 - gam) / (1.0 - gam),
            t: dgp * w.powf(1.0 - gam) / (1.0 - gam),
            x: yx,
            xx: -gam * yx / w,
            m1: self.beta * yx,
        })
    }
}

/// Power equilibrium value `U = w Σ g_i^{e_i} p_i`.
#[derive(Debug, Clone)]
pub struct PowerUField {
    sol: Arc<PowerOdeSolution>,
    beta: f64,
}

impl PowerUField {
    pub fn new(sol: Arc<PowerOdeSolution>, params: &ModelParams) -> Self {
        PowerUField {
            sol,
            beta: params.delay().beta,
        }
    }

    fn multiplier(&self, g: &[f64]) -> f64 {
        g.iter()
            .zip(self.sol.gammas())
            .zip(self.sol.probs())
            .map(|((gi, gam), p)| gi.powf(gam / (1.0 - gam)) * p)
            .sum()
    }
}

impl ScalarField for PowerUField {
    fn partials(&self, t: f64, x: f64, m1: f64) -> Result<Partials> {
        let w = x + self.beta * m1;
        let m = self.multiplier(&self.sol.g_at(t)?);
        let dm = time_derivative(&self.sol, t, |g| self.multiplier(g))?;
        Ok(Partials {
            value: w * m,
            t: w * dm,
            x: m,
            xx: 0.0,
            m1: self.beta * m,
        })
    }
}

/// Central finite differences of an arbitrary function. `step` is relative
/// (`step * max(1, |coordinate|)`); second derivatives use `step2`.
pub struct FiniteDifference<F> {
    f: F,
    pub step: f64,
    pub step2: f64,
    /// Admissible time interval; one-sided stencils are used at its ends.
    pub t_range: (f64, f64),
    /// Combine steps `h` and `h/2` as `(4 D(h/2) - D(h)) / 3`.
    pub richardson: bool,
}

impl<F: Fn(f64, f64, f64) -> Result<f64> + Sync> FiniteDifference<F> {
    pub fn new(f: F, t_range: (f64, f64)) -> Self {
        FiniteDifference {
            f,
            step: 1e-5,
            step2: 1e-4,
            t_range,
            richardson: false,
        }
    }

    fn first(&self, g: impl Fn(f64) -> Result<f64>, at: f64, h: f64, lo: f64, hi: f64) -> Result<f64> {
        if at - h >= lo && at + h <= hi {
            Ok((g(at + h)? - g(at - h)?) / (2.0 * h))
        } else if at + h > hi {
            Ok((3.0 * g(at)? - 4.0 * g(at - h)? + g(at - 2.0 * h)?) / (2.0 * h))
        } else {
            Ok((-3.0 * g(at)? + 4.0 * g(at + h)? - g(at + 2.0 * h)?) / (2.0 * h))
        }
    }

    fn second(&self, g: impl Fn(f64) -> Result<f64>, at: f64, h: f64) -> Result<f64> {
        Ok((g(at + h)? - 2.0 * g(at)? + g(at - h)?) / (h * h))
    }

    fn refine(&self, d: impl Fn(f64) -> Result<f64>, h: f64) -> Result<f64> {
        if self.richardson {
            Ok((4.0 * d(0.5 * h)? - d(h)?) / 3.0)
        } else {
            d(h)
        }
    }
}

impl<F: Fn(f64, f64, f64) -> Result<f64> + Sync> ScalarField for FiniteDifference<F> {
    fn partials(&self, t: f64, x: f64, m1: f64) -> Result<Partials> {
        let f = &self.f;
        let inf = f64::INFINITY;
        let ht = self.step * t.abs().max(1.0);
        let hx = self.step * x.abs().max(1.0);
        let hm = self.step * m1.abs().max(1.0);
        let hxx = self.step2 * x.abs().max(1.0);
        let (lo, hi) = self.t_range;
        Ok(Partials {
            value: f(t, x, m1)?,
            t: self.refine(|h| self.first(|s| f(s, x, m1), t, h, lo, hi), ht)?,
            x: self.refine(|h| self.first(|s| f(t, s, m1), x, h, -inf, inf), hx)?,
            xx: self.refine(|h| self.second(|s| f(t, s, m1), x, h), hxx)?,
            m1: self.refine(|h| self.first(|s| f(t, x, s), m1, h, -inf, inf), hm)?,
        })
    }
}

/// The four generator terms: time, wealth drift, diffusion, memory drift.
pub fn generator_terms(params: &ModelParams, d: &Partials, x: f64, m1: f64, m2: f64, u: Control) -> [f64; 4] {
    let k = params.derived();
    let c = params.coeffs();
    let f = params.financial();
    let delay = params.delay();
    let drift = k.net_growth * x + u.pi_amount * (f.mu - f.r) + k.average_weight * m1 + k.absolute_weight * m2 + c.a * c.eta + c.a * params.insurance().eta2 * u.q;
    let var = c.b * c.b * u.q * u.q + u.pi_amount * u.pi_amount * f.sigma * f.sigma;
    [
        d.t,
        drift * d.x,
        0.5 * var * d.xx,
        (x - delay.alpha * m1 - delay.decay() * m2) * d.m1,
    ]
}

/// `A^u phi(t, x, m1)` with the lagged wealth `m2` entering the drift.
pub fn apply_generator(field: &dyn ScalarField, params: &ModelParams, t: f64, x: f64, m1: f64, m2: f64, u: Control) -> Result<f64> {
    let d = field.partials(t, x, m1)?;
    Ok(generator_terms(params, &d, x, m1, m2, u).iter().sum())
}

/// Grid of evaluation points. `m2` is varied independently of `m1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSpec {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub m1: Vec<f64>,
    pub m2: Vec<f64>,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

impl GridSpec {
    /// `n` points each in `t ∈ [0, T]`, `x ∈ [0.1, 2]`, `m1 ∈ [0, 2 m10]`, with
    /// three lagged-wealth values.
    pub fn standard(params: &ModelParams, n: usize) -> Self {
        GridSpec {
            t: linspace(0.0, params.horizon(), n),
            x: linspace(0.1, 2.0, n),
            m1: linspace(0.0, 2.0 * params.m10(), n),
            m2: vec![0.2, params.x0(), 1.5],
        }
    }

    pub fn cardinality(&self) -> usize {
        self.t.len() * self.x.len() * self.m1.len() * self.m2.len()
    }

    fn nodes(&self) -> impl Iterator<Item = (f64, f64, f64, f64)> + '_ {
        self.t.iter().flat_map(move |&t| {
            self.x.iter().flat_map(move |&x| {
                self.m1
                    .iter()
                    .flat_map(move |&m1| self.m2.iter().map(move |&m2| (t, x, m1, m2)))
            })
        })
    }
}

/// Where the equilibrium fields come from.
#[derive(Debug, Clone)]
pub enum AnsatzSource {
    Exponential,
    Power(Arc<PowerOdeSolution>),
}

impl AnsatzSource {
    fn y_fields(&self, params: &ModelParams) -> Result<Vec<Box<dyn ScalarField>>> {
        match self {
            AnsatzSource::Exponential => params
                .dist()
                .gammas()
                .iter()
                .map(|&g| ExpYField::new(params, g).map(|f| Box::new(f) as Box<dyn ScalarField>))
                .collect(),
            AnsatzSource::Power(sol) => {
                params.check_family(UtilityFamily::Power)?;
                (0..sol.gammas().len())
                    .map(|i| PowerYField::new(sol.clone(), params, i).map(|f| Box::new(f) as Box<dyn ScalarField>))
                    .collect()
            }
        }
    }

    fn u_field(&self, params: &ModelParams) -> Result<Box<dyn ScalarField>> {
        Ok(match self {
            AnsatzSource::Exponential => Box::new(ExpUField::new(params)?),
            AnsatzSource::Power(sol) => {
                params.check_family(UtilityFamily::Power)?;
                Box::new(PowerUField::new(sol.clone(), params))
            }
        })
    }

    fn control(&self, params: &ModelParams, t: f64, x: f64, m1: f64) -> Result<Control> {
        match self {
            AnsatzSource::Exponential => exp_strategy(params, t),
            AnsatzSource::Power(sol) => power_strategy(sol, params, &PowerState::new(t, x, m1)),
        }
    }

    fn covers(&self, t: f64) -> bool {
        match self {
            AnsatzSource::Exponential => true,
            AnsatzSource::Power(sol) => t >= sol.earliest(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualNode {
    pub t: f64,
    pub x: f64,
    pub m1: f64,
    pub m2: f64,
    /// Index of the risk-aversion level.
    pub component: usize,
    pub residual: f64,
    pub scale: f64,
}

impl ResidualNode {
    pub fn scaled(&self) -> f64 {
        if self.scale > 0.0 {
            self.residual.abs() / self.scale
        } else {
            self.residual.abs()
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualGrid {
    pub grid: GridSpec,
    /// One row per grid node and component.
    pub nodes: Vec<ResidualNode>,
    pub skipped: usize,
    pub warnings: Vec<String>,
}

impl ResidualGrid {
    pub fn max_abs(&self) -> f64 {
        self.nodes.iter().map(|n| n.residual.abs()).fold(0.0, f64::max)
    }

    pub fn rms(&self) -> f64 {
        (self.nodes.iter().map(|n| n.residual * n.residual).sum::<f64>() / self.nodes.len().max(1) as f64).sqrt()
    }

    pub fn max_scaled(&self) -> f64 {
        self.nodes.iter().map(ResidualNode::scaled).fold(0.0, f64::max)
    }

    /// Largest change of the residual across `m2` at fixed `(t, x, m1, component)`.
    pub fn m2_spread(&self) -> f64 {
        let per = self.grid.m2.len().max(1);
        self.nodes
            .chunks(per)
            .map(|c| {
                let lo = c.iter().map(|n| n.residual).fold(f64::INFINITY, f64::min);
                let hi = c.iter().map(|n| n.residual).fold(f64::NEG_INFINITY, f64::max);
                hi - lo
            })
            .fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "x", "m1", "m2", "component", "residual", "scale", "scaled"])?;
        for n in &self.nodes {
            w.write_record([
                n.t.to_string(),
                n.x.to_string(),
                n.m1.to_string(),
                n.m2.to_string(),
                n.component.to_string(),
                n.residual.to_string(),
                n.scale.to_string(),
                n.scaled().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `A^{u_hat} Y^{gamma_i}` at every node, for every `gamma_i`.
pub fn residual_eq21(params: &ModelParams, source: &AnsatzSource, grid: &GridSpec) -> Result<ResidualGrid> {
    let fields = source.y_fields(params)?;
    let mut nodes = Vec::with_capacity(grid.cardinality() * fields.len());
    let mut skipped = 0;
    // Ordered so that all m2 values of one (t, x, m1, component) are adjacent.
    for &t in &grid.t {
        if !source.covers(t) {
            skipped += grid.x.len() * grid.m1.len() * grid.m2.len() * fields.len();
            continue;
        }
        for &x in &grid.x {
            for &m1 in &grid.m1 {
                let u = source.control(params, t, x, m1)?;
                for (i, field) in fields.iter().enumerate() {
                    let d = field.partials(t, x, m1)?;
                    for &m2 in &grid.m2 {
                        let terms = generator_terms(params, &d, x, m1, m2, u);
                        nodes.push(ResidualNode {
                            t,
                            x,
                            m1,
                            m2,
                            component: i,
                            residual: terms.iter().sum(),
                            scale: terms.iter().map(|v| v.abs()).sum(),
                        });
                    }
                }
            }
        }
    }
    let warnings = if skipped > 0 {
        vec![format!("{skipped} node evaluations skipped inside the explosion region")]
    } else {
        Vec::new()
    };
    Ok(ResidualGrid {
        grid: grid.clone(),
        nodes,
        skipped,
        warnings,
    })
}

/// Control sweep for the pseudo-HJB check. The coarse grid covers
/// `q ∈ [0, 4 q_hat]`, `pi x ∈ [-2|pi_hat x|, 4|pi_hat x|]`; each refinement
/// level re-centres a `(2 local + 1)^2` grid on the best point with spacing
/// divided by `shrink`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepSpec {
    pub coarse: usize,
    pub levels: usize,
    pub local: usize,
    pub shrink: f64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            coarse: 41,
            levels: 6,
            local: 5,
            shrink: 10.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Eq36Node {
    pub t: f64,
    pub x: f64,
    pub m1: f64,
    pub m2: f64,
    /// Objective at the refined sweep maximum.
    pub sup: f64,
    pub scale: f64,
    pub q_star: f64,
    pub pi_star: f64,
    pub q_hat: f64,
    pub pi_hat: f64,
    /// Distance of the coarse-grid argmax from the closed form, in coarse cells.
    pub cell_distance: f64,
    /// Relative distance of the refined argmax from the closed form.
    pub refined_distance: f64,
    /// Second difference in `q` at the closed form; negative when concave.
    pub concavity: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Eq36Grid {
    pub grid: GridSpec,
    pub sweep: SweepSpec,
    pub nodes: Vec<Eq36Node>,
    pub skipped: usize,
}

impl Eq36Grid {
    pub fn max_scaled_sup(&self) -> f64 {
        self.nodes.iter().map(|n| n.sup.abs() / n.scale.max(f64::MIN_POSITIVE)).fold(0.0, f64::max)
    }

    pub fn max_cell_distance(&self) -> f64 {
        self.nodes.iter().map(|n| n.cell_distance).fold(0.0, f64::max)
    }

    pub fn max_refined_distance(&self) -> f64 {
        self.nodes.iter().map(|n| n.refined_distance).fold(0.0, f64::max)
    }

    pub fn all_concave(&self) -> bool {
        self.nodes.iter().all(|n| n.concavity < 0.0)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for n in &self.nodes {
            w.serialize(n)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Objective of the pseudo-HJB supremum at one state, as a function of the control.
struct Bracket {
    terms: [f64; 4],
    du: Partials,
    /// `Σ iota'(Y_i) Y_{x,i}^2 p_i`
    aggregate: f64,
    excess: f64,
    ins_drift: f64,
    b2: f64,
    sigma2: f64,
}

impl Bracket {
    fn new(params: &ModelParams, u_field: &dyn ScalarField, y_fields: &[Box<dyn ScalarField>], t: f64, x: f64, m1: f64, m2: f64) -> Result<Self> {
        let du = u_field.partials(t, x, m1)?;
        let family = params.family();
        let mut aggregate = 0.0;
        for (field, (gamma, p)) in y_fields.iter().zip(params.dist().points()) {
            let dy = field.partials(t, x, m1)?;
            aggregate += family.iota_prime(gamma, dy.value)? * dy.x * dy.x * p;
        }
        let c = params.coeffs();
        let f = params.financial();
        Ok(Bracket {
            terms: generator_terms(params, &du, x, m1, m2, Control::default()),
            du,
            aggregate,
            excess: f.mu - f.r,
            ins_drift: c.a * params.insurance().eta2,
            b2: c.b * c.b,
            sigma2: f.sigma * f.sigma,
        })
    }

    fn parts(&self, q: f64, pi: f64) -> [f64; 6] {
        let var = self.b2 * q * q + pi * pi * self.sigma2;
        [
            self.terms[0],
            self.terms[1],
            self.terms[3],
            (self.ins_drift * q + self.excess * pi) * self.du.x,
            0.5 * var * self.du.xx,
            -0.5 * var * self.aggregate,
        ]
    }

    fn eval(&self, q: f64, pi: f64) -> f64 {
        self.parts(q, pi).iter().sum()
    }
}

fn argmax_on(bracket: &Bracket, qs: &[f64], pis: &[f64]) -> (f64, f64, f64) {
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for &q in qs {
        for &pi in pis {
            let v = bracket.eval(q, pi);
            if v > best.0 {
                best = (v, q, pi);
            }
        }
    }
    best
}

/// Sup over a control sweep of `A^u U - (1/2)(b^2 q^2 + (pi x)^2 sigma^2) Σ iota'(Y_i) Y_{x,i}^2 p_i`.
pub fn residual_eq36(params: &ModelParams, source: &AnsatzSource, grid: &GridSpec, sweep: SweepSpec) -> Result<Eq36Grid> {
    if sweep.coarse < 3 || sweep.shrink <= 1.0 || sweep.local == 0 {
        return Err(Error::domain("sweep", format!("need coarse >= 3, local >= 1, shrink > 1; got {sweep:?}")));
    }
    let u_field = source.u_field(params)?;
    let y_fields = source.y_fields(params)?;
    let mut nodes = Vec::with_capacity(grid.cardinality());
    let mut skipped = 0;
    for (t, x, m1, m2) in grid.nodes() {
        if !source.covers(t) {
            skipped += 1;
            continue;
        }
        let hat = source.control(params, t, x, m1)?;
        if !(hat.q > 0.0 && hat.pi_amount != 0.0) {
            return Err(Error::domain("sweep", format!("closed-form control {hat:?} gives an empty sweep range")));
        }
        let bracket = Bracket::new(params, u_field.as_ref(), &y_fields, t, x, m1, m2)?;
        let dq = 4.0 * hat.q / (sweep.coarse - 1) as f64;
        let dpi = 6.0 * hat.pi_amount.abs() / (sweep.coarse - 1) as f64;
        let qs: Vec<f64> = (0..sweep.coarse).map(|i| i as f64 * dq).collect();
        let pis: Vec<f64> = (0..sweep.coarse).map(|i| -2.0 * hat.pi_amount.abs() + i as f64 * dpi).collect();
        let (_, q0, p0) = argmax_on(&bracket, &qs, &pis);
        let cell_distance = ((q0 - hat.q).abs() / dq).max((p0 - hat.pi_amount).abs() / dpi);

        let (mut best, mut hq, mut hp) = (dq, q0, p0);
        let mut value = bracket.eval(q0, p0);
        for _ in 0..sweep.levels {
            let (sq, sp) = (best / sweep.shrink, dpi * best / dq / sweep.shrink);
            let span = |c: f64, s: f64| (-(sweep.local as i64)..=sweep.local as i64).map(move |j| c + j as f64 * s);
            let lq: Vec<f64> = span(hq, sq).filter(|q| *q >= 0.0).collect();
            let lp: Vec<f64> = span(hp, sp).collect();
            let (v, q, p) = argmax_on(&bracket, &lq, &lp);
            value = v;
            hq = q;
            hp = p;
            best = sq;
        }
        let scale: f64 = bracket.parts(hq, hp).iter().map(|v| v.abs()).sum();
        let refined_distance = ((hq - hat.q).abs() / hat.q).max((hp - hat.pi_amount).abs() / hat.pi_amount.abs());
        let delta = 0.1 * hat.q;
        let concavity = bracket.eval(hat.q + delta, hat.pi_amount) - 2.0 * bracket.eval(hat.q, hat.pi_amount) + bracket.eval(hat.q - delta, hat.pi_amount);
        nodes.push(Eq36Node {
            t,
            x,
            m1,
            m2,
            sup: value,
            scale,
            q_star: hq,
            pi_star: hp,
            q_hat: hat.q,
            pi_hat: hat.pi_amount,
            cell_distance,
            refined_distance,
            concavity,
        });
    }
    Ok(Eq36Grid {
        grid: grid.clone(),
        sweep,
        nodes,
        skipped,
    })
}

/// Affine decomposition `A^{u_hat} Y / Y = c1 w + c0` of the exponential
/// generator, from two wealth levels with the same `t` and controls.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CoefficientReport {
    pub gamma: f64,
    pub t: f64,
    pub g1_scale: f64,
    pub slope: f64,
    pub slope_scale: f64,
    pub intercept: f64,
    pub intercept_scale: f64,
}

impl CoefficientReport {
    pub fn scaled_slope(&self) -> f64 {
        self.slope.abs() / self.slope_scale
    }

    pub fn scaled_intercept(&self) -> f64 {
        self.intercept.abs() / self.intercept_scale
    }
}

pub fn coefficient_match_check(params: &ModelParams, gamma: f64, t: f64, g1_scale: f64) -> Result<CoefficientReport> {
    params.check_family(UtilityFamily::Exponential)?;
    let mut field = ExpYField::new(params, gamma)?;
    field.g1_scale = g1_scale;
    let u = exp_strategy(params, t)?;
    let (m1, m2) = (params.m10(), params.x0());
    let beta = params.delay().beta;
    let eval = |x: f64| -> Result<(f64, f64, f64)> {
        let d = field.partials(t, x, m1)?;
        let terms = generator_terms(params, &d, x, m1, m2, u);
        let sum: f64 = terms.iter().sum();
        let scale: f64 = terms.iter().map(|v| v.abs()).sum();
        Ok((x + beta * m1, sum / d.value, scale / d.value.abs()))
    };
    let (wa, ra, sa) = eval(0.3)?;
    let (wb, rb, sb) = eval(1.7)?;
    let slope = (rb - ra) / (wb - wa);
    let intercept = ra - slope * wa;
    let ansatz = ExpAnsatz::new(params, gamma)?;
    Ok(CoefficientReport {
        gamma,
        t,
        g1_scale,
        slope,
        slope_scale: ansatz.dg1(t).abs() + (params.kappa() * ansatz.g1(t)).abs(),
        intercept,
        intercept_scale: sa.max(sb),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FkRow {
    pub gamma: f64,
    pub mc_mean: f64,
    pub se: f64,
    pub ansatz: f64,
    pub difference: f64,
    pub allowance: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FkReport {
    pub dt: f64,
    pub n_paths: usize,
    pub excluded_paths: usize,
    pub rows: Vec<FkRow>,
    pub pass: bool,
}

/// Monte Carlo means of `phi^gamma(w_T)` against `Y^gamma(0, x0, m10)`.
/// Tolerance: `3 SE + FK_DT_ALLOWANCE * dt * |Y|`.
pub fn feynman_kac_check(params: &ModelParams, cfg: &SimConfig) -> Result<FkReport> {
    let est = mc_reward(params, cfg)?;
    feynman_kac_compare(params, cfg, &est)
}

/// The comparison half of [`feynman_kac_check`], for an estimate already run with `cfg`.
pub fn feynman_kac_compare(params: &ModelParams, cfg: &SimConfig, est: &McEstimate) -> Result<FkReport> {
    let (x0, m10) = (params.x0(), params.m10());
    let mut rows = Vec::with_capacity(est.per_gamma.len());
    for (i, g) in est.per_gamma.iter().enumerate() {
        let y = match &cfg.strategy {
            StrategySource::Exponential => exp_ansatz_y(params, g.gamma, 0.0, x0, m10)?,
            StrategySource::Power(sol) => power_ansatz_y(sol, params, i, &PowerState::new(0.0, x0, m10))?,
            StrategySource::External(_) => {
                return Err(Error::domain("strategy", "the Feynman-Kac check needs an equilibrium strategy"));
            }
        };
        let allowance = FK_DT_ALLOWANCE * cfg.dt * y.abs();
        let tolerance = 3.0 * g.se + allowance;
        let difference = g.mean - y;
        rows.push(FkRow {
            gamma: g.gamma,
            mc_mean: g.mean,
            se: g.se,
            ansatz: y,
            difference,
            allowance,
            tolerance,
            pass: difference.abs() <= tolerance,
        });
    }
    Ok(FkReport {
        dt: cfg.dt,
        n_paths: est.n_paths,
        excluded_paths: est.excluded_paths,
        pass: rows.iter().all(|r| r.pass),
        rows,
    })
}

/// `Σ (phi^gamma)^{-1}(Y^gamma) p` evaluated from the ansatz fields.
pub fn aggregate_value(params: &ModelParams, source: &AnsatzSource, t: f64, x: f64, m1: f64) -> Result<f64> {
    let family = params.family();
    let mut total = 0.0;
    for (field, (gamma, p)) in source.y_fields(params)?.iter().zip(params.dist().points()) {
        total += family.inverse(gamma, field.value(t, x, m1)?)? * p;
    }
    Ok(total)
}
