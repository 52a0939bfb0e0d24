//! Equilibrium under power utility with an n-point risk-aversion distribution.
//!
//! Each support point `gamma_i` carries a scalar function `g_i(t)` with
//! `g_i(T) = 1`. The functions are coupled only through the aggregate risk
//! aversion
//!
//! ```text
//! varpi(t) = Σ g_i^{e_i} gamma_i p_i / Σ g_i^{e_i} p_i,    e_i = gamma_i / (1 - gamma_i)
//! ```
//!
//! and satisfy `g_i' = c_i(varpi) g_i` with
//! `c_i = (1-gamma_i)/gamma_i [-kappa - S/varpi + gamma_i S/(2 varpi^2)]`,
//! `S = (mu-r)^2/sigma^2 + a^2 eta2^2/b^2`. The system is integrated backward
//! from `T` with classical RK4, recomputing `varpi` at every stage.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Control, ModelParams, UtilityFamily};

/// `|eta1 - eta2|` above which the power closed form is rejected.
pub const ETA_ZERO_TOL: f64 = 1e-12;

/// State at which a state-dependent power strategy is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerState {
    pub t: f64,
    pub x: f64,
    pub m1: f64,
}

impl PowerState {
    pub fn new(t: f64, x: f64, m1: f64) -> Self {
        PowerState { t, x, m1 }
    }

    /// `x + beta m1`
    pub fn wealth(&self, beta: f64) -> f64 {
        self.x + beta * self.m1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Explosion {
    /// Time reached by the step that failed.
    pub t: f64,
    /// Earliest time with a valid stored solution.
    pub last_valid: f64,
}

/// The coupled right-hand side, kept separate from the stored grid so the
/// solver and the diagnostics share one definition.
#[derive(Debug, Clone, Serialize)]
struct GSystem {
    gammas: Vec<f64>,
    probs: Vec<f64>,
    exps: Vec<f64>,
    kappa: f64,
    price_sq: f64,
}

impl GSystem {
    fn from_params(params: &ModelParams) -> Self {
        let dist = params.dist();
        GSystem {
            gammas: dist.gammas().to_vec(),
            probs: dist.probs().to_vec(),
            exps: dist.gammas().iter().map(|g| g / (1.0 - g)).collect(),
            kappa: params.kappa(),
            price_sq: params.total_price_sq(),
        }
    }

    /// Normalized weights `g_i^{e_i} p_i / Σ`, computed in log space.
    fn weights(&self, g: &[f64]) -> Option<Vec<f64>> {
        let logs: Vec<f64> = g
            .iter()
            .zip(&self.exps)
            .zip(&self.probs)
            .map(|((&gi, &e), &p)| if gi > 0.0 { e * gi.ln() + p.ln() } else { f64::NAN })
            .collect();
        if logs.iter().any(|l| !l.is_finite()) {
            return None;
        }
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let raw: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = raw.iter().sum();
        Some(raw.into_iter().map(|w| w / total).collect())
    }

    fn varpi(&self, g: &[f64]) -> Option<f64> {
        let w = self.weights(g)?;
        Some(w.iter().zip(&self.gammas).map(|(w, g)| w * g).sum())
    }

    fn rate(&self, gamma: f64, varpi: f64) -> f64 {
        let s = self.price_sq;
        (1.0 - gamma) / gamma * (-self.kappa - s / varpi + 0.5 * gamma * s / (varpi * varpi))
    }

    /// `dg/dt` at `g`.
    fn dgdt(&self, g: &[f64]) -> Option<Vec<f64>> {
        let v = self.varpi(g)?;
        Some(g.iter().zip(&self.gammas).map(|(&gi, &gam)| self.rate(gam, v) * gi).collect())
    }

    /// Right side of the implied `d varpi / dt` equation.
    fn varpi_rate(&self, g: &[f64]) -> Option<f64> {
        let w = self.weights(g)?;
        let v: f64 = w.iter().zip(&self.gammas).map(|(w, g)| w * g).sum();
        let m2: f64 = w.iter().zip(&self.gammas).map(|(w, g)| w * g * g).sum();
        Some(0.5 / (v * v) * self.price_sq * (m2 - v * v))
    }
}

/// Solution of the `g` system on the uniform backward grid `t_k = T - k dt`.
#[derive(Debug, Clone, Serialize)]
pub struct PowerOdeSolution {
    system: GSystem,
    horizon: f64,
    dt: f64,
    times: Vec<f64>,
    /// `g[k][i]`
    g: Vec<Vec<f64>>,
    varpi: Vec<f64>,
    explosion: Option<Explosion>,
}

fn require_power(params: &ModelParams) -> Result<()> {
    params.check_family(UtilityFamily::Power)?;
    let eta = params.coeffs().eta;
    if eta.abs() > ETA_ZERO_TOL {
        return Err(Error::domain(
            "insurance.eta1",
            format!("power utility equilibrium requires eta1 = eta2 (eta = 0), got eta = {eta}"),
        ));
    }
    Ok(())
}

/// Number of uniform steps of size `dt` covering `span`, if `dt` divides it.
pub(crate) fn steps_for(span: f64, dt: f64, field: &str) -> Result<usize> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::domain(field, format!("step must be > 0, got {dt}")));
    }
    let n = (span / dt).round();
    if n < 1.0 || (n * dt - span).abs() > 1e-9 * span.max(1.0) {
        return Err(Error::domain(field, format!("step {dt} does not divide {span}")));
    }
    Ok(n as usize)
}

/// Integrates the `g` system backward from `T` with fixed-step RK4.
pub fn solve_g_system(params: &ModelParams, dt: f64) -> Result<PowerOdeSolution> {
    require_power(params)?;
    let horizon = params.horizon();
    let n = steps_for(horizon, dt, "dt")?;
    let dt = horizon / n as f64;
    let system = GSystem::from_params(params);
    let dim = system.gammas.len();

    let mut times = Vec::with_capacity(n + 1);
    let mut gs = Vec::with_capacity(n + 1);
    let mut varpi = Vec::with_capacity(n + 1);
    let mut g = vec![1.0; dim];
    times.push(horizon);
    varpi.push(system.varpi(&g).expect("terminal weights are finite"));
    gs.push(g.clone());

    let mut explosion = None;
    // In tau = T - t the system reads dg/dtau = -dg/dt.
    let f = |y: &[f64]| system.dgdt(y).map(|d| d.into_iter().map(|v| -v).collect::<Vec<f64>>());
    let axpy = |y: &[f64], k: &[f64], s: f64| y.iter().zip(k).map(|(a, b)| a + s * b).collect::<Vec<f64>>();
    for k in 0..n {
        let step = (|| {
            let k1 = f(&g)?;
            let k2 = f(&axpy(&g, &k1, 0.5 * dt))?;
            let k3 = f(&axpy(&g, &k2, 0.5 * dt))?;
            let k4 = f(&axpy(&g, &k3, dt))?;
            let next: Vec<f64> = (0..dim)
                .map(|i| g[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
                .collect();
            if next.iter().all(|v| v.is_finite() && *v > 0.0) {
                let v = system.varpi(&next)?;
                v.is_finite().then_some((next, v))
            } else {
                None
            }
        })();
        let t_next = horizon - (k + 1) as f64 * dt;
        match step {
            Some((next, v)) => {
                g = next;
                times.push(t_next);
                gs.push(g.clone());
                varpi.push(v);
            }
            None => {
                explosion = Some(Explosion {
                    t: t_next,
                    last_valid: *times.last().unwrap(),
                });
                break;
            }
        }
    }

    Ok(PowerOdeSolution {
        system,
        horizon,
        dt,
        times,
        g: gs,
        varpi,
        explosion,
    })
}

impl PowerOdeSolution {
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn gammas(&self) -> &[f64] {
        &self.system.gammas
    }

    pub fn probs(&self) -> &[f64] {
        &self.system.probs
    }

    /// Grid times, descending from `T`.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// `g_i` at grid node `k`.
    pub fn g_node(&self, k: usize) -> &[f64] {
        &self.g[k]
    }

    pub fn varpi_nodes(&self) -> &[f64] {
        &self.varpi
    }

    pub fn explosion(&self) -> Option<Explosion> {
        self.explosion
    }

    /// Earliest time covered by the stored solution.
    pub fn earliest(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Recomputes `varpi` from the stored `g` at node `k`.
    pub fn varpi_from_node(&self, k: usize) -> f64 {
        self.system.varpi(&self.g[k]).unwrap()
    }

    fn locate(&self, t: f64) -> Result<(usize, f64)> {
        if let Some(ex) = self.explosion {
            if t < ex.last_valid {
                return Err(Error::Exploded { t: ex.t });
            }
        }
        let lo = self.earliest();
        if !(t >= lo - 1e-12 * self.horizon && t <= self.horizon + 1e-12 * self.horizon) {
            return Err(Error::OutOfRange {
                t,
                lo,
                hi: self.horizon,
            });
        }
        let s = ((self.horizon - t) / self.dt).max(0.0);
        let last = self.times.len() - 1;
        if last == 0 {
            return Ok((0, 0.0));
        }
        let k = (s.floor() as usize).min(last - 1);
        Ok((k, (s - k as f64).clamp(0.0, 1.0)))
    }

    /// `g_i(t)`, linear between grid nodes.
    pub fn g_at(&self, t: f64) -> Result<Vec<f64>> {
        let (k, frac) = self.locate(t)?;
        if frac == 0.0 {
            return Ok(self.g[k].clone());
        }
        Ok(self.g[k]
            .iter()
            .zip(&self.g[k + 1])
            .map(|(a, b)| a + frac * (b - a))
            .collect())
    }

    /// `dg_i/dt` from the ODE right side at the interpolated `g(t)`.
    pub fn dg_at(&self, t: f64) -> Result<Vec<f64>> {
        let g = self.g_at(t)?;
        self.system.dgdt(&g).ok_or(Error::Exploded { t })
    }

    /// `Σ g_i(t)^{e_i} p_i`, the certainty-equivalent multiplier of the value function.
    pub fn value_multiplier(&self, t: f64) -> Result<f64> {
        let g = self.g_at(t)?;
        Ok(g
            .iter()
            .zip(&self.system.exps)
            .zip(&self.system.probs)
            .map(|((gi, e), p)| (e * gi.ln()).exp() * p)
            .sum())
    }

    /// Writes `t,varpi,g_1_gamma_<g1>,...` with one row per node, ascending in time.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string(), "varpi".to_string()];
        header.extend(
            self.system
                .gammas
                .iter()
                .enumerate()
                .map(|(i, g)| format!("g_{}_gamma_{}", i + 1, g)),
        );
        w.write_record(&header)?;
        for k in (0..self.times.len()).rev() {
            let mut row = vec![self.times[k].to_string(), self.varpi[k].to_string()];
            row.extend(self.g[k].iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Aggregate risk aversion `varpi(t)`: `g` is interpolated linearly and the ratio recomputed.
pub fn varpi_at(sol: &PowerOdeSolution, t: f64) -> Result<f64> {
    let g = sol.g_at(t)?;
    sol.system.varpi(&g).ok_or(Error::Exploded { t })
}

fn positive_wealth(params: &ModelParams, state: &PowerState) -> Result<f64> {
    let w = state.wealth(params.delay().beta);
    if !(w > 0.0) {
        return Err(Error::domain(
            "state",
            format!("power utility needs x + beta m1 > 0, got {w}"),
        ));
    }
    Ok(w)
}

/// `q_hat = a eta2 w / (b^2 varpi)`, `pi_hat x = (mu - r) w / (sigma^2 varpi)`.
pub fn power_strategy(sol: &PowerOdeSolution, params: &ModelParams, state: &PowerState) -> Result<Control> {
    let w = positive_wealth(params, state)?;
    let v = varpi_at(sol, state.t)?;
    Ok(power_control(params, w, v))
}

pub(crate) fn power_control(params: &ModelParams, w: f64, varpi: f64) -> Control {
    let c = params.coeffs();
    let f = params.financial();
    Control {
        q: c.a * params.insurance().eta2 * w / (c.b * c.b * varpi),
        pi_amount: (f.mu - f.r) * w / (f.sigma * f.sigma * varpi),
    }
}

/// `V(t, x, m1) = w Σ g_i^{e_i} p_i`.
pub fn power_value(sol: &PowerOdeSolution, params: &ModelParams, state: &PowerState) -> Result<f64> {
    let w = positive_wealth(params, state)?;
    Ok(w * sol.value_multiplier(state.t)?)
}

/// `Y^{gamma_i}(t, x, m1) = g_i^{gamma_i} w^{1 - gamma_i} / (1 - gamma_i)`.
pub fn power_ansatz_y(sol: &PowerOdeSolution, params: &ModelParams, index: usize, state: &PowerState) -> Result<f64> {
    let w = positive_wealth(params, state)?;
    let gamma = *sol
        .gammas()
        .get(index)
        .ok_or_else(|| Error::domain("gamma index", format!("{index} out of range")))?;
    let g = sol.g_at(state.t)?[index];
    Ok(g.powf(gamma) * w.powf(1.0 - gamma) / (1.0 - gamma))
}

/// Right side of the `d varpi/dt` equation at `t`.
pub fn varpi_rate_rhs(sol: &PowerOdeSolution, t: f64) -> Result<f64> {
    let g = sol.g_at(t)?;
    sol.system.varpi_rate(&g).ok_or(Error::Exploded { t })
}

/// `|central difference of varpi - varpi rate equation|` at an interior time.
pub fn varpi_rate_residual(sol: &PowerOdeSolution, t: f64) -> Result<f64> {
    let h = sol.dt;
    let lo = sol.earliest();
    if !(t - h >= lo - 1e-12 && t + h <= sol.horizon + 1e-12) {
        return Err(Error::OutOfRange {
            t,
            lo: lo + h,
            hi: sol.horizon - h,
        });
    }
    let up = varpi_at(sol, (t + h).min(sol.horizon))?;
    let down = varpi_at(sol, (t - h).max(lo))?;
    let fd = (up - down) / (2.0 * h);
    Ok((fd - varpi_rate_rhs(sol, t)?).abs())
}

/// `g(t)` for a one-point distribution, in closed form.
pub fn single_gamma_g(params: &ModelParams, gamma: f64, t: f64) -> f64 {
    let s = params.total_price_sq();
    let rate = (1.0 - gamma) / gamma * (params.kappa() + 0.5 * s / gamma);
    (rate * (params.horizon() - t)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ModelInputs;
    use crate::model::RiskCase;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const G0_HALF: f64 = 1.306_843_459_208_129_3;

    fn one_point(gamma: f64) -> ModelParams {
        ModelInputs::table1(UtilityFamily::Power, RiskCase::I)
            .with_points(&[(gamma, 1.0)])
            .build()
            .unwrap()
    }

    /// Explicit Euler on the same system, written independently of `GSystem`.
    fn euler_reference(params: &ModelParams, n: usize) -> Vec<f64> {
        let gammas = params.dist().gammas().to_vec();
        let probs = params.dist().probs().to_vec();
        let s = params.total_price_sq();
        let k = params.kappa();
        let dt = params.horizon() / n as f64;
        let mut g = vec![1.0f64; gammas.len()];
        for _ in 0..n {
            let num: f64 = (0..g.len()).map(|i| g[i].powf(gammas[i] / (1.0 - gammas[i])) * gammas[i] * probs[i]).sum();
            let den: f64 = (0..g.len()).map(|i| g[i].powf(gammas[i] / (1.0 - gammas[i])) * probs[i]).sum();
            let v = num / den;
            for i in 0..g.len() {
                let gam = gammas[i];
                let c = (1.0 - gam) / gam * (-k - s / v + 0.5 * gam * s / (v * v));
                g[i] -= dt * c * g[i];
            }
        }
        g
    }

    #[test]
    fn closed_form_constant() {
        let p = one_point(0.5);
        assert_relative_eq!(single_gamma_g(&p, 0.5, 0.0), G0_HALF, max_relative = 1e-14);
    }

    #[test]
    fn single_point_matches_closed_form() {
        let p = one_point(0.5);
        let sol = solve_g_system(&p, 1e-3).unwrap();
        for (k, &t) in sol.times().iter().enumerate() {
            let exact = single_gamma_g(&p, 0.5, t);
            assert_relative_eq!(sol.g_node(k)[0], exact, max_relative = 1e-12);
            assert_eq!(sol.varpi_nodes()[k], 0.5);
        }
    }

    #[test]
    fn fourth_order_convergence() {
        let p = one_point(0.1);
        let exact = single_gamma_g(&p, 0.1, 0.0);
        let err = |dt: f64| {
            let sol = solve_g_system(&p, dt).unwrap();
            (sol.g_node(sol.times().len() - 1)[0] - exact).abs()
        };
        let ratio = err(0.2) / err(0.1);
        assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn terminal_conditions() {
        let p = ModelParams::table1_power(RiskCase::II);
        let sol = solve_g_system(&p, 0.01).unwrap();
        assert_eq!(sol.g_node(0), &[1.0, 1.0]);
        assert_relative_eq!(sol.varpi_nodes()[0], 0.58, max_relative = 1e-15);
        assert_relative_eq!(varpi_at(&sol, 2.0).unwrap(), 0.58, max_relative = 1e-15);
    }

    #[test]
    fn two_point_against_euler() {
        let p = ModelParams::table1_power(RiskCase::I);
        let sol = solve_g_system(&p, 1e-3).unwrap();
        let n = 200_000;
        let fine = euler_reference(&p, n);
        let coarse = euler_reference(&p, n / 2);
        let last = sol.times().len() - 1;
        for i in 0..2 {
            let extrapolated = 2.0 * fine[i] - coarse[i];
            assert_relative_eq!(sol.g_node(last)[i], extrapolated, max_relative = 1e-9);
        }
    }

    #[test]
    fn rejects_nonzero_eta_and_wrong_family() {
        let mut inputs = ModelInputs::table1(UtilityFamily::Power, RiskCase::I);
        inputs.insurance.eta2 = 0.5;
        let err = solve_g_system(&inputs.build().unwrap(), 1e-3).unwrap_err();
        assert!(err.to_string().contains("eta"), "{err}");
        let exp = ModelParams::table1_exponential(RiskCase::I);
        assert!(matches!(solve_g_system(&exp, 1e-3), Err(Error::FamilyMismatch { .. })));
    }

    #[test]
    fn rejects_step_not_dividing_horizon() {
        let p = ModelParams::table1_power(RiskCase::I);
        assert!(solve_g_system(&p, 0.3).is_err());
        assert!(solve_g_system(&p, 0.0).is_err());
    }

    #[test]
    fn explosion_is_flagged() {
        let mut inputs = ModelInputs::table1(UtilityFamily::Power, RiskCase::I).with_points(&[(0.002, 0.5), (0.9, 0.5)]);
        inputs.financial.mu = 3.0;
        inputs.financial.sigma = 0.2;
        let p = inputs.build().unwrap();
        let sol = solve_g_system(&p, 1e-3).unwrap();
        let ex = sol.explosion().expect("should explode");
        assert!(ex.t < 2.0 && ex.t >= 0.0);
        assert!(matches!(varpi_at(&sol, 0.0), Err(Error::Exploded { .. })));
        assert!(varpi_at(&sol, ex.last_valid).is_ok());
    }

    #[test]
    fn strategy_examples() {
        let p = one_point(0.5);
        let sol = solve_g_system(&p, 1e-3).unwrap();
        let m1 = p.m10();
        let w = 0.6 + 0.05 * m1;
        for t in [0.0, 0.77, 2.0] {
            let s = power_strategy(&sol, &p, &PowerState::new(t, 0.6, m1)).unwrap();
            assert_relative_eq!(s.q, 0.1 * 0.3 * w / (0.2 * 0.5), max_relative = 1e-14);
            assert_relative_eq!(s.pi_amount, 0.1 * w / (0.36 * 0.5), max_relative = 1e-14);
        }
        let bad = power_strategy(&sol, &p, &PowerState::new(0.0, -1.0, 0.0));
        assert!(bad.is_err());
    }

    #[test]
    fn value_and_ansatz_examples() {
        let p = one_point(0.5);
        let sol = solve_g_system(&p, 1e-4).unwrap();
        let st = PowerState::new(2.0, 0.6, p.m10());
        let w = st.wealth(0.05);
        assert_relative_eq!(power_value(&sol, &p, &st).unwrap(), w, max_relative = 1e-15);
        assert_relative_eq!(power_ansatz_y(&sol, &p, 0, &st).unwrap(), UtilityFamily::Power.eval(0.5, w).unwrap(), max_relative = 1e-14);
        let st0 = PowerState::new(0.0, 0.6, p.m10());
        let rate = p.kappa() + 0.5 * p.total_price_sq() / 0.5;
        assert_relative_eq!(power_value(&sol, &p, &st0).unwrap(), w * (rate * 2.0).exp(), max_relative = 1e-12);
        let unit = PowerState::new(2.0, 4.0, 0.0);
        assert_relative_eq!(power_ansatz_y(&sol, &p, 0, &unit).unwrap(), 4.0, max_relative = 1e-15);
    }

    #[test]
    fn varpi_rate_diagnostics() {
        let p = one_point(0.3);
        let sol = solve_g_system(&p, 1e-3).unwrap();
        assert!(varpi_rate_residual(&sol, 1.0).unwrap() < 1e-12);

        let p = ModelParams::table1_power(RiskCase::I);
        let sol = solve_g_system(&p, 1e-3).unwrap();
        let var = 0.5 * (0.25 + 0.81) - 0.49;
        let expected = 0.5 / (0.7 * 0.7) * p.total_price_sq() * var;
        assert_relative_eq!(varpi_rate_rhs(&sol, 2.0).unwrap(), expected, max_relative = 1e-13);
        assert!(varpi_rate_residual(&sol, 2.0).is_err());
    }

    #[test]
    fn csv_layout() {
        let p = ModelParams::table1_power(RiskCase::I);
        let sol = solve_g_system(&p, 0.5).unwrap();
        let mut buf = Vec::new();
        sol.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,varpi,g_1_gamma_0.5,g_2_gamma_0.9");
        assert_eq!(lines.len(), 6);
        assert!(lines[5].starts_with("2,0.7"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn varpi_stays_in_support_hull(
            pts in proptest::collection::vec((0.01f64..=0.95, 0.05f64..1.0), 1..=5),
        ) {
            let total: f64 = pts.iter().map(|p| p.1).sum();
            let pts: Vec<(f64, f64)> = pts.iter().map(|&(g, p)| (g, p / total)).collect();
            let p = ModelInputs::table1(UtilityFamily::Power, RiskCase::I).with_points(&pts).build().unwrap();
            let sol = solve_g_system(&p, 0.01).unwrap();
            prop_assume!(sol.explosion().is_none());
            let (lo, hi) = (p.dist().min_gamma(), p.dist().max_gamma());
            for (k, &v) in sol.varpi_nodes().iter().enumerate() {
                prop_assert!(v >= lo * (1.0 - 1e-14) && v <= hi * (1.0 + 1e-14));
                prop_assert!((v - sol.varpi_from_node(k)).abs() <= 1e-15 * v);
                prop_assert!(sol.g_node(k).iter().all(|&g| g > 0.0));
            }
            prop_assert!((sol.varpi_nodes()[0] - p.dist().mean_gamma()).abs() <= 1e-14);
        }

        #[test]
        fn strategy_homogeneous_in_wealth(t in 0.0f64..=2.0, x in 0.01f64..5.0, m1 in 0.0f64..3.0, scale in 0.1f64..10.0) {
            let p = ModelParams::table1_power(RiskCase::II);
            let sol = solve_g_system(&p, 0.01).unwrap();
            let a = power_strategy(&sol, &p, &PowerState::new(t, x, m1)).unwrap();
            let b = power_strategy(&sol, &p, &PowerState::new(t, scale * x, scale * m1)).unwrap();
            prop_assert!((b.q - scale * a.q).abs() <= 1e-12 * b.q);
            prop_assert!((b.pi_amount - scale * a.pi_amount).abs() <= 1e-12 * b.pi_amount);
        }

        #[test]
        fn one_point_strategy_is_time_free(t1 in 0.0f64..=2.0, t2 in 0.0f64..=2.0) {
            let p = one_point(0.7);
            let sol = solve_g_system(&p, 0.01).unwrap();
            let a = power_strategy(&sol, &p, &PowerState::new(t1, 0.6, 1.0)).unwrap();
            let b = power_strategy(&sol, &p, &PowerState::new(t2, 0.6, 1.0)).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
