//! Closed-form equilibrium under exponential utility.
//!
//! With exponential utility the equilibrium retention and risky amount are
//! deterministic: both equal their terminal value discounted at rate
//! `kappa = A + beta`, with the mean risk aversion `E[gamma]` in place of a
//! single coefficient.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Control, ModelParams, UtilityFamily};

pub const DEFAULT_X_FLOOR: f64 = 1e-8;

/// Largest exponent `e^z` representable as a finite normal f64.
const MAX_EXP: f64 = 709.0;

/// `(e^{k tau} - 1) / k`, continuous through `k = 0`.
pub(crate) fn growth_integral(k: f64, tau: f64) -> f64 {
    if k == 0.0 {
        tau
    } else {
        (k * tau).exp_m1() / k
    }
}

/// `q_hat(t)` and `pi_hat(t) x` under exponential utility. Both are independent of the state.
pub fn exp_strategy(params: &ModelParams, t: f64) -> Result<Control> {
    params.check_family(UtilityFamily::Exponential)?;
    params.check_time(t)?;
    let c = params.coeffs();
    let f = params.financial();
    let mean = params.dist().mean_gamma();
    let discount = (-params.kappa() * (params.horizon() - t)).exp();
    Ok(Control {
        q: c.a * params.insurance().eta2 / (c.b * c.b * mean) * discount,
        pi_amount: (f.mu - f.r) / (f.sigma * f.sigma * mean) * discount,
    })
}

/// The investment proportion `pi_hat(t)`; needs `|x| >= x_floor`.
pub fn exp_pi_fraction(params: &ModelParams, t: f64, x: f64, x_floor: f64) -> Result<f64> {
    if !(x.abs() >= x_floor) {
        return Err(Error::NearZeroWealth { x, floor: x_floor });
    }
    Ok(exp_strategy(params, t)?.pi_amount / x)
}

/// Equilibrium value function `U(t, x, m1)`.
pub fn exp_value(params: &ModelParams, t: f64, x: f64, m1: f64) -> Result<f64> {
    params.check_family(UtilityFamily::Exponential)?;
    params.check_time(t)?;
    let tau = params.horizon() - t;
    let k = params.kappa();
    let c = params.coeffs();
    let w = x + params.delay().beta * m1;
    Ok(w * (k * tau).exp()
        + c.a * c.eta * growth_integral(k, tau)
        + 0.5 * params.total_price_sq() / params.dist().mean_gamma() * tau)
}

/// Ansatz functions `g1`, `g2` for one risk-aversion level.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ExpAnsatz {
    pub gamma: f64,
    /// Constant drift of `g2`.
    pub d: f64,
    kappa: f64,
    a_eta: f64,
    horizon: f64,
}

impl ExpAnsatz {
    pub fn new(params: &ModelParams, gamma: f64) -> Result<Self> {
        params.check_family(UtilityFamily::Exponential)?;
        if !(gamma > 0.0) {
            return Err(Error::domain("gamma", format!("must be > 0, got {gamma}")));
        }
        let mean = params.dist().mean_gamma();
        let s = params.total_price_sq();
        let c = params.coeffs();
        Ok(ExpAnsatz {
            gamma,
            d: gamma * s / mean - 0.5 * gamma * gamma * s / (mean * mean),
            kappa: params.kappa(),
            a_eta: c.a * c.eta,
            horizon: params.horizon(),
        })
    }

    pub fn g1(&self, t: f64) -> f64 {
        -self.gamma * (self.kappa * (self.horizon - t)).exp()
    }

    pub fn dg1(&self, t: f64) -> f64 {
        self.gamma * self.kappa * (self.kappa * (self.horizon - t)).exp()
    }

    pub fn g2(&self, t: f64) -> f64 {
        let tau = self.horizon - t;
        -self.gamma * self.a_eta * growth_integral(self.kappa, tau) - self.d * tau
    }

    pub fn dg2(&self, t: f64) -> f64 {
        self.gamma * self.a_eta * (self.kappa * (self.horizon - t)).exp() + self.d
    }

    /// Exponent `g1(t) w + g2(t)` of the ansatz, checked against the f64 range.
    pub fn exponent(&self, t: f64, w: f64) -> Result<f64> {
        let z = self.g1(t) * w + self.g2(t);
        if !z.is_finite() || z.abs() > MAX_EXP {
            return Err(Error::Overflow("exponential ansatz exponent"));
        }
        Ok(z)
    }
}

/// `Y^gamma(t, x, m1) = -(1/gamma) exp(g1(t)(x + beta m1) + g2(t))`.
pub fn exp_ansatz_y(params: &ModelParams, gamma: f64, t: f64, x: f64, m1: f64) -> Result<f64> {
    params.check_time(t)?;
    let ansatz = ExpAnsatz::new(params, gamma)?;
    let z = ansatz.exponent(t, x + params.delay().beta * m1)?;
    Ok(-z.exp() / gamma)
}

/// Signs of the sensitivities of `q_hat(0)` (and `pi_hat(0) x`) to the delay parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SensitivityReport {
    pub d_alpha: i8,
    pub d_beta: i8,
    pub d_h: i8,
    /// `-(1/h) ln(1/h)`: sign of the alpha-derivative flips here.
    pub alpha_star: f64,
    /// `-(1/alpha) ln(1 - r - alpha)`; `None` when `alpha = 0` or `r + alpha >= 1`.
    pub h_star: Option<f64>,
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Sign analysis of the exponential strategy in `alpha`, `beta` and `h`.
///
/// `q_hat(t) = q_hat(T) exp(-kappa (T - t))` with
/// `kappa = r - beta/(1+beta) (r + alpha + e^{-alpha h} - 1)`, so every sign
/// follows from the matching derivative of `kappa`.
pub fn exp_sensitivity(params: &ModelParams) -> Result<SensitivityReport> {
    params.check_family(UtilityFamily::Exponential)?;
    let d = params.delay();
    let r = params.financial().r;
    let alpha_star = -(1.0 / d.h).ln() / d.h;
    let h_star = if d.alpha > 0.0 && r + d.alpha < 1.0 {
        Some(-(1.0 - r - d.alpha).ln() / d.alpha)
    } else {
        None
    };
    let d_alpha = if d.beta > 0.0 { sign(d.alpha - alpha_star) } else { 0 };
    let d_beta = match h_star {
        Some(hs) => sign(hs - d.h),
        // outside the threshold regime the sign is that of r + alpha + e^{-alpha h} - 1
        None => sign(r + d.alpha + d.decay() - 1.0),
    };
    let d_h = -sign(d.alpha * d.beta);
    Ok(SensitivityReport {
        d_alpha,
        d_beta,
        d_h,
        alpha_star,
        h_star,
    })
}
