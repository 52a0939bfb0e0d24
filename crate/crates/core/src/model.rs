//! Model parameters, derived constants and utility families.
//!
//! Everything here is an immutable value type. [`ModelParams`] is built from a
//! [`ModelInputs`] document and carries every constant the strategy, simulation
//! and verification modules need, so downstream code never recomputes them.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::config::ModelInputs;
use crate::error::{Error, Result};

/// Tolerance on Σp_i before a distribution is rejected rather than renormalized.
pub const PROB_SUM_TOL: f64 = 1e-9;
pub const DEFAULT_EPS1: f64 = 1e-3;
pub const DEFAULT_EPS2: f64 = 1.0 - 1e-6;

fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(field, format!("must be finite and > 0, got {v}")))
    }
}

fn non_negative(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::domain(field, format!("must be finite and >= 0, got {v}")))
    }
}

/// Compound-Poisson claim and premium parameters under the expected value principle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InsuranceParams {
    /// Claim intensity per year.
    pub lambda1: f64,
    /// First moment of the claim size.
    pub mu1: f64,
    /// Second moment of the claim size.
    pub mu2: f64,
    /// Insurer safety loading.
    pub eta1: f64,
    /// Reinsurer safety loading, `eta2 >= eta1`.
    pub eta2: f64,
}

impl InsuranceParams {
    pub fn validate(&self) -> Result<()> {
        positive("insurance.lambda1", self.lambda1)?;
        positive("insurance.mu1", self.mu1)?;
        positive("insurance.mu2", self.mu2)?;
        positive("insurance.eta1", self.eta1)?;
        positive("insurance.eta2", self.eta2)?;
        if self.eta2 < self.eta1 {
            return Err(Error::domain(
                "insurance.eta2",
                format!(
                    "reinsurer loading {} below insurer loading {} admits arbitrage",
                    self.eta2, self.eta1
                ),
            ));
        }
        if self.mu2 < self.mu1 * self.mu1 {
            return Err(Error::domain(
                "insurance.mu2",
                format!("second moment {} below squared first moment {}", self.mu2, self.mu1 * self.mu1),
            ));
        }
        Ok(())
    }
}

/// Drift/volatility scales of the diffusion-approximated surplus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionCoeffs {
    pub a: f64,
    pub b: f64,
    /// `eta1 - eta2`, never positive.
    pub eta: f64,
}

pub fn derive_coeffs(ins: &InsuranceParams) -> Result<DiffusionCoeffs> {
    ins.validate()?;
    Ok(DiffusionCoeffs {
        a: ins.lambda1 * ins.mu1,
        b: (ins.lambda1 * ins.mu2).sqrt(),
        eta: ins.eta1 - ins.eta2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinancialParams {
    /// Risk-free rate.
    pub r: f64,
    /// Drift of the risky asset.
    pub mu: f64,
    /// Volatility of the risky asset.
    pub sigma: f64,
}

impl FinancialParams {
    pub fn validate(&self) -> Result<()> {
        positive("financial.r", self.r)?;
        positive("financial.mu", self.mu)?;
        positive("financial.sigma", self.sigma)?;
        if self.mu <= self.r {
            return Err(Error::domain(
                "financial.mu",
                format!("risk premium must be positive (mu = {} <= r = {})", self.mu, self.r),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayParams {
    /// Exponential averaging decay of the memory window.
    pub alpha: f64,
    /// Weight of the averaged memory in the terminal payoff.
    pub beta: f64,
    /// Length of the memory window in years.
    pub h: f64,
}

impl DelayParams {
    pub fn validate(&self) -> Result<()> {
        non_negative("delay.alpha", self.alpha)?;
        non_negative("delay.beta", self.beta)?;
        positive("delay.h", self.h)
    }

    /// `e^{-alpha h}`.
    pub fn decay(&self) -> f64 {
        (-self.alpha * self.h).exp()
    }

    /// Averaged memory `∫_{-h}^0 e^{alpha s} x0 ds` of a constant history.
    pub fn stationary_memory(&self, x0: f64) -> f64 {
        if self.alpha == 0.0 {
            x0 * self.h
        } else {
            // -expm1(-αh)/α keeps full precision for small αh.
            -x0 * (-self.alpha * self.h).exp_m1() / self.alpha
        }
    }
}

/// Weights of the capital injection/withdrawal rule that make the delayed
/// problem finite-dimensional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayConstants {
    /// Weight on absolute performance (`C`).
    pub absolute_weight: f64,
    /// Weight on average performance (`B`).
    pub average_weight: f64,
    /// Net growth rate `r - B - C` (`A`).
    pub net_growth: f64,
    /// `A + beta`, the exponent rate of every closed form.
    pub kappa: f64,
}

/// Solves `C = beta e^{-alpha h}`, `B e^{-alpha h} = (alpha + A + beta) C`
/// together with `A = r - B - C`.
pub fn solve_delay_constants(fin: &FinancialParams, delay: &DelayParams) -> Result<DelayConstants> {
    fin.validate()?;
    delay.validate()?;
    let decay = delay.decay();
    let c = delay.beta * decay;
    let b = c * (delay.alpha + fin.r + delay.beta - c) / (decay + c);
    if !(b.is_finite() && c.is_finite()) {
        return Err(Error::Infeasible(format!("non-finite weights B = {b}, C = {c}")));
    }
    if b < 0.0 || c < 0.0 {
        return Err(Error::Infeasible(format!("negative weights B = {b}, C = {c}")));
    }
    let a = fin.r - b - c;
    Ok(DelayConstants {
        absolute_weight: c,
        average_weight: b,
        net_growth: a,
        kappa: a + delay.beta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UtilityFamily {
    /// `-e^{-gamma w} / gamma`
    #[serde(alias = "exp")]
    Exponential,
    /// `w^{1-gamma} / (1-gamma)`
    Power,
}

impl fmt::Display for UtilityFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UtilityFamily::Exponential => f.write_str("exponential"),
            UtilityFamily::Power => f.write_str("power"),
        }
    }
}

impl UtilityFamily {
    fn check_gamma(self, gamma: f64) -> Result<()> {
        positive("gamma", gamma)?;
        if self == UtilityFamily::Power && gamma == 1.0 {
            return Err(Error::domain("gamma", "power utility undefined at gamma = 1"));
        }
        Ok(())
    }

    /// The utility `phi^gamma(w)`.
    pub fn eval(self, gamma: f64, w: f64) -> Result<f64> {
        self.check_gamma(gamma)?;
        match self {
            UtilityFamily::Exponential => Ok(-(-gamma * w).exp() / gamma),
            UtilityFamily::Power => {
                if w <= 0.0 {
                    return Err(Error::domain("w", format!("power utility needs w > 0, got {w}")));
                }
                Ok(w.powf(1.0 - gamma) / (1.0 - gamma))
            }
        }
    }

    /// The inverse `(phi^gamma)^{-1}(y)`, i.e. the certainty equivalent of a utility level.
    pub fn inverse(self, gamma: f64, y: f64) -> Result<f64> {
        self.check_gamma(gamma)?;
        match self {
            UtilityFamily::Exponential => {
                if y >= 0.0 {
                    return Err(Error::domain("y", format!("exponential utility levels are negative, got {y}")));
                }
                Ok(-(-gamma * y).ln() / gamma)
            }
            UtilityFamily::Power => {
                let z = (1.0 - gamma) * y;
                if z <= 0.0 {
                    return Err(Error::domain("y", format!("no power utility level {y} for gamma {gamma}")));
                }
                Ok(z.powf(1.0 / (1.0 - gamma)))
            }
        }
    }

    /// `iota^gamma(y) = d/dy (phi^gamma)^{-1}(y)`.
    pub fn iota(self, gamma: f64, y: f64) -> Result<f64> {
        self.check_gamma(gamma)?;
        match self {
            UtilityFamily::Exponential => {
                if y >= 0.0 {
                    return Err(Error::domain("y", format!("exponential iota needs y < 0, got {y}")));
                }
                Ok(-1.0 / (gamma * y))
            }
            UtilityFamily::Power => {
                if y <= 0.0 {
                    return Err(Error::domain("y", format!("power iota needs y > 0, got {y}")));
                }
                let e = gamma / (1.0 - gamma);
                Ok((1.0 - gamma).powf(e) * y.powf(e))
            }
        }
    }

    /// Derivative of [`iota`](Self::iota) in `y`.
    pub fn iota_prime(self, gamma: f64, y: f64) -> Result<f64> {
        self.check_gamma(gamma)?;
        match self {
            UtilityFamily::Exponential => {
                if y >= 0.0 {
                    return Err(Error::domain("y", format!("exponential iota needs y < 0, got {y}")));
                }
                Ok(1.0 / (gamma * y * y))
            }
            UtilityFamily::Power => {
                if y <= 0.0 {
                    return Err(Error::domain("y", format!("power iota needs y > 0, got {y}")));
                }
                let e = gamma / (1.0 - gamma);
                Ok(e * (1.0 - gamma).powf(e) * y.powf(e - 1.0))
            }
        }
    }
}

/// Bounds on the support of a risk-aversion distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistBounds {
    /// Lower bound on gamma for the exponential family.
    pub eps1: f64,
    /// Upper bound on gamma for the power family, strictly below 1.
    pub eps2: f64,
}

impl Default for DistBounds {
    fn default() -> Self {
        DistBounds {
            eps1: DEFAULT_EPS1,
            eps2: DEFAULT_EPS2,
        }
    }
}

/// Finite distribution of the risk-aversion coefficient.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskAversionDist {
    family: UtilityFamily,
    gammas: Vec<f64>,
    probs: Vec<f64>,
}

impl RiskAversionDist {
    pub fn new(family: UtilityFamily, points: &[(f64, f64)], bounds: DistBounds) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::domain("risk_aversion.points", "at least one point required"));
        }
        if !(bounds.eps1 > 0.0) {
            return Err(Error::domain("risk_aversion.eps1", "must be > 0"));
        }
        if !(bounds.eps2 > 0.0 && bounds.eps2 < 1.0) {
            return Err(Error::domain("risk_aversion.eps2", "must lie in (0, 1)"));
        }
        for (i, &(g, p)) in points.iter().enumerate() {
            let field = format!("risk_aversion.points[{i}]");
            if !(g.is_finite() && g > 0.0) {
                return Err(Error::domain(field, format!("gamma must be > 0, got {g}")));
            }
            if !(p.is_finite() && p > 0.0) {
                return Err(Error::domain(field, format!("probability must be > 0, got {p}")));
            }
            match family {
                UtilityFamily::Exponential if g < bounds.eps1 => {
                    return Err(Error::domain(
                        field,
                        format!("exponential family needs gamma >= eps1 = {}, got {g}", bounds.eps1),
                    ));
                }
                UtilityFamily::Power if g > bounds.eps2 => {
                    return Err(Error::domain(
                        field,
                        format!("power family needs gamma <= eps2 = {} < 1, got {g}", bounds.eps2),
                    ));
                }
                _ => {}
            }
        }
        let total: f64 = points.iter().map(|&(_, p)| p).sum();
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::domain(
                "risk_aversion.points",
                format!("probabilities sum to {total}, not 1"),
            ));
        }
        Ok(RiskAversionDist {
            family,
            gammas: points.iter().map(|&(g, _)| g).collect(),
            probs: points.iter().map(|&(_, p)| p / total).collect(),
        })
    }

    /// One-point distribution.
    pub fn degenerate(family: UtilityFamily, gamma: f64) -> Result<Self> {
        Self::new(family, &[(gamma, 1.0)], DistBounds::default())
    }

    pub fn family(&self) -> UtilityFamily {
        self.family
    }

    pub fn len(&self) -> usize {
        self.gammas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gammas.is_empty()
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.gammas.iter().copied().zip(self.probs.iter().copied())
    }

    /// `E[gamma]`.
    pub fn mean_gamma(&self) -> f64 {
        self.points().map(|(g, p)| g * p).sum()
    }

    /// `E[gamma^2]`.
    pub fn second_moment(&self) -> f64 {
        self.points().map(|(g, p)| g * g * p).sum()
    }

    pub fn min_gamma(&self) -> f64 {
        self.gammas.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_gamma(&self) -> f64 {
        self.gammas.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// The two-point risk-aversion cases used throughout the numerical study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RiskCase {
    /// gamma = (0.5, 0.9), p = (0.5, 0.5)
    I,
    /// gamma = (0.5, 0.9), p = (0.8, 0.2)
    II,
}

impl RiskCase {
    pub fn points(self) -> [(f64, f64); 2] {
        match self {
            RiskCase::I => [(0.5, 0.5), (0.9, 0.5)],
            RiskCase::II => [(0.5, 0.8), (0.9, 0.2)],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            RiskCase::I => "I",
            RiskCase::II => "II",
        }
    }
}

impl fmt::Display for RiskCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// A reinsurance/investment control: retention level and amount in the risky asset.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Control {
    /// Retained proportion of each claim.
    pub q: f64,
    /// Amount `pi * x` held in the risky asset.
    pub pi_amount: f64,
}

/// Validated model with every derived constant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelParams {
    pub(crate) inputs: ModelInputs,
    pub(crate) coeffs: DiffusionCoeffs,
    pub(crate) derived: DelayConstants,
    pub(crate) dist: RiskAversionDist,
}

impl ModelParams {
    pub fn new(inputs: ModelInputs) -> Result<Self> {
        let coeffs = derive_coeffs(&inputs.insurance)?;
        let derived = solve_delay_constants(&inputs.financial, &inputs.delay)?;
        let ra = &inputs.risk_aversion;
        let bounds = DistBounds {
            eps1: ra.eps1.unwrap_or(DEFAULT_EPS1),
            eps2: ra.eps2.unwrap_or(DEFAULT_EPS2),
        };
        let points: Vec<(f64, f64)> = ra.points.iter().map(|&[g, p]| (g, p)).collect();
        let dist = RiskAversionDist::new(ra.family, &points, bounds)?;
        positive("horizon", inputs.horizon)?;
        positive("x0", inputs.x0)?;
        Ok(ModelParams {
            inputs,
            coeffs,
            derived,
            dist,
        })
    }

    pub fn inputs(&self) -> &ModelInputs {
        &self.inputs
    }

    pub fn insurance(&self) -> &InsuranceParams {
        &self.inputs.insurance
    }

    pub fn financial(&self) -> &FinancialParams {
        &self.inputs.financial
    }

    pub fn delay(&self) -> &DelayParams {
        &self.inputs.delay
    }

    pub fn coeffs(&self) -> &DiffusionCoeffs {
        &self.coeffs
    }

    pub fn derived(&self) -> &DelayConstants {
        &self.derived
    }

    pub fn dist(&self) -> &RiskAversionDist {
        &self.dist
    }

    pub fn family(&self) -> UtilityFamily {
        self.dist.family()
    }

    pub fn horizon(&self) -> f64 {
        self.inputs.horizon
    }

    pub fn x0(&self) -> f64 {
        self.inputs.x0
    }

    pub fn kappa(&self) -> f64 {
        self.derived.kappa
    }

    /// Initial averaged memory under the constant pre-history `x0`.
    pub fn m10(&self) -> f64 {
        self.inputs.delay.stationary_memory(self.inputs.x0)
    }

    /// Initial lagged wealth.
    pub fn m20(&self) -> f64 {
        self.inputs.x0
    }

    /// `(mu - r)^2 / sigma^2`
    pub fn market_price_sq(&self) -> f64 {
        let f = &self.inputs.financial;
        (f.mu - f.r).powi(2) / (f.sigma * f.sigma)
    }

    /// `a^2 eta2^2 / b^2`
    pub fn insurance_price_sq(&self) -> f64 {
        let c = &self.coeffs;
        (c.a * self.inputs.insurance.eta2).powi(2) / (c.b * c.b)
    }

    /// Sum of the two squared risk prices; the only market combination the
    /// equilibrium ODEs see.
    pub fn total_price_sq(&self) -> f64 {
        self.market_price_sq() + self.insurance_price_sq()
    }

    pub(crate) fn check_family(&self, expected: UtilityFamily) -> Result<()> {
        if self.family() != expected {
            return Err(Error::FamilyMismatch {
                expected,
                actual: self.family(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_time(&self, t: f64) -> Result<()> {
        if !(t >= 0.0 && t <= self.horizon()) {
            return Err(Error::OutOfRange {
                t,
                lo: 0.0,
                hi: self.horizon(),
            });
        }
        Ok(())
    }

    /// Base model with exponential utility.
    pub fn table1_exponential(case: RiskCase) -> Self {
        Self::new(ModelInputs::table1(UtilityFamily::Exponential, case)).expect("base parameters are valid")
    }

    /// Base model with power utility and `eta1 = eta2 = 0.3`.
    pub fn table1_power(case: RiskCase) -> Self {
        Self::new(ModelInputs::table1(UtilityFamily::Power, case)).expect("base parameters are valid")
    }

    /// Replaces the solved delay constants. The result no longer satisfies the
    /// equilibrium identities; meant for degenerate runs and fault injection.
    pub fn with_constants_override(mut self, derived: DelayConstants) -> Self {
        self.derived = derived;
        self
    }

    /// Replaces the diffusion coefficients; same caveat as [`Self::with_constants_override`].
    pub fn with_coeffs_override(mut self, coeffs: DiffusionCoeffs) -> Self {
        self.coeffs = coeffs;
        self
    }
}
