//! JSON configuration document.
//!
//! ```json
//! {
//!   "insurance": { "lambda1": 1.0, "mu1": 0.1, "mu2": 0.2, "eta1": 0.3, "eta2": 0.5 },
//!   "financial": { "r": 0.1, "mu": 0.2, "sigma": 0.6 },
//!   "delay": { "alpha": 0.5, "beta": 0.05, "h": 2.0 },
//!   "risk_aversion": { "family": "exponential", "points": [[0.5, 0.5], [0.9, 0.5]] },
//!   "horizon": 2.0,
//!   "x0": 0.6
//! }
//! ```
//!
//! `risk_aversion.eps1` / `risk_aversion.eps2` are optional support bounds.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DelayParams, FinancialParams, InsuranceParams, ModelParams, RiskCase, UtilityFamily};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskAversionInput {
    pub family: UtilityFamily,
    /// `[gamma, p]` pairs.
    pub points: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelInputs {
    pub insurance: InsuranceParams,
    pub financial: FinancialParams,
    pub delay: DelayParams,
    pub risk_aversion: RiskAversionInput,
    pub horizon: f64,
    pub x0: f64,
}

impl ModelInputs {
    /// Base parameters of the numerical study. The power family uses
    /// `eta1 = eta2 = 0.3` since its closed form needs `eta = 0`.
    pub fn table1(family: UtilityFamily, case: RiskCase) -> Self {
        let eta2 = match family {
            UtilityFamily::Exponential => 0.5,
            UtilityFamily::Power => 0.3,
        };
        ModelInputs {
            insurance: InsuranceParams {
                lambda1: 1.0,
                mu1: 0.1,
                mu2: 0.2,
                eta1: 0.3,
                eta2,
            },
            financial: FinancialParams {
                r: 0.1,
                mu: 0.2,
                sigma: 0.6,
            },
            delay: DelayParams {
                alpha: 0.5,
                beta: 0.05,
                h: 2.0,
            },
            risk_aversion: RiskAversionInput {
                family,
                points: case.points().iter().map(|&(g, p)| [g, p]).collect(),
                eps1: None,
                eps2: None,
            },
            horizon: 2.0,
            x0: 0.6,
        }
    }

    pub fn with_points(mut self, points: &[(f64, f64)]) -> Self {
        self.risk_aversion.points = points.iter().map(|&(g, p)| [g, p]).collect();
        self
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(format!("config: {e}")))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn build(self) -> Result<ModelParams> {
        ModelParams::new(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{
        "insurance": { "lambda1": 1.0, "mu1": 0.1, "mu2": 0.2, "eta1": 0.3, "eta2": 0.5 },
        "financial": { "r": 0.1, "mu": 0.2, "sigma": 0.6 },
        "delay": { "alpha": 0.5, "beta": 0.05, "h": 2.0 },
        "risk_aversion": { "family": "exponential", "points": [[0.5, 0.5], [0.9, 0.5]] },
        "horizon": 2.0,
        "x0": 0.6
    }"#;

    #[test]
    fn parses_documented_schema() {
        let inputs = ModelInputs::from_json_str(SAMPLE).unwrap();
        assert_eq!(inputs, ModelInputs::table1(UtilityFamily::Exponential, RiskCase::I));
        let back = ModelInputs::from_json_str(&inputs.to_json_pretty().unwrap()).unwrap();
        assert_eq!(back, inputs);
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = SAMPLE.replace("\"x0\"", "\"x_0\"");
        assert!(ModelInputs::from_json_str(&bad).is_err());
    }

    #[test]
    fn validation_names_field_path() {
        let mut inputs = ModelInputs::table1(UtilityFamily::Power, RiskCase::I);
        inputs.risk_aversion.points[1] = [1.2, 0.5];
        let err = inputs.build().unwrap_err().to_string();
        assert!(err.contains("risk_aversion.points[1]"), "{err}");
    }
}
