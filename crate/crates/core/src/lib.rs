//! Time-consistent proportional reinsurance and investment with bounded wealth
//! memory and random risk aversion.
//!
//! * [`model`]: parameters, derived delay constants, utilities, risk-aversion distributions
//! * [`exputil`]: closed-form equilibrium under exponential utility
//! * [`powutil`]: backward ODE system and equilibrium under power utility
//! * [`simulate`]: Euler–Maruyama simulation of the delayed wealth and Monte Carlo rewards
//! * [`verify`]: generator residuals, pseudo-HJB checks and Feynman–Kac consistency
//! * [`sweep`]: one-at-a-time parameter sweeps and figure data

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod exputil;
pub mod model;
pub mod powutil;
pub mod simulate;
pub mod sweep;
pub mod verify;

pub use config::ModelInputs;
pub use error::{Error, Result};
pub use model::{Control, ModelParams, RiskAversionDist, RiskCase, UtilityFamily};
