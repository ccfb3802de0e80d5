//! Nonlinear acceleration: coefficient solves, extrapolation, and the
//! offline, online and adaptive drivers.
//!
//! Residuals follow `R = Y − X`, column `j` being `y_{j−1} − g(y_{j−1})`.
//! Under this convention `(Y − βR)c = ((1−β)Y + βX)c`, so β = 1
//! extrapolates over the outputs of `g` only.

mod adaptive;
mod coefficients;
mod online;
mod schedule;
mod window;

use serde::{Deserialize, Serialize};

pub use adaptive::{AdaptiveAccelerator, AdaptiveStep, Branch, Momentum, SufficientDecrease};
pub use coefficients::{
    cna_coefficients, cna_from_gram, extrapolate, lambda_from_tau, lambda_from_tau_gram,
    rna_coefficients, rna_from_gram, tau_from_lambda, Coefficients,
};
pub(crate) use online::weights;
pub use online::{offline_cycle, offline_restart, OfflineCycle, OnlineAccelerator, OnlineStep};
pub use schedule::{build_l_matrix, CombinationSchedule};
pub use window::AccelWindow;

use crate::error::{Error, Result};
use crate::linalg::GramMatrix;

/// How the weights are regularized: a Tikhonov shift λ (RNA) or a norm
/// ball radius τ (CNA).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regularization {
    Lambda(f64),
    Tau(f64),
}

impl Regularization {
    pub fn coefficients(&self, gram: &GramMatrix) -> Result<Coefficients> {
        match *self {
            Regularization::Lambda(l) => rna_from_gram(gram, l),
            Regularization::Tau(t) => cna_from_gram(gram, t),
        }
    }

    /// True for the unregularized (Anderson) setting, λ = 0 or τ = ∞.
    pub fn is_unregularized(&self) -> bool {
        match *self {
            Regularization::Lambda(l) => l == 0.0,
            Regularization::Tau(t) => t.is_infinite(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Run the base method alone.
    #[default]
    None,
    /// N plain steps, extrapolate, restart.
    Offline,
    /// Extrapolate after every step and feed the result back.
    Online,
    /// RNA proposals guarded by a sufficient-decrease test, falling back to
    /// Nesterov momentum.
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccelConfig {
    pub window: usize,
    pub beta: f64,
    pub regularization: Regularization,
    pub mode: Mode,
}

impl Default for AccelConfig {
    fn default() -> Self {
        AccelConfig {
            window: 10,
            beta: 1.0,
            regularization: Regularization::Lambda(1e-8),
            mode: Mode::Online,
        }
    }
}

impl AccelConfig {
    pub fn new(window: usize, beta: f64, regularization: Regularization, mode: Mode) -> Result<Self> {
        let cfg = AccelConfig {
            window,
            beta,
            regularization,
            mode,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::InvalidParameter("window N must be >= 1".into()));
        }
        if self.beta == 0.0 || !self.beta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "mixing beta must be finite and nonzero, got {}",
                self.beta
            )));
        }
        match self.regularization {
            Regularization::Lambda(l) if !(l >= 0.0) => {
                Err(Error::InvalidParameter(format!("lambda must be >= 0, got {l}")))
            }
            Regularization::Tau(t) if !(t >= 0.0) => {
                Err(Error::InvalidParameter(format!("tau must be >= 0, got {t}")))
            }
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(AccelConfig::new(0, 1.0, Regularization::Lambda(0.0), Mode::Online).is_err());
        assert!(AccelConfig::new(3, 0.0, Regularization::Lambda(0.0), Mode::Online).is_err());
        assert!(AccelConfig::new(3, 1.0, Regularization::Lambda(-1.0), Mode::Online).is_err());
        assert!(AccelConfig::new(3, 1.0, Regularization::Tau(-1.0), Mode::Online).is_err());
        assert!(AccelConfig::new(3, -0.5, Regularization::Tau(2.0), Mode::Offline).is_ok());
    }
}
