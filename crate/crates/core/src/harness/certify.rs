use std::collections::HashMap;
use std::fmt;

use crate::accel::{Mode, Regularization};
use crate::analysis::{
    constrained_chebyshev, stability_split, unconstrained_chebyshev_value, StabilityParams, StabilitySplit,
};
use crate::error::{Error, Result};
use crate::problems::Objective;

use super::config::{ExperimentConfig, OptimizerKind, ProblemKind};
use super::run::ProblemInstance;
use super::trace::RunTrace;

/// Relative slack on the closed-form rates.
const RATE_SLACK: f64 = 1e-6;
/// Relative slack on Chebyshev values, which carry the solver gap.
const CHEB_SLACK: f64 = 1e-3;
/// Absolute floor, as a multiple of the initial residual.
const FLOOR: f64 = 1e-12;
const CHEB_GRID: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopePoint {
    pub iter: usize,
    pub measured: f64,
    pub bound: f64,
}

impl EnvelopePoint {
    pub fn violated(&self) -> bool {
        self.measured > self.bound
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificationReport {
    pub kappa: f64,
    pub mode: Mode,
    /// Residual envelope at every certified iteration, slack included.
    pub envelope: Vec<EnvelopePoint>,
    pub violations: Vec<EnvelopePoint>,
    /// Acceleration and stability terms, for noisy runs.
    pub plateau: Option<StabilitySplit>,
}

impl CertificationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for CertificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "mode {:?}, kappa {:e}: {} points checked, {} violations",
            self.mode,
            self.kappa,
            self.envelope.len(),
            self.violations.len()
        )?;
        for v in &self.violations {
            writeln!(
                f,
                "  iter {:>6}: residual {:.6e} > bound {:.6e}",
                v.iter, v.measured, v.bound
            )?;
        }
        if let Some(p) = &self.plateau {
            writeln!(
                f,
                "noise plateau (gradient norm): stability term {:.6e}, contraction {:.6e}",
                p.stability, p.contraction
            )?;
        }
        Ok(())
    }
}

/// Smallest τ on a geometric grid not above `tau`; the Chebyshev value is
/// nonincreasing in τ, so rounding down keeps the bound valid.
fn round_tau_down(tau: f64) -> f64 {
    if !(tau >= 1e-3) {
        return 0.0;
    }
    let t = tau.min(1e3);
    2f64.powf((4.0 * t.log2()).floor() / 4.0)
}

/// Checks a trace against the worst-case residual rates of its method on a
/// quadratic: `(1−κ)^k` for gradient descent, and per restart window the
/// Chebyshev value on `[0, 1−κ]`, unconstrained for unregularized weights
/// (0 once N exceeds the dimension) and norm-constrained otherwise.
pub fn certify(trace: &RunTrace, config: &ExperimentConfig) -> Result<CertificationReport> {
    config.validate()?;
    if config.problem.kind != ProblemKind::Quadratic {
        return Err(Error::Unsupported("certification needs a quadratic problem".into()));
    }
    if config.optimizer.kind != OptimizerKind::Gradient {
        return Err(Error::Unsupported("certification covers gradient descent only".into()));
    }
    let mode = config.accel.mode;
    if !matches!(mode, Mode::None | Mode::Offline) {
        return Err(Error::Unsupported(format!("no residual envelope for mode {mode:?}")));
    }
    let problem = ProblemInstance::build(&config.problem, config.seed)?;
    let q = problem
        .as_quadratic()
        .ok_or_else(|| Error::Unsupported("certification needs a quadratic problem".into()))?;
    let l = q.smoothness();
    let kappa = q.kappa();
    if let Some(h) = config.optimizer.h {
        if (h * l - 1.0).abs() > 1e-12 {
            return Err(Error::Unsupported("certification needs the step 1/L".into()));
        }
    }
    let rows = &trace.rows;
    let Some(first) = rows.first() else {
        return Err(Error::InvalidParameter("empty trace".into()));
    };
    let floor = FLOOR * first.resid_norm;
    let mut envelope = Vec::new();
    let accel = config.accel.to_config()?;
    let n = accel.window;

    match mode {
        Mode::None => {
            let rate = 1.0 - kappa;
            for r in rows {
                let bound = rate.powi(r.iter as i32) * first.resid_norm * (1.0 + RATE_SLACK) + floor;
                envelope.push(EnvelopePoint {
                    iter: r.iter,
                    measured: r.resid_norm,
                    bound,
                });
            }
        }
        _ => {
            let beta = accel.beta;
            let prefactor = (1.0 - beta).abs().max((1.0 - beta * kappa).abs());
            let anderson = accel.regularization.is_unregularized() && config.accel.s.is_none();
            let fixed_tau = match accel.regularization {
                Regularization::Tau(t) if config.accel.s.is_none() => Some(t),
                _ => None,
            };
            let mut cache: HashMap<u64, f64> = HashMap::new();
            let mut cheb = |tau: f64| -> Result<f64> {
                if kappa >= 1.0 || n == 1 {
                    return Ok(if kappa >= 1.0 { 0.0 } else { 1.0 });
                }
                if let Some(&v) = cache.get(&tau.to_bits()) {
                    return Ok(v);
                }
                let v = constrained_chebyshev(n - 1, 1.0 - kappa, tau, CHEB_GRID.max(10 * n))?.value;
                cache.insert(tau.to_bits(), v);
                Ok(v)
            };
            for (end, r) in rows.iter().enumerate().skip(n).step_by(n) {
                let start = &rows[end - n];
                let (c, slack) = if anderson {
                    let c = if n > q.dim() || kappa >= 1.0 {
                        0.0
                    } else {
                        unconstrained_chebyshev_value(n - 1, 1.0 - kappa)
                    };
                    (c, RATE_SLACK)
                } else {
                    let tau = match fixed_tau {
                        Some(t) => t,
                        // weights of norm ‖c‖ solve the constrained problem
                        // with radius ‖c‖, i.e. τ = √N‖c‖ − 1
                        None => round_tau_down((n as f64).sqrt() * r.coeff_norm - 1.0),
                    };
                    (cheb(tau)?, CHEB_SLACK)
                };
                let bound = prefactor * c * start.resid_norm * (1.0 + slack) + floor;
                envelope.push(EnvelopePoint {
                    iter: r.iter,
                    measured: r.resid_norm,
                    bound,
                });
            }
        }
    }

    let plateau = if config.sigma() > 0.0 {
        let (window, tau) = match mode {
            Mode::None => (1, 0.0),
            _ => (
                n,
                match accel.regularization {
                    Regularization::Tau(t) => t,
                    Regularization::Lambda(_) => f64::INFINITY,
                },
            ),
        };
        let starts: Vec<f64> = rows.iter().step_by(window).map(|r| r.grad_norm).collect();
        Some(stability_split(
            &starts,
            StabilityParams {
                kappa,
                tau,
                sigma: config.sigma(),
                smoothness: l,
                window,
            },
        )?)
    } else {
        None
    };

    let violations = envelope.iter().copied().filter(EnvelopePoint::violated).collect();
    Ok(CertificationReport {
        kappa,
        mode,
        envelope,
        violations,
        plateau,
    })
}
