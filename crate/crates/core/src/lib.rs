//! Regularized (RNA) and constrained (CNA) nonlinear acceleration of
//! first-order methods, with the oracles needed to check their convergence
//! rates on quadratics and logistic regression.
//!
//! ```
//! use accelkit::accel::{offline_restart, AccelConfig, Mode, Regularization};
//! use accelkit::optimizers::GradientStep;
//! use accelkit::problems::{synth_quadratic, Objective};
//! use accelkit::DenseVector;
//!
//! let p = synth_quadratic(5, 0.1, 1).unwrap();
//! let cfg = AccelConfig::new(6, 1.0, Regularization::Lambda(0.0), Mode::Offline).unwrap();
//! let x0 = DenseVector::zeros(5);
//! let y = offline_restart(&x0, &mut GradientStep::new(&p), &cfg, 1).unwrap();
//! assert!(p.gradient(&y).norm() < 1e-8 * p.gradient(&x0).norm());
//! ```

// `!(x > 0.0)` rejects NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accel;
pub mod analysis;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod optimizers;
pub mod problems;

pub use error::{Error, Result};
pub use linalg::DenseVector;
