//! Objectives with known constants: quadratics, ℓ2-regularized logistic
//! regression, noise injection and a LIBSVM reader.

mod libsvm;
mod logistic;
mod noise;
mod perturbation;
mod quadratic;

use nalgebra::DMatrix;

pub use libsvm::{read_libsvm, read_libsvm_file, LibsvmData};
pub use logistic::{standardize_columns, synth_logistic, LogisticProblem};
pub use noise::{NoiseModel, NoiseStream, PerturbedStep};
pub use perturbation::{fit_power_law, PerturbationModel, PowerLawFit};
pub use quadratic::{synth_quadratic, QuadraticProblem};

use crate::error::Result;
use crate::linalg::DenseVector;

/// A smooth objective `f: Rᵈ → R`.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &DenseVector) -> f64;
    fn gradient(&self, x: &DenseVector) -> DenseVector;

    fn value_grad(&self, x: &DenseVector) -> (f64, DenseVector) {
        (self.value(x), self.gradient(x))
    }

    /// Gradient Lipschitz constant L.
    fn smoothness(&self) -> f64;

    /// Strong convexity constant μ (0 if merely convex).
    fn strong_convexity(&self) -> f64;

    /// Inverse condition number μ/L.
    fn kappa(&self) -> f64 {
        self.strong_convexity() / self.smoothness()
    }
}

/// `f = (1/n) Σ f_i`, with access to the individual terms.
pub trait FiniteSum: Objective {
    fn n_samples(&self) -> usize;
    fn sample_gradient(&self, x: &DenseVector, i: usize) -> DenseVector;
    /// Largest smoothness constant among the `f_i`.
    fn max_sample_smoothness(&self) -> f64;
}

/// Objectives with a Hessian and a computable minimizer.
pub trait SecondOrder: Objective {
    fn hessian(&self, x: &DenseVector) -> DMatrix<f64>;
    fn minimizer(&self) -> Result<DenseVector>;
}

/// Linearization error of a gradient step around the minimizer,
/// `(1/L)(∇f(y) − ∇²f(x*)(y − x*))`.
pub fn nonlinear_error<P: SecondOrder + ?Sized>(p: &P, y: &DenseVector) -> Result<DenseVector> {
    let xs = p.minimizer()?;
    let h = p.hessian(&xs);
    let lin = h * (y - &xs);
    Ok((p.gradient(y) - lin) / p.smoothness())
}

/// Central finite-difference gradient, used as an independent check.
pub fn finite_difference_gradient<P: Objective + ?Sized>(p: &P, x: &DenseVector, step: f64) -> DenseVector {
    let mut g = DenseVector::zeros(x.len());
    let mut xp = x.clone();
    for i in 0..x.len() {
        let xi = x[i];
        let h = step * (1.0 + xi.abs());
        xp[i] = xi + h;
        let fp = p.value(&xp);
        xp[i] = xi - h;
        let fm = p.value(&xp);
        xp[i] = xi;
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}
