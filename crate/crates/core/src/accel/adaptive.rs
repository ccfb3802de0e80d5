use super::coefficients::{extrapolate, rna_from_gram, Coefficients};
use super::window::AccelWindow;
use crate::error::{Error, Result};
use crate::linalg::DenseVector;
use crate::problems::Objective;

pub use crate::optimizers::Momentum;
use crate::optimizers::MomentumSchedule;

/// Which test decides whether the RNA proposal is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SufficientDecrease {
    /// `f(z) ≤ f(y_i) − ‖∇f(y_i)‖²/(2L)`; on success `z` becomes `x_{i+1}`,
    /// so the descent condition holds along the whole run.
    #[default]
    FromY,
    /// `f(z) ≤ f(x_i) − ‖∇f(x_i)‖²/(2L)` with `x_{i+1} = y_i − ∇f(y_i)/L`
    /// kept in both branches.
    PreviousIterate,
    /// Never accept; the run is plain Nesterov.
    Never,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Rna,
    Nesterov,
}

#[derive(Debug, Clone)]
pub struct AdaptiveStep {
    /// Gradient point of this step.
    pub y: DenseVector,
    pub f_y: f64,
    pub grad_y: DenseVector,
    pub x_next: DenseVector,
    pub f_x_next: f64,
    pub y_next: DenseVector,
    pub branch: Branch,
    pub coefficients: Coefficients,
    /// `f(x_{i+1}) ≤ f(y_i) − ‖∇f(y_i)‖²/(2L)` up to rounding.
    pub descent_ok: bool,
}

/// Nesterov's method with RNA proposals accepted under a sufficient-decrease
/// test.
pub struct AdaptiveAccelerator<'a, P: Objective + ?Sized> {
    problem: &'a P,
    l: f64,
    lambda: f64,
    beta_mix: f64,
    test: SufficientDecrease,
    momentum: MomentumSchedule,
    window: AccelWindow,
    x: DenseVector,
    f_x: f64,
    grad_x: Option<DenseVector>,
    y: DenseVector,
}

impl<'a, P: Objective + ?Sized> AdaptiveAccelerator<'a, P> {
    pub fn new(
        problem: &'a P,
        x0: DenseVector,
        window: usize,
        lambda: f64,
        momentum: Momentum,
    ) -> Result<Self> {
        if window == 0 {
            return Err(Error::InvalidParameter("window N must be >= 1".into()));
        }
        if !(lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!("lambda must be >= 0, got {lambda}")));
        }
        let l = problem.smoothness();
        if !(l > 0.0) {
            return Err(Error::InvalidParameter("smoothness constant must be positive".into()));
        }
        let f_x = problem.value(&x0);
        Ok(AdaptiveAccelerator {
            problem,
            l,
            lambda,
            beta_mix: 1.0,
            test: SufficientDecrease::default(),
            momentum: momentum.schedule(),
            window: AccelWindow::new(x0.len(), window),
            y: x0.clone(),
            x: x0,
            f_x,
            grad_x: None,
        })
    }

    pub fn with_test(mut self, test: SufficientDecrease) -> Self {
        self.test = test;
        self
    }

    pub fn with_mixing(mut self, beta: f64) -> Result<Self> {
        if beta == 0.0 || !beta.is_finite() {
            return Err(Error::InvalidParameter("mixing beta must be finite and nonzero".into()));
        }
        self.beta_mix = beta;
        Ok(self)
    }

    /// Overrides the smoothness constant taken from the problem.
    pub fn with_smoothness(mut self, l: f64) -> Result<Self> {
        if !(l > 0.0) {
            return Err(Error::InvalidParameter("smoothness constant must be positive".into()));
        }
        self.l = l;
        Ok(self)
    }

    pub fn x(&self) -> &DenseVector {
        &self.x
    }

    pub fn y(&self) -> &DenseVector {
        &self.y
    }

    pub fn step(&mut self) -> Result<AdaptiveStep> {
        let l = self.l;
        let (f_y, grad_y) = self.problem.value_grad(&self.y);
        let mut x_plain = grad_y.clone();
        x_plain *= -1.0 / l;
        x_plain += &self.y;
        self.window.push(x_plain.clone(), self.y.clone())?;
        let coefficients = match rna_from_gram(self.window.gram(), self.lambda) {
            Err(Error::DegenerateNormalization) => Coefficients::uniform(self.window.gram()),
            other => other?,
        };
        let y_extr = extrapolate(&self.window, &coefficients, self.beta_mix)?;
        let beta = self.momentum.next_beta();
        let z = (&y_extr + &self.x * beta) / (1.0 + beta);
        let target_y = f_y - grad_y.norm_squared() / (2.0 * l);

        let (accept, z_val) = match self.test {
            SufficientDecrease::Never => (false, f64::NAN),
            SufficientDecrease::FromY => {
                let fz = self.problem.value(&z);
                (fz <= target_y, fz)
            }
            SufficientDecrease::PreviousIterate => {
                let gx = match &self.grad_x {
                    Some(g) => g.clone(),
                    None => self.problem.gradient(&self.x),
                };
                let fz = self.problem.value(&z);
                (fz <= self.f_x - gx.norm_squared() / (2.0 * l), fz)
            }
        };

        let (branch, x_next, y_next) = if accept {
            let x_next = match self.test {
                SufficientDecrease::FromY => z,
                _ => x_plain.clone(),
            };
            (Branch::Rna, x_next, y_extr)
        } else {
            let y_next = &x_plain * (1.0 + beta) - &self.x * beta;
            (Branch::Nesterov, x_plain.clone(), y_next)
        };
        let f_x_next = if accept && self.test == SufficientDecrease::FromY {
            z_val
        } else {
            self.problem.value(&x_next)
        };
        // rounding in f near its minimum
        let slack = 4.0 * f64::EPSILON * (f_y.abs() + 1.0);
        let descent_ok = f_x_next <= target_y + slack;

        let y = std::mem::replace(&mut self.y, y_next.clone());
        self.x = x_next.clone();
        self.f_x = f_x_next;
        self.grad_x = None;
        Ok(AdaptiveStep {
            y,
            f_y,
            grad_y,
            x_next,
            f_x_next,
            y_next,
            branch,
            coefficients,
            descent_ok,
        })
    }
}
