use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{FiniteSum, Objective, SecondOrder};
use crate::error::{Error, Result};
use crate::linalg::{solve_spd, DenseVector};

const REFERENCE_ITERS: usize = 100_000;
const REFERENCE_TOL: f64 = 1e-12;

/// `f(x) = (1/n) Σ log(1 + exp(−b_i a_iᵀx)) + (ρ/2)‖x‖²`.
#[derive(Debug, Clone)]
pub struct LogisticProblem {
    /// n × d, one sample per row.
    a: Arc<DMatrix<f64>>,
    b: DenseVector,
    rho: f64,
    /// `σ_max(A)²`
    data_sq_norm: f64,
    max_row_sq: f64,
    hessian_lipschitz: f64,
    reference: Arc<OnceLock<std::result::Result<DenseVector, String>>>,
}

fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn largest_sq_singular(a: &DMatrix<f64>) -> f64 {
    let (n, d) = a.shape();
    if n == 0 || d == 0 {
        return 0.0;
    }
    let g = if n <= d { a * a.transpose() } else { a.transpose() * a };
    let g = (&g + g.transpose()) * 0.5;
    SymmetricEigen::new(g).eigenvalues.iter().cloned().fold(0.0, f64::max)
}

impl LogisticProblem {
    /// Labels must be ±1.
    pub fn new(a: DMatrix<f64>, b: DenseVector, rho: f64) -> Result<Self> {
        let n = a.nrows();
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: b.len(),
            });
        }
        if n == 0 {
            return Err(Error::InvalidParameter("logistic problem needs at least one sample".into()));
        }
        if b.iter().any(|&v| v != 1.0 && v != -1.0) {
            return Err(Error::InvalidParameter("labels must be -1 or +1".into()));
        }
        if !(rho >= 0.0) || !rho.is_finite() {
            return Err(Error::InvalidParameter(format!("rho must be >= 0, got {rho}")));
        }
        let data_sq_norm = largest_sq_singular(&a);
        let row_norms: Vec<f64> = (0..n).map(|i| a.row(i).norm()).collect();
        let max_row_sq = row_norms.iter().map(|r| r * r).fold(0.0, f64::max);
        // |(log(1+e^t))'''| ≤ 1/(6√3)
        let hessian_lipschitz =
            row_norms.iter().map(|r| r * r * r).sum::<f64>() / (6.0 * 3f64.sqrt() * n as f64);
        Ok(LogisticProblem {
            a: Arc::new(a),
            b,
            rho,
            data_sq_norm,
            max_row_sq,
            hessian_lipschitz,
            reference: Arc::new(OnceLock::new()),
        })
    }

    /// Same data with a new ℓ2 weight.
    pub fn with_rho(&self, rho: f64) -> Result<Self> {
        Self::new((*self.a).clone(), self.b.clone(), rho)
    }

    /// Chooses ρ so that μ/L equals `kappa`.
    pub fn with_kappa(&self, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa < 1.0) {
            return Err(Error::InvalidParameter(format!("kappa must lie in (0, 1), got {kappa}")));
        }
        let l_data = self.data_smoothness();
        if l_data == 0.0 {
            return Err(Error::InvalidParameter("zero data matrix: kappa is 1 for any rho".into()));
        }
        self.with_rho(kappa * l_data / (1.0 - kappa))
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn labels(&self) -> &DenseVector {
        &self.b
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn n_samples(&self) -> usize {
        self.a.nrows()
    }

    /// `σ_max(A)²/(4n)`, the smoothness of the data term.
    pub fn data_smoothness(&self) -> f64 {
        self.data_sq_norm / (4.0 * self.a.nrows() as f64)
    }

    /// Hessian Lipschitz constant `(1/(6√3 n)) Σ‖a_i‖³`.
    pub fn hessian_lipschitz(&self) -> f64 {
        self.hessian_lipschitz
    }

    fn margins(&self, x: &DenseVector) -> DenseVector {
        let m = &*self.a * x;
        m.component_mul(&self.b)
    }

    /// Minimizer from a long Nesterov run followed by Newton polishing,
    /// computed once and cached.
    pub fn reference_solution(&self) -> Result<DenseVector> {
        let r = self.reference.get_or_init(|| self.solve_reference().map_err(|e| e.to_string()));
        r.clone().map_err(Error::Unsupported)
    }

    fn solve_reference(&self) -> Result<DenseVector> {
        if self.rho <= 0.0 {
            return Err(Error::Unsupported(
                "minimizer may not exist without l2 regularization".into(),
            ));
        }
        let d = self.dim();
        let l = self.smoothness();
        let kappa = self.kappa();
        let beta = (1.0 - kappa.sqrt()) / (1.0 + kappa.sqrt());
        let mut x = DenseVector::zeros(d);
        let mut y = x.clone();
        for _ in 0..REFERENCE_ITERS {
            let g = self.gradient(&y);
            if g.norm() <= REFERENCE_TOL {
                x = y.clone();
                break;
            }
            let xn = &y - g / l;
            y = &xn * (1.0 + beta) - &x * beta;
            x = xn;
        }
        if d <= 2000 {
            for _ in 0..20 {
                let g = self.gradient(&x);
                if g.norm() <= 1e-15 {
                    break;
                }
                let step = solve_spd(&self.hessian(&x), &g)?;
                let xn = &x - step;
                if self.gradient(&xn).norm() >= g.norm() {
                    break;
                }
                x = xn;
            }
        }
        let gn = self.gradient(&x).norm();
        if gn > REFERENCE_TOL {
            log::warn!("reference solve stopped at gradient norm {gn:e}");
        }
        Ok(x)
    }
}

impl Objective for LogisticProblem {
    fn dim(&self) -> usize {
        self.a.ncols()
    }

    fn value(&self, x: &DenseVector) -> f64 {
        let m = self.margins(x);
        let n = self.a.nrows() as f64;
        m.iter().map(|&t| softplus(-t)).sum::<f64>() / n + 0.5 * self.rho * x.norm_squared()
    }

    fn gradient(&self, x: &DenseVector) -> DenseVector {
        self.value_grad(x).1
    }

    fn value_grad(&self, x: &DenseVector) -> (f64, DenseVector) {
        let m = self.margins(x);
        let n = self.a.nrows() as f64;
        let f = m.iter().map(|&t| softplus(-t)).sum::<f64>() / n + 0.5 * self.rho * x.norm_squared();
        let s = DenseVector::from_fn(m.len(), |i, _| -self.b[i] * sigmoid(-m[i]) / n);
        let mut g = self.a.tr_mul(&s);
        g.axpy(self.rho, x, 1.0);
        (f, g)
    }

    fn smoothness(&self) -> f64 {
        self.data_smoothness() + self.rho
    }

    fn strong_convexity(&self) -> f64 {
        self.rho
    }
}

impl FiniteSum for LogisticProblem {
    fn n_samples(&self) -> usize {
        self.a.nrows()
    }

    fn sample_gradient(&self, x: &DenseVector, i: usize) -> DenseVector {
        let row = self.a.row(i);
        let t = self.b[i] * row.dot(&x.transpose());
        let coef = -self.b[i] * sigmoid(-t);
        let mut g = row.transpose() * coef;
        g.axpy(self.rho, x, 1.0);
        g
    }

    fn max_sample_smoothness(&self) -> f64 {
        self.max_row_sq / 4.0 + self.rho
    }
}

impl SecondOrder for LogisticProblem {
    fn hessian(&self, x: &DenseVector) -> DMatrix<f64> {
        let m = self.margins(x);
        let n = self.a.nrows() as f64;
        let w = DenseVector::from_fn(m.len(), |i, _| {
            let s = sigmoid(m[i]);
            s * (1.0 - s) / n
        });
        let mut scaled = (*self.a).clone();
        for (i, mut row) in scaled.row_iter_mut().enumerate() {
            row *= w[i];
        }
        let mut h = self.a.tr_mul(&scaled);
        for i in 0..h.nrows() {
            h[(i, i)] += self.rho;
        }
        (&h + h.transpose()) * 0.5
    }

    fn minimizer(&self) -> Result<DenseVector> {
        self.reference_solution()
    }
}

/// Rescales each column to unit Euclidean norm (zero columns are left alone).
pub fn standardize_columns(a: &mut DMatrix<f64>) {
    for mut col in a.column_iter_mut() {
        let n = col.norm();
        if n > 0.0 {
            col /= n;
        }
    }
}

/// Gaussian features, labels from a planted separator with 10% flipped,
/// columns standardized to unit norm, ρ = 0 (use `with_kappa` or
/// `with_rho` to regularize).
pub fn synth_logistic(n: usize, d: usize, seed: u64) -> Result<LogisticProblem> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidParameter("n and d must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(&mut rng));
    let w = DenseVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
    let scores = &a * &w;
    let b = DenseVector::from_fn(n, |i, _| {
        let label = if scores[i] >= 0.0 { 1.0 } else { -1.0 };
        if rng.random::<f64>() < 0.1 {
            -label
        } else {
            label
        }
    });
    standardize_columns(&mut a);
    LogisticProblem::new(a, b, 0.0)
}
