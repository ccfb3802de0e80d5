use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Objective, SecondOrder};
use crate::error::{Error, Result};
use crate::linalg::DenseVector;

/// `f(x) = ½(x − x*)ᵀA(x − x*)` with `A = Q diag(eigs) Qᵀ`.
#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    q: Arc<DMatrix<f64>>,
    eigs: DenseVector,
    a: Arc<DMatrix<f64>>,
    x_star: DenseVector,
}

impl QuadraticProblem {
    /// From an orthogonal basis `q` and nonnegative eigenvalues.
    pub fn from_eigen(q: DMatrix<f64>, eigs: DenseVector, x_star: DenseVector) -> Result<Self> {
        let d = eigs.len();
        if q.nrows() != d || q.ncols() != d || x_star.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: q.nrows(),
            });
        }
        if eigs.iter().any(|&e| !(e >= 0.0) || !e.is_finite()) {
            return Err(Error::InvalidParameter("eigenvalues must be finite and >= 0".into()));
        }
        if eigs.max() <= 0.0 {
            return Err(Error::InvalidParameter("A must be nonzero".into()));
        }
        let a = &q * DMatrix::from_diagonal(&eigs) * q.transpose();
        let a = (&a + a.transpose()) * 0.5;
        Ok(QuadraticProblem {
            q: Arc::new(q),
            eigs,
            a: Arc::new(a),
            x_star,
        })
    }

    /// From a dense symmetric PSD matrix.
    pub fn from_matrix(a: DMatrix<f64>, x_star: DenseVector) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                found: a.ncols(),
            });
        }
        let sym = (&a + a.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let eigs = eig.eigenvalues.map(|e| e.max(0.0));
        Self::from_eigen(eig.eigenvectors, eigs, x_star)
    }

    pub fn diagonal(eigs: &[f64], x_star: DenseVector) -> Result<Self> {
        let d = eigs.len();
        Self::from_eigen(DMatrix::identity(d, d), DenseVector::from_column_slice(eigs), x_star)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn eigenvalues(&self) -> &DenseVector {
        &self.eigs
    }

    pub fn x_star(&self) -> &DenseVector {
        &self.x_star
    }

    /// Iteration matrix `G = I − hA` of the gradient step with step `h`.
    pub fn iteration_matrix(&self, h: f64) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::identity(d, d) - &*self.a * h
    }

    /// `p(G)v` for `G = I − A/L`, with `p` given by monomial coefficients.
    /// Evaluated on the eigenbasis.
    pub fn apply_polynomial(&self, coeffs: &[f64], v: &DenseVector) -> DenseVector {
        let l = self.smoothness();
        let w = self.q.transpose() * v;
        let scaled = DenseVector::from_fn(w.len(), |i, _| {
            let g = 1.0 - self.eigs[i] / l;
            let mut p = 0.0;
            for &c in coeffs.iter().rev() {
                p = p * g + c;
            }
            p * w[i]
        });
        &*self.q * scaled
    }
}

impl Objective for QuadraticProblem {
    fn dim(&self) -> usize {
        self.eigs.len()
    }

    fn value(&self, x: &DenseVector) -> f64 {
        let dx = x - &self.x_star;
        0.5 * dx.dot(&(&*self.a * &dx))
    }

    fn gradient(&self, x: &DenseVector) -> DenseVector {
        &*self.a * (x - &self.x_star)
    }

    fn value_grad(&self, x: &DenseVector) -> (f64, DenseVector) {
        let dx = x - &self.x_star;
        let g = &*self.a * &dx;
        (0.5 * dx.dot(&g), g)
    }

    fn smoothness(&self) -> f64 {
        self.eigs.max()
    }

    fn strong_convexity(&self) -> f64 {
        self.eigs.min()
    }
}

impl SecondOrder for QuadraticProblem {
    fn hessian(&self, _x: &DenseVector) -> DMatrix<f64> {
        (*self.a).clone()
    }

    fn minimizer(&self) -> Result<DenseVector> {
        Ok(self.x_star.clone())
    }
}

/// Haar-distributed orthogonal matrix from the QR factorization of a
/// Gaussian matrix, with the sign of each column fixed by `diag(R)`.
pub(crate) fn random_orthogonal(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let m = DMatrix::from_fn(d, d, |_, _| StandardNormal.sample(&mut *rng));
    let qr = m.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Quadratic with eigenvalues log-spaced in `[κ, 1]` (so L = 1, μ = κ), a
/// random orthogonal eigenbasis and a standard normal minimizer.
pub fn synth_quadratic(d: usize, kappa: f64, seed: u64) -> Result<QuadraticProblem> {
    if d == 0 {
        return Err(Error::InvalidParameter("dimension must be >= 1".into()));
    }
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(Error::InvalidParameter(format!("kappa must lie in (0, 1], got {kappa}")));
    }
    if d == 1 && kappa != 1.0 {
        return Err(Error::InvalidParameter("a 1-dimensional quadratic has kappa = 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eigs = DenseVector::from_fn(d, |i, _| {
        if d == 1 || i == 0 {
            1.0
        } else if i == d - 1 {
            kappa
        } else {
            kappa.powf(i as f64 / (d - 1) as f64)
        }
    });
    let q = random_orthogonal(d, &mut rng);
    let x_star = DenseVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
    QuadraticProblem::from_eigen(q, eigs, x_star)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::finite_difference_gradient;
    use approx::assert_relative_eq;

    fn dv(v: &[f64]) -> DenseVector {
        DenseVector::from_column_slice(v)
    }

    #[test]
    fn value_grad_examples() {
        let xs = dv(&[0.3, -0.7]);
        let p = QuadraticProblem::diagonal(&[1.0, 4.0], xs.clone()).unwrap();
        let (f, g) = p.value_grad(&xs);
        assert_eq!(f, 0.0);
        assert_eq!(g, dv(&[0.0, 0.0]));
        let (f, g) = p.value_grad(&(&xs + dv(&[1.0, 1.0])));
        assert_relative_eq!(f, 2.5, max_relative = 1e-14);
        assert!((g - dv(&[1.0, 4.0])).amax() < 1e-14);

        let p = QuadraticProblem::diagonal(&[1.0, 1.0], DenseVector::zeros(2)).unwrap();
        let (f, g) = p.value_grad(&dv(&[1.0, 0.0]));
        assert_eq!(f, 0.5);
        assert_eq!(g, dv(&[1.0, 0.0]));
    }

    #[test]
    fn synth_constants() {
        let p = synth_quadratic(1, 1.0, 9).unwrap();
        assert_eq!(p.matrix()[(0, 0)], 1.0);
        for (d, k) in [(5, 0.25), (20, 1e-3), (50, 1e-2)] {
            let p = synth_quadratic(d, k, 4).unwrap();
            assert_eq!(p.smoothness(), 1.0);
            assert!((p.kappa() / k - 1.0).abs() <= 1e-12);
            let qtq = p.basis().transpose() * p.basis();
            assert!((qtq - DMatrix::identity(d, d)).amax() < 1e-12);
        }
        assert!(synth_quadratic(1, 0.5, 0).is_err());
        assert!(synth_quadratic(3, 0.0, 0).is_err());
    }

    #[test]
    fn gradient_step_is_linear_map() {
        let p = synth_quadratic(12, 1e-2, 2).unwrap();
        let g = p.iteration_matrix(1.0 / p.smoothness());
        for k in 0..5 {
            let x = DenseVector::from_fn(12, |i, _| ((i * 7 + k) as f64).sin());
            let step = &x - p.gradient(&x) / p.smoothness();
            let lin = &g * (&x - p.x_star());
            assert!(((step - p.x_star()) - &lin).amax() <= 1e-12 * (1.0 + lin.amax()));
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = synth_quadratic(8, 0.1, 1).unwrap();
        for k in 0..20 {
            let x = DenseVector::from_fn(8, |i, _| ((i + 3 * k) as f64).cos());
            let g = p.gradient(&x);
            let fd = finite_difference_gradient(&p, &x, 1e-5);
            assert!((&g - &fd).norm() <= 1e-6 * g.norm().max(1.0));
        }
    }

    #[test]
    fn polynomial_application() {
        let p = synth_quadratic(6, 0.3, 8).unwrap();
        let v = DenseVector::from_fn(6, |i, _| i as f64 - 2.0);
        let g = p.iteration_matrix(1.0);
        let direct = &v * 0.5 + &g * &v * (-2.0) + &g * &g * &v * 3.0;
        let via = p.apply_polynomial(&[0.5, -2.0, 3.0], &v);
        assert!((direct - via).amax() < 1e-12);
    }
}
