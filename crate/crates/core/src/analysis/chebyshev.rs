//! Norm-constrained minimax polynomials on `[0, u]`.
//!
//! Minimizes `max_{x ∈ grid} |p(x)|` over monomial coefficient vectors with
//! `p(1) = 1` and `‖p‖₂ ≤ (1+τ)/√(N+1)`. The solver reweights the grid
//! (Lawson's scheme): each pass solves a weighted least-squares problem with
//! the same constraints, whose optimal value is a lower bound on the minimax
//! value, and multiplies the weights by `|p(x)|`.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::accel::cna_from_gram;
use crate::error::{Error, Result};
use crate::linalg::{DenseVector, GramMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChebyshevOptions {
    pub grid_size: usize,
    pub max_iter: usize,
    pub gap_tol: f64,
}

impl Default for ChebyshevOptions {
    fn default() -> Self {
        ChebyshevOptions {
            grid_size: 2000,
            max_iter: 100_000,
            gap_tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChebyshevCertificate {
    pub degree: usize,
    /// Right end `u` of the interval `[0, u]`.
    pub interval_end: f64,
    pub tau: f64,
    /// Monomial coefficients, constant term first.
    pub coefficients: DenseVector,
    /// `max_{x ∈ grid} |p(x)|`
    pub value: f64,
    /// Certified lower bound on the discretized optimum.
    pub lower_bound: f64,
    pub gap: f64,
    /// Gap below tolerance before the iteration cap.
    pub converged: bool,
    pub grid_size: usize,
    pub iterations: usize,
}

impl ChebyshevCertificate {
    pub fn eval(&self, x: f64) -> f64 {
        horner(self.coefficients.as_slice(), x)
    }

    /// `max |p|` on a uniform grid of `points` points over `[0, u]`.
    pub fn max_on_grid(&self, points: usize) -> f64 {
        uniform_grid(self.interval_end, points)
            .map(|x| self.eval(x).abs())
            .fold(0.0, f64::max)
    }

    pub fn norm_bound(&self) -> f64 {
        (1.0 + self.tau) / ((self.degree + 1) as f64).sqrt()
    }
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &v| acc * x + v)
}

fn uniform_grid(u: f64, points: usize) -> impl Iterator<Item = f64> {
    let step = if points > 1 { u / (points - 1) as f64 } else { 0.0 };
    (0..points).map(move |k| k as f64 * step)
}

/// `1/T_n(2/u − 1)`: the unconstrained minimax value over `[0, u]` with
/// `p(1) = 1`.
pub fn unconstrained_chebyshev_value(degree: usize, interval_end: f64) -> f64 {
    let z = 2.0 / interval_end - 1.0;
    1.0 / (degree as f64 * z.acosh()).cosh()
}

pub fn constrained_chebyshev(
    degree: usize,
    interval_end: f64,
    tau: f64,
    grid_size: usize,
) -> Result<ChebyshevCertificate> {
    constrained_chebyshev_with(
        degree,
        interval_end,
        tau,
        ChebyshevOptions {
            grid_size,
            ..ChebyshevOptions::default()
        },
    )
}

pub fn constrained_chebyshev_with(
    degree: usize,
    interval_end: f64,
    tau: f64,
    opts: ChebyshevOptions,
) -> Result<ChebyshevCertificate> {
    if !(interval_end > 0.0 && interval_end < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "interval end must lie in (0, 1), got {interval_end}"
        )));
    }
    if !(tau >= 0.0) {
        return Err(Error::InvalidParameter(format!("tau must be >= 0, got {tau}")));
    }
    let n = degree + 1;
    if opts.grid_size < 10 * n {
        return Err(Error::InvalidParameter(format!(
            "grid size {} below 10(N+1) = {}",
            opts.grid_size,
            10 * n
        )));
    }
    if degree == 0 {
        return Ok(ChebyshevCertificate {
            degree,
            interval_end,
            tau,
            coefficients: DenseVector::from_element(1, 1.0),
            value: 1.0,
            lower_bound: 1.0,
            gap: 0.0,
            converged: true,
            grid_size: opts.grid_size,
            iterations: 0,
        });
    }
    let m = opts.grid_size;
    let grid: Vec<f64> = uniform_grid(interval_end, m).collect();
    let v = DMatrix::from_fn(m, n, |i, j| grid[i].powi(j as i32));
    let mut w = DenseVector::from_element(m, 1.0 / m as f64);
    let mut best_value = f64::INFINITY;
    let mut best = DenseVector::from_element(n, 1.0 / n as f64);
    let mut lower = 0.0f64;
    let mut iterations = 0;
    let mut converged = false;
    for it in 0..opts.max_iter {
        iterations = it + 1;
        let mut wv = v.clone();
        for (i, mut row) in wv.row_iter_mut().enumerate() {
            row *= w[i];
        }
        let gram = GramMatrix::from_symmetric(v.tr_mul(&wv))?;
        let coeffs = cna_from_gram(&gram, tau)?;
        let c = coeffs.c;
        let vals = (&v * &c).map(f64::abs);
        let up = vals.max();
        lower = lower.max(gram.quadratic_form(&c).max(0.0).sqrt());
        if up < best_value {
            best_value = up;
            best = c;
        }
        if best_value - lower <= opts.gap_tol {
            converged = true;
            break;
        }
        let floor = 1e-300;
        w.component_mul_assign(&vals);
        w.apply(|x| *x += floor);
        let s = w.sum();
        w /= s;
    }
    Ok(ChebyshevCertificate {
        degree,
        interval_end,
        tau,
        coefficients: best,
        value: best_value,
        lower_bound: lower.min(best_value),
        gap: (best_value - lower).max(0.0),
        converged,
        grid_size: m,
        iterations,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct CertificateRow {
    degree: usize,
    kappa: f64,
    tau: f64,
    value: f64,
    gap: f64,
}

/// Writes `degree,kappa,tau,value,gap` rows, `kappa` being the interval end.
pub fn write_certificates_csv(certs: &[ChebyshevCertificate], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for c in certs {
        w.serialize(CertificateRow {
            degree: c.degree,
            kappa: c.interval_end,
            tau: c.tau,
            value: c.value,
            gap: c.gap,
        })?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degree_zero_is_constant() {
        let c = constrained_chebyshev(0, 0.5, 1.0, 100).unwrap();
        assert_eq!(c.value, 1.0);
        assert_eq!(c.coefficients, DenseVector::from_element(1, 1.0));
    }

    #[test]
    fn degree_one_analytic_value() {
        let c = constrained_chebyshev(1, 0.25, f64::INFINITY, 2000).unwrap();
        assert!((c.value - 1.0 / 7.0).abs() <= 1e-3, "{}", c.value);
        assert!((unconstrained_chebyshev_value(1, 0.25) - 1.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn degree_two_matches_chebyshev() {
        let c = constrained_chebyshev(2, 0.9, f64::INFINITY, 2000).unwrap();
        let exact = unconstrained_chebyshev_value(2, 0.9);
        assert!(c.value >= exact - 1e-12);
        assert!(c.value - exact <= 1e-3);
    }

    #[test]
    fn certificate_invariants_and_tau_monotonicity() {
        let taus = [0.0, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, f64::INFINITY];
        let mut prev = f64::INFINITY;
        for &tau in &taus {
            let c = constrained_chebyshev(4, 0.95, tau, 1000).unwrap();
            assert!((c.coefficients.sum() - 1.0).abs() <= 1e-8);
            if tau.is_finite() {
                assert!(c.coefficients.norm() <= c.norm_bound() + 1e-8);
            }
            assert!(c.value >= unconstrained_chebyshev_value(4, 0.95) - 1e-12);
            assert!(c.max_on_grid(10_000) <= c.value + 1e-4);
            assert!(c.value <= prev + 1e-4, "tau {tau}: {} > {prev}", c.value);
            prev = c.value;
        }
    }

    #[test]
    fn rejects_coarse_grid() {
        assert!(constrained_chebyshev(5, 0.5, 1.0, 20).is_err());
    }

    #[test]
    fn csv_export() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let c = constrained_chebyshev(1, 0.25, 1.0, 100).unwrap();
        write_certificates_csv(&[c], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("degree,kappa,tau,value,gap\n1,0.25,1.0,"));
    }
}
