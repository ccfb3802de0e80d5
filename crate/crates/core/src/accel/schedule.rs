use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::DenseVector;

/// Coefficients of the multistep iteration
/// `x_i = g(y_{i−1})`, `y_i = Σ_{j=1}^{i} α_j^{(i)} x_j + β_j^{(i)} y_{j−1}`.
///
/// `alpha(i)` and `beta(i)` both have length `i`; entry `j−1` multiplies
/// `x_j` and `y_{j−1}` respectively.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinationSchedule {
    alphas: Vec<DenseVector>,
    betas: Vec<DenseVector>,
}

impl CombinationSchedule {
    pub fn new(alphas: Vec<DenseVector>, betas: Vec<DenseVector>) -> Result<Self> {
        if alphas.len() != betas.len() {
            return Err(Error::DimensionMismatch {
                expected: alphas.len(),
                found: betas.len(),
            });
        }
        for (k, (a, b)) in alphas.iter().zip(&betas).enumerate() {
            let i = k + 1;
            if a.len() != i || b.len() != i {
                return Err(Error::DimensionMismatch {
                    expected: i,
                    found: a.len().max(b.len()),
                });
            }
            let total = a.sum() + b.sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::ClassViolation(format!(
                    "coefficients of iteration {i} sum to {total}, expected 1"
                )));
            }
        }
        Ok(CombinationSchedule { alphas, betas })
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    pub fn alpha(&self, i: usize) -> &DenseVector {
        &self.alphas[i - 1]
    }

    pub fn beta(&self, i: usize) -> &DenseVector {
        &self.betas[i - 1]
    }
}

/// The `i × i` upper-triangular matrix with `[y_1, …, y_i] = [x_1, …, x_i] L_i`,
/// built by
/// `L_k = [L_{k−1}, α_{1:k−1} + L_{k−1}β_{1:k−1}; 0, α_k]`.
///
/// Requires every `β_0^{(k)}` (the weight on `y_0 = x_0`) to vanish, since
/// `x_0` is not part of the basis.
pub fn build_l_matrix(schedule: &CombinationSchedule, i: usize) -> Result<DMatrix<f64>> {
    if i == 0 || i > schedule.len() {
        return Err(Error::InvalidParameter(format!(
            "iteration {i} outside schedule of length {}",
            schedule.len()
        )));
    }
    let mut l = DMatrix::<f64>::zeros(i, i);
    for k in 1..=i {
        let a = schedule.alpha(k);
        let b = schedule.beta(k);
        if a[k - 1] == 0.0 {
            return Err(Error::ClassViolation(format!("alpha_{k}^({k}) is zero")));
        }
        if b[0] != 0.0 {
            return Err(Error::UnsupportedSchedule(format!(
                "iteration {k} puts weight {} on y_0",
                b[0]
            )));
        }
        for r in 0..k - 1 {
            let mut v = a[r];
            for j in 1..k {
                v += l[(r, j - 1)] * b[j];
            }
            l[(r, k - 1)] = v;
        }
        l[(k - 1, k - 1)] = a[k - 1];
    }
    Ok(l)
}
