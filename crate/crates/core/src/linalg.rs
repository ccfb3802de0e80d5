//! Small dense kernels: column blocks, Gram matrices and the N×N solves
//! used by the coefficient computations.
//!
//! Vectors live in `d` dimensions (possibly large); everything square is
//! window-sized (N ≤ 32), so eigendecompositions are cheap.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// An iterate, residual or extrapolated point.
pub type DenseVector = DVector<f64>;

/// Eigenvalues at or below this fraction of the largest one are treated as zero.
pub const RANK_CUTOFF: f64 = 1e-12;

pub(crate) fn all_finite(v: &DenseVector) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Ordered columns of equal dimension with a fixed capacity.
#[derive(Debug, Clone)]
pub struct ColumnBlock {
    columns: VecDeque<DenseVector>,
    capacity: usize,
    dim: usize,
}

impl ColumnBlock {
    pub fn new(dim: usize, capacity: usize) -> Self {
        Self {
            columns: VecDeque::with_capacity(capacity),
            capacity,
            dim,
        }
    }

    /// Builds a block holding exactly the given columns.
    pub fn from_columns(columns: Vec<DenseVector>) -> Result<Self> {
        let first = columns.first().ok_or(Error::EmptyBlock)?;
        let mut block = Self::new(first.len(), columns.len());
        for c in columns {
            block.push(c)?;
        }
        Ok(block)
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn is_full(&self) -> bool {
        self.columns.len() >= self.capacity
    }

    pub fn push(&mut self, column: DenseVector) -> Result<()> {
        if column.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: column.len(),
            });
        }
        if self.is_full() {
            return Err(Error::CapacityExceeded {
                capacity: self.capacity,
            });
        }
        self.columns.push_back(column);
        Ok(())
    }

    pub fn pop_front(&mut self) -> Option<DenseVector> {
        self.columns.pop_front()
    }

    pub fn clear(&mut self) {
        self.columns.clear();
    }

    pub fn column(&self, j: usize) -> &DenseVector {
        &self.columns[j]
    }

    pub fn last(&self) -> Option<&DenseVector> {
        self.columns.back()
    }

    pub fn iter(&self) -> impl Iterator<Item = &DenseVector> {
        self.columns.iter()
    }

    /// `Σ_j weights[j] · column_j`.
    pub fn combine(&self, weights: &DenseVector) -> Result<DenseVector> {
        if weights.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: weights.len(),
            });
        }
        let mut out = DenseVector::zeros(self.dim);
        for (col, &w) in self.columns.iter().zip(weights.iter()) {
            out.axpy(w, col, 1.0);
        }
        Ok(out)
    }

    /// Dense `d × len` copy.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_columns(&self.columns.iter().cloned().collect::<Vec<_>>())
    }
}

/// Symmetric positive semidefinite N×N matrix of column inner products.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix(DMatrix<f64>);

impl GramMatrix {
    pub fn empty() -> Self {
        GramMatrix(DMatrix::zeros(0, 0))
    }

    /// Wraps a symmetric matrix, averaging it with its transpose.
    pub fn from_symmetric(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        let sym = (&m + m.transpose()) * 0.5;
        Ok(GramMatrix(sym))
    }

    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// `cᵀ G c`, i.e. `‖Rc‖²` when this is `RᵀR`.
    pub fn quadratic_form(&self, c: &DenseVector) -> f64 {
        c.dot(&(&self.0 * c))
    }

    /// Drops the first row and column (oldest column evicted from the block).
    pub fn remove_first(&self) -> GramMatrix {
        if self.order() == 0 {
            return self.clone();
        }
        GramMatrix(self.0.clone().remove_row(0).remove_column(0))
    }
}

pub fn gram_from_columns(block: &ColumnBlock) -> Result<GramMatrix> {
    if block.is_empty() {
        return Err(Error::EmptyBlock);
    }
    let n = block.len();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = block.column(i).dot(block.column(j));
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    Ok(GramMatrix(g))
}

/// Gram of `block` with `new_col` appended, given the Gram of `block`.
/// Only the new row/column is computed.
pub fn gram_append_column(
    gram: &GramMatrix,
    block: &ColumnBlock,
    new_col: &DenseVector,
) -> Result<GramMatrix> {
    if block.is_full() {
        return Err(Error::CapacityExceeded {
            capacity: block.capacity(),
        });
    }
    if gram.order() != block.len() {
        return Err(Error::DimensionMismatch {
            expected: block.len(),
            found: gram.order(),
        });
    }
    if new_col.len() != block.dim() {
        return Err(Error::DimensionMismatch {
            expected: block.dim(),
            found: new_col.len(),
        });
    }
    let n = block.len();
    let mut g = gram.0.clone().resize(n + 1, n + 1, 0.0);
    for (i, col) in block.iter().enumerate() {
        let v = col.dot(new_col);
        g[(i, n)] = v;
        g[(n, i)] = v;
    }
    g[(n, n)] = new_col.norm_squared();
    Ok(GramMatrix(g))
}

/// Largest eigenvalue of a PSD Gram matrix, i.e. `‖R‖₂²`.
pub fn spectral_norm_sq(gram: &GramMatrix) -> f64 {
    if gram.order() == 0 {
        return 0.0;
    }
    let ev = gram.0.clone().symmetric_eigenvalues();
    ev.iter().cloned().fold(0.0, f64::max)
}

/// Cholesky solve of `A z = b` for symmetric positive definite `A`.
pub fn solve_spd(a: &DMatrix<f64>, b: &DenseVector) -> Result<DenseVector> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: b.len(),
        });
    }
    // lower factor, row-major fill
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: j });
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    let mut y = b.clone();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    Ok(y)
}

/// Eigendecomposition of a Gram matrix together with the projection of the
/// all-ones vector onto its eigenbasis.
#[derive(Debug, Clone)]
pub struct SpectralGram {
    pub values: DenseVector,
    pub vectors: DMatrix<f64>,
    /// `Vᵀ 1`
    pub ones_proj: DenseVector,
    pub max_value: f64,
}

impl SpectralGram {
    pub fn new(gram: &GramMatrix) -> Self {
        let n = gram.order();
        let eig = SymmetricEigen::new(gram.matrix().clone());
        let ones = DenseVector::from_element(n, 1.0);
        let ones_proj = eig.eigenvectors.transpose() * &ones;
        let max_value = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        SpectralGram {
            values: eig.eigenvalues,
            vectors: eig.eigenvectors,
            ones_proj,
            max_value,
        }
    }

    pub fn order(&self) -> usize {
        self.values.len()
    }

    pub fn is_null(&self, k: usize) -> bool {
        self.values[k] <= RANK_CUTOFF * self.max_value
    }

    /// `(G + shift·I)⁻¹ 1` restricted to eigenvalues above the cutoff when
    /// `shift == 0`.
    pub fn shifted_solve_ones(&self, shift: f64) -> DenseVector {
        let mut z = DenseVector::zeros(self.order());
        for k in 0..self.order() {
            let e = self.values[k].max(0.0) + shift;
            if shift == 0.0 && self.is_null(k) {
                continue;
            }
            z.axpy(self.ones_proj[k] / e, &self.vectors.column(k).into_owned(), 1.0);
        }
        z
    }
}
