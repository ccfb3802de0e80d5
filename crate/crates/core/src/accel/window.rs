use crate::error::{Error, Result};
use crate::linalg::{all_finite, gram_append_column, ColumnBlock, DenseVector, GramMatrix};

/// Sliding window of iterate pairs.
///
/// Column `j` stores the input `y_{j-1}`, the output `x_j = g(y_{j-1})` and
/// the residual `y_{j-1} - x_j`. The residual Gram matrix is updated one
/// column at a time; when full, the oldest pair is dropped.
#[derive(Debug, Clone)]
pub struct AccelWindow {
    x: ColumnBlock,
    y: ColumnBlock,
    r: ColumnBlock,
    gram: GramMatrix,
}

impl AccelWindow {
    pub fn new(dim: usize, capacity: usize) -> Self {
        assert!(capacity >= 1, "window capacity must be at least 1");
        Self {
            x: ColumnBlock::new(dim, capacity),
            y: ColumnBlock::new(dim, capacity),
            r: ColumnBlock::new(dim, capacity),
            gram: GramMatrix::empty(),
        }
    }

    /// Window holding the given pairs in order (`xs[j] = g(ys[j])`).
    pub fn from_pairs(xs: &[DenseVector], ys: &[DenseVector]) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::DimensionMismatch {
                expected: xs.len(),
                found: ys.len(),
            });
        }
        let first = xs.first().ok_or(Error::EmptyBlock)?;
        let mut w = Self::new(first.len(), xs.len());
        for (x, y) in xs.iter().zip(ys) {
            w.push(x.clone(), y.clone())?;
        }
        Ok(w)
    }

    /// Appends `(x, y)` with `x = g(y)`, evicting the oldest pair when full.
    pub fn push(&mut self, x: DenseVector, y: DenseVector) -> Result<()> {
        let d = self.dim();
        for v in [&x, &y] {
            if v.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: v.len(),
                });
            }
        }
        if self.r.is_full() {
            self.x.pop_front();
            self.y.pop_front();
            self.r.pop_front();
            self.gram = self.gram.remove_first();
        }
        let r = &y - &x;
        if !all_finite(&r) {
            return Err(Error::NonFinite { iter: self.len() });
        }
        self.gram = gram_append_column(&self.gram, &self.r, &r)?;
        self.r.push(r)?;
        self.x.push(x)?;
        self.y.push(y)?;
        Ok(())
    }

    pub fn clear(&mut self) {
        self.x.clear();
        self.y.clear();
        self.r.clear();
        self.gram = GramMatrix::empty();
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.r.capacity()
    }

    pub fn dim(&self) -> usize {
        self.r.dim()
    }

    pub fn x(&self) -> &ColumnBlock {
        &self.x
    }

    pub fn y(&self) -> &ColumnBlock {
        &self.y
    }

    pub fn residuals(&self) -> &ColumnBlock {
        &self.r
    }

    pub fn gram(&self) -> &GramMatrix {
        &self.gram
    }

    /// Norm of the newest residual column.
    pub fn last_residual_norm(&self) -> Option<f64> {
        self.r.last().map(|r| r.norm())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::gram_from_columns;

    fn dv(v: &[f64]) -> DenseVector {
        DenseVector::from_column_slice(v)
    }

    #[test]
    fn residual_convention_and_eviction() {
        let mut w = AccelWindow::new(2, 2);
        w.push(dv(&[1.0, 0.0]), dv(&[2.0, 0.0])).unwrap();
        w.push(dv(&[0.0, 1.0]), dv(&[0.0, 3.0])).unwrap();
        assert_eq!(w.residuals().column(0), &dv(&[1.0, 0.0]));
        assert_eq!(w.residuals().column(1), &dv(&[0.0, 2.0]));
        w.push(dv(&[1.0, 1.0]), dv(&[2.0, 2.0])).unwrap();
        assert_eq!(w.len(), 2);
        assert_eq!(w.y().column(0), &dv(&[0.0, 3.0]));
        let direct = gram_from_columns(w.residuals()).unwrap();
        assert!((w.gram().matrix() - direct.matrix()).amax() < 1e-14);
    }

    #[test]
    fn rejects_wrong_dimension() {
        let mut w = AccelWindow::new(2, 2);
        assert!(w.push(dv(&[1.0]), dv(&[1.0, 2.0])).is_err());
    }
}
