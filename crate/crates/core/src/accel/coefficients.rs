//! Extrapolation weights: the regularized (RNA) and norm-constrained (CNA)
//! solutions, the λ↔τ bridge between them, and the extrapolation itself.

use nalgebra::DMatrix;

use super::window::AccelWindow;
use crate::error::{Error, Result};
use crate::linalg::{solve_spd, spectral_norm_sq, DenseVector, GramMatrix, SpectralGram};

/// Relative accuracy demanded of the λ search.
const LAMBDA_TOL: f64 = 1e-8;
const BISECTION_STEPS: usize = 200;

/// Extrapolation weights with diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    pub c: DenseVector,
    /// `‖Rc‖₂` evaluated through the Gram matrix.
    pub residual_norm: f64,
    /// `‖c‖₂`
    pub norm: f64,
    /// The λ = 0 solve used the numerical null space of the Gram matrix.
    pub rank_deficient: bool,
    /// Regularization that produced `c` (relative to `‖R‖²`).
    pub lambda: f64,
}

impl Coefficients {
    fn new(c: DenseVector, gram: &GramMatrix, rank_deficient: bool, lambda: f64) -> Self {
        let residual_norm = gram.quadratic_form(&c).max(0.0).sqrt();
        let norm = c.norm();
        Coefficients {
            c,
            residual_norm,
            norm,
            rank_deficient,
            lambda,
        }
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    /// Weight on the newest pair.
    pub fn last(&self) -> f64 {
        self.c[self.c.len() - 1]
    }

    pub fn uniform(gram: &GramMatrix) -> Self {
        let n = gram.order();
        Self::new(DenseVector::from_element(n, 1.0 / n as f64), gram, false, f64::INFINITY)
    }
}

fn normalize(z: DenseVector) -> Result<DenseVector> {
    let s = z.sum();
    if !s.is_finite() || s == 0.0 {
        return Err(Error::DegenerateNormalization);
    }
    let c = z / s;
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateNormalization);
    }
    Ok(c)
}

/// `c^λ` evaluated on the eigenbasis of the Gram matrix.
fn spectral_coefficients(spec: &SpectralGram, lambda: f64) -> Result<DenseVector> {
    normalize(spec.shifted_solve_ones(lambda * spec.max_value))
}

/// λ = 0 with a possibly singular Gram matrix.
///
/// Two candidates are formed: the sum-one vector of least norm inside the
/// numerical null space (so `Rc ≈ 0`), and the pseudo-inverse solution on the
/// range. The one with the smaller `cᵀGc` wins.
fn unregularized(gram: &GramMatrix, spec: &SpectralGram) -> Result<Coefficients> {
    let n = spec.order();
    let mut null_part = DenseVector::zeros(n);
    let mut any_null = false;
    for k in 0..n {
        if spec.is_null(k) {
            any_null = true;
            null_part.axpy(spec.ones_proj[k], &spec.vectors.column(k).into_owned(), 1.0);
        }
    }
    let range = spectral_coefficients(spec, 0.0).ok();
    let null = if any_null && null_part.norm_squared() > 1e-20 * n as f64 {
        normalize(null_part).ok()
    } else {
        None
    };
    match (null, range) {
        (Some(cn), Some(cr)) => {
            if gram.quadratic_form(&cn) <= gram.quadratic_form(&cr) {
                Ok(Coefficients::new(cn, gram, true, 0.0))
            } else {
                Ok(Coefficients::new(cr, gram, false, 0.0))
            }
        }
        (Some(cn), None) => Ok(Coefficients::new(cn, gram, true, 0.0)),
        (None, Some(cr)) => Ok(Coefficients::new(cr, gram, any_null, 0.0)),
        (None, None) => Err(Error::DegenerateNormalization),
    }
}

/// Regularized weights `(G + λ‖R‖²I)⁻¹1 / 1ᵀ(G + λ‖R‖²I)⁻¹1` from a Gram matrix.
pub fn rna_from_gram(gram: &GramMatrix, lambda: f64) -> Result<Coefficients> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be >= 0, got {lambda}")));
    }
    let n = gram.order();
    if n == 0 {
        return Err(Error::EmptyBlock);
    }
    if n == 1 {
        return Ok(Coefficients::new(DenseVector::from_element(1, 1.0), gram, false, lambda));
    }
    let s = spectral_norm_sq(gram);
    if s == 0.0 {
        // every residual vanished
        let mut c = Coefficients::uniform(gram);
        c.rank_deficient = true;
        c.lambda = lambda;
        return Ok(c);
    }
    if lambda == 0.0 {
        return unregularized(gram, &SpectralGram::new(gram));
    }
    if lambda.is_infinite() {
        let mut c = Coefficients::uniform(gram);
        c.lambda = lambda;
        return Ok(c);
    }
    let shifted = gram.matrix() + DMatrix::identity(n, n) * (lambda * s);
    let ones = DenseVector::from_element(n, 1.0);
    let z = match solve_spd(&shifted, &ones) {
        Ok(z) => z,
        Err(Error::NotPositiveDefinite { .. }) => {
            log::warn!("cholesky failed at lambda={lambda:e}; using eigen route");
            SpectralGram::new(gram).shifted_solve_ones(lambda * s)
        }
        Err(e) => return Err(e),
    };
    let c = match normalize(z) {
        Ok(c) => c,
        Err(_) => {
            log::warn!("degenerate normalization at lambda={lambda:e}; falling back to averaging");
            return Err(Error::DegenerateNormalization);
        }
    };
    Ok(Coefficients::new(c, gram, false, lambda))
}

/// Solves `‖c^λ‖₂ = bound` for λ by doubling then bisection on the
/// eigenbasis route. Assumes `‖c^0‖₂ > bound > 1/√N`.
fn lambda_for_bound(spec: &SpectralGram, bound: f64) -> Result<f64> {
    let norm_at = |lam: f64| spectral_coefficients(spec, lam).map(|c| c.norm());
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut doublings = 0;
    while norm_at(hi)? > bound {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 1000 {
            let r = (norm_at(hi)? - bound) / bound;
            return Err(Error::BracketFailure { residual: r });
        }
    }
    let mut hi_norm = norm_at(hi)?;
    for _ in 0..BISECTION_STEPS {
        if (bound - hi_norm) <= 1e-13 * bound {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let m = norm_at(mid)?;
        if m > bound {
            lo = mid;
        } else {
            hi = mid;
            hi_norm = m;
        }
    }
    let residual = (hi_norm - bound).abs() / bound;
    if residual > LAMBDA_TOL {
        return Err(Error::BracketFailure { residual });
    }
    Ok(hi)
}

fn tau_bound(n: usize, tau: f64) -> f64 {
    (1.0 + tau) / (n as f64).sqrt()
}

/// Minimizer of `‖Rc‖` over `1ᵀc = 1, ‖c‖₂ ≤ (1+τ)/√N`, from a Gram matrix.
pub fn cna_from_gram(gram: &GramMatrix, tau: f64) -> Result<Coefficients> {
    if !(tau >= 0.0) {
        return Err(Error::InvalidParameter(format!("tau must be >= 0, got {tau}")));
    }
    let n = gram.order();
    if n == 0 {
        return Err(Error::EmptyBlock);
    }
    if n == 1 {
        return Ok(Coefficients::new(DenseVector::from_element(1, 1.0), gram, false, 0.0));
    }
    if tau == 0.0 {
        return Ok(Coefficients::uniform(gram));
    }
    let free = rna_from_gram(gram, 0.0)?;
    let bound = tau_bound(n, tau);
    if tau.is_infinite() || free.norm <= bound {
        return Ok(free);
    }
    let spec = SpectralGram::new(gram);
    let lambda = lambda_for_bound(&spec, bound)?;
    let c = spectral_coefficients(&spec, lambda)?;
    Ok(Coefficients::new(c, gram, false, lambda))
}

pub fn rna_coefficients(window: &AccelWindow, lambda: f64) -> Result<Coefficients> {
    rna_from_gram(window.gram(), lambda)
}

pub fn cna_coefficients(window: &AccelWindow, tau: f64) -> Result<Coefficients> {
    cna_from_gram(window.gram(), tau)
}

/// The λ for which the regularized weights meet the τ norm bound, or 0 when
/// the bound is inactive.
pub fn lambda_from_tau(window: &AccelWindow, tau: f64) -> Result<f64> {
    lambda_from_tau_gram(window.gram(), tau)
}

pub fn lambda_from_tau_gram(gram: &GramMatrix, tau: f64) -> Result<f64> {
    let n = gram.order();
    if n == 0 {
        return Err(Error::EmptyBlock);
    }
    if tau.is_infinite() || n == 1 {
        return Ok(0.0);
    }
    if tau == 0.0 {
        return Ok(f64::INFINITY);
    }
    let free = rna_from_gram(gram, 0.0)?;
    let bound = tau_bound(n, tau);
    if free.norm <= bound {
        return Ok(0.0);
    }
    lambda_for_bound(&SpectralGram::new(gram), bound)
}

/// `τ = ‖c‖₂√N − 1`, floored at zero.
pub fn tau_from_lambda(c: &Coefficients) -> f64 {
    (c.norm * (c.len() as f64).sqrt() - 1.0).max(0.0)
}

/// `(Y − βR)c = Σ_j c_j((1−β)y_{j−1} + βx_j)`; equals `Xc` when β = 1.
pub fn extrapolate(window: &AccelWindow, c: &Coefficients, beta: f64) -> Result<DenseVector> {
    if c.len() != window.len() {
        return Err(Error::DimensionMismatch {
            expected: window.len(),
            found: c.len(),
        });
    }
    if beta == 1.0 {
        return window.x().combine(&c.c);
    }
    let mut out = DenseVector::zeros(window.dim());
    for j in 0..window.len() {
        let cj = c.c[j];
        out.axpy(cj * (1.0 - beta), window.y().column(j), 1.0);
        out.axpy(cj * beta, window.x().column(j), 1.0);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn dv(v: &[f64]) -> DenseVector {
        DenseVector::from_column_slice(v)
    }

    /// Window whose residual columns are exactly `cols` (x = 0, y = r).
    fn window_with_residuals(cols: &[DenseVector]) -> AccelWindow {
        let zeros: Vec<_> = cols.iter().map(|c| DenseVector::zeros(c.len())).collect();
        AccelWindow::from_pairs(&zeros, cols).unwrap()
    }

    fn diag_window() -> AccelWindow {
        window_with_residuals(&[dv(&[1.0, 0.0]), dv(&[0.0, 2.0])])
    }

    fn random_window(rng: &mut ChaCha8Rng, d: usize, n: usize) -> AccelWindow {
        let cols: Vec<_> = (0..n)
            .map(|_| DenseVector::from_fn(d, |_, _| StandardNormal.sample(&mut *rng)))
            .collect();
        window_with_residuals(&cols)
    }

    #[test]
    fn single_column_gives_unit_weight() {
        let w = window_with_residuals(&[dv(&[3.0, -1.0])]);
        for lam in [0.0, 1e-3, 1.0, 1e6] {
            assert_eq!(rna_coefficients(&w, lam).unwrap().c, dv(&[1.0]));
        }
    }

    #[test]
    fn huge_lambda_averages() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = random_window(&mut rng, 6, 4);
        let c = rna_coefficients(&w, 1e12).unwrap();
        for v in c.c.iter() {
            assert!((v - 0.25).abs() < 1e-6);
        }
    }

    #[test]
    fn diagonal_examples() {
        let w = diag_window();
        let c = rna_coefficients(&w, 0.0).unwrap();
        assert_relative_eq!(c.c[0], 0.8, max_relative = 1e-14);
        assert_relative_eq!(c.c[1], 0.2, max_relative = 1e-14);
        let c = rna_coefficients(&w, 0.25).unwrap();
        assert_relative_eq!(c.c[0], 5.0 / 7.0, max_relative = 1e-14);
        assert_relative_eq!(c.c[1], 2.0 / 7.0, max_relative = 1e-14);
    }

    #[test]
    fn cna_tau_zero_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = random_window(&mut rng, 5, 3);
        let c = cna_coefficients(&w, 0.0).unwrap();
        for v in c.c.iter() {
            assert_relative_eq!(*v, 1.0 / 3.0, max_relative = 1e-15);
        }
    }

    #[test]
    fn cna_inactive_matches_rna_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let w = random_window(&mut rng, 8, 4);
        let a = cna_coefficients(&w, 1e9).unwrap();
        let b = rna_coefficients(&w, 0.0).unwrap();
        assert!((a.c - b.c).amax() <= 1e-8);
        assert_eq!(lambda_from_tau(&w, 1e9).unwrap(), 0.0);
        assert_eq!(lambda_from_tau(&w, f64::INFINITY).unwrap(), 0.0);
    }

    #[test]
    fn cna_diag_beats_random_feasible_points() {
        let w = diag_window();
        let bound = 0.75;
        let tau = bound * 2f64.sqrt() - 1.0;
        let c = cna_coefficients(&w, tau).unwrap();
        assert!((c.norm - bound).abs() <= 1e-6);
        assert!((c.c.sum() - 1.0).abs() <= 1e-12);
        let rc = c.residual_norm;
        // feasible points: c' = (1/2, 1/2) + t(1, -1)/√2 with ‖c'‖ ≤ 0.75
        let tmax = (bound * bound - 0.5f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100_000 {
            let t: f64 = rng.random_range(-tmax..=tmax);
            let c1 = 0.5 + t / 2f64.sqrt();
            let c2 = 0.5 - t / 2f64.sqrt();
            let r = (c1 * c1 + 4.0 * c2 * c2).sqrt();
            assert!(rc <= r + 1e-12);
        }
        // λ plugged back into the closed form reproduces c
        let lam = lambda_from_tau(&w, tau).unwrap();
        assert!(lam > 0.0);
        let s = 4.0;
        let z = dv(&[1.0 / (1.0 + lam * s), 1.0 / (4.0 + lam * s)]);
        let direct = &z / z.sum();
        assert!((direct - &c.c).amax() <= 1e-9);
    }

    #[test]
    fn tau_from_lambda_examples() {
        let g = GramMatrix::from_symmetric(DMatrix::identity(4, 4)).unwrap();
        assert_eq!(tau_from_lambda(&Coefficients::uniform(&g)), 0.0);
        let g1 = GramMatrix::from_symmetric(DMatrix::identity(1, 1)).unwrap();
        assert_eq!(tau_from_lambda(&rna_from_gram(&g1, 0.0).unwrap()), 0.0);
        let c = rna_coefficients(&diag_window(), 0.0).unwrap();
        let want = 2f64.sqrt() * 0.68f64.sqrt() - 1.0;
        assert_relative_eq!(tau_from_lambda(&c), want, max_relative = 1e-13);
        assert!((tau_from_lambda(&c) - 0.1662).abs() < 1e-4);
    }

    #[test]
    fn extrapolate_examples() {
        let xs = [dv(&[1.0, 2.0]), dv(&[0.5, -1.0])];
        let ys = [dv(&[3.0, 0.0]), dv(&[-2.0, 4.0])];
        let w = AccelWindow::from_pairs(&xs, &ys).unwrap();
        let c = Coefficients::new(dv(&[0.3, 0.7]), w.gram(), false, 0.0);
        let e = extrapolate(&w, &c, 1.0).unwrap();
        assert_eq!(e, &xs[0] * 0.3 + &xs[1] * 0.7);
        let unit = Coefficients::new(dv(&[0.0, 1.0]), w.gram(), false, 0.0);
        assert_eq!(extrapolate(&w, &unit, 0.0).unwrap(), ys[1]);
        // β = 0.5: y_extr = Σ c_j (y_j − 0.5 (y_j − x_j))
        let e = extrapolate(&w, &c, 0.5).unwrap();
        let manual = dv(&[
            0.3 * (3.0 - 0.5 * (3.0 - 1.0)) + 0.7 * (-2.0 - 0.5 * (-2.0 - 0.5)),
            0.3 * (0.0 - 0.5 * (0.0 - 2.0)) + 0.7 * (4.0 - 0.5 * (4.0 + 1.0)),
        ]);
        assert!((e - manual).amax() < 1e-15);
    }

    #[test]
    fn singular_gram_prefers_null_space() {
        // two identical residual columns plus an independent one in d=2
        let cols = [dv(&[1.0, 0.0]), dv(&[0.0, 1.0]), dv(&[1.0, 1.0])];
        let w = window_with_residuals(&cols);
        let c = rna_coefficients(&w, 0.0).unwrap();
        assert!(c.rank_deficient);
        assert!(c.residual_norm < 1e-12);
        assert!((c.c.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_gram_is_uniform_and_flagged() {
        let w = window_with_residuals(&[dv(&[0.0, 0.0]), dv(&[0.0, 0.0])]);
        let c = rna_coefficients(&w, 0.0).unwrap();
        assert!(c.rank_deficient);
        assert_eq!(c.c, dv(&[0.5, 0.5]));
    }

    #[test]
    fn rejects_negative_parameters() {
        let w = diag_window();
        assert!(rna_coefficients(&w, -1.0).is_err());
        assert!(cna_coefficients(&w, -0.5).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn weights_sum_to_one(seed in any::<u64>(), d in 1usize..12, n in 1usize..9,
                              lexp in -10.0f64..3.0, tau in 0.0f64..20.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w = random_window(&mut rng, d, n);
            for c in [rna_coefficients(&w, 0.0).unwrap(),
                      rna_coefficients(&w, 10f64.powf(lexp)).unwrap(),
                      cna_coefficients(&w, tau).unwrap()] {
                prop_assert!((c.c.sum() - 1.0).abs() <= 1e-10);
            }
        }

        #[test]
        fn cna_respects_norm_bound(seed in any::<u64>(), d in 1usize..12, n in 1usize..9, tau in 0.0f64..5.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w = random_window(&mut rng, d, n);
            let c = cna_coefficients(&w, tau).unwrap();
            prop_assert!(c.norm <= (1.0 + tau) / (n as f64).sqrt() + 1e-8);
        }

        #[test]
        fn regularized_norm_bound(seed in any::<u64>(), d in 1usize..12, n in 1usize..9, lexp in -8.0f64..2.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w = random_window(&mut rng, d, n);
            let lam = 10f64.powf(lexp);
            let c = rna_coefficients(&w, lam).unwrap();
            let bound = (1.0 + 1.0 / lam).sqrt() / (n as f64).sqrt();
            prop_assert!(c.norm <= bound * (1.0 + 1e-12));
        }

        #[test]
        fn monotone_in_lambda(seed in any::<u64>(), d in 2usize..12, n in 2usize..9) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w = random_window(&mut rng, d, n);
            let scale = crate::linalg::spectral_norm_sq(w.gram()).sqrt();
            let mut prev: Option<Coefficients> = None;
            for k in 0..20 {
                let lam = 10f64.powf(-10.0 + 0.6 * k as f64);
                let c = rna_coefficients(&w, lam).unwrap();
                if let Some(p) = prev {
                    prop_assert!(c.norm <= p.norm * (1.0 + 1e-9));
                    // sqrt(cᵀGc) near zero carries an absolute error of order sqrt(eps)·‖R‖
                    prop_assert!(c.residual_norm >= p.residual_norm - 1e-7 * scale);
                }
                prev = Some(c);
            }
        }

        #[test]
        fn cna_matches_rna_at_dual_lambda(seed in any::<u64>(), d in 2usize..12, n in 2usize..9, tau in 0.01f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w = random_window(&mut rng, d, n);
            let cna = cna_coefficients(&w, tau).unwrap();
            let lam = lambda_from_tau(&w, tau).unwrap();
            let rna = rna_coefficients(&w, lam).unwrap();
            prop_assert!((&cna.c - &rna.c).amax() <= 1e-6);
            if lam > 0.0 {
                prop_assert!((tau_from_lambda(&rna) - tau).abs() <= 1e-6 * (1.0 + tau));
            }
        }
    }
}
