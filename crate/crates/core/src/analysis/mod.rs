//! Theory-side oracles: worst-case rates, constrained Chebyshev values,
//! perturbation bounds and the noise plateau.

mod chebyshev;

use nalgebra::DMatrix;

pub use chebyshev::{
    constrained_chebyshev, constrained_chebyshev_with, unconstrained_chebyshev_value,
    write_certificates_csv, ChebyshevCertificate, ChebyshevOptions,
};

use crate::error::{Error, Result};
use crate::linalg::{spectral_norm_sq, DenseVector, GramMatrix};
use crate::problems::PerturbationModel;

/// `((1−√κ)/(1+√κ))^{N−1}`, or 0 when `N > d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateBound {
    pub kappa: f64,
    pub window: usize,
    pub value: f64,
    /// Multiplies `value`; `1 − κ` for β = 1 on gradient descent.
    pub prefactor: f64,
}

impl RateBound {
    pub fn bound(&self) -> f64 {
        self.prefactor * self.value
    }
}

pub fn theorem1_rate(kappa: f64, window: usize, dim: usize) -> RateBound {
    let value = if window > dim || kappa >= 1.0 {
        0.0
    } else {
        let s = kappa.sqrt();
        ((1.0 - s) / (1.0 + s)).powi(window as i32 - 1)
    };
    RateBound {
        kappa,
        window,
        value,
        prefactor: 1.0 - kappa,
    }
}

fn block_spectral_norm(cols: &[DenseVector]) -> f64 {
    if cols.is_empty() {
        return 0.0;
    }
    let n = cols.len();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = cols[i].dot(&cols[j]);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    GramMatrix::from_symmetric(g)
        .map(|g| spectral_norm_sq(&g).max(0.0).sqrt())
        .unwrap_or(0.0)
}

/// Paired clean and perturbed runs from the same start: logged noise columns
/// `e_i`, residual columns of both runs, and `‖L_j‖₂` of the schedule.
#[derive(Debug, Clone)]
pub struct PerturbationLedger {
    noise: Vec<DenseVector>,
    clean: Vec<DenseVector>,
    noisy: Vec<DenseVector>,
    l_norms: Vec<f64>,
}

impl PerturbationLedger {
    pub fn new(
        noise: Vec<DenseVector>,
        clean_residuals: Vec<DenseVector>,
        noisy_residuals: Vec<DenseVector>,
        l_norms: Vec<f64>,
    ) -> Result<Self> {
        let k = noise.len();
        for len in [clean_residuals.len(), noisy_residuals.len(), l_norms.len()] {
            if len != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    found: len,
                });
            }
        }
        Ok(PerturbationLedger {
            noise,
            clean: clean_residuals,
            noisy: noisy_residuals,
            l_norms,
        })
    }

    /// Gradient descent, where every `L_j` is the identity.
    pub fn gradient_descent(
        noise: Vec<DenseVector>,
        clean_residuals: Vec<DenseVector>,
        noisy_residuals: Vec<DenseVector>,
    ) -> Result<Self> {
        let k = noise.len();
        Self::new(noise, clean_residuals, noisy_residuals, vec![1.0; k])
    }

    pub fn len(&self) -> usize {
        self.noise.len()
    }

    pub fn is_empty(&self) -> bool {
        self.noise.is_empty()
    }

    /// Columns of `P_i = R̃_i − R_i`.
    pub fn perturbation_columns(&self, i: usize) -> Vec<DenseVector> {
        (0..i).map(|j| &self.noisy[j] - &self.clean[j]).collect()
    }
}

/// Measured `‖P_i‖₂` and the bound `‖E_i‖₂(1 + Σ_{j≤i}(1−κ)^j L̄_j)` with
/// `L̄_j = ‖L_1‖⋯‖L_j‖`, for `i = 1..len`.
pub fn perturbation_bound(ledger: &PerturbationLedger, kappa: f64) -> (Vec<f64>, Vec<f64>) {
    let mut lhs = Vec::with_capacity(ledger.len());
    let mut rhs = Vec::with_capacity(ledger.len());
    let mut lbar = 1.0;
    let mut sum = 0.0;
    let mut pow = 1.0;
    for i in 1..=ledger.len() {
        lbar *= ledger.l_norms[i - 1];
        pow *= 1.0 - kappa;
        sum += pow * lbar;
        lhs.push(block_spectral_norm(&ledger.perturbation_columns(i)));
        rhs.push(block_spectral_norm(&ledger.noise[..i]) * (1.0 + sum));
    }
    (lhs, rhs)
}

/// Inputs of the accuracy bound for accelerated gradient descent under noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityParams {
    pub kappa: f64,
    pub tau: f64,
    pub sigma: f64,
    pub smoothness: f64,
    pub window: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilitySplit {
    /// `(1−κ) C ‖∇f(x_0)‖` per window, `x_0` being the window's first point.
    pub acceleration: Vec<f64>,
    /// `(1+τ)/√N · Lσ/κ`, the same for every window.
    pub stability: f64,
    /// Contraction factor `C` used for the acceleration term.
    pub contraction: f64,
}

impl StabilitySplit {
    pub fn total(&self, window: usize) -> f64 {
        self.acceleration[window] + self.stability
    }
}

/// Splits the bound into its acceleration and stability parts. The
/// contraction is the constrained Chebyshev value on `[0, 1−κ]` (the
/// unconstrained rate for τ = ∞).
pub fn stability_split(window_start_grad_norms: &[f64], p: StabilityParams) -> Result<StabilitySplit> {
    if p.window == 0 || !(p.kappa > 0.0 && p.kappa <= 1.0) {
        return Err(Error::InvalidParameter("need N >= 1 and kappa in (0, 1]".into()));
    }
    let contraction = if p.kappa >= 1.0 {
        0.0
    } else if p.tau.is_infinite() {
        theorem1_rate(p.kappa, p.window, usize::MAX).value
    } else {
        let deg = p.window - 1;
        constrained_chebyshev(deg, 1.0 - p.kappa, p.tau, (10 * p.window).max(500))?.value
    };
    let stability = if p.sigma == 0.0 {
        0.0
    } else {
        (1.0 + p.tau) / (p.window as f64).sqrt() * p.smoothness * p.sigma / p.kappa
    };
    let acceleration = window_start_grad_norms
        .iter()
        .map(|g| (1.0 - p.kappa) * contraction * g)
        .collect();
    Ok(StabilitySplit {
        acceleration,
        stability,
        contraction,
    })
}

/// `τ(D) = D^{−s}` and `λ(D) = D^{r}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedules {
    pub s: Option<f64>,
    pub r: Option<f64>,
}

impl Schedules {
    pub fn tau(&self, d: f64) -> Option<f64> {
        self.s.map(|s| d.powf(-s))
    }

    pub fn lambda(&self, d: f64) -> Option<f64> {
        self.r.map(|r| d.powf(r))
    }
}

pub fn schedule_exponents(model: &PerturbationModel) -> Result<Schedules> {
    if !(model.alpha > 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must exceed 1, got {}", model.alpha)));
    }
    model.validate()?;
    Ok(Schedules {
        s: model.s,
        r: model.r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_examples() {
        assert_eq!(theorem1_rate(1.0, 5, 100).value, 0.0);
        assert!((theorem1_rate(0.25, 4, 100).value - 1.0 / 27.0).abs() < 1e-15);
        assert_eq!(theorem1_rate(0.01, 11, 10).value, 0.0);
        assert!(theorem1_rate(0.01, 10, 10).value > 0.0);
    }

    #[test]
    fn rate_monotonicity() {
        let ks = [0.5, 0.1, 1e-2, 1e-3, 1e-4];
        for &k in &ks {
            for n in 1..20 {
                assert!(theorem1_rate(k, n + 1, 100).value <= theorem1_rate(k, n, 100).value);
            }
        }
        for w in ks.windows(2) {
            assert!(theorem1_rate(w[1], 6, 100).value >= theorem1_rate(w[0], 6, 100).value);
        }
    }

    #[test]
    fn zero_noise_ledger() {
        let r: Vec<DenseVector> = (0..4).map(|i| DenseVector::from_element(3, i as f64)).collect();
        let e = vec![DenseVector::zeros(3); 4];
        let l = PerturbationLedger::gradient_descent(e, r.clone(), r).unwrap();
        let (lhs, rhs) = perturbation_bound(&l, 0.1);
        assert!(lhs.iter().all(|&v| v == 0.0));
        assert!(rhs.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn single_step_ledger() {
        let e1 = DenseVector::from_column_slice(&[0.3, -0.4]);
        let clean = vec![DenseVector::from_column_slice(&[1.0, 1.0])];
        // residual y_0 − x̃_1 = (y_0 − x_1) − e_1
        let noisy = vec![&clean[0] - &e1];
        let l = PerturbationLedger::gradient_descent(vec![e1.clone()], clean, noisy).unwrap();
        assert!((&l.perturbation_columns(1)[0] + &e1).amax() < 1e-15);
        let (lhs, rhs) = perturbation_bound(&l, 0.2);
        assert!((lhs[0] - 0.5).abs() < 1e-14);
        assert!((rhs[0] - 0.5 * 1.8).abs() < 1e-14);
    }

    #[test]
    fn unpaired_ledger_rejected() {
        let v = vec![DenseVector::zeros(2); 2];
        assert!(PerturbationLedger::gradient_descent(v.clone(), v[..1].to_vec(), v).is_err());
    }

    #[test]
    fn stability_examples() {
        let base = StabilityParams {
            kappa: 0.1,
            tau: 0.0,
            sigma: 0.0,
            smoothness: 1.0,
            window: 4,
        };
        assert_eq!(stability_split(&[1.0], base).unwrap().stability, 0.0);
        let s = stability_split(&[1.0], StabilityParams { sigma: 0.01, ..base }).unwrap();
        assert!((s.stability - 0.01 / (0.1 * 2.0)).abs() < 1e-15);
        let s = stability_split(&[3.0, 2.0], StabilityParams { kappa: 1.0, ..base }).unwrap();
        assert_eq!(s.acceleration, vec![0.0, 0.0]);
    }

    #[test]
    fn exponent_examples() {
        let m = PerturbationModel::new(1.0, 1.0, 2.0);
        assert!(schedule_exponents(&PerturbationModel { s: Some(0.5), ..m }).is_ok());
        assert!(schedule_exponents(&PerturbationModel { r: Some(1.0), ..m }).is_ok());
        let bad = PerturbationModel::new(1.0, 1.0, 1.2);
        assert!(schedule_exponents(&PerturbationModel { s: Some(0.5), ..bad }).is_err());
        let sch = schedule_exponents(&PerturbationModel {
            s: Some(0.5),
            r: Some(1.0),
            ..m
        })
        .unwrap();
        assert_eq!(sch.tau(0.01), Some(10.0));
        assert!((sch.lambda(0.01).unwrap() - 0.01).abs() < 1e-18);
    }
}
