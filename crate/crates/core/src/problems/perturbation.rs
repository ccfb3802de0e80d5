use crate::error::{Error, Result};

/// Constants of a perturbation bounded by `γ√N D^α`, where `D` bounds the
/// distance of the iterates to the fixed point, plus the exponents of the
/// schedules `τ(D) = D^{−s}` and `λ(D) = D^{r}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationModel {
    pub d_bound: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub s: Option<f64>,
    pub r: Option<f64>,
}

impl PerturbationModel {
    pub fn new(d_bound: f64, gamma: f64, alpha: f64) -> Self {
        PerturbationModel {
            d_bound,
            gamma,
            alpha,
            s: None,
            r: None,
        }
    }

    pub fn with_exponents(mut self, s: Option<f64>, r: Option<f64>) -> Result<Self> {
        self.s = s;
        self.r = r;
        self.validate()?;
        Ok(self)
    }

    /// Exponents must satisfy `0 < s < α − 1` and `0 < r < 2(α − 1)`.
    pub fn validate(&self) -> Result<()> {
        if (self.s.is_some() || self.r.is_some()) && !(self.alpha > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "schedules need alpha > 1, got {}",
                self.alpha
            )));
        }
        if let Some(s) = self.s {
            if !(s > 0.0 && s < self.alpha - 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "s = {s} outside (0, {})",
                    self.alpha - 1.0
                )));
            }
        }
        if let Some(r) = self.r {
            if !(r > 0.0 && r < 2.0 * (self.alpha - 1.0)) {
                return Err(Error::InvalidParameter(format!(
                    "r = {r} outside (0, {})",
                    2.0 * (self.alpha - 1.0)
                )));
            }
        }
        Ok(())
    }

    /// `γ√N D^α`
    pub fn bound(&self, n: usize) -> f64 {
        self.gamma * (n as f64).sqrt() * self.d_bound.powf(self.alpha)
    }
}

/// Least-squares fit of `err ≈ γ · dist^α` in log-log coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub gamma: f64,
    pub alpha: f64,
    /// Largest ratio `err / (γ dist^α)` over the samples.
    pub max_ratio: f64,
}

pub fn fit_power_law(dist: &[f64], err: &[f64]) -> Result<PowerLawFit> {
    if dist.len() != err.len() {
        return Err(Error::DimensionMismatch {
            expected: dist.len(),
            found: err.len(),
        });
    }
    let pts: Vec<(f64, f64)> = dist
        .iter()
        .zip(err)
        .filter(|(d, e)| **d > 0.0 && **e > 0.0)
        .map(|(d, e)| (d.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::InvalidParameter("need at least two positive samples".into()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("distances are all equal".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let alpha = sxy / sxx;
    let gamma = (my - alpha * mx).exp();
    let max_ratio = pts
        .iter()
        .map(|p| (p.1 - gamma.ln() - alpha * p.0).exp())
        .fold(0.0, f64::max);
    Ok(PowerLawFit {
        gamma,
        alpha,
        max_ratio,
    })
}
