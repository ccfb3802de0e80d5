use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::accel::{AccelConfig, Mode, Regularization};
use crate::analysis::{schedule_exponents, Schedules};
use crate::error::{Error, Result};
use crate::problems::PerturbationModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Quadratic,
    Logistic,
    Libsvm,
}

/// What to optimize. Quadratics take `d`, `kappa`; synthetic logistic
/// regression takes `n`, `d` and an optional `kappa`; LIBSVM takes `file`,
/// optionally `d`, `positive_label` and `kappa`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    #[serde(default)]
    pub d: Option<usize>,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub kappa: Option<f64>,
    /// Defaults to the top-level seed.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub file: Option<PathBuf>,
    #[serde(default)]
    pub positive_label: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Gradient,
    Nesterov,
    Sgd,
    Saga,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSpec {
    #[serde(default)]
    pub kind: OptimizerKind,
    /// Step size; `1/L` for deterministic methods and `1/(3 L_max)` for
    /// stochastic ones when absent.
    #[serde(default)]
    pub h: Option<f64>,
    #[serde(default)]
    pub batch: Option<usize>,
}

fn default_window() -> usize {
    10
}

fn default_beta() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccelSpec {
    #[serde(default)]
    pub mode: Mode,
    #[serde(rename = "N", default = "default_window")]
    pub window: usize,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub tau: Option<f64>,
    /// `τ(D) = D^{−s}`
    #[serde(default)]
    pub s: Option<f64>,
    /// `λ(D) = D^{r}`
    #[serde(default)]
    pub r: Option<f64>,
    /// Exponent of the perturbation model the schedules are tuned for.
    #[serde(default)]
    pub alpha: Option<f64>,
}

impl Default for AccelSpec {
    fn default() -> Self {
        AccelSpec {
            mode: Mode::None,
            window: default_window(),
            beta: default_beta(),
            lambda: None,
            tau: None,
            s: None,
            r: None,
            alpha: None,
        }
    }
}

impl AccelSpec {
    /// λ = 1e−8 unless τ or λ is given.
    pub fn regularization(&self) -> Regularization {
        match (self.tau, self.lambda) {
            (Some(t), _) => Regularization::Tau(t),
            (None, Some(l)) => Regularization::Lambda(l),
            (None, None) => Regularization::Lambda(1e-8),
        }
    }

    pub fn to_config(&self) -> Result<AccelConfig> {
        AccelConfig::new(self.window, self.beta, self.regularization(), self.mode)
    }

    pub fn schedules(&self) -> Result<Option<Schedules>> {
        if self.s.is_none() && self.r.is_none() {
            return Ok(None);
        }
        let alpha = self
            .alpha
            .ok_or_else(|| Error::Config("accel.s and accel.r need accel.alpha".into()))?;
        let model = PerturbationModel::new(1.0, 1.0, alpha).with_exponents(self.s, self.r)?;
        schedule_exponents(&model).map(Some)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    /// Total noise scale added to every step's output.
    pub sigma: f64,
    /// Defaults to the top-level seed.
    #[serde(default)]
    pub seed: Option<u64>,
}

/// One run: problem, base optimizer, acceleration and bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub optimizer: OptimizerSpec,
    #[serde(default)]
    pub accel: AccelSpec,
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
    pub max_iters: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Stop once the gradient norm drops to this value.
    #[serde(default)]
    pub tol: Option<f64>,
    /// Fill the wall_ns column. Off by default so traces are reproducible
    /// byte for byte.
    #[serde(default)]
    pub record_time: bool,
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn reject(present: bool, key: &str, why: &str) -> Result<()> {
    if present {
        Err(cfg_err(format!("{key} {why}")))
    } else {
        Ok(())
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| cfg_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => cfg_err(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| cfg_err(e.to_string()))
    }

    /// `name`, or `<optimizer>-<mode>`.
    pub fn label(&self) -> String {
        match &self.name {
            Some(n) => n.clone(),
            None => format!("{:?}-{:?}", self.optimizer.kind, self.accel.mode).to_lowercase(),
        }
    }

    pub fn problem_seed(&self) -> u64 {
        self.problem.seed.unwrap_or(self.seed)
    }

    pub fn noise_seed(&self) -> u64 {
        self.noise.as_ref().and_then(|n| n.seed).unwrap_or(self.seed)
    }

    pub fn sigma(&self) -> f64 {
        self.noise.as_ref().map_or(0.0, |n| n.sigma)
    }

    /// The problem with defaults resolved, used to check that compared runs
    /// share it.
    pub fn resolved_problem(&self) -> ProblemSpec {
        ProblemSpec {
            seed: Some(self.problem_seed()),
            ..self.problem.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(cfg_err("max_iters must be >= 1"));
        }
        if let Some(t) = self.tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(cfg_err(format!("tol must be positive, got {t}")));
            }
        }
        self.validate_problem()?;
        self.validate_optimizer()?;
        self.validate_accel()?;
        if let Some(n) = &self.noise {
            if !(n.sigma >= 0.0 && n.sigma.is_finite()) {
                return Err(cfg_err(format!("noise.sigma must be >= 0, got {}", n.sigma)));
            }
            if n.sigma > 0.0
                && (self.optimizer.kind == OptimizerKind::Nesterov || self.accel.mode == Mode::Adaptive)
            {
                return Err(cfg_err("noise is injected into step maps; not available with Nesterov"));
            }
        }
        Ok(())
    }

    fn validate_problem(&self) -> Result<()> {
        let p = &self.problem;
        let kappa_ok = |k: f64, upper_closed: bool| k > 0.0 && (k < 1.0 || (upper_closed && k == 1.0));
        match p.kind {
            ProblemKind::Quadratic => {
                let d = p.d.ok_or_else(|| cfg_err("problem.d is required for quadratic"))?;
                let k = p.kappa.ok_or_else(|| cfg_err("problem.kappa is required for quadratic"))?;
                if d == 0 {
                    return Err(cfg_err("problem.d must be >= 1"));
                }
                if !kappa_ok(k, true) {
                    return Err(cfg_err(format!("problem.kappa must lie in (0, 1], got {k}")));
                }
                if d == 1 && k != 1.0 {
                    return Err(cfg_err("a 1-dimensional quadratic has kappa = 1"));
                }
                reject(p.n.is_some(), "problem.n", "is not used by quadratic")?;
                reject(p.file.is_some(), "problem.file", "is not used by quadratic")?;
                reject(p.positive_label.is_some(), "problem.positive_label", "is not used by quadratic")?;
            }
            ProblemKind::Logistic => {
                match (p.n, p.d) {
                    (Some(n), Some(d)) if n > 0 && d > 0 => {}
                    _ => return Err(cfg_err("problem.n and problem.d (>= 1) are required for logistic")),
                }
                reject(p.file.is_some(), "problem.file", "is not used by logistic")?;
                reject(p.positive_label.is_some(), "problem.positive_label", "is not used by logistic")?;
            }
            ProblemKind::Libsvm => {
                if p.file.is_none() {
                    return Err(cfg_err("problem.file is required for libsvm"));
                }
                reject(p.n.is_some(), "problem.n", "is read from the file")?;
                if p.d == Some(0) {
                    return Err(cfg_err("problem.d must be >= 1"));
                }
            }
        }
        if p.kind != ProblemKind::Quadratic {
            if let Some(k) = p.kappa {
                if !kappa_ok(k, false) {
                    return Err(cfg_err(format!("problem.kappa must lie in (0, 1), got {k}")));
                }
            }
        }
        Ok(())
    }

    fn validate_optimizer(&self) -> Result<()> {
        let o = &self.optimizer;
        if let Some(h) = o.h {
            if !(h > 0.0 && h.is_finite()) {
                return Err(cfg_err(format!("optimizer.h must be positive, got {h}")));
            }
        }
        match o.kind {
            OptimizerKind::Sgd => {
                if o.batch == Some(0) {
                    return Err(cfg_err("optimizer.batch must be >= 1"));
                }
            }
            _ => reject(o.batch.is_some(), "optimizer.batch", "only applies to sgd")?,
        }
        if matches!(o.kind, OptimizerKind::Sgd | OptimizerKind::Saga) && self.problem.kind == ProblemKind::Quadratic
        {
            return Err(cfg_err("stochastic optimizers need a finite-sum problem (logistic or libsvm)"));
        }
        Ok(())
    }

    fn validate_accel(&self) -> Result<()> {
        let a = &self.accel;
        if a.lambda.is_some() && a.tau.is_some() {
            return Err(cfg_err("set at most one of accel.lambda and accel.tau"));
        }
        if a.s.is_some() && a.r.is_some() {
            return Err(cfg_err("set at most one of accel.s and accel.r"));
        }
        reject(a.s.is_some() && a.lambda.is_some(), "accel.s", "schedules tau; drop accel.lambda")?;
        reject(a.r.is_some() && a.tau.is_some(), "accel.r", "schedules lambda; drop accel.tau")?;
        reject(a.alpha.is_some() && a.s.is_none() && a.r.is_none(), "accel.alpha", "needs accel.s or accel.r")?;
        a.to_config().map_err(|e| cfg_err(e.to_string()))?;
        a.schedules().map_err(|e| cfg_err(e.to_string()))?;
        match a.mode {
            Mode::None => {
                let tuned = a.lambda.is_some() || a.tau.is_some() || a.s.is_some() || a.r.is_some();
                reject(tuned, "accel regularization", "has no effect with mode = none")?;
            }
            Mode::Offline => {}
            Mode::Online => reject(
                self.optimizer.kind == OptimizerKind::Nesterov,
                "mode = online",
                "cannot re-inject into Nesterov; use mode = adaptive",
            )?,
            Mode::Adaptive => {
                if !matches!(self.optimizer.kind, OptimizerKind::Gradient | OptimizerKind::Nesterov) {
                    return Err(cfg_err("mode = adaptive runs its own Nesterov steps; optimizer must be nesterov"));
                }
                reject(self.optimizer.h.is_some(), "optimizer.h", "is fixed to 1/L in adaptive mode")?;
                reject(a.tau.is_some() || a.s.is_some(), "accel.tau", "is not supported in adaptive mode")?;
                reject(a.r.is_some(), "accel.r", "is not supported in adaptive mode")?;
            }
        }
        Ok(())
    }
}
