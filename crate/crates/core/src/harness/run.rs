use std::time::Instant;

use crate::accel::{
    extrapolate, weights, AccelConfig, AccelWindow, AdaptiveAccelerator, Branch, Mode, OnlineAccelerator,
    Regularization,
};
use crate::analysis::Schedules;
use crate::error::{Error, Result};
use crate::linalg::DenseVector;
use crate::optimizers::{default_stochastic_step, GradientStep, Momentum, Nesterov, SagaStep, SgdStep, StepMap};
use crate::problems::{
    read_libsvm_file, synth_logistic, synth_quadratic, FiniteSum, LogisticProblem, NoiseModel, Objective,
    PerturbedStep, QuadraticProblem,
};

use super::config::{ExperimentConfig, OptimizerKind, ProblemKind, ProblemSpec};
use super::trace::{BranchFlag, RunStatus, RunTrace, TraceRow};

/// A problem built from a [`ProblemSpec`].
#[derive(Debug, Clone)]
pub enum ProblemInstance {
    Quadratic(QuadraticProblem),
    Logistic(LogisticProblem),
}

impl ProblemInstance {
    pub fn build(spec: &ProblemSpec, seed: u64) -> Result<Self> {
        let seed = spec.seed.unwrap_or(seed);
        let missing = |k: &str| Error::Config(format!("problem.{k} is required"));
        match spec.kind {
            ProblemKind::Quadratic => {
                let d = spec.d.ok_or_else(|| missing("d"))?;
                let kappa = spec.kappa.ok_or_else(|| missing("kappa"))?;
                Ok(ProblemInstance::Quadratic(synth_quadratic(d, kappa, seed)?))
            }
            ProblemKind::Logistic => {
                let n = spec.n.ok_or_else(|| missing("n"))?;
                let d = spec.d.ok_or_else(|| missing("d"))?;
                let p = synth_logistic(n, d, seed)?;
                Ok(ProblemInstance::Logistic(match spec.kappa {
                    Some(k) => p.with_kappa(k)?,
                    None => p,
                }))
            }
            ProblemKind::Libsvm => {
                let file = spec.file.as_ref().ok_or_else(|| missing("file"))?;
                let data = read_libsvm_file(file, spec.d, spec.positive_label)?;
                let p = LogisticProblem::new(data.features, data.labels, 0.0)?;
                Ok(ProblemInstance::Logistic(match spec.kappa {
                    Some(k) => p.with_kappa(k)?,
                    None => p,
                }))
            }
        }
    }

    pub fn objective(&self) -> &dyn Objective {
        match self {
            ProblemInstance::Quadratic(p) => p,
            ProblemInstance::Logistic(p) => p,
        }
    }

    pub fn finite_sum(&self) -> Option<&dyn FiniteSum> {
        match self {
            ProblemInstance::Quadratic(_) => None,
            ProblemInstance::Logistic(p) => Some(p),
        }
    }

    pub fn as_quadratic(&self) -> Option<&QuadraticProblem> {
        match self {
            ProblemInstance::Quadratic(p) => Some(p),
            ProblemInstance::Logistic(_) => None,
        }
    }
}

type BoxedMap<'a> = Box<dyn FnMut(&DenseVector) -> DenseVector + 'a>;

fn boxed<'a, G: StepMap + 'a>(mut g: G) -> BoxedMap<'a> {
    Box::new(move |y: &DenseVector| g.apply(y))
}

/// The base method as a map `y ↦ g(y)`, with noise when configured.
pub fn build_step_map<'a>(cfg: &ExperimentConfig, problem: &'a ProblemInstance) -> Result<BoxedMap<'a>> {
    let obj = problem.objective();
    let finite_sum = || {
        problem
            .finite_sum()
            .ok_or_else(|| Error::Config("stochastic optimizers need a finite-sum problem".into()))
    };
    let base: BoxedMap<'a> = match cfg.optimizer.kind {
        OptimizerKind::Gradient => match cfg.optimizer.h {
            Some(h) => boxed(GradientStep::with_step(obj, h)?),
            None => boxed(GradientStep::new(obj)),
        },
        OptimizerKind::Sgd => {
            let fs = finite_sum()?;
            let h = cfg.optimizer.h.unwrap_or_else(|| default_stochastic_step(fs));
            boxed(SgdStep::new(fs, h, cfg.optimizer.batch.unwrap_or(1), cfg.seed)?)
        }
        OptimizerKind::Saga => {
            let fs = finite_sum()?;
            let h = cfg.optimizer.h.unwrap_or_else(|| default_stochastic_step(fs));
            boxed(SagaStep::new(fs, h, &DenseVector::zeros(obj.dim()), cfg.seed)?)
        }
        OptimizerKind::Nesterov => {
            return Err(Error::Config("Nesterov is not a fixed step map".into()));
        }
    };
    let sigma = cfg.sigma();
    if sigma > 0.0 {
        let model = NoiseModel::new(sigma, cfg.noise_seed());
        Ok(boxed(PerturbedStep::new(base, model, obj.dim()).without_log()))
    } else {
        Ok(base)
    }
}

enum Flow {
    Continue,
    Stop,
}

struct Recorder<'a> {
    obj: &'a dyn Objective,
    inv_l: f64,
    tol: Option<f64>,
    max_iters: usize,
    start: Option<Instant>,
    rows: Vec<TraceRow>,
    status: RunStatus,
}

impl<'a> Recorder<'a> {
    fn new(obj: &'a dyn Objective, cfg: &ExperimentConfig) -> Self {
        Recorder {
            obj,
            inv_l: 1.0 / obj.smoothness(),
            tol: cfg.tol,
            max_iters: cfg.max_iters,
            start: cfg.record_time.then(Instant::now),
            rows: Vec::with_capacity(cfg.max_iters + 1),
            status: RunStatus::Completed,
        }
    }

    fn last_resid(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.resid_norm)
    }

    fn diverge(&mut self) -> Flow {
        self.status = RunStatus::Diverged {
            last_good: self.rows.last().map(|r| r.iter),
        };
        Flow::Stop
    }

    fn record(&mut self, x: &DenseVector, coeff_norm: f64, branch: BranchFlag) -> Flow {
        let (f_val, grad) = self.obj.value_grad(x);
        let grad_norm = grad.norm();
        if !f_val.is_finite() || !grad_norm.is_finite() {
            log::warn!("non-finite objective after iteration {}", self.rows.len());
            return self.diverge();
        }
        let iter = self.rows.len();
        let wall_ns = self.start.map_or(0, |t| t.elapsed().as_nanos() as u64);
        self.rows.push(TraceRow {
            iter,
            f_val,
            grad_norm,
            resid_norm: grad_norm * self.inv_l,
            coeff_norm,
            branch,
            wall_ns,
        });
        if self.tol.is_some_and(|t| grad_norm <= t) {
            self.status = RunStatus::Converged;
            return Flow::Stop;
        }
        if iter >= self.max_iters {
            return Flow::Stop;
        }
        Flow::Continue
    }

    /// Non-finite iterates end the run; other errors propagate.
    fn guard<T>(&mut self, r: Result<T>) -> Result<Option<T>> {
        match r {
            Ok(v) => Ok(Some(v)),
            Err(Error::NonFinite { .. }) => {
                self.diverge();
                Ok(None)
            }
            Err(e) => Err(e),
        }
    }
}

fn scheduled(base: Regularization, schedules: Option<Schedules>, dist: f64) -> Regularization {
    let Some(s) = schedules else { return base };
    if !(dist > 0.0 && dist.is_finite()) {
        return base;
    }
    if let Some(t) = s.tau(dist) {
        Regularization::Tau(t)
    } else if let Some(l) = s.lambda(dist) {
        Regularization::Lambda(l)
    } else {
        base
    }
}

/// Runs the configured pipeline, writes the trace to `output` when set and
/// returns it. Identical configs give identical traces.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunTrace> {
    cfg.validate()?;
    let problem = ProblemInstance::build(&cfg.problem, cfg.seed)?;
    let trace = run_on(cfg, &problem)?;
    if let Some(path) = &cfg.output {
        trace.write_csv(path)?;
    }
    Ok(trace)
}

/// [`run_experiment`] on an already built problem, without writing output.
pub fn run_on(cfg: &ExperimentConfig, problem: &ProblemInstance) -> Result<RunTrace> {
    let obj = problem.objective();
    let x0 = DenseVector::zeros(obj.dim());
    let mut rec = Recorder::new(obj, cfg);
    let accel = cfg.accel.to_config()?;
    let schedules = cfg.accel.schedules()?;
    let nesterov = cfg.optimizer.kind == OptimizerKind::Nesterov;
    let momentum = Momentum::for_kappa(obj.kappa());
    let h = cfg.optimizer.h.unwrap_or(1.0 / obj.smoothness());

    match (cfg.accel.mode, nesterov) {
        (Mode::None, false) => {
            let mut g = build_step_map(cfg, problem)?;
            let mut y = x0;
            while let Flow::Continue = rec.record(&y, 0.0, BranchFlag::Plain) {
                y = g(&y);
            }
        }
        (Mode::None, true) => {
            let mut n = Nesterov::new(obj, x0.clone(), momentum).with_step(h)?;
            let mut flow = rec.record(&x0, 0.0, BranchFlag::Plain);
            while let Flow::Continue = flow {
                let s = n.step();
                flow = rec.record(&s.x, 0.0, BranchFlag::Nesterov);
            }
        }
        (Mode::Offline, false) => {
            let mut g = build_step_map(cfg, problem)?;
            run_offline(&mut rec, x0, &accel, schedules, |_, y| {
                let x = g(y);
                Ok((x, y.clone()))
            })?;
        }
        (Mode::Offline, true) => {
            let mut n = Nesterov::new(obj, x0.clone(), momentum).with_step(h)?;
            run_offline(&mut rec, x0, &accel, schedules, |restart, _| {
                if let Some(p) = restart {
                    n = Nesterov::new(obj, p.clone(), momentum).with_step(h)?;
                }
                let s = n.step();
                Ok((s.x, s.y))
            })?;
        }
        (Mode::Online, _) => {
            let mut g = build_step_map(cfg, problem)?;
            let mut acc = OnlineAccelerator::new(obj.dim(), accel)?;
            let mut y = x0;
            let mut flow = rec.record(&y, 0.0, BranchFlag::Plain);
            while let Flow::Continue = flow {
                let reg = scheduled(accel.regularization, schedules, rec.last_resid());
                acc.set_regularization(reg)?;
                let Some(st) = rec.guard(acc.step(&mut g, &y))? else { break };
                y = st.y_next;
                flow = rec.record(&y, st.coefficients.norm, BranchFlag::Rna);
                if st.converged && matches!(flow, Flow::Continue) {
                    rec.status = RunStatus::Converged;
                    break;
                }
            }
        }
        (Mode::Adaptive, _) => {
            let lambda = match accel.regularization {
                Regularization::Lambda(l) => l,
                Regularization::Tau(_) => {
                    return Err(Error::Config("adaptive mode takes accel.lambda".into()));
                }
            };
            let mut a = AdaptiveAccelerator::new(obj, x0.clone(), accel.window, lambda, momentum)?
                .with_mixing(accel.beta)?;
            let mut flow = rec.record(&x0, 0.0, BranchFlag::Plain);
            while let Flow::Continue = flow {
                let Some(s) = rec.guard(a.step())? else { break };
                let branch = match s.branch {
                    Branch::Rna => BranchFlag::Rna,
                    Branch::Nesterov => BranchFlag::Nesterov,
                };
                flow = rec.record(&s.x_next, s.coefficients.norm, branch);
            }
        }
    }
    Ok(RunTrace::new(cfg.label(), rec.rows, rec.status))
}

/// Restart loop shared by both base methods. `advance(restart, y)` returns
/// the next `(x, y)` pair; `restart` carries the extrapolated point on the
/// first call of each cycle after the first.
fn run_offline<F>(
    rec: &mut Recorder<'_>,
    x0: DenseVector,
    accel: &AccelConfig,
    schedules: Option<Schedules>,
    mut advance: F,
) -> Result<()>
where
    F: FnMut(Option<&DenseVector>, &DenseVector) -> Result<(DenseVector, DenseVector)>,
{
    let mut window = AccelWindow::new(x0.len(), accel.window);
    let mut p = x0;
    let mut restart: Option<DenseVector> = None;
    let mut cycle_resid = f64::NAN;
    let mut flow = rec.record(&p, 0.0, BranchFlag::Plain);
    while let Flow::Continue = flow {
        if window.is_empty() {
            cycle_resid = rec.last_resid();
        }
        let (x, y) = advance(restart.as_ref(), &p)?;
        restart = None;
        if rec.guard(window.push(x.clone(), y))?.is_none() {
            break;
        }
        if window.len() == accel.window {
            let cfg = AccelConfig {
                regularization: scheduled(accel.regularization, schedules, cycle_resid),
                ..*accel
            };
            let c = weights(&window, &cfg)?;
            let Some(y_extr) = rec.guard(extrapolate(&window, &c, cfg.beta))? else { break };
            window.clear();
            p = y_extr;
            restart = Some(p.clone());
            flow = rec.record(&p, c.norm, BranchFlag::Rna);
        } else {
            p = x;
            flow = rec.record(&p, 0.0, BranchFlag::Plain);
        }
    }
    Ok(())
}
