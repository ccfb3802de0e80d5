//! Base methods `g`: gradient descent, Nesterov momentum, SGD and SAGA, and
//! the combination schedules placing the deterministic ones in the
//! multistep iteration class.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::accel::CombinationSchedule;
use crate::error::{Error, Result};
use crate::linalg::DenseVector;
use crate::problems::{FiniteSum, Objective};

/// One application of an iterative update `y ↦ x = g(y)`.
///
/// Deterministic maps are pure. Stochastic maps own a seeded generator and
/// are reproducible given the seed and the number of previous calls.
pub trait StepMap {
    fn apply(&mut self, y: &DenseVector) -> DenseVector;
}

impl<F: FnMut(&DenseVector) -> DenseVector> StepMap for F {
    fn apply(&mut self, y: &DenseVector) -> DenseVector {
        self(y)
    }
}

/// `x = y − h∇f(y)`.
pub fn gradient_step<P: Objective + ?Sized>(y: &DenseVector, problem: &P, h: f64) -> DenseVector {
    let mut x = problem.gradient(y);
    x *= -h;
    x += y;
    x
}

/// Fixed-step gradient descent, `h = 1/L` by default.
pub struct GradientStep<'a, P: Objective + ?Sized> {
    problem: &'a P,
    h: f64,
}

impl<'a, P: Objective + ?Sized> GradientStep<'a, P> {
    pub fn new(problem: &'a P) -> Self {
        GradientStep {
            problem,
            h: 1.0 / problem.smoothness(),
        }
    }

    pub fn with_step(problem: &'a P, h: f64) -> Result<Self> {
        check_step(h)?;
        Ok(GradientStep { problem, h })
    }

    pub fn step_size(&self) -> f64 {
        self.h
    }
}

impl<P: Objective + ?Sized> StepMap for GradientStep<'_, P> {
    fn apply(&mut self, y: &DenseVector) -> DenseVector {
        gradient_step(y, self.problem, self.h)
    }
}

fn check_step(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("step size must be positive, got {h}")))
    }
}

/// `(1 − √κ)/(1 + √κ)`.
pub fn nesterov_beta(kappa: f64) -> f64 {
    let s = kappa.sqrt();
    (1.0 - s) / (1.0 + s)
}

/// `y = (1+β)x_curr − βx_prev`, then `x_next = y − h∇f(y)`.
/// Returns `(x_next, y)` so that `(x_next, y)` is a pair `(g(y), y)`.
pub fn nesterov_step<P: Objective + ?Sized>(
    x_prev: &DenseVector,
    x_curr: &DenseVector,
    problem: &P,
    h: f64,
    kappa: f64,
) -> (DenseVector, DenseVector) {
    let beta = nesterov_beta(kappa);
    let y = x_curr * (1.0 + beta) - x_prev * beta;
    let x = gradient_step(&y, problem, h);
    (x, y)
}

/// Momentum coefficients for successive steps. The first step never carries
/// momentum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Momentum {
    /// Strongly convex case: a constant β, usually `nesterov_beta(κ)`.
    Constant(f64),
    /// Smooth convex case: `θ_{k+1} = (1 + √(1 + 4θ_k²))/2`,
    /// `β_k = (θ_k − 1)/θ_{k+1}`, `θ_0 = 1`.
    Convex,
}

impl Momentum {
    /// Constant momentum when μ > 0, the convex schedule otherwise.
    pub fn for_kappa(kappa: f64) -> Self {
        if kappa > 0.0 {
            Momentum::Constant(nesterov_beta(kappa.min(1.0)))
        } else {
            Momentum::Convex
        }
    }

    pub fn schedule(self) -> MomentumSchedule {
        MomentumSchedule {
            kind: self,
            theta: 1.0,
            calls: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MomentumSchedule {
    kind: Momentum,
    theta: f64,
    calls: usize,
}

impl MomentumSchedule {
    pub fn next_beta(&mut self) -> f64 {
        let first = self.calls == 0;
        self.calls += 1;
        match self.kind {
            Momentum::Constant(b) => {
                if first {
                    0.0
                } else {
                    b
                }
            }
            Momentum::Convex => {
                let next = 0.5 * (1.0 + (1.0 + 4.0 * self.theta * self.theta).sqrt());
                let b = (self.theta - 1.0) / next;
                self.theta = next;
                b
            }
        }
    }
}

/// One Nesterov iteration, as emitted by [`Nesterov::step`].
#[derive(Debug, Clone)]
pub struct NesterovStep {
    /// Point where the gradient was taken.
    pub y: DenseVector,
    pub grad: DenseVector,
    pub f_y: f64,
    /// `y − h∇f(y)`
    pub x: DenseVector,
    /// Next gradient point.
    pub y_next: DenseVector,
    pub beta: f64,
}

/// Nesterov's method `x_{k+1} = y_k − h∇f(y_k)`,
/// `y_{k+1} = (1+β_k)x_{k+1} − β_k x_k`, started from `x_0 = y_0`.
pub struct Nesterov<'a, P: Objective + ?Sized> {
    problem: &'a P,
    h: f64,
    schedule: MomentumSchedule,
    x: DenseVector,
    y: DenseVector,
}

impl<'a, P: Objective + ?Sized> Nesterov<'a, P> {
    pub fn new(problem: &'a P, x0: DenseVector, momentum: Momentum) -> Self {
        Nesterov {
            problem,
            h: 1.0 / problem.smoothness(),
            schedule: momentum.schedule(),
            y: x0.clone(),
            x: x0,
        }
    }

    pub fn with_step(mut self, h: f64) -> Result<Self> {
        check_step(h)?;
        self.h = h;
        Ok(self)
    }

    pub fn x(&self) -> &DenseVector {
        &self.x
    }

    pub fn y(&self) -> &DenseVector {
        &self.y
    }

    pub fn step(&mut self) -> NesterovStep {
        let (f_y, grad) = self.problem.value_grad(&self.y);
        let mut x = grad.clone();
        x *= -self.h;
        x += &self.y;
        let beta = self.schedule.next_beta();
        let y_next = &x * (1.0 + beta) - &self.x * beta;
        let y = std::mem::replace(&mut self.y, y_next.clone());
        self.x = x.clone();
        NesterovStep {
            y,
            grad,
            f_y,
            x,
            y_next,
            beta,
        }
    }
}

/// Default step for stochastic methods, `1/(3 L_max)`.
pub fn default_stochastic_step<P: FiniteSum + ?Sized>(problem: &P) -> f64 {
    1.0 / (3.0 * problem.max_sample_smoothness())
}

/// Index stream shared by SGD and SAGA: each index is
/// `rng.random_range(0..n)` on a `ChaCha8Rng` seeded with `seed_from_u64`.
fn draw_index(rng: &mut ChaCha8Rng, n: usize) -> usize {
    rng.random_range(0..n)
}

/// `x = y − h · (1/B) Σ_{b<B} ∇f_{i_b}(y)`, indices drawn uniformly with
/// replacement.
pub struct SgdStep<'a, P: FiniteSum + ?Sized> {
    problem: &'a P,
    h: f64,
    batch: usize,
    rng: ChaCha8Rng,
}

impl<'a, P: FiniteSum + ?Sized> SgdStep<'a, P> {
    pub fn new(problem: &'a P, h: f64, batch: usize, seed: u64) -> Result<Self> {
        check_step(h)?;
        if batch == 0 {
            return Err(Error::InvalidParameter("batch size must be >= 1".into()));
        }
        Ok(SgdStep {
            problem,
            h,
            batch,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }
}

impl<P: FiniteSum + ?Sized> StepMap for SgdStep<'_, P> {
    fn apply(&mut self, y: &DenseVector) -> DenseVector {
        let n = self.problem.n_samples();
        let mut g = DenseVector::zeros(y.len());
        for _ in 0..self.batch {
            let i = draw_index(&mut self.rng, n);
            g += self.problem.sample_gradient(y, i);
        }
        g /= self.batch as f64;
        y - g * self.h
    }
}

/// Per-sample gradient table for SAGA.
#[derive(Debug, Clone)]
pub struct SagaState {
    stored: Vec<DenseVector>,
    average: DenseVector,
    updates: usize,
}

impl SagaState {
    /// Table initialized with the sample gradients at `x0`.
    pub fn new<P: FiniteSum + ?Sized>(problem: &P, x0: &DenseVector) -> Self {
        let stored: Vec<_> = (0..problem.n_samples())
            .map(|i| problem.sample_gradient(x0, i))
            .collect();
        let average = Self::mean(&stored, x0.len());
        SagaState {
            stored,
            average,
            updates: 0,
        }
    }

    fn mean(stored: &[DenseVector], d: usize) -> DenseVector {
        let mut avg = DenseVector::zeros(d);
        for g in stored {
            avg += g;
        }
        avg / stored.len() as f64
    }

    pub fn average(&self) -> &DenseVector {
        &self.average
    }

    pub fn stored(&self, i: usize) -> &DenseVector {
        &self.stored[i]
    }

    /// Variance-reduced estimate `∇f_j(y) − stored_j + average`.
    pub fn estimate(&self, grad_j: &DenseVector, j: usize) -> DenseVector {
        grad_j - &self.stored[j] + &self.average
    }

    /// Replaces entry `j` and updates the average incrementally; the
    /// average is recomputed from scratch every `n` updates.
    pub fn replace(&mut self, j: usize, grad_j: DenseVector) {
        let n = self.stored.len();
        self.average += (&grad_j - &self.stored[j]) / n as f64;
        self.stored[j] = grad_j;
        self.updates += 1;
        if self.updates.is_multiple_of(n) {
            self.average = Self::mean(&self.stored, self.average.len());
        }
    }

    /// Largest deviation of the running average from the exact mean,
    /// relative to the mean's norm.
    pub fn average_drift(&self) -> f64 {
        let exact = Self::mean(&self.stored, self.average.len());
        (&self.average - &exact).norm() / exact.norm().max(f64::MIN_POSITIVE)
    }
}

pub struct SagaStep<'a, P: FiniteSum + ?Sized> {
    problem: &'a P,
    h: f64,
    state: SagaState,
    rng: ChaCha8Rng,
}

impl<'a, P: FiniteSum + ?Sized> SagaStep<'a, P> {
    pub fn new(problem: &'a P, h: f64, x0: &DenseVector, seed: u64) -> Result<Self> {
        check_step(h)?;
        Ok(SagaStep {
            problem,
            h,
            state: SagaState::new(problem, x0),
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn state(&self) -> &SagaState {
        &self.state
    }
}

/// One SAGA update; returns the new point and mutates the table.
pub fn saga_step<P: FiniteSum + ?Sized>(
    y: &DenseVector,
    problem: &P,
    h: f64,
    state: &mut SagaState,
    rng: &mut ChaCha8Rng,
) -> DenseVector {
    let j = draw_index(rng, problem.n_samples());
    let gj = problem.sample_gradient(y, j);
    let est = state.estimate(&gj, j);
    state.replace(j, gj);
    y - est * h
}

impl<P: FiniteSum + ?Sized> StepMap for SagaStep<'_, P> {
    fn apply(&mut self, y: &DenseVector) -> DenseVector {
        saga_step(y, self.problem, self.h, &mut self.state, &mut self.rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Gradient,
    Nesterov { kappa: f64 },
    Sgd,
    Saga,
}

/// Combination coefficients of `method` for iterations `1..=iters`.
pub fn schedule_of(method: Method, iters: usize) -> Result<CombinationSchedule> {
    let mut alphas = Vec::with_capacity(iters);
    let mut betas = Vec::with_capacity(iters);
    for i in 1..=iters {
        let mut a = DenseVector::zeros(i);
        match method {
            Method::Gradient => a[i - 1] = 1.0,
            Method::Nesterov { kappa } => {
                if !(kappa > 0.0 && kappa <= 1.0) {
                    return Err(Error::InvalidParameter(format!("kappa must lie in (0, 1], got {kappa}")));
                }
                if i == 1 {
                    a[0] = 1.0;
                } else {
                    let b = nesterov_beta(kappa);
                    a[i - 1] = 1.0 + b;
                    a[i - 2] = -b;
                }
            }
            Method::Sgd | Method::Saga => {
                return Err(Error::Unsupported(
                    "stochastic methods have no fixed combination schedule".into(),
                ))
            }
        }
        alphas.push(a);
        betas.push(DenseVector::zeros(i));
    }
    CombinationSchedule::new(alphas, betas)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::accel::build_l_matrix;
    use crate::problems::{synth_logistic, synth_quadratic, QuadraticProblem};
    use nalgebra::DMatrix;

    fn dv(v: &[f64]) -> DenseVector {
        DenseVector::from_column_slice(v)
    }

    /// `f_i(x) = ½‖x − c_i‖²`
    struct Centers(Vec<DenseVector>);

    impl Objective for Centers {
        fn dim(&self) -> usize {
            self.0[0].len()
        }
        fn value(&self, x: &DenseVector) -> f64 {
            self.0.iter().map(|c| 0.5 * (x - c).norm_squared()).sum::<f64>() / self.0.len() as f64
        }
        fn gradient(&self, x: &DenseVector) -> DenseVector {
            (0..self.0.len()).fold(DenseVector::zeros(x.len()), |acc, i| acc + self.sample_gradient(x, i))
                / self.0.len() as f64
        }
        fn smoothness(&self) -> f64 {
            1.0
        }
        fn strong_convexity(&self) -> f64 {
            1.0
        }
    }

    impl FiniteSum for Centers {
        fn n_samples(&self) -> usize {
            self.0.len()
        }
        fn sample_gradient(&self, x: &DenseVector, i: usize) -> DenseVector {
            x - &self.0[i]
        }
        fn max_sample_smoothness(&self) -> f64 {
            1.0
        }
    }

    #[test]
    fn gradient_step_examples() {
        let xs = dv(&[1.0, -1.0]);
        let p = QuadraticProblem::diagonal(&[1.0, 4.0], xs.clone()).unwrap();
        assert_eq!(gradient_step(&xs, &p, 0.25), xs);
        let p = QuadraticProblem::diagonal(&[1.0, 1.0], DenseVector::zeros(2)).unwrap();
        assert_eq!(gradient_step(&dv(&[3.0, -2.0]), &p, 1.0), dv(&[0.0, 0.0]));
        let p = QuadraticProblem::diagonal(&[1.0, 4.0], DenseVector::zeros(2)).unwrap();
        assert_eq!(gradient_step(&dv(&[1.0, 1.0]), &p, 0.25), dv(&[0.75, 0.0]));
    }

    #[test]
    fn nesterov_step_examples() {
        assert_eq!(nesterov_beta(1.0), 0.0);
        assert!((nesterov_beta(0.25) - 1.0 / 3.0).abs() < 1e-15);
        let p = synth_quadratic(4, 0.1, 3).unwrap();
        let y = dv(&[0.5, 0.1, -0.3, 2.0]);
        let (x, yy) = nesterov_step(&DenseVector::zeros(4), &y, &p, 1.0, 1.0);
        assert_eq!(yy, y);
        assert_eq!(x, gradient_step(&y, &p, 1.0));
        let xs = p.x_star().clone();
        let (x, _) = nesterov_step(&xs, &xs, &p, 1.0, 0.1);
        assert!((x - &xs).amax() < 1e-15);
    }

    #[test]
    fn gd_contracts_on_quadratic() {
        let p = synth_quadratic(30, 1e-2, 6).unwrap();
        let mut g = GradientStep::new(&p);
        let mut x = DenseVector::zeros(30);
        for _ in 0..50 {
            let next = g.apply(&x);
            let before = (&x - p.x_star()).norm();
            let after = (&next - p.x_star()).norm();
            assert!(after <= (1.0 - p.kappa()) * before * (1.0 + 1e-12));
            x = next;
        }
    }

    #[test]
    fn convex_momentum_schedule() {
        let mut s = Momentum::Convex.schedule();
        let b: Vec<f64> = (0..4).map(|_| s.next_beta()).collect();
        assert_eq!(b[0], 0.0);
        let t1 = 0.5 * (1.0 + 5f64.sqrt());
        let t2 = 0.5 * (1.0 + (1.0 + 4.0 * t1 * t1).sqrt());
        assert!((b[1] - (t1 - 1.0) / t2).abs() < 1e-15);
        assert!(b.windows(2).all(|w| w[1] >= w[0]));
        let mut c = Momentum::Constant(0.4).schedule();
        assert_eq!((c.next_beta(), c.next_beta(), c.next_beta()), (0.0, 0.4, 0.4));
    }

    #[test]
    fn sgd_single_sample_is_gradient_step() {
        let p = Centers(vec![dv(&[1.0, 2.0])]);
        let mut s = SgdStep::new(&p, 0.3, 1, 7).unwrap();
        let y = dv(&[0.5, -0.5]);
        assert_eq!(s.apply(&y), gradient_step(&y, &p, 0.3));
    }

    #[test]
    fn sgd_zero_data_shrinks() {
        let p = crate::problems::LogisticProblem::new(DMatrix::zeros(4, 2), dv(&[1.0, -1.0, 1.0, -1.0]), 0.5)
            .unwrap();
        let mut s = SgdStep::new(&p, 0.1, 2, 9).unwrap();
        let y = dv(&[2.0, -4.0]);
        assert_eq!(s.apply(&y), &y * 0.95);
    }

    #[test]
    fn sgd_hand_unroll() {
        let c = [dv(&[1.0, 0.0]), dv(&[0.0, 2.0])];
        let p = Centers(c.to_vec());
        let h = 0.5;
        let mut s = SgdStep::new(&p, h, 1, 42).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut y = dv(&[3.0, 3.0]);
        let mut manual = y.clone();
        for _ in 0..6 {
            y = s.apply(&y);
            let i: usize = rng.random_range(0..2);
            manual = &manual - (&manual - &c[i]) * h;
            assert_eq!(y, manual);
        }
    }

    #[test]
    fn saga_identical_samples_is_full_gradient() {
        let p = Centers(vec![dv(&[1.0, -1.0]); 3]);
        let y = dv(&[0.2, 0.4]);
        let mut s = SagaStep::new(&p, 0.7, &y, 1).unwrap();
        assert_eq!(s.apply(&y), gradient_step(&y, &p, 0.7));
    }

    #[test]
    fn saga_single_sample_is_gd() {
        let p = Centers(vec![dv(&[2.0, 1.0])]);
        let x0 = dv(&[0.0, 0.0]);
        let mut s = SagaStep::new(&p, 0.4, &x0, 3).unwrap();
        let mut y = x0.clone();
        let mut z = x0;
        for _ in 0..4 {
            y = s.apply(&y);
            z = gradient_step(&z, &p, 0.4);
            assert!((&y - &z).amax() < 1e-15);
        }
    }

    #[test]
    fn saga_hand_unroll() {
        let c = [dv(&[1.0, 0.0]), dv(&[0.0, 2.0])];
        let p = Centers(c.to_vec());
        let h = 0.25;
        let x0 = dv(&[1.0, 1.0]);
        let mut s = SagaStep::new(&p, h, &x0, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut table = [&x0 - &c[0], &x0 - &c[1]];
        let mut y = x0.clone();
        let mut manual = x0;
        for _ in 0..3 {
            y = s.apply(&y);
            let j: usize = rng.random_range(0..2);
            let gj = &manual - &c[j];
            let avg = (&table[0] + &table[1]) * 0.5;
            let next = &manual - (&gj - &table[j] + avg) * h;
            table[j] = gj;
            manual = next;
            assert!((&y - &manual).amax() < 1e-15);
        }
    }

    #[test]
    fn saga_average_stays_exact() {
        let p = synth_logistic(20, 3, 2).unwrap().with_rho(0.1).unwrap();
        let x0 = DenseVector::zeros(3);
        let mut s = SagaStep::new(&p, default_stochastic_step(&p), &x0, 8).unwrap();
        let mut y = x0;
        for _ in 0..137 {
            y = s.apply(&y);
            assert!(s.state().average_drift() <= 1e-10);
        }
    }

    #[test]
    fn saga_estimate_is_unbiased() {
        let p = synth_logistic(15, 3, 4).unwrap().with_rho(0.05).unwrap();
        let x0 = dv(&[0.3, -0.2, 0.1]);
        let state = SagaState::new(&p, &x0);
        let y = dv(&[-0.5, 0.4, 0.9]);
        let full = p.gradient(&y);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let draws = 10_000;
        let samples: Vec<DenseVector> = (0..draws)
            .map(|_| {
                let j = draw_index(&mut rng, p.n_samples());
                state.estimate(&p.sample_gradient(&y, j), j)
            })
            .collect();
        let mean = samples.iter().fold(DenseVector::zeros(3), |a, s| a + s) / draws as f64;
        for k in 0..3 {
            let var = samples.iter().map(|s| (s[k] - mean[k]).powi(2)).sum::<f64>() / (draws - 1) as f64;
            let se = (var / draws as f64).sqrt();
            assert!((mean[k] - full[k]).abs() <= 3.0 * se + 1e-15);
        }
    }

    #[test]
    fn stochastic_trajectories_are_reproducible() {
        let p = synth_logistic(30, 4, 1).unwrap().with_rho(0.01).unwrap();
        let run = |seed| {
            let x0 = DenseVector::zeros(4);
            let mut s = SagaStep::new(&p, default_stochastic_step(&p), &x0, seed).unwrap();
            let mut g = SgdStep::new(&p, default_stochastic_step(&p), 3, seed).unwrap();
            let mut y = x0;
            for _ in 0..25 {
                y = g.apply(&s.apply(&y));
            }
            y
        };
        assert_eq!(run(12), run(12));
        assert_ne!(run(12), run(13));
    }

    #[test]
    fn schedules() {
        let g = schedule_of(Method::Gradient, 5).unwrap();
        for i in 1..=5 {
            assert_eq!(build_l_matrix(&g, i).unwrap(), DMatrix::identity(i, i));
        }
        let n = schedule_of(Method::Nesterov { kappa: 0.25 }, 4).unwrap();
        assert_eq!(n.alpha(1), &dv(&[1.0]));
        let a2 = n.alpha(2);
        assert!((a2[0] + 1.0 / 3.0).abs() < 1e-15 && (a2[1] - 4.0 / 3.0).abs() < 1e-15);
        for i in 1..=4 {
            let l = build_l_matrix(&n, i).unwrap();
            for j in 0..i {
                assert!((l.column(j).sum() - 1.0).abs() < 1e-14);
                assert!(l[(j, j)] != 0.0);
            }
        }
        assert!(matches!(schedule_of(Method::Sgd, 3), Err(Error::Unsupported(_))));
        assert!(matches!(schedule_of(Method::Saga, 3), Err(Error::Unsupported(_))));
    }

    #[test]
    fn nesterov_driver_matches_step_function() {
        let p = synth_quadratic(10, 0.05, 2).unwrap();
        let k = p.kappa();
        let x0 = DenseVector::from_element(10, 1.0);
        let mut drv = Nesterov::new(&p, x0.clone(), Momentum::Constant(nesterov_beta(k)));
        let first = drv.step();
        assert_eq!(first.y_next, first.x);
        let mut prev = first.x.clone();
        let mut cur = first.x;
        for _ in 0..10 {
            let s = drv.step();
            let (x, y) = nesterov_step(&prev, &cur, &p, 1.0 / p.smoothness(), k);
            assert!((&s.y - &y).amax() < 1e-14);
            assert!((&s.x - &x).amax() < 1e-14);
            prev = cur;
            cur = s.x;
        }
    }
}
