use super::coefficients::{extrapolate, Coefficients};
use super::window::AccelWindow;
use super::{AccelConfig, Regularization};
use crate::error::{Error, Result};
use crate::linalg::DenseVector;
use crate::optimizers::StepMap;

pub(crate) fn weights(window: &AccelWindow, config: &AccelConfig) -> Result<Coefficients> {
    match config.regularization.coefficients(window.gram()) {
        Err(Error::DegenerateNormalization) => {
            log::warn!("degenerate coefficient normalization; using uniform averaging");
            Ok(Coefficients::uniform(window.gram()))
        }
        other => other,
    }
}

/// Result of one online step.
#[derive(Debug, Clone)]
pub struct OnlineStep {
    /// `g(y)` for the input `y`.
    pub x: DenseVector,
    /// Extrapolated point, the next input.
    pub y_next: DenseVector,
    pub coefficients: Coefficients,
    /// Zero residual, or a rank-deficient residual block without
    /// regularization: the extrapolation is already the fixed point.
    pub converged: bool,
}

/// Extrapolates after every application of `g` and feeds the result back.
#[derive(Debug, Clone)]
pub struct OnlineAccelerator {
    window: AccelWindow,
    config: AccelConfig,
}

impl OnlineAccelerator {
    pub fn new(dim: usize, config: AccelConfig) -> Result<Self> {
        config.validate()?;
        Ok(OnlineAccelerator {
            window: AccelWindow::new(dim, config.window),
            config,
        })
    }

    pub fn window(&self) -> &AccelWindow {
        &self.window
    }

    pub fn config(&self) -> &AccelConfig {
        &self.config
    }

    /// Replaces λ or τ for the following steps (regularization schedules).
    pub fn set_regularization(&mut self, regularization: Regularization) -> Result<()> {
        let config = AccelConfig {
            regularization,
            ..self.config
        };
        config.validate()?;
        self.config = config;
        Ok(())
    }

    pub fn step<G: StepMap + ?Sized>(&mut self, g: &mut G, y: &DenseVector) -> Result<OnlineStep> {
        let x = g.apply(y);
        self.window.push(x.clone(), y.clone())?;
        let coefficients = weights(&self.window, &self.config)?;
        let y_next = extrapolate(&self.window, &coefficients, self.config.beta)?;
        let zero_residual = self.window.last_residual_norm() == Some(0.0);
        let converged = zero_residual
            || (coefficients.rank_deficient && self.config.regularization.is_unregularized());
        Ok(OnlineStep {
            x,
            y_next,
            coefficients,
            converged,
        })
    }
}

/// One restart cycle: `N` plain steps from `x0`, then a single extrapolation.
#[derive(Debug, Clone)]
pub struct OfflineCycle {
    pub y_extr: DenseVector,
    pub coefficients: Coefficients,
    /// `x_1, …, x_N`
    pub iterates: Vec<DenseVector>,
    pub window: AccelWindow,
}

pub fn offline_cycle<G: StepMap + ?Sized>(
    x0: &DenseVector,
    g: &mut G,
    config: &AccelConfig,
) -> Result<OfflineCycle> {
    config.validate()?;
    let mut window = AccelWindow::new(x0.len(), config.window);
    let mut iterates = Vec::with_capacity(config.window);
    let mut y = x0.clone();
    for _ in 0..config.window {
        let x = g.apply(&y);
        window.push(x.clone(), y)?;
        iterates.push(x.clone());
        y = x;
    }
    let coefficients = weights(&window, config)?;
    let y_extr = extrapolate(&window, &coefficients, config.beta)?;
    Ok(OfflineCycle {
        y_extr,
        coefficients,
        iterates,
        window,
    })
}

/// Repeats {N plain steps, extrapolate, restart} `cycles` times and returns
/// the final extrapolation.
pub fn offline_restart<G: StepMap + ?Sized>(
    x0: &DenseVector,
    g: &mut G,
    config: &AccelConfig,
    cycles: usize,
) -> Result<DenseVector> {
    if cycles == 0 {
        return Err(Error::InvalidParameter("cycles must be >= 1".into()));
    }
    let mut y = x0.clone();
    for _ in 0..cycles {
        y = offline_cycle(&y, g, config)?.y_extr;
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::accel::Mode;
    use crate::optimizers::GradientStep;
    use crate::problems::{synth_quadratic, Objective, QuadraticProblem};
    use nalgebra::DMatrix;

    fn anderson(n: usize, mode: Mode) -> AccelConfig {
        AccelConfig::new(n, 1.0, Regularization::Lambda(0.0), mode).unwrap()
    }

    fn residual<P: Objective>(p: &P, y: &DenseVector) -> f64 {
        (p.gradient(y) / p.smoothness()).norm()
    }

    #[test]
    fn single_pair_online_is_plain_iteration() {
        let p = synth_quadratic(6, 0.2, 1).unwrap();
        let mut g = GradientStep::new(&p);
        let mut acc = OnlineAccelerator::new(6, anderson(1, Mode::Online)).unwrap();
        let mut y = DenseVector::zeros(6);
        let mut z = y.clone();
        for _ in 0..8 {
            y = acc.step(&mut g, &y).unwrap().y_next;
            z = g.apply(&z);
            assert_eq!(y, z);
        }
    }

    #[test]
    fn fixed_point_input_sets_flag() {
        let p = synth_quadratic(3, 0.5, 2).unwrap();
        let mut g = GradientStep::new(&p);
        let cfg = AccelConfig::new(3, 1.0, Regularization::Lambda(1e-8), Mode::Online).unwrap();
        let mut acc = OnlineAccelerator::new(3, cfg).unwrap();
        let s = acc.step(&mut g, p.x_star()).unwrap();
        assert!(s.converged);
        assert_eq!(&s.y_next, p.x_star());
    }

    #[test]
    fn online_terminates_in_two_dimensions() {
        let p = QuadraticProblem::from_matrix(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.4]),
            DenseVector::from_column_slice(&[0.5, -1.5]),
        )
        .unwrap();
        // x* = A⁻¹b with b = A x*
        let b = p.matrix() * p.x_star();
        let direct = p.matrix().clone().lu().solve(&b).unwrap();
        let mut g = GradientStep::new(&p);
        let mut acc = OnlineAccelerator::new(2, anderson(3, Mode::Online)).unwrap();
        let y0 = DenseVector::from_column_slice(&[3.0, 2.0]);
        let r0 = residual(&p, &y0);
        let mut y = y0;
        for _ in 0..3 {
            let s = acc.step(&mut g, &y).unwrap();
            y = s.y_next;
            if s.converged {
                break;
            }
        }
        assert!(residual(&p, &y) <= 1e-10 * r0);
        assert!((&y - direct).norm() <= 1e-9);
    }

    #[test]
    fn offline_single_step_is_g() {
        let p = synth_quadratic(4, 0.3, 3).unwrap();
        let mut g = GradientStep::new(&p);
        let x0 = DenseVector::from_element(4, 1.0);
        let out = offline_restart(&x0, &mut g, &anderson(1, Mode::Offline), 1).unwrap();
        assert_eq!(out, GradientStep::new(&p).apply(&x0));
    }

    #[test]
    fn offline_exact_termination_d5() {
        let p = synth_quadratic(5, 0.1, 4).unwrap();
        let mut g = GradientStep::new(&p);
        let x0 = DenseVector::zeros(5);
        let r0 = residual(&p, &x0);
        let y = offline_restart(&x0, &mut g, &anderson(6, Mode::Offline), 1).unwrap();
        assert!(residual(&p, &y) <= 1e-8 * r0);
    }

    #[test]
    fn offline_rate_kappa_quarter() {
        let p = synth_quadratic(12, 0.25, 5).unwrap();
        let mut g = GradientStep::new(&p);
        let x0 = DenseVector::zeros(12);
        let r0 = residual(&p, &x0);
        let y = offline_restart(&x0, &mut g, &anderson(4, Mode::Offline), 1).unwrap();
        let bound = (1.0 - 0.25) * (1.0f64 / 3.0).powi(3) * r0;
        assert!(residual(&p, &y) <= bound * (1.0 + 1e-6));
    }
}
