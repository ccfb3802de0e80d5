use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::DenseVector;
use crate::optimizers::StepMap;

/// Zero-mean isotropic Gaussian perturbation `e = (σ/√d)ξ`, `ξ ~ N(0, I)`,
/// so that `E‖e‖² = σ²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn new(sigma: f64, seed: u64) -> Self {
        NoiseModel { sigma, seed }
    }

    pub fn stream(&self, dim: usize) -> NoiseStream {
        NoiseStream {
            rng: ChaCha8Rng::seed_from_u64(self.seed),
            scale: if dim == 0 { 0.0 } else { self.sigma / (dim as f64).sqrt() },
            dim,
            log: Vec::new(),
            logging: true,
        }
    }

    /// Regenerates the first `count` draws of the stream.
    pub fn replay(&self, dim: usize, count: usize) -> Vec<DenseVector> {
        let mut s = self.stream(dim);
        s.logging = false;
        (0..count).map(|_| s.draw()).collect()
    }
}

/// Seeded sequence of noise vectors; every draw is logged.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
    scale: f64,
    dim: usize,
    log: Vec<DenseVector>,
    logging: bool,
}

impl NoiseStream {
    pub fn draw(&mut self) -> DenseVector {
        let e = if self.scale == 0.0 {
            DenseVector::zeros(self.dim)
        } else {
            let scale = self.scale;
            let rng = &mut self.rng;
            DenseVector::from_fn(self.dim, |_, _| {
                let xi: f64 = StandardNormal.sample(&mut *rng);
                scale * xi
            })
        };
        if self.logging {
            self.log.push(e.clone());
        }
        e
    }

    pub fn without_log(mut self) -> Self {
        self.logging = false;
        self
    }

    pub fn draws(&self) -> &[DenseVector] {
        &self.log
    }
}

/// `x̃ = g(y) + e` with `e` from a noise stream.
pub struct PerturbedStep<G> {
    inner: G,
    noise: NoiseStream,
}

impl<G: StepMap> PerturbedStep<G> {
    pub fn new(inner: G, model: NoiseModel, dim: usize) -> Self {
        PerturbedStep {
            inner,
            noise: model.stream(dim),
        }
    }

    /// Keep only the generator, not the history of draws.
    pub fn without_log(mut self) -> Self {
        self.noise = self.noise.without_log();
        self
    }

    pub fn draws(&self) -> &[DenseVector] {
        self.noise.draws()
    }
}

impl<G: StepMap> StepMap for PerturbedStep<G> {
    fn apply(&mut self, y: &DenseVector) -> DenseVector {
        let x = self.inner.apply(y);
        let e = self.noise.draw();
        if self.noise.scale == 0.0 {
            return x;
        }
        x + e
    }
}
