use accelkit::problems::{
    finite_difference_gradient, read_libsvm, synth_logistic, synth_quadratic, FiniteSum, LogisticProblem, Objective,
};
use accelkit::DenseVector;
use proptest::prelude::*;

fn rel_err(p: &dyn Objective, x: &DenseVector) -> f64 {
    let g = p.gradient(x);
    let fd = finite_difference_gradient(p, x, 1e-5);
    (&g - &fd).norm() / g.norm().max(1e-12)
}

fn point(v: Vec<f64>) -> DenseVector {
    DenseVector::from_vec(v)
}

proptest! {
    #[test]
    fn quadratic_gradient(seed in any::<u64>(), x in prop::collection::vec(-3.0f64..3.0, 8)) {
        let p = synth_quadratic(8, 0.05, seed).unwrap();
        prop_assert!(rel_err(&p, &point(x)) <= 1e-6);
    }

    #[test]
    fn logistic_gradient(seed in 0u64..1000, rho in 0.0f64..1.0, x in prop::collection::vec(-3.0f64..3.0, 6)) {
        let p = synth_logistic(40, 6, seed).unwrap().with_rho(rho).unwrap();
        prop_assert!(rel_err(&p, &point(x)) <= 1e-6);
    }

    #[test]
    fn sample_gradients_average_to_full(seed in 0u64..1000, x in prop::collection::vec(-2.0f64..2.0, 5)) {
        let p = synth_logistic(25, 5, seed).unwrap().with_rho(0.1).unwrap();
        let x = point(x);
        let mut avg = DenseVector::zeros(5);
        for i in 0..p.n_samples() {
            avg += p.sample_gradient(&x, i);
        }
        avg /= p.n_samples() as f64;
        prop_assert!((avg - p.gradient(&x)).norm() <= 1e-12);
    }

    #[test]
    fn libsvm_logistic_gradient(x in prop::collection::vec(-2.0f64..2.0, 4)) {
        let text = "3 1:0.2 4:1.0\n1 2:-0.7 3:0.4\n3 1:1.3 2:0.5\n2 3:-1.1 4:0.3\n";
        let data = read_libsvm(text.as_bytes(), None, Some(3.0)).unwrap();
        let p = LogisticProblem::new(data.features, data.labels, 1e-2).unwrap();
        prop_assert!(rel_err(&p, &point(x)) <= 1e-6);
    }
}
