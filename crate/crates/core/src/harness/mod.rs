//! Declarative experiment runner: TOML configs in, CSV traces out, plus
//! side-by-side comparisons and rate certification on quadratics.
//!
//! ```
//! use accelkit::harness::{run_experiment, ExperimentConfig};
//!
//! let cfg = ExperimentConfig::from_toml_str(r#"
//!     max_iters = 500
//!     tol = 1e-8
//!     problem = { kind = "quadratic", d = 30, kappa = 1e-2, seed = 3 }
//!     accel = { mode = "online", N = 5, lambda = 1e-10 }
//! "#).unwrap();
//! let trace = run_experiment(&cfg).unwrap();
//! assert!(trace.last().unwrap().grad_norm <= 1e-8);
//! ```

mod certify;
mod compare;
mod config;
mod run;
mod trace;

pub use certify::{certify, CertificationReport, EnvelopePoint};
pub use compare::{compare, CompareOptions, Comparison, Metric, THREADS_ENV};
pub use config::{
    AccelSpec, ExperimentConfig, NoiseSpec, OptimizerKind, OptimizerSpec, ProblemKind, ProblemSpec,
};
pub use run::{build_step_map, run_experiment, run_on, ProblemInstance};
pub use trace::{read_rows, BranchFlag, RunStatus, RunTrace, TraceRow, TRACE_HEADER};
