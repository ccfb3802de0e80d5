use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};

use super::config::ExperimentConfig;
use super::run::run_experiment;
use super::trace::{write_atomic, RunTrace, TraceRow};

/// Environment variable capping the number of runs executed in parallel.
pub const THREADS_ENV: &str = "ACCELKIT_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Metric {
    Objective,
    GradNorm,
    #[default]
    Residual,
}

impl Metric {
    pub fn of(self, row: &TraceRow) -> f64 {
        match self {
            Metric::Objective => row.f_val,
            Metric::GradNorm => row.grad_norm,
            Metric::Residual => row.resid_norm,
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "objective" | "f_val" => Ok(Metric::Objective),
            "grad" | "grad_norm" => Ok(Metric::GradNorm),
            "residual" | "resid_norm" => Ok(Metric::Residual),
            _ => Err(Error::InvalidParameter(format!("unknown metric '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareOptions {
    pub metric: Metric,
    /// Threshold on `metric` for the iterations-to-tolerance summary.
    pub tol: f64,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions {
            metric: Metric::Residual,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    /// Column names, unique.
    pub labels: Vec<String>,
    pub traces: Vec<RunTrace>,
    pub options: CompareOptions,
}

impl Comparison {
    /// Values of the metric for method `i`, by iteration.
    pub fn column(&self, i: usize) -> Vec<f64> {
        self.traces[i].rows.iter().map(|r| self.options.metric.of(r)).collect()
    }

    pub fn iterations_to_tol(&self) -> Vec<Option<usize>> {
        self.traces
            .iter()
            .map(|t| {
                t.rows
                    .iter()
                    .find(|r| self.options.metric.of(r) <= self.options.tol)
                    .map(|r| r.iter)
            })
            .collect()
    }

    /// `iter,<label>,…`; methods that stopped early leave empty cells.
    pub fn to_wide_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["iter".to_string()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header)?;
        let len = self.traces.iter().map(|t| t.rows.len()).max().unwrap_or(0);
        let cols: Vec<Vec<f64>> = (0..self.traces.len()).map(|i| self.column(i)).collect();
        for k in 0..len {
            let mut rec = vec![k.to_string()];
            rec.extend(cols.iter().map(|c| c.get(k).map_or(String::new(), |v| format!("{v:.16e}"))));
            w.write_record(&rec)?;
        }
        w.flush()?;
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }

    pub fn write_wide_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_wide_csv()?)
    }

    pub fn summary(&self) -> String {
        let mut s = format!("iterations to {:?} <= {:e}\n", self.options.metric, self.options.tol);
        let width = self.labels.iter().map(|l| l.len()).max().unwrap_or(0);
        for (label, it) in self.labels.iter().zip(self.iterations_to_tol()) {
            let v = it.map_or("not reached".to_string(), |k| k.to_string());
            let _ = writeln!(s, "  {label:<width$}  {v}");
        }
        s
    }
}

fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse().ok()).filter(|&n| n > 0)
}

/// Runs every config (in parallel, capped by `ACCELKIT_THREADS`) and aligns
/// the traces by iteration.
pub fn compare(configs: &[ExperimentConfig], options: CompareOptions) -> Result<Comparison> {
    if configs.len() < 2 {
        return Err(Error::Config("compare needs at least two configs".into()));
    }
    for c in configs {
        c.validate()?;
    }
    let problem = configs[0].resolved_problem();
    if let Some(bad) = configs.iter().position(|c| c.resolved_problem() != problem) {
        return Err(Error::Config(format!(
            "config {} ('{}') has a different problem than '{}'",
            bad + 1,
            configs[bad].label(),
            configs[0].label()
        )));
    }
    let mut outputs = HashSet::new();
    for c in configs {
        if let Some(o) = &c.output {
            if !outputs.insert(o) {
                return Err(Error::Config(format!("two configs write to {}", o.display())));
            }
        }
    }

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap() {
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let traces: Vec<RunTrace> =
        pool.install(|| configs.par_iter().map(run_experiment).collect::<Result<Vec<_>>>())?;

    let mut labels: Vec<String> = Vec::with_capacity(configs.len());
    for c in configs {
        let base = c.label();
        let mut label = base.clone();
        let mut k = 2;
        while labels.contains(&label) {
            label = format!("{base}#{k}");
            k += 1;
        }
        labels.push(label);
    }
    Ok(Comparison {
        labels,
        traces,
        options,
    })
}
