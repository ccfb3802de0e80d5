use std::path::{Path, PathBuf};
use std::process::ExitCode;

use accelkit::analysis::{constrained_chebyshev_with, unconstrained_chebyshev_value, write_certificates_csv, ChebyshevOptions};
use accelkit::harness::{certify, compare, run_experiment, CompareOptions, ExperimentConfig, Metric, RunStatus, RunTrace};
use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "accelkit", version, about = "Nonlinear acceleration experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its trace.
    Run {
        config: PathBuf,
        /// Overrides `output` from the config.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run several experiments on the same problem and align their traces.
    Compare {
        #[arg(required = true, num_args = 2..)]
        configs: Vec<PathBuf>,
        /// Wide CSV: iteration plus one column per method.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// objective, grad or residual
        #[arg(long, default_value = "residual")]
        metric: Metric,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Check a trace against the worst-case rates of its method.
    Certify {
        trace: PathBuf,
        config: PathBuf,
        /// Exit with status 1 when any violation is found.
        #[arg(long)]
        strict: bool,
    },
    /// Constrained Chebyshev value on [0, kappa].
    Cheb {
        /// Polynomial degree.
        #[arg(long = "N")]
        degree: usize,
        /// Right end of the interval.
        #[arg(long)]
        kappa: f64,
        /// Norm slack; `inf` for the unconstrained problem.
        #[arg(long, default_value_t = f64::INFINITY)]
        tau: f64,
        #[arg(long, default_value_t = 2000)]
        grid: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn load(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::from_file(path).with_context(|| format!("loading {}", path.display()))
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { config, output } => {
            let mut cfg = load(&config)?;
            if output.is_some() {
                cfg.output = output;
            }
            let trace = run_experiment(&cfg)?;
            let last = trace.last().context("run produced no rows")?;
            println!(
                "{}: {} iterations, f = {:.6e}, |grad| = {:.6e}, {:?}",
                trace.label, last.iter, last.f_val, last.grad_norm, trace.status
            );
            if let Some(p) = &cfg.output {
                println!("trace written to {}", p.display());
            }
            if let RunStatus::Diverged { last_good } = trace.status {
                eprintln!("run diverged; last finite iteration {last_good:?}");
                return Ok(ExitCode::from(2));
            }
        }
        Command::Compare {
            configs,
            output,
            metric,
            tol,
        } => {
            let cfgs = configs.iter().map(|p| load(p)).collect::<Result<Vec<_>>>()?;
            let cmp = compare(&cfgs, CompareOptions { metric, tol })?;
            print!("{}", cmp.summary());
            if let Some(p) = output {
                cmp.write_wide_csv(&p)?;
                println!("comparison written to {}", p.display());
            }
        }
        Command::Certify { trace, config, strict } => {
            let cfg = load(&config)?;
            let rows = RunTrace::read_csv(&trace).with_context(|| format!("reading {}", trace.display()))?;
            let report = certify(&RunTrace::new(cfg.label(), rows, RunStatus::Completed), &cfg)?;
            print!("{report}");
            if strict && !report.is_clean() {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Cheb {
            degree,
            kappa,
            tau,
            grid,
            output,
        } => {
            let cert = constrained_chebyshev_with(
                degree,
                kappa,
                tau,
                ChebyshevOptions {
                    grid_size: grid,
                    ..ChebyshevOptions::default()
                },
            )?;
            println!(
                "degree {degree}, [0, {kappa}], tau {tau}: value {:.8e} (gap {:.2e}, {} iterations{})",
                cert.value,
                cert.gap,
                cert.iterations,
                if cert.converged { "" } else { ", not converged" }
            );
            println!("unconstrained value {:.8e}", unconstrained_chebyshev_value(degree, kappa));
            let coeffs: Vec<String> = cert.coefficients.iter().map(|c| format!("{c:.8e}")).collect();
            println!("coefficients [{}]", coeffs.join(", "));
            if let Some(p) = output {
                write_certificates_csv(&[cert], &p)?;
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
