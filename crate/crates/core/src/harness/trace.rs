use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use crate::error::{Error, Result};

pub const TRACE_HEADER: [&str; 7] = ["iter", "f_val", "grad_norm", "resid_norm", "coeff_norm", "branch", "wall_ns"];

/// How the recorded point was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchFlag {
    /// Starting point or a plain step of the base method.
    Plain,
    /// Extrapolated point.
    Rna,
    /// Momentum step.
    Nesterov,
}

impl fmt::Display for BranchFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BranchFlag::Plain => "plain",
            BranchFlag::Rna => "rna",
            BranchFlag::Nesterov => "nesterov",
        })
    }
}

impl FromStr for BranchFlag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(BranchFlag::Plain),
            "rna" => Ok(BranchFlag::Rna),
            "nesterov" => Ok(BranchFlag::Nesterov),
            _ => Err(Error::InvalidParameter(format!("unknown branch flag '{s}'"))),
        }
    }
}

/// Row `k` describes the `k`-th point of the run.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub f_val: f64,
    pub grad_norm: f64,
    /// `‖∇f‖/L`, the residual of a gradient step with step 1/L.
    pub resid_norm: f64,
    /// ℓ2 norm of the weights that produced the point, 0 for plain steps.
    pub coeff_norm: f64,
    pub branch: BranchFlag,
    pub wall_ns: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    /// Ran `max_iters` steps.
    Completed,
    /// Reached the gradient tolerance, or the accelerator reported an exact
    /// fixed point.
    Converged,
    /// Hit a non-finite value; rows stop at the last finite point.
    Diverged { last_good: Option<usize> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub label: String,
    pub rows: Vec<TraceRow>,
    pub status: RunStatus,
}

fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

impl RunTrace {
    pub fn new(label: impl Into<String>, rows: Vec<TraceRow>, status: RunStatus) -> Self {
        RunTrace {
            label: label.into(),
            rows,
            status,
        }
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    /// First iteration whose gradient norm is at most `tol`.
    pub fn iterations_to(&self, tol: f64) -> Option<usize> {
        self.rows.iter().find(|r| r.grad_norm <= tol).map(|r| r.iter)
    }

    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        write_rows(&mut w, &self.rows)?;
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }

    /// Writes through a temporary file in the target directory, then renames.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_csv_bytes()?)
    }

    pub fn read_csv(path: &Path) -> Result<Vec<TraceRow>> {
        read_rows(std::fs::File::open(path)?)
    }
}

fn write_rows<W: Write>(w: &mut csv::Writer<W>, rows: &[TraceRow]) -> Result<()> {
    w.write_record(TRACE_HEADER)?;
    for r in rows {
        w.write_record([
            r.iter.to_string(),
            fmt_float(r.f_val),
            fmt_float(r.grad_norm),
            fmt_float(r.resid_norm),
            fmt_float(r.coeff_norm),
            r.branch.to_string(),
            r.wall_ns.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<R: std::io::Read>(reader: R) -> Result<Vec<TraceRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().ne(TRACE_HEADER.iter().copied()) {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {}", TRACE_HEADER.join(",")),
        });
    }
    let mut rows: Vec<TraceRow> = Vec::new();
    for (k, rec) in rdr.deserialize().enumerate() {
        let row: TraceRow = rec?;
        if let Some(prev) = rows.last() {
            if row.iter <= prev.iter {
                return Err(Error::Parse {
                    line: k + 2,
                    message: "iteration index not strictly increasing".into(),
                });
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}
