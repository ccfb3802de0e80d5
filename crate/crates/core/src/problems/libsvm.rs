use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::DenseVector;

/// Dense copy of a LIBSVM file.
#[derive(Debug, Clone, PartialEq)]
pub struct LibsvmData {
    /// n × d, one sample per row.
    pub features: DMatrix<f64>,
    /// ±1
    pub labels: DenseVector,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Reads `<label> <index>:<value> …` lines with 1-based indices.
///
/// Labels `0` and `-1` map to −1 and anything positive to +1, unless
/// `positive_label` is given, in which case only that label is +1 (for
/// multiclass files). Blank lines and `#` comments are skipped. The feature
/// count is `dim` if given, otherwise the largest index seen.
pub fn read_libsvm<R: Read>(reader: R, dim: Option<usize>, positive_label: Option<f64>) -> Result<LibsvmData> {
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut labels = Vec::new();
    let mut max_index = 0usize;
    for (k, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = k + 1;
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let raw = tokens.next().ok_or_else(|| parse_err(lineno, "missing label"))?;
        let label: f64 = raw
            .parse()
            .map_err(|_| parse_err(lineno, format!("invalid label '{raw}'")))?;
        let mapped = match positive_label {
            Some(p) => {
                if label == p {
                    1.0
                } else {
                    -1.0
                }
            }
            None => {
                if label > 0.0 {
                    1.0
                } else if label == 0.0 || label == -1.0 {
                    -1.0
                } else {
                    return Err(parse_err(lineno, format!("unsupported label {label}")));
                }
            }
        };
        let mut row = Vec::new();
        let mut last = 0usize;
        for tok in tokens {
            let (i, v) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(lineno, format!("expected index:value, found '{tok}'")))?;
            let i: usize = i
                .parse()
                .map_err(|_| parse_err(lineno, format!("invalid index '{i}'")))?;
            if i == 0 {
                return Err(parse_err(lineno, "indices are 1-based"));
            }
            if i <= last {
                return Err(parse_err(lineno, "indices must be strictly increasing"));
            }
            let v: f64 = v
                .parse()
                .map_err(|_| parse_err(lineno, format!("invalid value '{v}'")))?;
            if !v.is_finite() {
                return Err(parse_err(lineno, "non-finite feature value"));
            }
            if let Some(d) = dim {
                if i > d {
                    return Err(parse_err(lineno, format!("index {i} exceeds dimension {d}")));
                }
            }
            last = i;
            max_index = max_index.max(i);
            row.push((i - 1, v));
        }
        rows.push(row);
        labels.push(mapped);
    }
    let d = dim.unwrap_or(max_index);
    let mut features = DMatrix::zeros(rows.len(), d);
    for (r, row) in rows.iter().enumerate() {
        for &(j, v) in row {
            features[(r, j)] = v;
        }
    }
    Ok(LibsvmData {
        features,
        labels: DenseVector::from_vec(labels),
    })
}

pub fn read_libsvm_file(path: &Path, dim: Option<usize>, positive_label: Option<f64>) -> Result<LibsvmData> {
    read_libsvm(std::fs::File::open(path)?, dim, positive_label)
}
