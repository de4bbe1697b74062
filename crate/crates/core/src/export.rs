//! CSV export of solution paths with a JSON metadata sidecar.
//!
//! The CSV has columns `step, lambda, active_size` followed by one column per
//! coefficient. `active_size` is the size of the LARS active set (which may
//! include a variable that has just entered at zero) or, for grid paths, the
//! number of non-zero coefficients. Floats are written in shortest round-trip form, so reading a
//! file back reproduces the coefficients exactly.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::format_float;
use crate::error::{Error, Result};
use crate::family::FamilyKind;
use crate::l1::L1Path;
use crate::lars::{LarsMode, SolutionPath};
use crate::selection::active_set;
use crate::tangent::Method;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    Lar,
    Lasso,
    L1Grid,
}

/// Contents of the JSON sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathMetadata {
    pub method: Option<Method>,
    pub family: Option<FamilyKind>,
    pub kind: PathKind,
    /// Scale of the `lambda` column: `2Ĉ` for LARS paths, the penalty of the
    /// ℓ1 problem for grid paths.
    pub lambda_scale: String,
    pub steps: usize,
    pub dim: usize,
    pub column_names: Vec<String>,
    pub separation_flag: bool,
    /// Grid points that did not converge (ℓ1 paths only).
    pub not_converged: Vec<usize>,
}

/// Anything that can be written as a path.
pub trait ExportPath {
    /// `(lambda, active_size, coefficients)` per row.
    fn rows(&self) -> Vec<(f64, usize, &[f64])>;
    fn kind(&self) -> PathKind;
    fn separation_flag(&self) -> bool {
        false
    }
    fn not_converged(&self) -> Vec<usize> {
        Vec::new()
    }
}

impl ExportPath for SolutionPath {
    fn rows(&self) -> Vec<(f64, usize, &[f64])> {
        self.breakpoints
            .iter()
            .map(|b| (b.lambda(), b.active.len(), b.theta.as_slice()))
            .collect()
    }

    fn kind(&self) -> PathKind {
        match self.mode {
            LarsMode::Lar => PathKind::Lar,
            LarsMode::Lasso => PathKind::Lasso,
        }
    }

    fn separation_flag(&self) -> bool {
        self.separation_flag
    }
}

impl ExportPath for L1Path {
    fn rows(&self) -> Vec<(f64, usize, &[f64])> {
        self.lambdas
            .iter()
            .zip(&self.coefficients)
            .map(|(&l, theta)| (l, active_set(theta).len(), theta.as_slice()))
            .collect()
    }

    fn kind(&self) -> PathKind {
        PathKind::L1Grid
    }

    fn not_converged(&self) -> Vec<usize> {
        L1Path::not_converged(self)
    }
}

/// Where the sidecar of `csv_path` lives: `name.csv` → `name.meta.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

/// Writes `path` to `out` and its metadata to [`sidecar_path`]`(out)`.
/// Coefficient columns are named by `column_names` (`x1, x2, …` if absent).
pub fn path_export<P: ExportPath + ?Sized>(
    path: &P,
    method: Option<Method>,
    family: Option<FamilyKind>,
    column_names: Option<&[String]>,
    out: &Path,
) -> Result<PathMetadata> {
    let rows = path.rows();
    let dim = rows.first().map_or(0, |r| r.2.len());
    let names: Vec<String> = match column_names {
        Some(names) if names.len() == dim => names.to_vec(),
        Some(names) => {
            return Err(Error::Dimension(format!(
                "{} column names for {dim} coefficients",
                names.len()
            )))
        }
        None => (1..=dim).map(|j| format!("x{j}")).collect(),
    };

    let file = File::create(out).map_err(|e| Error::io(out, e))?;
    let mut writer = csv::Writer::from_writer(BufWriter::new(file));
    let mut header = vec![
        "step".to_owned(),
        "lambda".to_owned(),
        "active_size".to_owned(),
    ];
    header.extend(names.iter().cloned());
    writer
        .write_record(&header)
        .map_err(|e| csv_error(out, e))?;
    for (k, (lambda, size, theta)) in rows.iter().enumerate() {
        let mut record = vec![k.to_string(), format_float(*lambda), size.to_string()];
        record.extend(theta.iter().map(|&t| format_float(t)));
        writer
            .write_record(&record)
            .map_err(|e| csv_error(out, e))?;
    }
    writer.flush().map_err(|e| Error::io(out, e))?;

    let meta = PathMetadata {
        method,
        family,
        kind: path.kind(),
        lambda_scale: match path.kind() {
            PathKind::Lar | PathKind::Lasso => "2 * max_correlation".to_owned(),
            PathKind::L1Grid => "l1_penalty".to_owned(),
        },
        steps: rows.len(),
        dim,
        column_names: names,
        separation_flag: path.separation_flag(),
        not_converged: path.not_converged(),
    };
    let side = sidecar_path(out);
    let file = File::create(&side).map_err(|e| Error::io(&side, e))?;
    serde_json::to_writer_pretty(BufWriter::new(file), &meta)?;
    Ok(meta)
}

/// A path read back from [`path_export`] output.
#[derive(Debug, Clone, PartialEq)]
pub struct ExportedPath {
    pub column_names: Vec<String>,
    pub steps: Vec<usize>,
    pub lambdas: Vec<f64>,
    pub active_sizes: Vec<usize>,
    pub coefficients: Vec<Vec<f64>>,
}

pub fn read_path_export(csv_path: &Path) -> Result<ExportedPath> {
    let mut reader = csv::Reader::from_path(csv_path).map_err(|e| csv_error(csv_path, e))?;
    let header = reader
        .headers()
        .map_err(|e| csv_error(csv_path, e))?
        .clone();
    if header.len() < 3
        || &header[0] != "step"
        || &header[1] != "lambda"
        || &header[2] != "active_size"
    {
        return Err(Error::Parse(format!(
            "{}: expected header starting with step,lambda,active_size",
            csv_path.display()
        )));
    }
    let column_names: Vec<String> = header.iter().skip(3).map(str::to_owned).collect();
    let mut out = ExportedPath {
        column_names,
        steps: Vec::new(),
        lambdas: Vec::new(),
        active_sizes: Vec::new(),
        coefficients: Vec::new(),
    };
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(csv_path, e))?;
        let cell = |j: usize| -> Result<&str> {
            record
                .get(j)
                .ok_or_else(|| Error::Parse(format!("row {}: missing column {j}", row + 1)))
        };
        let parse_err = |j: usize, s: &str| {
            Error::Parse(format!("row {}, column {j}: cannot parse {s:?}", row + 1))
        };
        let step = cell(0)?;
        out.steps
            .push(step.parse().map_err(|_| parse_err(0, step))?);
        let lambda = cell(1)?;
        out.lambdas
            .push(lambda.parse().map_err(|_| parse_err(1, lambda))?);
        let size = cell(2)?;
        out.active_sizes
            .push(size.parse().map_err(|_| parse_err(2, size))?);
        let theta = (3..record.len())
            .map(|j| {
                let s = cell(j)?;
                s.parse::<f64>().map_err(|_| parse_err(j, s))
            })
            .collect::<Result<Vec<f64>>>()?;
        out.coefficients.push(theta);
    }
    Ok(out)
}

pub fn read_path_metadata(csv_path: &Path) -> Result<PathMetadata> {
    let side = sidecar_path(csv_path);
    let file = File::open(&side).map_err(|e| Error::io(&side, e))?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Parse(format!("{}: {e}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DesignMatrix;
    use crate::lars::lars_path;
    use nalgebra::DMatrix;

    #[test]
    fn zero_path_has_one_row_of_zeros() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("zero.csv");
        let raw = DMatrix::from_row_slice(
            4,
            3,
            &[1.0, 0.0, 2.0, 0.0, 1.0, -1.0, -1.0, 3.0, 0.5, 2.0, 0.2, 0.1],
        );
        let x = DesignMatrix::normalize(&raw, None).unwrap();
        let path = lars_path(&x, &[0.0; 4], LarsMode::Lar).unwrap();
        let meta = path_export(&path, Some(Method::Tlars), None, None, &out).unwrap();
        assert_eq!(meta.steps, 1);
        let back = read_path_export(&out).unwrap();
        assert_eq!(back.coefficients, vec![vec![0.0; 3]]);
        assert_eq!(back.active_sizes, vec![0]);
        assert_eq!(read_path_metadata(&out).unwrap(), meta);
    }

    #[test]
    fn sidecar_name() {
        assert_eq!(
            sidecar_path(Path::new("a/b.csv")),
            PathBuf::from("a/b.meta.json")
        );
    }
}
