//! Design matrices, responses and CSV ingestion.
//!
//! Every predictor column is centered and scaled to unit Euclidean norm, so
//! `XᵀX` is the correlation matrix of the predictors. The affine transform is
//! kept so coefficients can be mapped back to the original units.

use std::fmt;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest-to-largest singular value ratio below which a design is treated
/// as rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Symmetric `d × d` matrix `XᵀX` of a normalized design.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix(DMatrix<f64>);

impl GramMatrix {
    pub fn values(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    /// `G v`.
    pub fn times(&self, v: &[f64]) -> Vec<f64> {
        let d = self.dim();
        assert_eq!(v.len(), d);
        (0..d)
            .map(|i| (0..d).map(|j| self.0[(i, j)] * v[j]).sum())
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct DesignMatrix {
    values: DMatrix<f64>,
    gram: GramMatrix,
    column_names: Option<Vec<String>>,
    centers: Vec<f64>,
    scales: Vec<f64>,
}

impl DesignMatrix {
    /// Centers every column and scales it to unit l2 norm.
    ///
    /// Fails with [`Error::ZeroVarianceColumn`] on a constant column and with
    /// [`Error::RankDeficient`] when the normalized columns are (numerically)
    /// linearly dependent.
    pub fn normalize(raw: &DMatrix<f64>, labels: Option<Vec<String>>) -> Result<Self> {
        let (n, d) = raw.shape();
        if n < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 samples, got {n}"
            )));
        }
        if d < 1 {
            return Err(Error::InvalidInput("need at least one predictor".into()));
        }
        if let Some(names) = &labels {
            if names.len() != d {
                return Err(Error::Dimension(format!(
                    "{} column names for {d} columns",
                    names.len()
                )));
            }
        }
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "design contains non-finite values".into(),
            ));
        }

        let mut values = raw.clone();
        let mut centers = Vec::with_capacity(d);
        let mut scales = Vec::with_capacity(d);
        for j in 0..d {
            let mut col = values.column_mut(j);
            let mean = col.sum() / n as f64;
            col.add_scalar_mut(-mean);
            let norm = col.norm();
            let magnitude = raw.column(j).amax();
            if norm == 0.0 || norm <= 1e-13 * magnitude * (n as f64).sqrt() {
                return Err(Error::ZeroVarianceColumn { column: j });
            }
            col /= norm;
            centers.push(mean);
            scales.push(norm);
        }

        if d > n {
            return Err(Error::RankDeficient { ratio: 0.0 });
        }
        let sv = values.singular_values();
        let smax = sv.max();
        let smin = sv.min();
        if !(smin > RANK_TOLERANCE * smax) {
            return Err(Error::RankDeficient { ratio: smin / smax });
        }

        let gram = compute_gram(&values);
        Ok(Self {
            values,
            gram,
            column_names: labels,
            centers,
            scales,
        })
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn d(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn gram(&self) -> &GramMatrix {
        &self.gram
    }

    pub fn column_names(&self) -> Option<&[String]> {
        self.column_names.as_deref()
    }

    /// Column labels, falling back to `x1, x2, …`.
    pub fn labels(&self) -> Vec<String> {
        match &self.column_names {
            Some(names) => names.clone(),
            None => (1..=self.d()).map(|j| format!("x{j}")).collect(),
        }
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    /// `X θ`.
    pub fn times(&self, theta: &[f64]) -> Vec<f64> {
        assert_eq!(theta.len(), self.d(), "theta length must equal d");
        let t = DVector::from_column_slice(theta);
        (&self.values * t).as_slice().to_vec()
    }

    /// `Xᵀ v`.
    pub fn transpose_times(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n(), "vector length must equal n");
        let v = DVector::from_column_slice(v);
        self.values.tr_mul(&v).as_slice().to_vec()
    }

    /// Sub-design restricted to `columns`, in the given order. The columns
    /// are already normalized and a subset of independent columns stays
    /// independent, so no checks are repeated.
    pub fn select_columns(&self, columns: &[usize]) -> DesignMatrix {
        let values = self.values.select_columns(columns);
        let gram = compute_gram(&values);
        DesignMatrix {
            values,
            gram,
            column_names: self
                .column_names
                .as_ref()
                .map(|names| columns.iter().map(|&j| names[j].clone()).collect()),
            centers: columns.iter().map(|&j| self.centers[j]).collect(),
            scales: columns.iter().map(|&j| self.scales[j]).collect(),
        }
    }

    /// Maps coefficients on the normalized scale to the raw predictor scale.
    /// Returns the slopes and the additive shift of the linear predictor
    /// (`-Σ θⱼ centerⱼ / scaleⱼ`) that an intercept has to absorb.
    pub fn to_original_scale(&self, theta: &[f64]) -> (Vec<f64>, f64) {
        assert_eq!(theta.len(), self.d());
        let slopes: Vec<f64> = theta.iter().zip(&self.scales).map(|(t, s)| t / s).collect();
        let shift = -slopes
            .iter()
            .zip(&self.centers)
            .map(|(b, c)| b * c)
            .sum::<f64>();
        (slopes, shift)
    }
}

/// `XᵀX`, symmetrized.
pub fn gram(x: &DesignMatrix) -> &GramMatrix {
    x.gram()
}

fn compute_gram(values: &DMatrix<f64>) -> GramMatrix {
    let g = values.tr_mul(values);
    GramMatrix((&g + g.transpose()) * 0.5)
}

/// Support of a response: which values a family can model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyDomain {
    Real,
    Binary01,
    NonnegInteger,
}

impl FamilyDomain {
    fn name(self) -> &'static str {
        match self {
            FamilyDomain::Real => "real",
            FamilyDomain::Binary01 => "binary01",
            FamilyDomain::NonnegInteger => "nonneg_integer",
        }
    }

    pub fn admits(self, value: f64) -> bool {
        match self {
            FamilyDomain::Real => value.is_finite(),
            FamilyDomain::Binary01 => value == 0.0 || value == 1.0,
            FamilyDomain::NonnegInteger => {
                value >= 0.0 && value.fract() == 0.0 && value.is_finite()
            }
        }
    }
}

impl fmt::Display for FamilyDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResponseVector {
    values: Vec<f64>,
    domain: FamilyDomain,
}

impl ResponseVector {
    pub fn new(values: Vec<f64>, domain: FamilyDomain) -> Result<Self> {
        for (row, &value) in values.iter().enumerate() {
            if !domain.admits(value) {
                return Err(Error::Domain {
                    expected: domain.name(),
                    row,
                    value,
                });
            }
        }
        Ok(Self { values, domain })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn domain(&self) -> FamilyDomain {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Which CSV column holds the response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResponseColumn {
    Name(String),
    Index(usize),
}

impl From<&str> for ResponseColumn {
    fn from(s: &str) -> Self {
        ResponseColumn::Name(s.to_string())
    }
}

impl From<usize> for ResponseColumn {
    fn from(i: usize) -> Self {
        ResponseColumn::Index(i)
    }
}

/// Reads a numeric CSV with one header row, splits off the response column
/// and normalizes the remaining columns. Row order is preserved.
pub fn load_dataset(
    path: impl AsRef<Path>,
    response_column: impl Into<ResponseColumn>,
    domain: FamilyDomain,
) -> Result<(DesignMatrix, ResponseVector)> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Parse(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();

    let response_idx = match response_column.into() {
        ResponseColumn::Index(i) if i < headers.len() => i,
        ResponseColumn::Index(i) => {
            return Err(Error::Parse(format!(
                "response column index {i} out of range ({} columns)",
                headers.len()
            )))
        }
        ResponseColumn::Name(name) => headers.iter().position(|h| *h == name).ok_or_else(|| {
            Error::Parse(format!("no column named {name:?} in {}", path.display()))
        })?,
    };
    if headers.len() < 2 {
        return Err(Error::Parse(
            "need a response and at least one predictor".into(),
        ));
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(e.to_string()))?;
        if record.len() != headers.len() {
            return Err(Error::Parse(format!(
                "row {} has {} fields, expected {}",
                r + 1,
                record.len(),
                headers.len()
            )));
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                cell.parse::<f64>().map_err(|_| {
                    Error::Parse(format!(
                        "non-numeric cell {cell:?} at row {}, column {c}",
                        r + 1
                    ))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }

    let n = rows.len();
    let d = headers.len() - 1;
    let y: Vec<f64> = rows.iter().map(|row| row[response_idx]).collect();
    let response = ResponseVector::new(y, domain)?;

    let predictor_cols: Vec<usize> = (0..headers.len()).filter(|&c| c != response_idx).collect();
    let raw = DMatrix::from_fn(n, d, |a, j| rows[a][predictor_cols[j]]);
    let labels = predictor_cols.iter().map(|&c| headers[c].clone()).collect();
    let design = DesignMatrix::normalize(&raw, Some(labels))?;
    Ok((design, response))
}

/// Writes `(X, y)` as CSV (predictors first, response last) using shortest
/// round-trip float formatting.
pub fn write_dataset(
    path: impl AsRef<Path>,
    design: &DesignMatrix,
    response: &ResponseVector,
    response_name: &str,
) -> Result<()> {
    let path = path.as_ref();
    if design.n() != response.len() {
        return Err(Error::Dimension(format!(
            "{} rows in design, {} responses",
            design.n(),
            response.len()
        )));
    }
    let mut out = String::new();
    let mut header = design.labels();
    header.push(response_name.to_string());
    out.push_str(&header.join(","));
    out.push('\n');
    for a in 0..design.n() {
        let mut fields: Vec<String> = (0..design.d())
            .map(|j| format_float(design.values()[(a, j)]))
            .collect();
        fields.push(format_float(response.values()[a]));
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes())
        .map_err(|e| Error::io(path, e))
}

/// Shortest decimal representation that parses back to the same `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:?}")
}
