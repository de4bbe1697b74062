//! Small dense linear-algebra helpers shared by the solvers.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

/// Solves `a x = b` for symmetric positive-definite `a` via Cholesky.
pub fn spd_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let chol = Cholesky::new(a.clone())
        .ok_or_else(|| Error::NumericalBreakdown("matrix is not positive definite".to_string()))?;
    Ok(chol.solve(b))
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cholesky factor `L` (lower triangular, `L Lᵀ = G`) that grows one
/// row/column at a time as variables join an active set.
#[derive(Debug, Clone, Default)]
pub struct GrowingCholesky {
    // Row-major packed lower triangle; row i holds i+1 entries.
    rows: Vec<Vec<f64>>,
}

impl GrowingCholesky {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Appends a variable given its inner products with the existing
    /// variables (`cross`, in factor order) and with itself (`diag`).
    pub fn push(&mut self, cross: &[f64], diag: f64) -> Result<()> {
        let k = self.rows.len();
        if cross.len() != k {
            return Err(Error::Dimension(format!(
                "cholesky update expects {k} cross terms, got {}",
                cross.len()
            )));
        }
        // Forward substitution L l = cross.
        let mut row = Vec::with_capacity(k + 1);
        for i in 0..k {
            let li = &self.rows[i];
            let s: f64 = (0..i).map(|j| li[j] * row[j]).sum();
            row.push((cross[i] - s) / li[i]);
        }
        let pivot = diag - row.iter().map(|x| x * x).sum::<f64>();
        if !(pivot > 1e-14 * diag.abs().max(1.0)) {
            return Err(Error::NumericalBreakdown(format!(
                "active Gram matrix lost positive definiteness (pivot {pivot:.3e})"
            )));
        }
        row.push(pivot.sqrt());
        self.rows.push(row);
        Ok(())
    }

    /// Solves `L Lᵀ x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let k = self.rows.len();
        assert_eq!(b.len(), k);
        let mut z = vec![0.0; k];
        for i in 0..k {
            let li = &self.rows[i];
            let s: f64 = (0..i).map(|j| li[j] * z[j]).sum();
            z[i] = (b[i] - s) / li[i];
        }
        let mut x = vec![0.0; k];
        for i in (0..k).rev() {
            let s: f64 = ((i + 1)..k).map(|j| self.rows[j][i] * x[j]).sum();
            x[i] = (z[i] - s) / self.rows[i][i];
        }
        x
    }
}
