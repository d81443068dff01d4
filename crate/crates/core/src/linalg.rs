//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative pivot size below which a design column counts as collinear.
const RANK_TOL: f64 = 1e-9;

/// `n`-row design matrix from columns, optionally with a trailing column of
/// ones.
pub fn design_from_columns(n: usize, columns: &[&[f64]], intercept: bool) -> DMatrix<f64> {
    let p = columns.len() + usize::from(intercept);
    DMatrix::from_fn(n, p, |i, j| if j < columns.len() { columns[j][i] } else { 1.0 })
}

/// Least squares via Householder QR. Fails when a column is (numerically) a
/// linear combination of the preceding ones, naming its index.
pub fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let (n, p) = x.shape();
    if n < p {
        return Err(Error::SingularDesign(format!("{n} rows for {p} columns")));
    }
    let qr = x.clone().qr();
    let r = qr.r();
    for j in 0..p {
        let norm = x.column(j).norm();
        if r[(j, j)].abs() <= RANK_TOL * norm.max(f64::MIN_POSITIVE) || norm == 0.0 {
            return Err(Error::SingularDesign(format!("column {j} is collinear with earlier columns")));
        }
    }
    let qty = qr.q().transpose() * y;
    r.solve_upper_triangular(&qty)
        .ok_or_else(|| Error::SingularDesign("triangular solve failed".into()))
}

/// Solves a symmetric positive (semi)definite system, falling back to LU.
pub fn solve_spd(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(chol) = m.clone().cholesky() {
        let sol = chol.solve(rhs);
        if sol.iter().all(|v| v.is_finite()) {
            return Some(sol);
        }
    }
    m.clone().lu().solve(rhs).filter(|s| s.iter().all(|v| v.is_finite()))
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Centered total sum of squares.
pub fn tss(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum()
}
