//! Historical VaR/CVaR and principal components of the factor panel.

mod jacobi;

pub use jacobi::symmetric_eigen;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;

/// Confidence levels of the risk table.
pub const RISK_LEVELS: [f64; 3] = [0.90, 0.95, 0.99];

/// `r_t = p_t / p_{t-1} - 1`
pub fn simple_returns(prices: &[f64]) -> Result<Vec<f64>> {
    if prices.len() < 2 {
        return Err(Error::Usage(format!("simple returns need at least 2 prices, got {}", prices.len())));
    }
    if let Some(p) = prices.iter().find(|p| !p.is_finite() || **p <= 0.0) {
        return Err(Error::Domain(format!("non-positive price {p}")));
    }
    Ok(prices.windows(2).map(|w| w[1] / w[0] - 1.0).collect())
}

/// Historical VaR and CVaR at `level`.
///
/// VaR is the order statistic at 1-based rank `ceil((1 - level) n)` (at
/// least 1); CVaR is the mean of all returns at or below it. Both are
/// returns, so losses are negative.
pub fn var_cvar(returns: &[f64], level: f64) -> Result<(f64, f64)> {
    if returns.len() < 10 {
        return Err(Error::Usage(format!("VaR needs at least 10 returns, got {}", returns.len())));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Usage(format!("confidence level {level} outside (0, 1)")));
    }
    if returns.iter().any(|r| !r.is_finite()) {
        return Err(Error::Data("non-finite return".into()));
    }
    let mut sorted = returns.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    // the small offset keeps e.g. (1 - 0.95) * 20 from rounding up to 2
    let rank = (((1.0 - level) * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
    let var = sorted[rank - 1];
    let tail: Vec<f64> = sorted.iter().copied().take_while(|r| *r <= var).collect();
    let cvar = tail.iter().sum::<f64>() / tail.len() as f64;
    Ok((var, cvar.min(var)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskRow {
    pub level: f64,
    pub var: f64,
    pub cvar: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskReport {
    pub rows: Vec<RiskRow>,
}

/// VaR/CVaR at each of [`RISK_LEVELS`].
pub fn risk_report(returns: &[f64]) -> Result<RiskReport> {
    let rows = RISK_LEVELS
        .iter()
        .map(|&level| var_cvar(returns, level).map(|(var, cvar)| RiskRow { level, var, cvar }))
        .collect::<Result<_>>()?;
    Ok(RiskReport { rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaResult {
    pub names: Vec<String>,
    /// Descending.
    pub eigenvalues: Vec<f64>,
    /// `λ_i / Σλ`
    pub proportions: Vec<f64>,
    /// Unit eigenvectors as columns, in eigenvalue order.
    pub loadings: DMatrix<f64>,
}

/// Principal components of the correlation matrix (or the covariance matrix
/// with `use_correlation = false`).
pub fn pca(columns: &[(String, Vec<f64>)], use_correlation: bool) -> Result<PcaResult> {
    let k = columns.len();
    if k == 0 {
        return Err(Error::Usage("PCA needs at least one column".into()));
    }
    let n = columns[0].1.len();
    if columns.iter().any(|(_, c)| c.len() != n) {
        return Err(Error::Data("PCA columns differ in length".into()));
    }
    if n <= k {
        return Err(Error::Usage(format!("PCA needs more rows than columns, got {n} x {k}")));
    }
    if columns.iter().any(|(_, c)| c.iter().any(|v| !v.is_finite())) {
        return Err(Error::Data("PCA input has missing or non-finite values".into()));
    }

    let centered: Vec<Vec<f64>> = columns
        .iter()
        .map(|(name, c)| {
            let m = linalg::mean(c);
            let d: Vec<f64> = c.iter().map(|v| v - m).collect();
            if use_correlation {
                let ss: f64 = d.iter().map(|v| v * v).sum();
                if ss <= 0.0 {
                    return Err(Error::Domain(format!("column `{name}` has zero variance")));
                }
                let sd = ss.sqrt();
                Ok(d.iter().map(|v| v / sd).collect())
            } else {
                Ok(d)
            }
        })
        .collect::<Result<_>>()?;
    let denom = if use_correlation { 1.0 } else { (n - 1) as f64 };
    let mut m = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..=i {
            let s: f64 = centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum::<f64>() / denom;
            m[(i, j)] = s;
            m[(j, i)] = s;
        }
    }
    if use_correlation {
        for i in 0..k {
            m[(i, i)] = 1.0;
        }
    }
    let (eigenvalues, loadings) = symmetric_eigen(&m)?;
    let total: f64 = eigenvalues.iter().sum();
    if total <= 0.0 {
        return Err(Error::Domain("covariance matrix has zero trace".into()));
    }
    Ok(PcaResult {
        names: columns.iter().map(|(n, _)| n.clone()).collect(),
        proportions: eigenvalues.iter().map(|l| l / total).collect(),
        eigenvalues,
        loadings,
    })
}
