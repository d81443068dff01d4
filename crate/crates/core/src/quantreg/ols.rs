use nalgebra::DVector;

use super::{Design, ModelSpec};
use crate::diagnostics::TestResult;
use crate::dist::{self, Family};
use crate::error::{Error, Result};
use crate::linalg;
use crate::transform::FactorPanel;

/// Least-squares fit. Keeps its design so residual-based diagnostics can
/// rebuild auxiliary regressions.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub design: Design,
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
    pub fitted: Vec<f64>,
    pub r2: f64,
    /// Residual variance with an `n - p` denominator.
    pub sigma2: f64,
}

impl OlsFit {
    pub fn n(&self) -> usize {
        self.design.n()
    }

    pub fn p(&self) -> usize {
        self.design.p()
    }

    pub fn rss(&self) -> f64 {
        self.residuals.iter().map(|e| e * e).sum()
    }

    pub fn names(&self) -> &[String] {
        &self.design.names
    }
}

pub fn fit_ols(panel: &FactorPanel, spec: &ModelSpec) -> Result<OlsFit> {
    fit_ols_design(&spec.design(panel)?)
}

pub fn fit_ols_design(design: &Design) -> Result<OlsFit> {
    let (n, p) = (design.n(), design.p());
    if n <= p {
        return Err(Error::SingularDesign(format!("{n} observations for {p} coefficients")));
    }
    let y = DVector::from_column_slice(&design.y);
    let beta = linalg::least_squares(&design.x, &y).map_err(|e| match e {
        Error::SingularDesign(m) => Error::SingularDesign(name_column(design, &m)),
        other => other,
    })?;
    let fitted_v = &design.x * &beta;
    let fitted: Vec<f64> = fitted_v.iter().copied().collect();
    let residuals: Vec<f64> = design.y.iter().zip(&fitted).map(|(y, f)| y - f).collect();
    let rss: f64 = residuals.iter().map(|e| e * e).sum();
    let tss = linalg::tss(&design.y);
    let r2 = if tss > 0.0 {
        1.0 - rss / tss
    } else {
        1.0
    };
    Ok(OlsFit {
        design: design.clone(),
        coefficients: beta.iter().copied().collect(),
        residuals,
        fitted,
        r2,
        sigma2: rss / (n - p) as f64,
    })
}

fn name_column(design: &Design, message: &str) -> String {
    let idx = message
        .strip_prefix("column ")
        .and_then(|rest| rest.split_whitespace().next())
        .and_then(|s| s.parse::<usize>().ok());
    match idx.and_then(|i| design.names.get(i)) {
        Some(name) => format!("`{name}` is collinear with earlier columns"),
        None => message.to_string(),
    }
}

/// F-test that the named coefficients are jointly zero.
pub fn joint_zero_ftest(fit: &OlsFit, restricted: &[&str]) -> Result<TestResult> {
    if restricted.is_empty() {
        return Err(Error::Usage("joint F-test needs at least one restricted coefficient".into()));
    }
    let mut drop = Vec::with_capacity(restricted.len());
    for name in restricted {
        let j = fit
            .design
            .index_of(name)
            .ok_or_else(|| Error::Usage(format!("`{name}` is not a model coefficient")))?;
        if !drop.contains(&j) {
            drop.push(j);
        }
    }
    let (n, p) = (fit.n(), fit.p());
    let q = drop.len();
    let rss_f = fit.rss();
    let rss_r = if q == p {
        fit.design.y.iter().map(|y| y * y).sum()
    } else {
        fit_ols_design(&fit.design.drop_columns(&drop))?.rss()
    };
    let df2 = (n - p) as f64;
    let f = ((rss_r - rss_f) / q as f64) / (rss_f / df2);
    let pv = dist::sf(Family::F { d1: q as f64, d2: df2 }, f)?;
    Ok(TestResult::with_p("Joint F-test", f, pv).df(q as f64, Some(df2)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantreg::tests::panel_from;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    /// Normal equations solved by Gauss-Jordan elimination with partial
    /// pivoting; independent of the QR path.
    fn gauss_oracle(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
        let p = x[0].len();
        let mut a = vec![vec![0.0; p + 1]; p];
        for (row, yi) in x.iter().zip(y) {
            for r in 0..p {
                for c in 0..p {
                    a[r][c] += row[r] * row[c];
                }
                a[r][p] += row[r] * yi;
            }
        }
        for col in 0..p {
            let piv = (col..p).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
            a.swap(col, piv);
            for r in 0..p {
                if r != col {
                    let f = a[r][col] / a[col][col];
                    for c in col..=p {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
        (0..p).map(|r| a[r][p] / a[r][r]).collect()
    }

    #[test]
    fn constant_and_exact_responses() {
        let panel = panel_from(&[3.0; 6], &[]);
        let fit = fit_ols(&panel, &ModelSpec::for_panel(&panel)).unwrap();
        assert!((fit.coefficients[0] - 3.0).abs() < 1e-14);
        assert!(fit.residuals.iter().all(|e| e.abs() < 1e-14));

        let x = vec![1.0, 2.0, 4.0, 7.0, 11.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let panel = panel_from(&y, &[("x", x)]);
        let fit = fit_ols(&panel, &ModelSpec::for_panel(&panel)).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn matches_gauss_oracle_and_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 50;
        let cols: Vec<Vec<f64>> = (0..3).map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect()).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| 0.5 + cols[0][i] - 2.0 * cols[1][i] + 0.3 * cols[2][i] + rng.sample::<f64, _>(StandardNormal))
            .collect();
        let panel = panel_from(&y, &[("a", cols[0].clone()), ("b", cols[1].clone()), ("c", cols[2].clone())]);
        let fit = fit_ols(&panel, &ModelSpec::for_panel(&panel)).unwrap();
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![cols[0][i], cols[1][i], cols[2][i], 1.0]).collect();
        let oracle = gauss_oracle(&rows, &y);
        for (a, b) in fit.coefficients.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
        let scale: f64 = y.iter().map(|v| v.abs()).sum();
        for j in 0..fit.p() {
            let dot: f64 = (0..n).map(|i| fit.design.x[(i, j)] * fit.residuals[i]).sum();
            assert!(dot.abs() < 1e-10 * scale);
        }
    }

    #[test]
    fn singular_design_names_column() {
        let x = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let panel = panel_from(&[1.0, 2.0, 2.0, 3.0, 5.0], &[("a", x.clone()), ("b", x)]);
        match fit_ols(&panel, &ModelSpec::for_panel(&panel)) {
            Err(Error::SingularDesign(m)) => assert!(m.contains("`b`"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ftest_matches_hand_formula() {
        // y on (a, b, 1) over six points; restrict a and b.
        let a = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = vec![2.0, -1.0, 0.5, 3.0, -2.0, 1.0];
        let y = vec![0.3, -0.1, 0.4, -0.6, 0.2, 0.1];
        let panel = panel_from(&y, &[("a", a), ("b", b)]);
        let fit = fit_ols(&panel, &ModelSpec::for_panel(&panel)).unwrap();
        let res = joint_zero_ftest(&fit, &["a", "b"]).unwrap();
        let mean = y.iter().sum::<f64>() / 6.0;
        let rss_r: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
        let rss_f = fit.rss();
        let f = ((rss_r - rss_f) / 2.0) / (rss_f / 3.0);
        assert!((res.statistic - f).abs() < 1e-10 * f.max(1.0));
        assert!((0.0..=1.0).contains(&res.p_value.unwrap()));
        assert!(matches!(joint_zero_ftest(&fit, &[]), Err(Error::Usage(_))));
        assert!(matches!(joint_zero_ftest(&fit, &["zz"]), Err(Error::Usage(_))));
    }
}
