use nalgebra::DMatrix;

use super::{TestResult, Verdict};
use crate::dist::{self, Family};
use crate::error::{Error, Result};
use crate::linalg;
use crate::quantreg::{fit_ols_design, Design, OlsFit};

/// CUSUM critical values for `sup |W_t|`, as `(level %, value)`.
pub const CUSUM_CRITICAL_VALUES: [(f64, f64); 3] = [(1.0, 1.63), (5.0, 1.36), (10.0, 1.22)];

/// Durbin-Watson values inside this band are read as no first-order
/// autocorrelation. A rule of thumb, not a bounds test.
pub const DW_BAND: (f64, f64) = (1.5, 2.5);

fn centered_r2(y: &[f64], residuals: &[f64]) -> f64 {
    let tss = linalg::tss(y);
    if tss == 0.0 {
        return 0.0;
    }
    let rss: f64 = residuals.iter().map(|e| e * e).sum();
    (1.0 - rss / tss).max(0.0)
}

/// Design plus `extra` columns, inserted ahead of the intercept so that it
/// stays last.
fn auxiliary(design: &Design, extra: &[Vec<f64>], y: Vec<f64>) -> Result<OlsFit> {
    let (n, p) = (design.n(), design.p());
    let split = if design.intercept { p - 1 } else { p };
    let mut x = DMatrix::zeros(n, p + extra.len());
    x.columns_mut(0, split).copy_from(&design.x.columns(0, split));
    let mut names: Vec<String> = design.names[..split].to_vec();
    for (k, col) in extra.iter().enumerate() {
        x.column_mut(split + k).copy_from_slice(col);
        names.push(format!("aux{k}"));
    }
    if design.intercept {
        x.column_mut(p + extra.len() - 1).fill(1.0);
        names.push(design.names[p - 1].clone());
    }
    let aux = Design::new(names, x, y, design.intercept)?;
    fit_ols_design(&aux).map_err(|e| match e {
        Error::SingularDesign(m) => Error::Data(format!("singular auxiliary regression: {m}")),
        other => other,
    })
}

/// Breusch-Pagan LM test (`n R²` of squared residuals on the design) with
/// its F form.
pub fn breusch_pagan(fit: &OlsFit) -> Result<TestResult> {
    let (n, p) = (fit.n(), fit.p());
    if p < 2 {
        return Err(Error::Usage("Breusch-Pagan needs at least one regressor besides the intercept".into()));
    }
    if n <= p {
        return Err(Error::Usage(format!("Breusch-Pagan needs n > p, got n = {n}, p = {p}")));
    }
    let df1 = (p - 1) as f64;
    let df2 = (n - p) as f64;
    let e2: Vec<f64> = fit.residuals.iter().map(|e| e * e).collect();
    let (lm, f) = if e2.iter().all(|v| *v == 0.0) {
        (0.0, 0.0)
    } else {
        let aux = auxiliary(&fit.design, &[], e2.clone())?;
        let r2 = centered_r2(&e2, &aux.residuals);
        let f = if r2 < 1.0 {
            (r2 / df1) / ((1.0 - r2) / df2)
        } else {
            f64::INFINITY
        };
        (n as f64 * r2, f)
    };
    let p_lm = dist::sf(Family::ChiSquared { df: df1 }, lm)?;
    let p_f = dist::sf(Family::F { d1: df1, d2: df2 }, f)?;
    Ok(TestResult::with_p("Breusch-Pagan", lm, p_lm)
        .df(df1, None)
        .f_variant(f, p_f))
}

/// `Σ(e_t - e_{t-1})² / Σe_t²`. Carries no p-value; the verdict uses
/// [`DW_BAND`].
pub fn durbin_watson(residuals: &[f64]) -> Result<TestResult> {
    if residuals.len() < 3 {
        return Err(Error::Usage(format!("Durbin-Watson needs at least 3 residuals, got {}", residuals.len())));
    }
    let ss: f64 = residuals.iter().map(|e| e * e).sum();
    if ss == 0.0 {
        return Err(Error::Domain("Durbin-Watson: residual sum of squares is zero".into()));
    }
    let num: f64 = residuals.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    let dw = num / ss;
    Ok(TestResult {
        name: "Durbin-Watson".into(),
        statistic: dw,
        p_value: None,
        critical_values: Vec::new(),
        df: None,
        lags: None,
        f_statistic: None,
        f_p_value: None,
        verdict: Verdict::from_reject(dw < DW_BAND.0 || dw > DW_BAND.1),
    })
}

/// Breusch-Godfrey LM test for serial correlation up to `lags`, pre-sample
/// residual lags set to zero. Reports `n R²` against chi-square(lags) and the
/// F form against F(lags, n - p - lags).
pub fn breusch_godfrey(fit: &OlsFit, lags: usize) -> Result<TestResult> {
    let (n, p) = (fit.n(), fit.p());
    if lags == 0 {
        return Err(Error::Usage("Breusch-Godfrey needs lags >= 1".into()));
    }
    if lags >= n || n <= p + lags {
        return Err(Error::Usage(format!(
            "Breusch-Godfrey with {lags} lags needs n > p + lags, got n = {n}, p = {p}"
        )));
    }
    let e = &fit.residuals;
    let lagged: Vec<Vec<f64>> = (1..=lags)
        .map(|l| (0..n).map(|t| if t >= l { e[t - l] } else { 0.0 }).collect())
        .collect();
    let rss_r: f64 = e.iter().map(|v| v * v).sum();
    let df2 = (n - p - lags) as f64;
    let (lm, f) = if rss_r == 0.0 {
        (0.0, 0.0)
    } else {
        let aux = auxiliary(&fit.design, &lagged, e.clone())?;
        let rss_u = aux.rss();
        let r2 = centered_r2(e, &aux.residuals);
        let f = if rss_u > 0.0 {
            ((rss_r - rss_u) / lags as f64) / (rss_u / df2)
        } else {
            f64::INFINITY
        };
        (n as f64 * r2, f.max(0.0))
    };
    let l = lags as f64;
    let p_lm = dist::sf(Family::ChiSquared { df: l }, lm)?;
    let p_f = dist::sf(Family::F { d1: l, d2: df2 }, f)?;
    Ok(TestResult::with_p("Breusch-Godfrey", lm, p_lm)
        .df(l, None)
        .lags(lags)
        .f_variant(f, p_f))
}

/// Ramsey RESET: F-test on `ŷ²` and `ŷ³` added to the design. Fitted values
/// are scaled by `max |ŷ|` first; the test is invariant to that.
pub fn reset_test(fit: &OlsFit) -> Result<TestResult> {
    let (n, p) = (fit.n(), fit.p());
    if n <= p + 2 {
        return Err(Error::Usage(format!("RESET needs n > p + 2, got n = {n}, p = {p}")));
    }
    let scale = fit.fitted.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let (lo, hi) = fit
        .fitted
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    if scale == 0.0 || hi - lo <= 1e-12 * scale {
        return Err(Error::Data("RESET: fitted values are constant".into()));
    }
    let u: Vec<f64> = fit.fitted.iter().map(|v| v / scale).collect();
    let powers = vec![u.iter().map(|v| v * v).collect(), u.iter().map(|v| v * v * v).collect()];
    let aux = auxiliary(&fit.design, &powers, fit.design.y.clone())?;
    let (rss_r, rss_u) = (fit.rss(), aux.rss());
    let df2 = (n - p - 2) as f64;
    let f = if rss_u > 0.0 {
        (((rss_r - rss_u) / 2.0) / (rss_u / df2)).max(0.0)
    } else if rss_r > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    let pv = dist::sf(Family::F { d1: 2.0, d2: df2 }, f)?;
    Ok(TestResult::with_p("RESET", f, pv).df(2.0, Some(df2)))
}

/// `P(sup |B| > a)` for a Brownian bridge `B`.
pub fn cusum_p_value(a: f64) -> f64 {
    if a <= 0.0 {
        return 1.0;
    }
    if a < 0.2 {
        // The alternating series cancels badly this close to zero; the
        // dual theta series for P(sup |B| <= a) converges fast here instead.
        let c = (2.0 * std::f64::consts::PI).sqrt() / a;
        let inside: f64 = (1..=20)
            .map(|k| {
                let m = (2 * k - 1) as f64;
                (-m * m * std::f64::consts::PI.powi(2) / (8.0 * a * a)).exp()
            })
            .sum::<f64>()
            * c;
        return (1.0 - inside).clamp(0.0, 1.0);
    }
    let s: f64 = (1..=100)
        .map(|k| {
            let k = k as f64;
            let sign = if k as i64 % 2 == 1 { 1.0 } else { -1.0 };
            sign * (-2.0 * k * k * a * a).exp()
        })
        .sum();
    (2.0 * s).clamp(0.0, 1.0)
}

/// OLS-CUSUM: `sup_t |Σ_{i≤t} e_i| / (σ̂ √n)` with `σ̂² = RSS / (n - p)`.
/// Decided by the 5% critical value; the p-value is reported too.
pub fn cusum_ols(fit: &OlsFit) -> Result<TestResult> {
    let (n, p) = (fit.n(), fit.p());
    if n <= p {
        return Err(Error::Usage(format!("CUSUM needs n > p, got n = {n}, p = {p}")));
    }
    let sigma = (fit.rss() / (n - p) as f64).sqrt();
    if sigma == 0.0 {
        return Err(Error::Domain("CUSUM: residual standard deviation is zero".into()));
    }
    let denom = sigma * (n as f64).sqrt();
    let mut cum = 0.0;
    let mut sup = 0.0f64;
    for e in &fit.residuals {
        cum += e;
        sup = sup.max((cum / denom).abs());
    }
    let mut r = TestResult::with_critical("OLS-CUSUM", sup, &CUSUM_CRITICAL_VALUES);
    r.p_value = Some(cusum_p_value(sup));
    Ok(r)
}
