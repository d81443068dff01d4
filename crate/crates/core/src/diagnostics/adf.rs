use nalgebra::{DMatrix, DVector};

use super::TestResult;
use crate::dist;
use crate::error::{Error, Result};
use crate::linalg;

// MacKinnon (1994) response surface for the p-value, constant, one variable.
const TAU_MAX: f64 = 2.74;
const TAU_MIN: f64 = -18.83;
const TAU_STAR: f64 = -1.61;
const SMALL_P: [f64; 3] = [2.1659, 1.4412, 3.8269e-2];
const LARGE_P: [f64; 4] = [1.7339, 0.93202, -0.12745, -0.010368];

// MacKinnon (2010) finite-sample critical values, constant case:
// b0 + b1/T + b2/T² + b3/T³.
const CRIT: [(f64, [f64; 4]); 3] = [
    (1.0, [-3.43035, -6.5393, -16.786, -79.433]),
    (5.0, [-2.86154, -2.8903, -4.234, -40.040]),
    (10.0, [-2.56677, -1.5384, -2.809, 0.0]),
];

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, v| acc * x + v)
}

/// Approximate p-value of the constant-case Dickey-Fuller t statistic.
pub fn adf_p_value(stat: f64) -> f64 {
    if stat > TAU_MAX {
        1.0
    } else if stat < TAU_MIN {
        0.0
    } else if stat <= TAU_STAR {
        dist::normal_cdf(poly(&SMALL_P, stat))
    } else {
        dist::normal_cdf(poly(&LARGE_P, stat))
    }
}

/// Critical value at `level` (1, 5 or 10 percent) for `nobs` regression
/// observations.
pub fn adf_critical_value(level: f64, nobs: usize) -> Option<f64> {
    let t = nobs as f64;
    CRIT.iter()
        .find(|(l, _)| *l == level)
        .map(|(_, b)| b[0] + b[1] / t + b[2] / (t * t) + b[3] / (t * t * t))
}

/// `floor(12 (n/100)^¼)`, lowered if needed so the longest candidate
/// regression keeps a few residual degrees of freedom.
pub fn default_max_lag(n: usize) -> usize {
    let rule = (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize;
    rule.min(n.saturating_sub(8) / 2)
}

/// Regression observations left over after `lag` differences and its
/// parameter count.
fn shape(n: usize, start: usize, lag: usize) -> (usize, usize) {
    (n - 1 - start, lag + 2)
}

/// Design for `Δy_t` on `[y_{t-1}, Δy_{t-1..t-lag}, 1]` over `t ≥ start`.
fn regression(y: &[f64], dy: &[f64], start: usize, lag: usize) -> (DMatrix<f64>, DVector<f64>) {
    let rows = dy.len() - start;
    let x = DMatrix::from_fn(rows, lag + 2, |r, c| {
        let t = start + r;
        match c {
            0 => y[t],
            c if c <= lag => dy[t - c],
            _ => 1.0,
        }
    });
    (x, DVector::from_fn(rows, |r, _| dy[start + r]))
}

fn ols(x: &DMatrix<f64>, target: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let beta = linalg::least_squares(x, target).map_err(|e| match e {
        Error::SingularDesign(_) => Error::Data("ADF regression is degenerate (constant series?)".into()),
        other => other,
    })?;
    let resid = target - x * &beta;
    Ok((beta, resid.norm_squared()))
}

/// Augmented Dickey-Fuller test with a constant. The lag order is chosen by
/// AIC over `0..=max_lag` on a common sample, then the chosen model is refit
/// on all available observations. The statistic is the t-ratio on `y_{t-1}`.
pub fn adf_test(series: &[f64], max_lag: Option<usize>) -> Result<TestResult> {
    let n = series.len();
    if n < 20 {
        return Err(Error::Usage(format!("ADF needs at least 20 observations, got {n}")));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("ADF: non-finite observation".into()));
    }
    let max_lag = max_lag.unwrap_or_else(|| default_max_lag(n));
    let (obs, params) = shape(n, max_lag, max_lag);
    if n <= max_lag + 1 || obs < params + 5 {
        return Err(Error::Data(format!("series of {n} observations is too short for max_lag {max_lag}")));
    }
    let dy: Vec<f64> = series.windows(2).map(|w| w[1] - w[0]).collect();

    let mut best: Option<(f64, usize)> = None;
    for lag in 0..=max_lag {
        let (x, target) = regression(series, &dy, max_lag, lag);
        let (_, rss) = ols(&x, &target)?;
        let m = target.len() as f64;
        let aic = m * (rss / m).ln() + 2.0 * (lag + 2) as f64;
        if best.is_none_or(|(b, _)| aic < b) {
            best = Some((aic, lag));
        }
    }
    let lag = best.map(|(_, l)| l).unwrap_or(0);

    let (x, target) = regression(series, &dy, lag, lag);
    let (beta, rss) = ols(&x, &target)?;
    let (m, k) = shape(n, lag, lag);
    let sigma2 = rss / (m - k) as f64;
    let xtx_inv = (x.transpose() * &x)
        .try_inverse()
        .ok_or_else(|| Error::Data("ADF regression is degenerate".into()))?;
    let se = (sigma2 * xtx_inv[(0, 0)]).sqrt();
    if se == 0.0 || !se.is_finite() {
        return Err(Error::Data("ADF regression is degenerate (perfect fit)".into()));
    }
    let stat = beta[0] / se;
    Ok(TestResult::with_p("ADF", stat, adf_p_value(stat)).lags(lag))
}
