use std::f64::consts::PI;

use super::descriptive::moments;
use super::TestResult;
use crate::dist::{self, Family};
use crate::error::{Error, Result};

/// Anderson-Darling critical values for the size-corrected statistic, as
/// `(level %, value)`.
pub const AD_CRITICAL_VALUES: [(f64, f64); 5] = [(15.0, 0.546), (10.0, 0.622), (5.0, 0.746), (2.0, 0.870), (1.0, 1.035)];

fn require(sample: &[f64], min: usize, test: &str) -> Result<()> {
    if sample.len() < min {
        return Err(Error::Usage(format!("{test} needs at least {min} observations, got {}", sample.len())));
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data(format!("{test}: non-finite observation")));
    }
    Ok(())
}

fn zero_variance(test: &str) -> Error {
    Error::Domain(format!("{test}: sample has zero variance"))
}

/// `n/6 (S² + (K - 3)² / 4)`
pub fn jarque_bera_statistic(n: usize, skewness: f64, kurtosis: f64) -> f64 {
    n as f64 / 6.0 * (skewness * skewness + (kurtosis - 3.0).powi(2) / 4.0)
}

pub fn jarque_bera(sample: &[f64]) -> Result<TestResult> {
    require(sample, 8, "Jarque-Bera")?;
    let m = moments(sample)?;
    if m.m2 == 0.0 {
        return Err(zero_variance("Jarque-Bera"));
    }
    let jb = jarque_bera_statistic(m.n, m.skewness(), m.kurtosis());
    let p = dist::sf(Family::ChiSquared { df: 2.0 }, jb)?;
    Ok(TestResult::with_p("Jarque-Bera", jb, p).df(2.0, None))
}

fn poly(coefficients: &[f64], x: f64) -> f64 {
    coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Shapiro-Wilk W with Royston's approximation for the weights and the
/// p-value; valid for 3 ≤ n ≤ 5000.
pub fn shapiro_wilk(sample: &[f64]) -> Result<TestResult> {
    require(sample, 3, "Shapiro-Wilk")?;
    let n = sample.len();
    if n > 5000 {
        return Err(Error::Usage(format!("Shapiro-Wilk supports at most 5000 observations, got {n}")));
    }
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    if x[n - 1] - x[0] <= 1e-12 * x[n - 1].abs().max(x[0].abs()).max(f64::MIN_POSITIVE) {
        return Err(zero_variance("Shapiro-Wilk"));
    }

    const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056];
    const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
    let nf = n as f64;
    let m: Vec<f64> = (1..=n).map(|i| dist::normal_quantile((i as f64 - 0.375) / (nf + 0.25))).collect();
    let mm: f64 = m.iter().map(|v| v * v).sum();
    let u = 1.0 / nf.sqrt();
    let mut a = vec![0.0; n];
    if n == 3 {
        a[0] = -std::f64::consts::FRAC_1_SQRT_2;
        a[2] = std::f64::consts::FRAC_1_SQRT_2;
    } else {
        let an = m[n - 1] / mm.sqrt() + poly(&C1, u);
        if n > 5 {
            let an1 = m[n - 2] / mm.sqrt() + poly(&C2, u);
            let phi = (mm - 2.0 * m[n - 1].powi(2) - 2.0 * m[n - 2].powi(2)) / (1.0 - 2.0 * an * an - 2.0 * an1 * an1);
            for i in 2..n - 2 {
                a[i] = m[i] / phi.sqrt();
            }
            a[1] = -an1;
            a[n - 2] = an1;
        } else {
            let phi = (mm - 2.0 * m[n - 1].powi(2)) / (1.0 - 2.0 * an * an);
            for i in 1..n - 1 {
                a[i] = m[i] / phi.sqrt();
            }
        }
        a[0] = -an;
        a[n - 1] = an;
    }

    let mean = x.iter().sum::<f64>() / nf;
    let ss: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    let num: f64 = a.iter().zip(&x).map(|(a, x)| a * x).sum();
    let w = (num * num / ss).min(1.0);

    let p = if n == 3 {
        (6.0 / PI * (w.sqrt().asin() - 0.75f64.sqrt().asin())).max(0.0)
    } else if n <= 11 {
        let gamma = -2.273 + 0.459 * nf;
        let ln1w = (1.0 - w).ln();
        if ln1w >= gamma {
            0.0
        } else {
            let z = -(gamma - ln1w).ln();
            let mu = poly(&[0.5440, -0.39978, 0.025054, -6.714e-4], nf);
            let sigma = poly(&[1.3822, -0.77857, 0.062767, -0.0020322], nf).exp();
            dist::normal_sf((z - mu) / sigma)
        }
    } else {
        let ln_n = nf.ln();
        let mu = poly(&[-1.5861, -0.31082, -0.083751, 0.0038915], ln_n);
        let sigma = poly(&[-0.4803, -0.082676, 0.0030302], ln_n).exp();
        dist::normal_sf(((1.0 - w).ln() - mu) / sigma)
    };
    Ok(TestResult::with_p("Shapiro-Wilk", w, p))
}

/// D'Agostino-Pearson omnibus `K² = Z(√b1)² + Z(b2)²`, chi-square(2).
pub fn dagostino_k2(sample: &[f64]) -> Result<TestResult> {
    require(sample, 20, "D'Agostino K²")?;
    let m = moments(sample)?;
    if m.m2 == 0.0 {
        return Err(zero_variance("D'Agostino K²"));
    }
    let n = m.n as f64;

    let b1 = m.skewness();
    let y = b1 * ((n + 1.0) * (n + 3.0) / (6.0 * (n - 2.0))).sqrt();
    let beta2 = 3.0 * (n * n + 27.0 * n - 70.0) * (n + 1.0) * (n + 3.0)
        / ((n - 2.0) * (n + 5.0) * (n + 7.0) * (n + 9.0));
    let w2 = -1.0 + (2.0 * (beta2 - 1.0)).sqrt();
    let delta = 1.0 / (0.5 * w2.ln()).sqrt();
    let alpha = (2.0 / (w2 - 1.0)).sqrt();
    let z1 = delta * (y / alpha).asinh();

    let b2 = m.kurtosis();
    let e = 3.0 * (n - 1.0) / (n + 1.0);
    let var_b2 = 24.0 * n * (n - 2.0) * (n - 3.0) / ((n + 1.0).powi(2) * (n + 3.0) * (n + 5.0));
    let xk = (b2 - e) / var_b2.sqrt();
    let sqrt_beta1 = 6.0 * (n * n - 5.0 * n + 2.0) / ((n + 7.0) * (n + 9.0))
        * (6.0 * (n + 3.0) * (n + 5.0) / (n * (n - 2.0) * (n - 3.0))).sqrt();
    let a = 6.0 + 8.0 / sqrt_beta1 * (2.0 / sqrt_beta1 + (1.0 + 4.0 / (sqrt_beta1 * sqrt_beta1)).sqrt());
    let denom = 1.0 + xk * (2.0 / (a - 4.0)).sqrt();
    let term2 = if denom == 0.0 {
        return Err(Error::Domain("D'Agostino K²: kurtosis transform is undefined".into()));
    } else {
        denom.signum() * ((1.0 - 2.0 / a) / denom.abs()).cbrt()
    };
    let z2 = (1.0 - 2.0 / (9.0 * a) - term2) / (2.0 / (9.0 * a)).sqrt();

    let k2 = z1 * z1 + z2 * z2;
    let p = dist::sf(Family::ChiSquared { df: 2.0 }, k2)?;
    Ok(TestResult::with_p("D'Agostino K²", k2, p).df(2.0, None))
}

/// Anderson-Darling against a normal with estimated mean and variance. The
/// reported statistic carries the small-sample factor
/// `1 + 0.75/n + 2.25/n²` and is judged against [`AD_CRITICAL_VALUES`].
pub fn anderson_darling(sample: &[f64]) -> Result<TestResult> {
    require(sample, 8, "Anderson-Darling")?;
    let m = moments(sample)?;
    if m.m2 == 0.0 {
        return Err(zero_variance("Anderson-Darling"));
    }
    let n = m.n;
    let nf = n as f64;
    let sd = (m.m2 * nf / (nf - 1.0)).sqrt();
    let mut z: Vec<f64> = sample.iter().map(|v| (v - m.mean) / sd).collect();
    z.sort_by(f64::total_cmp);
    let tiny = f64::MIN_POSITIVE;
    let s: f64 = (0..n)
        .map(|i| {
            let lo = dist::normal_cdf(z[i]).max(tiny).ln();
            let hi = dist::normal_sf(z[n - 1 - i]).max(tiny).ln();
            (2 * i + 1) as f64 * (lo + hi)
        })
        .sum();
    let a2 = -nf - s / nf;
    let corrected = a2 * (1.0 + 0.75 / nf + 2.25 / (nf * nf));
    Ok(TestResult::with_critical("Anderson-Darling", corrected, &AD_CRITICAL_VALUES))
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values from an independent implementation (SciPy 1.15).
    const SAMPLE: [f64; 22] = [
        2.1, 3.4, 1.9, 5.6, 4.4, 3.3, 2.8, 6.1, 4.0, 3.7, 2.2, 5.0, 4.8, 3.1, 2.6, 7.9, 3.9, 4.3, 1.5, 3.0, 5.2, 2.9,
    ];

    #[test]
    fn jb_formula_and_reference() {
        assert!((jarque_bera_statistic(600, 0.5, 4.0) - 50.0).abs() < 1e-12);
        let r = jarque_bera(&SAMPLE).unwrap();
        assert!((r.statistic - 2.554046211020713).abs() < 1e-10);
        assert!((r.p_value.unwrap() - 0.278866221353708).abs() < 1e-10);
        assert!(matches!(jarque_bera(&[1.0; 7]), Err(Error::Usage(_))));
        assert!(matches!(jarque_bera(&[1.0; 9]), Err(Error::Domain(_))));
    }

    #[test]
    fn shapiro_wilk_three_points_closed_form() {
        // a = (-1/√2, 0, 1/√2): W = 4.5 / (42/9)
        let r = shapiro_wilk(&[1.0, 2.0, 4.0]).unwrap();
        let w = 4.5 / (42.0 / 9.0);
        assert!((r.statistic - w).abs() < 1e-12);
        let p = 6.0 / PI * (w.sqrt().asin() - PI / 3.0);
        assert!((r.p_value.unwrap() - p).abs() < 1e-12);
    }

    #[test]
    fn shapiro_wilk_reference() {
        // the reference runs in single precision
        for (len, w, p) in [
            (22, 0.9558484036363136, 0.41016838957773605),
            (8, 0.9256849412868347, 0.4776629302815278),
            (5, 0.9320849391953863, 0.6106559022604845),
        ] {
            let r = shapiro_wilk(&SAMPLE[..len]).unwrap();
            assert!((r.statistic - w).abs() < 2e-6, "n={len}: {}", r.statistic);
            assert!((r.p_value.unwrap() - p).abs() < 2e-5, "n={len}: {:?}", r.p_value);
        }
        assert!(matches!(shapiro_wilk(&[2.0; 10]), Err(Error::Domain(_))));
        assert!(matches!(shapiro_wilk(&[1.0, 2.0]), Err(Error::Usage(_))));
    }

    #[test]
    fn k2_reference() {
        let r = dagostino_k2(&SAMPLE).unwrap();
        assert!((r.statistic - 4.273218588777416).abs() < 1e-9);
        assert!((r.p_value.unwrap() - 0.11805445305534458).abs() < 1e-9);
        assert!(matches!(dagostino_k2(&SAMPLE[..19]), Err(Error::Usage(_))));
    }

    #[test]
    fn ad_reference() {
        let r = anderson_darling(&SAMPLE).unwrap();
        assert!((r.statistic - 0.28624309153975475).abs() < 1e-9);
        assert!(r.p_value.is_none());
        assert_eq!(r.critical_values.len(), 5);
        assert!(!r.rejects());
    }

    #[test]
    fn gross_outlier_is_rejected_everywhere() {
        let mut v: Vec<f64> = (0..40).map(|i| (i * 37 % 41) as f64 / 41.0 - 0.5).collect();
        v[7] = 25.0;
        for r in [jarque_bera(&v), shapiro_wilk(&v), dagostino_k2(&v), anderson_darling(&v)] {
            assert!(r.unwrap().rejects());
        }
    }
}
