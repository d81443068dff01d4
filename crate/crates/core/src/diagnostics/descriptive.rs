use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg;

/// Central moments with `n` denominators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub n: usize,
    pub mean: f64,
    pub m2: f64,
    pub m3: f64,
    pub m4: f64,
}

impl Moments {
    /// `g1 = m3 / m2^1.5`
    pub fn skewness(&self) -> f64 {
        self.m3 / self.m2.powf(1.5)
    }

    /// Pearson kurtosis `m4 / m2²` (3 for a normal, not excess).
    pub fn kurtosis(&self) -> f64 {
        self.m4 / (self.m2 * self.m2)
    }
}

pub fn moments(sample: &[f64]) -> Result<Moments> {
    if sample.is_empty() {
        return Err(Error::Usage("empty sample".into()));
    }
    let n = sample.len();
    let mean = linalg::mean(sample);
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for x in sample {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let nf = n as f64;
    Ok(Moments {
        n,
        mean,
        m2: m2 / nf,
        m3: m3 / nf,
        m4: m4 / nf,
    })
}

/// Row of the descriptive-statistics table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Descriptive {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub max: f64,
    pub min: f64,
    /// Sample standard deviation (`n - 1` denominator).
    pub std_dev: f64,
    pub skewness: f64,
    /// Pearson kurtosis, same convention as Jarque-Bera's `K`.
    pub kurtosis: f64,
}

pub fn describe(sample: &[f64]) -> Result<Descriptive> {
    if sample.len() < 2 {
        return Err(Error::Usage(format!("describe needs at least 2 values, got {}", sample.len())));
    }
    let m = moments(sample)?;
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let (skewness, kurtosis) = if m.m2 > 0.0 {
        (m.skewness(), m.kurtosis())
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(Descriptive {
        n,
        mean: m.mean,
        median,
        max: sorted[n - 1],
        min: sorted[0],
        std_dev: (m.m2 * n as f64 / (n as f64 - 1.0)).sqrt(),
        skewness,
        kurtosis,
    })
}

/// Variance inflation factors `1 / (1 - R²_j)`, regressing each column on the
/// others plus an intercept.
pub fn vif(columns: &[(String, Vec<f64>)]) -> Result<Vec<(String, f64)>> {
    if columns.len() < 2 {
        return Err(Error::Usage("VIF needs at least two columns".into()));
    }
    let n = columns[0].1.len();
    if columns.iter().any(|(_, c)| c.len() != n) {
        return Err(Error::Data("VIF columns differ in length".into()));
    }
    columns
        .iter()
        .enumerate()
        .map(|(j, (name, target))| {
            let infinite = || Error::Data(format!("infinite VIF: `{name}` is perfectly collinear with the other columns"));
            let others: Vec<&[f64]> = columns
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != j)
                .map(|(_, (_, c))| c.as_slice())
                .collect();
            let x = linalg::design_from_columns(n, &others, true);
            let y = DVector::from_column_slice(target);
            let beta = linalg::least_squares(&x, &y).map_err(|_| infinite())?;
            let fitted = &x * beta;
            let rss: f64 = target.iter().zip(fitted.iter()).map(|(a, b)| (a - b).powi(2)).sum();
            let tss = linalg::tss(target);
            if tss == 0.0 {
                return Err(Error::Data(format!("VIF undefined: `{name}` is constant")));
            }
            let one_minus_r2 = rss / tss;
            if one_minus_r2 <= 1e-12 {
                return Err(infinite());
            }
            Ok((name.clone(), 1.0 / one_minus_r2))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_describe() {
        let d = describe(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((d.mean, d.median, d.std_dev), (2.0, 2.0, 1.0));
        assert_eq!(d.skewness, 0.0);
        let d = describe(&[-3.0, -1.0, 0.0, 1.0, 3.0]).unwrap();
        assert_eq!(d.skewness, 0.0);
        assert!(matches!(describe(&[]), Err(Error::Usage(_))));
    }

    #[test]
    fn skewed_four_points() {
        // deviations (-1/4, -1/4, -1/4, 3/4): m2 = 3/16, m3 = 3/32, m4 = 21/256
        let d = describe(&[0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(d.mean, 0.25);
        assert_eq!(d.median, 0.0);
        assert_eq!((d.min, d.max), (0.0, 1.0));
        assert!((d.std_dev - 0.5).abs() < 1e-15);
        assert!((d.skewness - 2.0 / 3f64.sqrt()).abs() < 1e-12);
        assert!((d.kurtosis - 7.0 / 3.0).abs() < 1e-12);
    }

    fn col(name: &str, v: Vec<f64>) -> (String, Vec<f64>) {
        (name.to_string(), v)
    }

    #[test]
    fn orthogonal_columns_have_unit_vif() {
        let a = vec![1.0, -1.0, 1.0, -1.0];
        let b = vec![1.0, 1.0, -1.0, -1.0];
        for (_, v) in vif(&[col("a", a), col("b", b)]).unwrap() {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn duplicate_column_is_infinite() {
        let a = vec![1.0, 3.0, 2.0, 5.0, 4.0];
        match vif(&[col("a", a.clone()), col("b", vec![0.0, 1.0, 0.0, 1.0, 1.0]), col("c", a)]) {
            Err(Error::Data(m)) => assert!(m.contains("infinite") && m.contains("`a`")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn correlation_point_eight() {
        // centred orthogonal u, v with equal norms; b = 0.8u + 0.6v has corr 0.8 with u
        let u = [1.0, -1.0, 1.0, -1.0];
        let v = [1.0, 1.0, -1.0, -1.0];
        let b: Vec<f64> = u.iter().zip(&v).map(|(u, v)| 0.8 * u + 0.6 * v).collect();
        for (_, x) in vif(&[col("u", u.to_vec()), col("b", b)]).unwrap() {
            assert!((x - 1.0 / (1.0 - 0.64)).abs() < 1e-10, "{x}");
        }
    }
}
