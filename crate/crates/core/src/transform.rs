//! Level series to regression variables: excess log returns, log changes,
//! second log differences, spreads and quantile normalization.

use crate::error::{Error, Result};
use crate::ingest::{RawPanel, RunConfig, TimeSeries, TransformTag, YearMonth};

/// Target excess returns plus the aligned, transformed factor columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPanel {
    pub months: Vec<YearMonth>,
    pub target_name: String,
    pub target: Vec<f64>,
    pub factors: Vec<(String, Vec<f64>)>,
    /// Monthly risk-free rate as a decimal.
    pub riskfree: Vec<f64>,
}

impl FactorPanel {
    pub fn new(
        months: Vec<YearMonth>,
        target_name: impl Into<String>,
        target: Vec<f64>,
        factors: Vec<(String, Vec<f64>)>,
        riskfree: Vec<f64>,
    ) -> Result<Self> {
        let n = months.len();
        if target.len() != n || riskfree.len() != n || factors.iter().any(|(_, c)| c.len() != n) {
            return Err(Error::Data("factor panel columns differ in length".into()));
        }
        let all = target.iter().chain(&riskfree).chain(factors.iter().flat_map(|(_, c)| c));
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("factor panel contains non-finite values".into()));
        }
        for (i, (name, _)) in factors.iter().enumerate() {
            if factors[..i].iter().any(|(other, _)| other == name) {
                return Err(Error::Data(format!("duplicate factor column `{name}`")));
            }
        }
        Ok(Self {
            months,
            target_name: target_name.into(),
            target,
            factors,
            riskfree,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.months.len()
    }

    pub fn factor_names(&self) -> Vec<&str> {
        self.factors.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.factors
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, c)| c.as_slice())
    }

    /// Row subset, preserving order. Used for pre/post splits.
    pub fn rows(&self, idx: &[usize]) -> Self {
        let pick = |v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
        Self {
            months: idx.iter().map(|&i| self.months[i]).collect(),
            target_name: self.target_name.clone(),
            target: pick(&self.target),
            factors: self.factors.iter().map(|(n, c)| (n.clone(), pick(c))).collect(),
            riskfree: pick(&self.riskfree),
        }
    }
}

fn check_positive(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| v.is_nan() || *v <= 0.0) {
        Some(i) => Err(Error::Domain(format!(
            "{what}: value {} at position {i} is not strictly positive",
            values[i]
        ))),
        None => Ok(()),
    }
}

fn aligned_values(a: &TimeSeries, b: &TimeSeries) -> Result<(Vec<f64>, Vec<f64>)> {
    if !a.months().eq(b.months()) {
        return Err(Error::Data(format!("`{}` and `{}` are not aligned", a.name(), b.name())));
    }
    Ok((a.values()?, b.values()?))
}

/// Annualized percent yield to a monthly decimal rate.
pub fn monthly_riskfree(annual_pct: f64) -> f64 {
    annual_pct / 100.0 / 12.0
}

/// `ER(t) = ln(p_t/p_{t-1}) - r_f(t)`, with `r_f` the annual percent yield
/// converted to a monthly decimal. Output is one shorter than the input.
pub fn excess_log_return(prices: &TimeSeries, riskfree_annual_pct: &TimeSeries) -> Result<Vec<f64>> {
    let (p, rf) = aligned_values(prices, riskfree_annual_pct)?;
    excess_log_return_values(&p, &rf)
}

pub fn excess_log_return_values(prices: &[f64], riskfree_annual_pct: &[f64]) -> Result<Vec<f64>> {
    if prices.len() < 2 {
        return Err(Error::Data("excess return needs at least 2 prices".into()));
    }
    if prices.len() != riskfree_annual_pct.len() {
        return Err(Error::Data("prices and risk-free series differ in length".into()));
    }
    check_positive(prices, "excess_log_return")?;
    Ok(prices
        .windows(2)
        .zip(&riskfree_annual_pct[1..])
        .map(|(w, rf)| (w[1] / w[0]).ln() - monthly_riskfree(*rf))
        .collect())
}

/// `x(t) = ln(v_t / v_{t-1})`.
pub fn log_change(series: &TimeSeries) -> Result<Vec<f64>> {
    log_change_values(&series.values()?)
}

pub fn log_change_values(values: &[f64]) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(Error::Data("log change needs at least 2 observations".into()));
    }
    check_positive(values, "log_change")?;
    Ok(values.windows(2).map(|w| (w[1] / w[0]).ln()).collect())
}

/// `d(t) = ln(x_t/x_{t-1}) - ln(x_{t-1}/x_{t-2})`; two shorter than the input.
pub fn second_log_diff(series: &TimeSeries) -> Result<Vec<f64>> {
    second_log_diff_values(&series.values()?)
}

pub fn second_log_diff_values(values: &[f64]) -> Result<Vec<f64>> {
    if values.len() < 3 {
        return Err(Error::Data("second log difference needs at least 3 observations".into()));
    }
    check_positive(values, "second_log_diff")?;
    let first = log_change_values(values)?;
    Ok(first.windows(2).map(|w| w[1] - w[0]).collect())
}

pub fn difference_values(values: &[f64]) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(Error::Data("difference needs at least 2 observations".into()));
    }
    Ok(values.windows(2).map(|w| w[1] - w[0]).collect())
}

/// Elementwise `long - short` in percentage points. Missing in either leg
/// stays missing.
pub fn spread(long: &TimeSeries, short: &TimeSeries) -> Result<TimeSeries> {
    if !long.months().eq(short.months()) {
        return Err(Error::Data(format!(
            "spread legs `{}` and `{}` cover different months",
            long.name(),
            short.name()
        )));
    }
    let obs = long
        .observations()
        .iter()
        .zip(short.observations())
        .map(|((m, l), (_, s))| (*m, l.zip(*s).map(|(l, s)| l - s)))
        .collect();
    TimeSeries::new(format!("{}-{}", long.name(), short.name()), obs)
}

/// Rank-based quantile normalization. The reference distribution is the
/// per-rank mean of the sorted columns; every value is replaced by the
/// reference value at its within-column rank, and tied values share the mean
/// of the reference values across their tied ranks.
pub fn quantile_normalize(panel: &[(String, Vec<f64>)]) -> Result<Vec<(String, Vec<f64>)>> {
    let n = panel.first().map(|(_, c)| c.len()).unwrap_or(0);
    if panel.iter().any(|(_, c)| c.len() != n) {
        return Err(Error::Data("quantile_normalize: ragged columns".into()));
    }
    if n < 2 {
        return Err(Error::Data("quantile_normalize: need at least 2 rows".into()));
    }
    if panel.iter().flat_map(|(_, c)| c).any(|v| !v.is_finite()) {
        return Err(Error::Data("quantile_normalize: non-finite value".into()));
    }
    let orders: Vec<Vec<usize>> = panel
        .iter()
        .map(|(_, c)| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| c[a].total_cmp(&c[b]).then(a.cmp(&b)));
            idx
        })
        .collect();
    let k = panel.len() as f64;
    let reference: Vec<f64> = (0..n)
        .map(|rank| {
            panel
                .iter()
                .zip(&orders)
                .map(|((_, c), o)| c[o[rank]])
                .sum::<f64>()
                / k
        })
        .collect();

    Ok(panel
        .iter()
        .zip(&orders)
        .map(|((name, col), order)| {
            let mut out = vec![0.0; n];
            let mut start = 0;
            while start < n {
                let mut end = start + 1;
                while end < n && col[order[end]] == col[order[start]] {
                    end += 1;
                }
                let value = if end - start == 1 {
                    reference[start]
                } else {
                    reference[start..end].iter().sum::<f64>() / (end - start) as f64
                };
                for &i in &order[start..end] {
                    out[i] = value;
                }
                start = end;
            }
            (name.clone(), out)
        })
        .collect())
}

fn apply_tag(tag: TransformTag, values: &[f64], riskfree: &[f64]) -> Result<Vec<f64>> {
    match tag {
        TransformTag::ExcessLogReturn => excess_log_return_values(values, riskfree),
        TransformTag::LogChange => log_change_values(values),
        TransformTag::SecondLogDiff => second_log_diff_values(values),
        TransformTag::Level => Ok(values.to_vec()),
        TransformTag::Difference => difference_values(values),
    }
}

/// Applies each factor's transform tag, trims all columns to the common
/// post-transform length, and attaches the target excess return.
pub fn build_factor_panel(raw: &RawPanel, config: &RunConfig) -> Result<FactorPanel> {
    if config.factors.is_empty() {
        return Err(Error::Config("no factors configured".into()));
    }
    let rf = raw.column(&config.riskfree)?;
    let lag = config
        .factors
        .iter()
        .map(|f| f.transform.lag())
        .max()
        .unwrap_or(0)
        .max(1);
    let n = raw.n_rows();
    if n <= lag + 1 {
        return Err(Error::Data(format!("raw panel has {n} rows; transforms need more than {}", lag + 1)));
    }
    let keep = n - lag;
    let tail = |v: Vec<f64>| v[v.len() - keep..].to_vec();

    let target = tail(excess_log_return_values(raw.column(&config.target)?, rf)?);
    let mut factors = Vec::with_capacity(config.factors.len());
    for spec in &config.factors {
        let values = raw.column(&spec.series)?;
        let col = apply_tag(spec.transform, values, rf)
            .map_err(|e| match e {
                Error::Domain(m) => Error::Domain(format!("{}: {m}", spec.series)),
                other => other,
            })?;
        factors.push((spec.column.clone(), tail(col)));
    }
    if config.quantile_normalize {
        factors = quantile_normalize(&factors)?;
    }
    FactorPanel::new(
        raw.months[lag..].to_vec(),
        config.target.clone(),
        target,
        factors,
        rf[lag..].iter().map(|v| monthly_riskfree(*v)).collect(),
    )
}
