//! Extreme-residual dummies and a regression-counterfactual impact analysis
//! around an intervention month.

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ingest::YearMonth;
use crate::linalg;
use crate::quantreg::{fit_qr, replicate_rng, ModelSpec, QrFit};
use crate::transform::FactorPanel;

/// Indicator for a single month.
#[derive(Debug, Clone, PartialEq)]
pub struct Dummy {
    pub name: String,
    pub month: YearMonth,
    /// Residual that put this month in the set.
    pub residual: f64,
    pub column: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DummySet {
    /// Chronological.
    pub dummies: Vec<Dummy>,
}

impl DummySet {
    pub fn len(&self) -> usize {
        self.dummies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dummies.is_empty()
    }

    pub fn months(&self) -> Vec<YearMonth> {
        self.dummies.iter().map(|d| d.month).collect()
    }

    pub fn columns(&self) -> Vec<(String, Vec<f64>)> {
        self.dummies.iter().map(|d| (d.name.clone(), d.column.clone())).collect()
    }
}

pub fn dummy_name(month: YearMonth) -> String {
    format!("D_{month}")
}

/// The `k` months with the largest `|residual|`, ties going to the earlier
/// month, as indicator columns over `months`. Requires `k < n/10`; `k = 0`
/// gives an empty set.
pub fn extreme_residuals(months: &[YearMonth], residuals: &[f64], k: usize) -> Result<DummySet> {
    let n = residuals.len();
    if months.len() != n {
        return Err(Error::Usage("months and residuals differ in length".into()));
    }
    if k == 0 {
        return Ok(DummySet::default());
    }
    if 10 * k >= n {
        return Err(Error::Usage(format!("{k} dummies on {n} observations; need k < n/10")));
    }
    if residuals.iter().any(|r| !r.is_finite()) {
        return Err(Error::Data("non-finite residual".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps the earlier month first among equal magnitudes
    order.sort_by(|&a, &b| residuals[b].abs().total_cmp(&residuals[a].abs()));
    let mut picked: Vec<usize> = order[..k].to_vec();
    picked.sort_unstable();
    let dummies = picked
        .into_iter()
        .map(|i| {
            let mut column = vec![0.0; n];
            column[i] = 1.0;
            Dummy {
                name: dummy_name(months[i]),
                month: months[i],
                residual: residuals[i],
                column,
            }
        })
        .collect();
    Ok(DummySet { dummies })
}

/// Month-of-year indicators for February..December (January is the base).
pub fn seasonal_dummies(months: &[YearMonth]) -> Vec<(String, Vec<f64>)> {
    (2..=12)
        .map(|m| {
            let col = months.iter().map(|ym| if ym.month() == m { 1.0 } else { 0.0 }).collect();
            (format!("M_{m:02}"), col)
        })
        .collect()
}

/// Refits `spec` with the dummy columns added, once per `tau`. Dummy
/// columns are rebuilt against the panel's months.
pub fn refit_with_dummies(panel: &FactorPanel, spec: &ModelSpec, dummies: &DummySet, taus: &[f64]) -> Result<Vec<QrFit>> {
    let mut columns = Vec::with_capacity(dummies.len());
    for d in &dummies.dummies {
        let i = panel
            .months
            .iter()
            .position(|m| *m == d.month)
            .ok_or_else(|| Error::Usage(format!("dummy month {} is outside the panel", d.month)))?;
        let mut col = vec![0.0; panel.n_rows()];
        col[i] = 1.0;
        columns.push((d.name.clone(), col));
    }
    let spec = spec.clone().with_dummies(columns);
    taus.iter().map(|&tau| fit_qr(panel, &spec, tau)).collect()
}

/// One post-period month of the impact plot data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpactPoint {
    pub month: YearMonth,
    pub actual: f64,
    pub predicted: f64,
    pub lower: f64,
    pub upper: f64,
    pub effect: f64,
    pub cumulative_effect: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpactReport {
    pub intervention: YearMonth,
    pub pre_len: usize,
    pub post_len: usize,
    pub average_actual: f64,
    pub average_predicted: f64,
    pub average_predicted_interval: (f64, f64),
    pub cumulative_actual: f64,
    pub cumulative_predicted: f64,
    pub cumulative_predicted_interval: (f64, f64),
    pub average_effect: f64,
    pub average_effect_interval: (f64, f64),
    pub cumulative_effect: f64,
    pub cumulative_effect_interval: (f64, f64),
    /// `(Σactual - Σpredicted) / Σpredicted × 100`; NaN when the predicted
    /// sum is zero.
    pub relative_effect_pct: f64,
    pub relative_effect_interval: (f64, f64),
    /// One-sided, in the direction of the observed effect.
    pub p_value: f64,
    pub replicates: usize,
    pub series: Vec<ImpactPoint>,
}

/// Linear-interpolated percentile of sorted data, `q` in `[0, 1]`.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// 95% percentile band, widened if needed so it covers `point`.
fn band(mut draws: Vec<f64>, point: f64) -> (f64, f64) {
    draws.sort_by(f64::total_cmp);
    let (lo, hi) = (percentile(&draws, 0.025), percentile(&draws, 0.975));
    (lo.min(point), hi.max(point))
}

fn relative(actual: f64, predicted: f64) -> f64 {
    if predicted == 0.0 {
        f64::NAN
    } else {
        (actual - predicted) / predicted * 100.0
    }
}

/// Counterfactual for the months from `intervention` on, from a least-squares
/// fit of `target` on `controls` over the earlier months.
///
/// Each bootstrap replicate rebuilds the pre-period response from resampled
/// (variance-corrected) residuals, refits, and predicts the post period with
/// a fresh residual draw per month, so the bands cover both parameter and
/// noise uncertainty.
pub fn causal_impact(
    months: &[YearMonth],
    target: &[f64],
    controls: &[(String, Vec<f64>)],
    intervention: YearMonth,
    replicates: usize,
    seed: u64,
) -> Result<ImpactReport> {
    let n = months.len();
    if target.len() != n || controls.iter().any(|(_, c)| c.len() != n) {
        return Err(Error::Usage("impact inputs differ in length".into()));
    }
    if replicates < 100 {
        return Err(Error::Usage(format!("impact bootstrap needs B >= 100, got {replicates}")));
    }
    let pre: Vec<usize> = (0..n).filter(|&i| months[i] < intervention).collect();
    let post: Vec<usize> = (0..n).filter(|&i| months[i] >= intervention).collect();
    if post.is_empty() {
        return Err(Error::Usage(format!("no observations on or after {intervention}")));
    }
    if pre.len() < 24 {
        return Err(Error::Usage(format!("impact needs at least 24 pre-period months, got {}", pre.len())));
    }
    if post.len() < 3 {
        return Err(Error::Usage(format!("impact needs at least 3 post-period months, got {}", post.len())));
    }

    let pick = |rows: &[usize], col: &[f64]| rows.iter().map(|&i| col[i]).collect::<Vec<f64>>();
    let design = |rows: &[usize]| {
        let cols: Vec<Vec<f64>> = controls.iter().map(|(_, c)| pick(rows, c)).collect();
        let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
        linalg::design_from_columns(rows.len(), &refs, true)
    };
    let x_pre = design(&pre);
    let x_post = design(&post);
    let y_pre = DVector::from_vec(pick(&pre, target));
    let actual = pick(&post, target);
    let (m_pre, p) = (pre.len(), x_pre.ncols());
    if m_pre <= p {
        return Err(Error::Data(format!("{p} impact coefficients on {m_pre} pre-period months")));
    }

    let rank_error = |e: Error| match e {
        Error::SingularDesign(m) => Error::Data(format!("impact controls are rank-deficient on the pre-period: {m}")),
        other => other,
    };
    let beta = linalg::least_squares(&x_pre, &y_pre).map_err(rank_error)?;
    let fitted_pre = &x_pre * &beta;
    let inflate = (m_pre as f64 / (m_pre - p) as f64).sqrt();
    let resid: Vec<f64> = (&y_pre - &fitted_pre).iter().map(|e| e * inflate).collect();
    let predicted: Vec<f64> = (&x_post * &beta).iter().copied().collect();

    let m_post = post.len();
    let draws: Vec<Vec<f64>> = (0..replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = replicate_rng(seed, b);
            let mut draw = || resid[rng.random_range(0..resid.len())];
            let y_star = DVector::from_fn(m_pre, |i, _| fitted_pre[i] + draw());
            let beta_star = linalg::least_squares(&x_pre, &y_star)?;
            let pred = &x_post * beta_star;
            Ok(pred.iter().map(|v| v + draw()).collect())
        })
        .collect::<Result<_>>()?;

    let sum_actual: f64 = actual.iter().sum();
    let sum_pred: f64 = predicted.iter().sum();
    let cum_draws: Vec<f64> = draws.iter().map(|d| d.iter().sum()).collect();
    let mf = m_post as f64;

    let cumulative_predicted_interval = band(cum_draws.clone(), sum_pred);
    let cumulative_effect = sum_actual - sum_pred;
    let cumulative_effect_interval = band(cum_draws.iter().map(|c| sum_actual - c).collect(), cumulative_effect);
    let relative_effect_pct = relative(sum_actual, sum_pred);
    let relative_effect_interval = if relative_effect_pct.is_nan() {
        (f64::NAN, f64::NAN)
    } else {
        band(
            cum_draws.iter().map(|c| relative(sum_actual, *c)).filter(|v| v.is_finite()).collect(),
            relative_effect_pct,
        )
    };

    let extreme = if cumulative_effect < 0.0 {
        cum_draws.iter().filter(|c| **c <= sum_actual).count()
    } else {
        cum_draws.iter().filter(|c| **c >= sum_actual).count()
    };
    let p_value = (extreme + 1) as f64 / (replicates + 1) as f64;

    let mut running = 0.0;
    let series = (0..m_post)
        .map(|t| {
            let effect = actual[t] - predicted[t];
            running += effect;
            let (lower, upper) = band(draws.iter().map(|d| d[t]).collect(), predicted[t]);
            ImpactPoint {
                month: months[post[t]],
                actual: actual[t],
                predicted: predicted[t],
                lower,
                upper,
                effect,
                cumulative_effect: running,
            }
        })
        .collect();

    let (clo, chi) = cumulative_predicted_interval;
    let (elo, ehi) = cumulative_effect_interval;
    Ok(ImpactReport {
        intervention,
        pre_len: m_pre,
        post_len: m_post,
        average_actual: sum_actual / mf,
        average_predicted: sum_pred / mf,
        average_predicted_interval: (clo / mf, chi / mf),
        cumulative_actual: sum_actual,
        cumulative_predicted: sum_pred,
        cumulative_predicted_interval,
        average_effect: cumulative_effect / mf,
        average_effect_interval: (elo / mf, ehi / mf),
        cumulative_effect,
        cumulative_effect_interval,
        relative_effect_pct,
        relative_effect_interval,
        p_value,
        replicates,
        series,
    })
}
