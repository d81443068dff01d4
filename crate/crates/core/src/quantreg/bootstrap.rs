use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{ipm, Design, ModelSpec};
use crate::dist;
use crate::error::{Error, Result};
use crate::transform::FactorPanel;

/// Largest tolerated share of rank-deficient replicates.
const MAX_DROPPED_SHARE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    pub std_errors: Vec<f64>,
    pub p_values: Vec<f64>,
    pub replicates: usize,
    pub dropped: usize,
}

/// Independent generator for replicate `index`; the same `(seed, index)`
/// always yields the same draws regardless of scheduling.
pub(crate) fn replicate_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Pairs bootstrap: rows are resampled with replacement and the model refit
/// `replicates` times. Rows flagged by a dummy column are kept in every
/// replicate, since a resample without them leaves the dummy coefficient
/// unidentified.
pub fn bootstrap_se(panel: &FactorPanel, spec: &ModelSpec, tau: f64, replicates: usize, seed: u64) -> Result<Inference> {
    let design = spec.design(panel)?;
    let fixed: Vec<usize> = (0..panel.n_rows())
        .filter(|&i| spec.dummies.iter().any(|(_, c)| c[i] != 0.0))
        .collect();
    let beta = ipm::solve(&design.x, &design.y, tau)?.beta;
    bootstrap_se_design(&design, &beta, &fixed, tau, replicates, seed)
}

pub fn bootstrap_se_design(
    design: &Design,
    beta: &[f64],
    fixed_rows: &[usize],
    tau: f64,
    replicates: usize,
    seed: u64,
) -> Result<Inference> {
    if replicates < 100 {
        return Err(Error::Usage(format!("bootstrap needs B >= 100, got {replicates}")));
    }
    let n = design.n();
    let free: Vec<usize> = (0..n).filter(|i| !fixed_rows.contains(i)).collect();
    if free.is_empty() {
        return Err(Error::Usage("no rows left to resample".into()));
    }

    let draws: Vec<Option<Vec<f64>>> = (0..replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = replicate_rng(seed, b);
            let mut rows: Vec<usize> = fixed_rows.to_vec();
            rows.extend((0..free.len()).map(|_| free[rng.random_range(0..free.len())]));
            let sample = design.rows(&rows);
            match ipm::solve(&sample.x, &sample.y, tau) {
                Ok(sol) => Ok(Some(sol.beta)),
                Err(Error::SingularDesign(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;

    let kept: Vec<&Vec<f64>> = draws.iter().flatten().collect();
    let dropped = replicates - kept.len();
    if dropped as f64 > MAX_DROPPED_SHARE * replicates as f64 {
        return Err(Error::Inference(format!(
            "{dropped} of {replicates} bootstrap replicates were rank-deficient"
        )));
    }
    if kept.len() < 2 {
        return Err(Error::Inference("fewer than two usable bootstrap replicates".into()));
    }
    let p = design.p();
    let m = kept.len() as f64;
    let std_errors: Vec<f64> = (0..p)
        .map(|j| {
            let mean = kept.iter().map(|b| b[j]).sum::<f64>() / m;
            (kept.iter().map(|b| (b[j] - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
        })
        .collect();
    let p_values = beta
        .iter()
        .zip(&std_errors)
        .map(|(b, se)| normal_two_sided(*b, *se))
        .collect();
    Ok(Inference {
        std_errors,
        p_values,
        replicates,
        dropped,
    })
}

fn normal_two_sided(estimate: f64, se: f64) -> f64 {
    if se > 0.0 {
        2.0 * dist::normal_sf((estimate / se).abs())
    } else if estimate == 0.0 {
        1.0
    } else {
        0.0
    }
}
