//! Primal-dual interior-point solver for the quantile regression LP.
//!
//! The check-loss problem `min Σ ρ_τ(y_i - x_iᵀβ)` is solved through its
//! bounded dual
//!
//! ```text
//!   min  -yᵀd   s.t.  Xᵀd = (1-τ) Xᵀ1,   0 ≤ d ≤ 1
//! ```
//!
//! whose equality multipliers are `-β`. Each iteration takes a Newton step
//! on the perturbed KKT system with a Mehrotra predictor-corrector, so the
//! only factorization is the p×p matrix `Xᵀ diag(q) X`.
//!
//! The interior-point limit is then snapped to a basic solution: the p
//! observations with smallest absolute residual that form a nonsingular
//! subsystem are interpolated exactly, and that vertex is kept when its check
//! loss is no worse.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, IterationTrace, Result};
use crate::linalg;

pub const GAP_TOL: f64 = 1e-8;
pub const MAX_ITER: usize = 200;
const STEP_DAMPING: f64 = 0.9995;

#[derive(Debug, Clone)]
pub struct Solution {
    pub beta: Vec<f64>,
    pub iterations: usize,
    pub gap: f64,
    /// True when the reported coefficients interpolate p observations.
    pub vertex: bool,
}

pub fn check_loss_sum(residuals: impl IntoIterator<Item = f64>, tau: f64) -> f64 {
    residuals
        .into_iter()
        .map(|u| if u < 0.0 { u * (tau - 1.0) } else { u * tau })
        .sum()
}

pub fn residuals(x: &DMatrix<f64>, y: &[f64], beta: &[f64]) -> Vec<f64> {
    let b = DVector::from_column_slice(beta);
    let fitted = x * b;
    y.iter().zip(fitted.iter()).map(|(y, f)| y - f).collect()
}

/// Largest step in (0, 1] keeping `v + step * dv` strictly positive.
fn step_bound(v: &[f64], dv: &[f64]) -> f64 {
    v.iter()
        .zip(dv)
        .filter(|(_, d)| **d < 0.0)
        .map(|(v, d)| -v / d)
        .fold(f64::INFINITY, f64::min)
}

fn damped(a: f64, b: f64) -> f64 {
    (STEP_DAMPING * a.min(b)).min(1.0)
}

pub fn solve(x: &DMatrix<f64>, y: &[f64], tau: f64) -> Result<Solution> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::Internal("design and response lengths differ".into()));
    }
    if n < p {
        return Err(Error::SingularDesign(format!("{n} observations for {p} coefficients")));
    }
    // Reject rank deficiency up front; the LP itself would just be unbounded.
    let y_vec = DVector::from_column_slice(y);
    let ols = linalg::least_squares(x, &y_vec)?;
    if n == p {
        // square full-rank design: the interpolant has zero loss
        return Ok(Solution {
            beta: ols.iter().copied().collect(),
            iterations: 0,
            gap: 0.0,
            vertex: true,
        });
    }

    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Ok(Solution {
            beta: vec![0.0; p],
            iterations: 0,
            gap: 0.0,
            vertex: true,
        });
    }
    let ys: Vec<f64> = y.iter().map(|v| v / scale).collect();

    // Feasible primal start d = (1-τ)1, slack s = τ1.
    let mut d = vec![1.0 - tau; n];
    let mut s = vec![tau; n];
    // Dual start from the least-squares fit: λ = -β_ols.
    let mut lambda: DVector<f64> = -(&ols / scale);
    let xl = x * &lambda;
    let r0: Vec<f64> = (0..n).map(|i| -ys[i] - xl[i]).collect();
    let shift = 0.1 * r0.iter().map(|v| v.abs()).sum::<f64>() / n as f64 + 1e-3;
    let mut z: Vec<f64> = r0.iter().map(|r| r.max(0.0) + shift).collect();
    let mut w: Vec<f64> = r0.iter().map(|r| (-r).max(0.0) + shift).collect();

    let mut trace = Vec::new();
    let mut gap = complementarity(&d, &z, &s, &w);
    let mut iteration = 0;
    while gap >= GAP_TOL {
        if iteration == MAX_ITER {
            return Err(Error::Solver { trace });
        }
        iteration += 1;

        let q: Vec<f64> = (0..n).map(|i| 1.0 / (z[i] / d[i] + w[i] / s[i])).collect();
        let rr: Vec<f64> = (0..n).map(|i| z[i] - w[i]).collect();
        let normal = weighted_gram(x, &q);

        // Predictor (affine-scaling) direction.
        let h_aff: Vec<f64> = rr.iter().map(|v| -v).collect();
        let (mut dd, mut dl) = newton_direction(x, &normal, &q, &h_aff)?;
        let mut ds: Vec<f64> = dd.iter().map(|v| -v).collect();
        let mut dz: Vec<f64> = (0..n).map(|i| -z[i] * (dd[i] / d[i] + 1.0)).collect();
        let mut dw: Vec<f64> = (0..n).map(|i| -w[i] * (ds[i] / s[i] + 1.0)).collect();
        let mut fp = damped(step_bound(&d, &dd), step_bound(&s, &ds));
        let mut fd = damped(step_bound(&z, &dz), step_bound(&w, &dw));

        if fp.min(fd) < 1.0 {
            // Corrector: recentre towards mu and add second-order terms.
            let mu = gap;
            let g: f64 = (0..n)
                .map(|i| (z[i] + fd * dz[i]) * (d[i] + fp * dd[i]) + (w[i] + fd * dw[i]) * (s[i] + fp * ds[i]))
                .sum();
            let target = mu * (g / mu).powi(3) / (2.0 * n as f64);
            let ddz: Vec<f64> = (0..n).map(|i| dd[i] * dz[i]).collect();
            let dsw: Vec<f64> = (0..n).map(|i| ds[i] * dw[i]).collect();
            let h: Vec<f64> = (0..n)
                .map(|i| target * (1.0 / d[i] - 1.0 / s[i]) - rr[i] - ddz[i] / d[i] + dsw[i] / s[i])
                .collect();
            let (cd, cl) = newton_direction(x, &normal, &q, &h)?;
            let cs: Vec<f64> = cd.iter().map(|v| -v).collect();
            dz = (0..n)
                .map(|i| target / d[i] - z[i] - ddz[i] / d[i] - z[i] * cd[i] / d[i])
                .collect();
            dw = (0..n)
                .map(|i| target / s[i] - w[i] - dsw[i] / s[i] - w[i] * cs[i] / s[i])
                .collect();
            dd = cd;
            ds = cs;
            dl = cl;
            fp = damped(step_bound(&d, &dd), step_bound(&s, &ds));
            fd = damped(step_bound(&z, &dz), step_bound(&w, &dw));
        }

        for i in 0..n {
            d[i] += fp * dd[i];
            s[i] += fp * ds[i];
            z[i] += fd * dz[i];
            w[i] += fd * dw[i];
        }
        lambda += fd * dl;
        gap = complementarity(&d, &z, &s, &w);
        trace.push(IterationTrace {
            iteration,
            gap,
            primal_step: fp,
            dual_step: fd,
        });
        if !gap.is_finite() {
            return Err(Error::Solver { trace });
        }
    }

    let beta: Vec<f64> = lambda.iter().map(|l| -l * scale).collect();
    let (beta, vertex) = polish(x, y, tau, beta);
    Ok(Solution {
        beta,
        iterations: iteration,
        gap,
        vertex,
    })
}

fn complementarity(d: &[f64], z: &[f64], s: &[f64], w: &[f64]) -> f64 {
    d.iter().zip(z).map(|(a, b)| a * b).sum::<f64>() + s.iter().zip(w).map(|(a, b)| a * b).sum::<f64>()
}

/// `Xᵀ diag(q) X`
fn weighted_gram(x: &DMatrix<f64>, q: &[f64]) -> DMatrix<f64> {
    let (n, p) = x.shape();
    let mut m = DMatrix::zeros(p, p);
    for i in 0..n {
        for a in 0..p {
            let xa = x[(i, a)] * q[i];
            for b in a..p {
                m[(a, b)] += xa * x[(i, b)];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            m[(a, b)] = m[(b, a)];
        }
    }
    m
}

/// Solves `Xᵀ Q X dλ = -Xᵀ Q h` and returns `(dd, dλ)` with `dd = Q(X dλ + h)`,
/// which keeps `Xᵀ dd = 0`.
fn newton_direction(x: &DMatrix<f64>, normal: &DMatrix<f64>, q: &[f64], h: &[f64]) -> Result<(Vec<f64>, DVector<f64>)> {
    let n = q.len();
    let qh = DVector::from_iterator(n, (0..n).map(|i| -q[i] * h[i]));
    let rhs = x.transpose() * qh;
    let dl = linalg::solve_spd(normal, &rhs)
        .ok_or_else(|| Error::SingularDesign("interior-point normal equations are singular".into()))?;
    let xdl = x * &dl;
    let dd = (0..n).map(|i| q[i] * (xdl[i] + h[i])).collect();
    Ok((dd, dl))
}

/// Snaps to the basic solution through the p smallest-|residual| observations
/// that are linearly independent; keeps it only if its loss is no worse.
fn polish(x: &DMatrix<f64>, y: &[f64], tau: f64, beta: Vec<f64>) -> (Vec<f64>, bool) {
    let (n, p) = x.shape();
    let res = residuals(x, y, &beta);
    let loss = check_loss_sum(res.iter().copied(), tau);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| res[a].abs().total_cmp(&res[b].abs()).then(a.cmp(&b)));

    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(p);
    let mut rows = Vec::with_capacity(p);
    for &i in &order {
        let row = x.row(i).transpose();
        let norm = row.norm();
        if norm == 0.0 {
            continue;
        }
        let mut v = row.clone();
        for b in &basis {
            let proj = b.dot(&v);
            v -= b * proj;
        }
        let vn = v.norm();
        if vn > 1e-8 * norm {
            basis.push(v / vn);
            rows.push(i);
            if rows.len() == p {
                break;
            }
        }
    }
    if rows.len() < p {
        return (beta, false);
    }
    let sub = DMatrix::from_fn(p, p, |a, b| x[(rows[a], b)]);
    let rhs = DVector::from_iterator(p, rows.iter().map(|&i| y[i]));
    let Some(candidate) = sub.lu().solve(&rhs) else {
        return (beta, false);
    };
    let candidate: Vec<f64> = candidate.iter().copied().collect();
    if candidate.iter().any(|v| !v.is_finite()) {
        return (beta, false);
    }
    let cand_loss = check_loss_sum(residuals(x, y, &candidate), tau);
    if cand_loss <= loss + 1e-12 * (1.0 + loss) {
        (candidate, true)
    } else {
        (beta, false)
    }
}
