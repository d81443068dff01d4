//! Linear quantile regression of the multi-factor return model, with an OLS
//! companion fit for the least-squares diagnostics.

mod bootstrap;
pub mod ipm;
mod ols;

pub use bootstrap::{bootstrap_se, bootstrap_se_design, Inference};
pub(crate) use bootstrap::replicate_rng;
pub use ols::{fit_ols, fit_ols_design, joint_zero_ftest, OlsFit};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::transform::FactorPanel;

pub const INTERCEPT: &str = "Intercept";

/// Declarative description of one regression on a [`FactorPanel`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub target: String,
    pub factors: Vec<String>,
    pub intercept: bool,
    pub quantiles: Vec<f64>,
    /// Named 0/1 indicator columns appended after the factors.
    pub dummies: Vec<(String, Vec<f64>)>,
}

impl ModelSpec {
    /// All factors of the panel, intercept on, median only.
    pub fn for_panel(panel: &FactorPanel) -> Self {
        Self {
            target: panel.target_name.clone(),
            factors: panel.factor_names().iter().map(|s| s.to_string()).collect(),
            intercept: true,
            quantiles: vec![0.5],
            dummies: Vec::new(),
        }
    }

    pub fn with_dummies(mut self, dummies: Vec<(String, Vec<f64>)>) -> Self {
        self.dummies.extend(dummies);
        self
    }

    pub fn coefficient_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.factors.clone();
        names.extend(self.dummies.iter().map(|(n, _)| n.clone()));
        if self.intercept {
            names.push(INTERCEPT.to_string());
        }
        names
    }

    pub fn design(&self, panel: &FactorPanel) -> Result<Design> {
        let n = panel.n_rows();
        let mut columns: Vec<&[f64]> = Vec::new();
        for name in &self.factors {
            let col = panel
                .column(name)
                .ok_or_else(|| Error::Usage(format!("factor `{name}` not in panel")))?;
            columns.push(col);
        }
        for (name, col) in &self.dummies {
            if col.len() != n {
                return Err(Error::Usage(format!("dummy `{name}` has {} rows, panel has {n}", col.len())));
            }
            if col.iter().any(|v| *v != 0.0 && *v != 1.0) {
                return Err(Error::Usage(format!("dummy `{name}` is not binary")));
            }
            columns.push(col);
        }
        Ok(Design {
            names: self.coefficient_names(),
            x: crate::linalg::design_from_columns(n, &columns, self.intercept),
            y: panel.target.clone(),
            intercept: self.intercept,
        })
    }
}

/// Response vector and design matrix with coefficient labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub names: Vec<String>,
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
    /// Whether the last column is the intercept.
    pub intercept: bool,
}

impl Design {
    pub fn new(names: Vec<String>, x: DMatrix<f64>, y: Vec<f64>, intercept: bool) -> Result<Self> {
        if names.len() != x.ncols() || y.len() != x.nrows() {
            return Err(Error::Internal("design shape does not match labels".into()));
        }
        Ok(Self { names, x, y, intercept })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Design without the named columns.
    pub fn drop_columns(&self, drop: &[usize]) -> Self {
        let keep: Vec<usize> = (0..self.p()).filter(|j| !drop.contains(j)).collect();
        let intercept = self.intercept && keep.last() == Some(&(self.p() - 1));
        Self {
            names: keep.iter().map(|&j| self.names[j].clone()).collect(),
            x: self.x.select_columns(&keep),
            y: self.y.clone(),
            intercept,
        }
    }

    pub fn rows(&self, idx: &[usize]) -> Self {
        Self {
            names: self.names.clone(),
            x: self.x.select_rows(idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            intercept: self.intercept,
        }
    }

    pub fn with_response(&self, y: Vec<f64>) -> Self {
        Self {
            y,
            ..self.clone()
        }
    }

    /// Intercept-only design on the same response.
    pub fn intercept_only(&self) -> Self {
        Self {
            names: vec![INTERCEPT.to_string()],
            x: DMatrix::from_element(self.n(), 1, 1.0),
            y: self.y.clone(),
            intercept: true,
        }
    }
}

/// Fitted quantile regression at one τ.
#[derive(Debug, Clone, PartialEq)]
pub struct QrFit {
    pub tau: f64,
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Option<Vec<f64>>,
    pub p_values: Option<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub fitted: Vec<f64>,
    /// Koenker-Machado R¹(τ); `None` when the intercept-only loss is zero or
    /// the model has no intercept.
    pub pseudo_r2: Option<f64>,
    pub check_loss: f64,
    pub iterations: usize,
}

impl QrFit {
    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.coefficients[i])
    }

    pub fn attach(&mut self, inference: &Inference) {
        self.std_errors = Some(inference.std_errors.clone());
        self.p_values = Some(inference.p_values.clone());
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("quantile {tau} not in (0, 1)")))
    }
}

/// Pinball loss `ρ_τ(u) = u (τ - 1{u < 0})`.
pub fn check_loss(u: f64, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    Ok(if u < 0.0 { u * (tau - 1.0) } else { u * tau })
}

pub fn fit_qr(panel: &FactorPanel, spec: &ModelSpec, tau: f64) -> Result<QrFit> {
    fit_qr_design(&spec.design(panel)?, tau)
}

pub fn fit_qr_design(design: &Design, tau: f64) -> Result<QrFit> {
    check_tau(tau)?;
    let sol = ipm::solve(&design.x, &design.y, tau)?;
    let residuals = ipm::residuals(&design.x, &design.y, &sol.beta);
    let fitted = design.y.iter().zip(&residuals).map(|(y, r)| y - r).collect();
    let loss = ipm::check_loss_sum(residuals.iter().copied(), tau);
    let pseudo_r2 = if design.intercept && design.p() > 1 {
        intercept_only_loss(design, tau)?.and_then(|v0| ratio_r2(loss, v0))
    } else if design.intercept {
        Some(0.0)
    } else {
        None
    };
    Ok(QrFit {
        tau,
        names: design.names.clone(),
        coefficients: sol.beta,
        std_errors: None,
        p_values: None,
        residuals,
        fitted,
        pseudo_r2,
        check_loss: loss,
        iterations: sol.iterations,
    })
}

fn intercept_only_loss(design: &Design, tau: f64) -> Result<Option<f64>> {
    let base = ipm::solve(&design.intercept_only().x, &design.y, tau)?;
    let v0 = ipm::check_loss_sum(design.y.iter().map(|y| y - base.beta[0]), tau);
    Ok((v0 > 0.0).then_some(v0))
}

fn ratio_r2(full: f64, base: f64) -> Option<f64> {
    (base > 0.0).then(|| (1.0 - full / base).clamp(0.0, 1.0))
}

/// Koenker-Machado `R¹(τ) = 1 - V_full / V_intercept`.
pub fn pseudo_r2(fit: &QrFit, panel: &FactorPanel, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    let y = &panel.target;
    if y.len() != fit.residuals.len() {
        return Err(Error::Usage("fit was not computed on this panel".into()));
    }
    let design = Design::new(
        vec![INTERCEPT.into()],
        DMatrix::from_element(y.len(), 1, 1.0),
        y.clone(),
        true,
    )?;
    let v0 = intercept_only_loss(&design, tau)?
        .ok_or_else(|| Error::Domain("pseudo R² undefined: intercept-only check loss is zero".into()))?;
    let full = ipm::check_loss_sum(fit.residuals.iter().copied(), tau);
    ratio_r2(full, v0).ok_or_else(|| Error::Internal("pseudo R² ratio".into()))
}

/// Quantile-crossing diagnostic at the mean design point: returns the τ pairs
/// where `x̄ᵀβ̂(τ)` decreases.
pub fn crossing_at_mean(design: &Design, fits: &[QrFit]) -> Vec<(f64, f64)> {
    let p = design.p();
    let xbar: Vec<f64> = (0..p).map(|j| design.x.column(j).mean()).collect();
    let level = |f: &QrFit| f.coefficients.iter().zip(&xbar).map(|(b, x)| b * x).sum::<f64>();
    fits.windows(2)
        .filter(|w| level(&w[1]) < level(&w[0]) - 1e-12)
        .map(|w| (w[0].tau, w[1].tau))
        .collect()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::ingest::YearMonth;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn panel_from(y: &[f64], factors: &[(&str, Vec<f64>)]) -> FactorPanel {
        let start: YearMonth = "2000-01".parse().unwrap();
        let months = (0..y.len() as i64).map(|i| YearMonth::from_ordinal(start.ordinal() + i)).collect();
        FactorPanel::new(
            months,
            "Y",
            y.to_vec(),
            factors.iter().map(|(n, c)| (n.to_string(), c.clone())).collect(),
            vec![0.0; y.len()],
        )
        .unwrap()
    }

    fn intercept_only(y: &[f64]) -> (FactorPanel, ModelSpec) {
        let panel = panel_from(y, &[]);
        let spec = ModelSpec::for_panel(&panel);
        (panel, spec)
    }

    #[test]
    fn check_loss_examples() {
        assert_eq!(check_loss(0.0, 0.3).unwrap(), 0.0);
        assert_eq!(check_loss(2.0, 0.5).unwrap(), 1.0);
        assert_eq!(check_loss(-1.0, 0.25).unwrap(), 0.75);
        assert!(matches!(check_loss(1.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(check_loss(1.0, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn median_of_three() {
        let (panel, spec) = intercept_only(&[1.0, 2.0, 9.0]);
        let fit = fit_qr(&panel, &spec, 0.5).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn square_design_interpolates() {
        let (panel, spec) = intercept_only(&[4.5]);
        let fit = fit_qr(&panel, &spec, 0.3).unwrap();
        assert_eq!(fit.coefficients, vec![4.5]);
        assert_eq!(fit.check_loss, 0.0);

        let panel = panel_from(&[1.0, 5.0], &[("a", vec![0.0, 2.0])]);
        let fit = fit_qr(&panel, &ModelSpec::for_panel(&panel), 0.5).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-12 && (fit.coefficients[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn flat_optimum_lower_quartile() {
        // Σρ is flat at 1.5 for every β₀ in [0, 1]; enumerating the four
        // breakpoints gives losses 1.5, 1.5, 2.25, 3.0.
        let (panel, spec) = intercept_only(&[0.0, 1.0, 2.0, 3.0]);
        let fit = fit_qr(&panel, &spec, 0.25).unwrap();
        assert!((0.0..=1.0).contains(&fit.coefficients[0]), "{}", fit.coefficients[0]);
        assert!((fit.check_loss - 1.5).abs() < 1e-9);
    }

    #[test]
    fn pseudo_r2_edges() {
        let (panel, spec) = intercept_only(&[1.0, 4.0, 2.0, 8.0, 5.0]);
        let fit = fit_qr(&panel, &spec, 0.5).unwrap();
        assert_eq!(pseudo_r2(&fit, &panel, 0.5).unwrap(), 0.0);

        let x = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v + 1.0).collect();
        let panel = panel_from(&y, &[("x", x)]);
        let spec = ModelSpec::for_panel(&panel);
        let fit = fit_qr(&panel, &spec, 0.5).unwrap();
        assert!((pseudo_r2(&fit, &panel, 0.5).unwrap() - 1.0).abs() < 1e-12);

        let (panel, spec) = intercept_only(&[2.0, 2.0, 2.0]);
        let fit = fit_qr(&panel, &spec, 0.5).unwrap();
        assert!(matches!(pseudo_r2(&fit, &panel, 0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn pseudo_r2_with_outlier_matches_hand_ratio() {
        // y = x except the last point. The median line through the four
        // clean points has loss 0.5 * |10 - 5| = 2.5. The intercept-only
        // median is 3 with loss 0.5 * (2 + 1 + 0 + 1 + 7) = 5.5.
        let x = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let y = vec![1.0, 2.0, 3.0, 4.0, 10.0];
        let panel = panel_from(&y, &[("x", x)]);
        let fit = fit_qr(&panel, &ModelSpec::for_panel(&panel), 0.5).unwrap();
        assert!((fit.check_loss - 2.5).abs() < 1e-10);
        let r2 = pseudo_r2(&fit, &panel, 0.5).unwrap();
        assert!((r2 - (1.0 - 2.5 / 5.5)).abs() < 1e-10);
        assert_eq!(fit.pseudo_r2, Some(r2));
    }

    #[test]
    fn residuals_and_quantile_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 61;
        let x1: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let x2: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 3.0).collect();
        let y: Vec<f64> = (0..n).map(|i| 1.0 + x1[i] - 2.0 * x2[i] + rng.random::<f64>() - 0.5).collect();
        let panel = panel_from(&y, &[("a", x1), ("b", x2)]);
        let spec = ModelSpec::for_panel(&panel);
        let design = spec.design(&panel).unwrap();
        for tau in [0.1, 0.25, 0.5, 0.9] {
            let fit = fit_qr(&panel, &spec, tau).unwrap();
            for i in 0..n {
                let xb: f64 = (0..design.p()).map(|j| design.x[(i, j)] * fit.coefficients[j]).sum();
                assert_eq!(fit.residuals[i], y[i] - xb);
            }
            let neg = fit.residuals.iter().filter(|r| **r < -1e-10).count() as f64;
            let pos = fit.residuals.iter().filter(|r| **r > 1e-10).count() as f64;
            assert!(neg <= n as f64 * tau + 1e-9 && n as f64 * tau <= n as f64 - pos + 1e-9);
            let r2 = fit.pseudo_r2.unwrap();
            assert!((0.0..=1.0).contains(&r2));
        }
    }

    #[test]
    fn rank_deficiency_is_reported() {
        let x = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let panel = panel_from(&[1.0, 3.0, 2.0, 5.0, 4.0, 6.0], &[("a", x.clone()), ("b", x)]);
        let spec = ModelSpec::for_panel(&panel);
        assert!(matches!(fit_qr(&panel, &spec, 0.5), Err(Error::SingularDesign(_))));
    }

    #[test]
    fn dummy_columns_must_be_binary() {
        let panel = panel_from(&[1.0, 3.0, 2.0, 5.0], &[]);
        let spec = ModelSpec::for_panel(&panel).with_dummies(vec![("D".into(), vec![0.0, 2.0, 0.0, 0.0])]);
        assert!(matches!(spec.design(&panel), Err(Error::Usage(_))));
    }
}
