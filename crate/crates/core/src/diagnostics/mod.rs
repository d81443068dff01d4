//! Stationarity, normality, residual, specification, multicollinearity and
//! parameter-stability tests.

mod adf;
mod descriptive;
mod normality;
mod residual;

pub use adf::{adf_critical_value, adf_p_value, adf_test, default_max_lag};
pub use descriptive::{describe, moments, vif, Descriptive, Moments};
pub use normality::{
    anderson_darling, dagostino_k2, jarque_bera, jarque_bera_statistic, shapiro_wilk, AD_CRITICAL_VALUES,
};
pub use residual::{
    breusch_godfrey, breusch_pagan, cusum_ols, cusum_p_value, durbin_watson, reset_test, CUSUM_CRITICAL_VALUES,
    DW_BAND,
};

/// Significance level behind every verdict.
pub const ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Reject,
    FailToReject,
}

impl Verdict {
    pub fn from_reject(reject: bool) -> Self {
        if reject {
            Verdict::Reject
        } else {
            Verdict::FailToReject
        }
    }

    pub fn rejects(self) -> bool {
        self == Verdict::Reject
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Reject => "reject",
            Verdict::FailToReject => "fail-to-reject",
        }
    }
}

/// `(significance level in percent, critical value)`
pub type CriticalValue = (f64, f64);

/// Outcome of one diagnostic test.
///
/// Most tests carry a p-value and decide at 5%. Anderson-Darling is decided
/// against its critical-value table; CUSUM reports both, deciding by the
/// table. Durbin-Watson carries neither and uses a heuristic band.
#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub name: String,
    pub statistic: f64,
    pub p_value: Option<f64>,
    pub critical_values: Vec<CriticalValue>,
    /// Degrees of freedom of the reference distribution (numerator, denominator).
    pub df: Option<(f64, Option<f64>)>,
    pub lags: Option<usize>,
    /// F form of an LM test, where reported alongside the chi-square form.
    pub f_statistic: Option<f64>,
    pub f_p_value: Option<f64>,
    pub verdict: Verdict,
}

impl TestResult {
    pub fn with_p(name: impl Into<String>, statistic: f64, p_value: f64) -> Self {
        let p = p_value.clamp(0.0, 1.0);
        Self {
            name: name.into(),
            statistic,
            p_value: Some(p),
            critical_values: Vec::new(),
            df: None,
            lags: None,
            f_statistic: None,
            f_p_value: None,
            verdict: Verdict::from_reject(p < ALPHA),
        }
    }

    /// Upper-tail critical-value test: rejects when the statistic exceeds the
    /// value tabulated at 5%.
    pub fn with_critical(name: impl Into<String>, statistic: f64, critical_values: &[CriticalValue]) -> Self {
        let at5 = critical_values
            .iter()
            .find(|(level, _)| *level == 5.0)
            .map(|(_, v)| *v)
            .unwrap_or(f64::INFINITY);
        Self {
            name: name.into(),
            statistic,
            p_value: None,
            critical_values: critical_values.to_vec(),
            df: None,
            lags: None,
            f_statistic: None,
            f_p_value: None,
            verdict: Verdict::from_reject(statistic > at5),
        }
    }

    pub fn df(mut self, d1: f64, d2: Option<f64>) -> Self {
        self.df = Some((d1, d2));
        self
    }

    pub fn lags(mut self, lags: usize) -> Self {
        self.lags = Some(lags);
        self
    }

    pub fn f_variant(mut self, f: f64, p: f64) -> Self {
        self.f_statistic = Some(f);
        self.f_p_value = Some(p.clamp(0.0, 1.0));
        self
    }

    pub fn rejects(&self) -> bool {
        self.verdict.rejects()
    }
}
