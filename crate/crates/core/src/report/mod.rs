//! End-to-end pipeline from a run config to a markdown report plus one CSV
//! per table.

mod table;

pub use table::{emit_table, fmt2, fmt_full, stars, Cell, Table};

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::diagnostics::{self, Descriptive, TestResult};
use crate::error::{Error, Result};
use crate::events::{self, DummySet, ImpactReport};
use crate::ingest::{self, RawPanel, RunConfig};
use crate::quantreg::{self, fit_ols, joint_zero_ftest, ModelSpec, OlsFit, QrFit};
use crate::risk::{self, PcaResult, RiskReport};
use crate::transform::{self, FactorPanel};

pub const REPORT_FILE: &str = "report.md";

/// Hex SHA-256 of the config text, recorded so a report can be tied to the
/// exact config that produced it.
pub fn config_digest(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metadata {
    pub config_sha256: String,
    pub seed: u64,
    pub target: String,
    pub start: String,
    pub end: String,
    pub observations: usize,
    pub quantiles: Vec<f64>,
    pub bootstrap: usize,
    pub quantile_normalize: bool,
    pub seasonal_dummies: bool,
    pub intervention: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariableSummary {
    pub name: String,
    pub stats: Descriptive,
    pub jarque_bera: TestResult,
    pub adf: TestResult,
    /// `None` for the target.
    pub vif: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineReport {
    pub metadata: Metadata,
    pub descriptive: Vec<VariableSummary>,
    pub baseline: QrFit,
    pub ols: OlsFit,
    pub joint_f: TestResult,
    pub breusch_pagan: TestResult,
    pub breusch_godfrey: Vec<TestResult>,
    pub durbin_watson: TestResult,
    pub reset: TestResult,
    pub normality: Vec<TestResult>,
    pub dummies: DummySet,
    /// Every configured τ without dummies.
    pub fits_before: Vec<QrFit>,
    /// Every configured τ with dummies, with bootstrap inference.
    pub fits: Vec<QrFit>,
    pub crossings: Vec<(f64, f64)>,
    pub cusum: TestResult,
    pub risk: RiskReport,
    pub pca: PcaResult,
    pub impact: ImpactReport,
}

/// Reads and aligns the configured series, then builds the regression panel.
pub fn prepare(config: &RunConfig) -> Result<(RawPanel, FactorPanel)> {
    let raw = config
        .load_series()
        .and_then(|series| ingest::assemble_panel(&series, config))
        .map_err(|e| e.in_stage("ingest"))?;
    let panel = transform::build_factor_panel(&raw, config).map_err(|e| e.in_stage("transform"))?;
    Ok((raw, panel))
}

/// Descriptive statistics, Jarque-Bera and ADF for the target and every
/// factor, VIF for the factors.
pub fn describe_panel(panel: &FactorPanel) -> Result<Vec<VariableSummary>> {
    let vifs = if panel.factors.len() >= 2 {
        diagnostics::vif(&panel.factors)?
    } else {
        Vec::new()
    };
    let mut out = Vec::with_capacity(panel.factors.len() + 1);
    let columns = std::iter::once((panel.target_name.as_str(), panel.target.as_slice()))
        .chain(panel.factors.iter().map(|(n, c)| (n.as_str(), c.as_slice())));
    for (name, values) in columns {
        let tag = |e: Error| match e {
            Error::Domain(m) | Error::Data(m) => Error::Data(format!("`{name}`: {m}")),
            other => other,
        };
        out.push(VariableSummary {
            name: name.to_string(),
            stats: diagnostics::describe(values).map_err(tag)?,
            jarque_bera: diagnostics::jarque_bera(values).map_err(tag)?,
            adf: diagnostics::adf_test(values, None).map_err(tag)?,
            vif: vifs.iter().find(|(n, _)| n == name).map(|(_, v)| *v),
        });
    }
    Ok(out)
}

/// Quantile fit at `tau` with pairs-bootstrap standard errors attached.
pub fn fit_with_inference(panel: &FactorPanel, spec: &ModelSpec, tau: f64, replicates: usize, seed: u64) -> Result<QrFit> {
    let mut fit = quantreg::fit_qr(panel, spec, tau)?;
    let inference = quantreg::bootstrap_se(panel, spec, tau, replicates, seed)?;
    fit.attach(&inference);
    Ok(fit)
}

/// Causal-impact controls as regression columns: each control names a
/// factor source series (or spread) and contributes its transformed column.
pub fn impact_controls(config: &RunConfig, panel: &FactorPanel) -> Result<Vec<(String, Vec<f64>)>> {
    config
        .controls()
        .iter()
        .map(|series| {
            let spec = config
                .factors
                .iter()
                .find(|f| &f.series == series || &f.column == series)
                .ok_or_else(|| Error::Config(format!("impact control `{series}` is not a configured factor")))?;
            let col = panel
                .column(&spec.column)
                .ok_or_else(|| Error::Internal(format!("factor column `{}` missing", spec.column)))?;
            Ok((spec.column.clone(), col.to_vec()))
        })
        .collect()
}

pub fn run_causal_impact(config: &RunConfig, panel: &FactorPanel, intervention: ingest::YearMonth) -> Result<ImpactReport> {
    let controls = impact_controls(config, panel)?;
    events::causal_impact(&panel.months, &panel.target, &controls, intervention, config.bootstrap, config.seed)
}

/// Runs every stage in order. Nothing is written; see
/// [`PipelineReport::write`].
pub fn run_pipeline(config: &RunConfig, config_sha256: &str) -> Result<PipelineReport> {
    let (raw, mut panel) = prepare(config)?;
    log::info!("panel: {} months x {} factors", panel.n_rows(), panel.factors.len());
    let pca_columns = panel.factors.clone();
    // controls are resolved up front so a bad name fails before any fitting
    impact_controls(config, &panel).map_err(|e| e.in_stage("impact"))?;

    let descriptive = describe_panel(&panel).map_err(|e| e.in_stage("describe"))?;

    if config.seasonal_dummies {
        panel.factors.extend(events::seasonal_dummies(&panel.months));
    }
    let (seed, b) = (config.seed, config.bootstrap);
    let spec = ModelSpec::for_panel(&panel);
    let baseline = fit_with_inference(&panel, &spec, 0.5, b, seed).map_err(|e| e.in_stage("baseline"))?;

    let diag = || -> Result<_> {
        let ols = fit_ols(&panel, &spec)?;
        let factor_names: Vec<&str> = spec.factors.iter().map(String::as_str).collect();
        let joint_f = joint_zero_ftest(&ols, &factor_names)?;
        let bp = diagnostics::breusch_pagan(&ols)?;
        let bg = config
            .bg_lags
            .iter()
            .map(|&l| diagnostics::breusch_godfrey(&ols, l))
            .collect::<Result<Vec<_>>>()?;
        let dw = diagnostics::durbin_watson(&ols.residuals)?;
        let reset = diagnostics::reset_test(&ols)?;
        let e = &ols.residuals;
        let normality = vec![
            diagnostics::jarque_bera(e)?,
            diagnostics::shapiro_wilk(e)?,
            diagnostics::dagostino_k2(e)?,
            diagnostics::anderson_darling(e)?,
        ];
        Ok((ols, joint_f, bp, bg, dw, reset, normality))
    };
    let (ols, joint_f, breusch_pagan, breusch_godfrey, durbin_watson, reset, normality) =
        diag().map_err(|e| e.in_stage("diagnostics"))?;

    log::info!("baseline median fit done, {b} bootstrap replicates");
    let dummies = events::extreme_residuals(&panel.months, &baseline.residuals, config.dummies)
        .map_err(|e| e.in_stage("dummies"))?;

    let refit = || -> Result<_> {
        let before = config
            .quantiles
            .iter()
            .map(|&tau| quantreg::fit_qr(&panel, &spec, tau))
            .collect::<Result<Vec<_>>>()?;
        let with = spec.clone().with_dummies(dummies.columns());
        let fits = config
            .quantiles
            .iter()
            .map(|&tau| fit_with_inference(&panel, &with, tau, b, seed))
            .collect::<Result<Vec<_>>>()?;
        let crossings = quantreg::crossing_at_mean(&with.design(&panel)?, &fits);
        Ok((before, fits, crossings, with))
    };
    let (fits_before, fits, crossings, with_dummies) = refit().map_err(|e| e.in_stage("refit"))?;

    log::info!("refit with {} dummies at {} quantiles", dummies.len(), fits.len());
    let cusum = fit_ols(&panel, &with_dummies)
        .and_then(|f| diagnostics::cusum_ols(&f))
        .map_err(|e| e.in_stage("stability"))?;

    let risk = raw
        .column(&config.target)
        .and_then(risk::simple_returns)
        .and_then(|r| risk::risk_report(&r))
        .map_err(|e| e.in_stage("risk"))?;
    let pca = risk::pca(&pca_columns, true).map_err(|e| e.in_stage("pca"))?;
    let impact = run_causal_impact(config, &panel, config.intervention).map_err(|e| e.in_stage("impact"))?;

    Ok(PipelineReport {
        metadata: Metadata {
            config_sha256: config_sha256.to_string(),
            seed,
            target: config.target.clone(),
            start: panel.months[0].to_string(),
            end: panel.months[panel.n_rows() - 1].to_string(),
            observations: panel.n_rows(),
            quantiles: config.quantiles.clone(),
            bootstrap: b,
            quantile_normalize: config.quantile_normalize,
            seasonal_dummies: config.seasonal_dummies,
            intervention: config.intervention.to_string(),
        },
        descriptive,
        baseline,
        ols,
        joint_f,
        breusch_pagan,
        breusch_godfrey,
        durbin_watson,
        reset,
        normality,
        dummies,
        fits_before,
        fits,
        crossings,
        cusum,
        risk,
        pca,
        impact,
    })
}

fn tau_label(tau: f64) -> String {
    format!("Q({tau})")
}

fn estimate(fit: &QrFit, j: usize) -> Cell {
    Cell::Estimate {
        coef: fit.coefficients[j],
        se: fit.std_errors.as_ref().map(|s| s[j]),
        p: fit.p_values.as_ref().map(|p| p[j]),
    }
}

fn starred(r: &TestResult) -> Cell {
    Cell::Estimate {
        coef: r.statistic,
        se: None,
        p: r.p_value,
    }
}

fn verdict(r: &TestResult) -> Cell {
    Cell::text(r.verdict.as_str())
}

pub fn metadata_table(m: &Metadata) -> Table {
    let mut t = Table::new("metadata", "Run metadata", &["Key", "Value"]);
    let quantiles: Vec<String> = m.quantiles.iter().map(|q| q.to_string()).collect();
    for (k, v) in [
        ("config_sha256", m.config_sha256.clone()),
        ("seed", m.seed.to_string()),
        ("target", m.target.clone()),
        ("first_month", m.start.clone()),
        ("last_month", m.end.clone()),
        ("observations", m.observations.to_string()),
        ("quantiles", quantiles.join(" ")),
        ("bootstrap_replicates", m.bootstrap.to_string()),
        ("quantile_normalize", m.quantile_normalize.to_string()),
        ("seasonal_dummies", m.seasonal_dummies.to_string()),
        ("intervention", m.intervention.clone()),
    ] {
        t.push(vec![Cell::text(k), Cell::text(v)]);
    }
    t
}

pub fn descriptive_table(rows: &[VariableSummary]) -> Table {
    let mut t = Table::new(
        "descriptive",
        "Descriptive statistics",
        &["Variable", "Mean", "Median", "Max", "Min", "Std Dev", "Skew", "Kurtosis", "JB", "ADF", "ADF lags", "VIF"],
    );
    for r in rows {
        let s = &r.stats;
        t.push(vec![
            Cell::text(&r.name),
            Cell::Num(s.mean),
            Cell::Num(s.median),
            Cell::Num(s.max),
            Cell::Num(s.min),
            Cell::Num(s.std_dev),
            Cell::Num(s.skewness),
            Cell::Num(s.kurtosis),
            starred(&r.jarque_bera),
            starred(&r.adf),
            r.adf.lags.map_or(Cell::Empty, |l| Cell::Int(l as i64)),
            Cell::opt(r.vif),
        ]);
    }
    t
}

/// Coefficient table with one estimate column per fit.
pub fn quantile_table(key: &str, title: &str, fits: &[QrFit]) -> Table {
    let labels: Vec<String> = fits.iter().map(|f| tau_label(f.tau)).collect();
    let mut headers = vec!["Variable"];
    headers.extend(labels.iter().map(String::as_str));
    let mut t = Table::new(key, title, &headers);
    let mut names: Vec<&String> = Vec::new();
    for f in fits {
        for n in &f.names {
            if !names.contains(&n) {
                names.push(n);
            }
        }
    }
    for name in names {
        let mut row = vec![Cell::text(name.as_str())];
        for f in fits {
            row.push(f.names.iter().position(|n| n == name).map_or(Cell::Empty, |j| estimate(f, j)));
        }
        t.push(row);
    }
    t
}

fn fit_summary_table(report: &PipelineReport) -> Table {
    let mut t = Table::new(
        "fit_summary",
        "Pseudo R² before and after the event dummies",
        &["Quantile", "Pseudo R² (no dummies)", "Pseudo R² (with dummies)", "Check loss (no dummies)", "Check loss (with dummies)"],
    );
    for (a, b) in report.fits_before.iter().zip(&report.fits) {
        t.push(vec![
            Cell::Num(a.tau),
            Cell::opt(a.pseudo_r2),
            Cell::opt(b.pseudo_r2),
            Cell::Num(a.check_loss),
            Cell::Num(b.check_loss),
        ]);
    }
    t
}

fn crossing_table(report: &PipelineReport) -> Table {
    let mut t = Table::new(
        "quantile_crossing",
        "Quantile crossing at the mean design point",
        &["Lower quantile", "Upper quantile"],
    );
    for (a, b) in &report.crossings {
        t.push(vec![Cell::Num(*a), Cell::Num(*b)]);
    }
    t
}

fn lm_row(r: &TestResult) -> Vec<Cell> {
    vec![
        Cell::text(&r.name),
        r.lags.map_or(Cell::Empty, |l| Cell::Int(l as i64)),
        Cell::Num(r.statistic),
        Cell::opt(r.p_value),
        Cell::opt(r.f_statistic),
        Cell::opt(r.f_p_value),
        verdict(r),
    ]
}

const LM_HEADERS: [&str; 7] = ["Test", "Lags", "Statistic", "p-value", "F", "F p-value", "Verdict"];

pub fn heteroskedasticity_table(bp: &TestResult) -> Table {
    let mut t = Table::new("heteroskedasticity", "Heteroskedasticity", &LM_HEADERS);
    t.push(lm_row(bp));
    t
}

pub fn autocorrelation_table(bg: &[TestResult], dw: &TestResult) -> Table {
    let mut t = Table::new("autocorrelation", "Serial correlation", &LM_HEADERS);
    for r in bg {
        t.push(lm_row(r));
    }
    t.push(lm_row(dw));
    t
}

pub fn specification_table(reset: &TestResult, joint_f: &TestResult) -> Table {
    let mut t = Table::new(
        "specification",
        "Specification tests",
        &["Test", "Statistic", "df1", "df2", "p-value", "Verdict"],
    );
    for r in [reset, joint_f] {
        let (d1, d2) = r.df.unwrap_or((f64::NAN, None));
        t.push(vec![
            Cell::text(&r.name),
            Cell::Num(r.statistic),
            Cell::Int(d1 as i64),
            d2.map_or(Cell::Empty, |d| Cell::Int(d as i64)),
            Cell::opt(r.p_value),
            verdict(r),
        ]);
    }
    t
}

fn critical_cell(r: &TestResult) -> Cell {
    r.critical_values
        .iter()
        .find(|(l, _)| *l == 5.0)
        .map_or(Cell::Empty, |(_, v)| Cell::Num(*v))
}

pub fn normality_table(tests: &[TestResult]) -> Table {
    let mut t = Table::new(
        "normality",
        "Normality of residuals",
        &["Test", "Statistic", "p-value", "5% critical value", "Verdict"],
    );
    for r in tests {
        t.push(vec![
            Cell::text(&r.name),
            Cell::Num(r.statistic),
            Cell::opt(r.p_value),
            critical_cell(r),
            verdict(r),
        ]);
    }
    t
}

fn critical_values_table(key: &str, title: &str, r: &TestResult) -> Table {
    let mut t = Table::new(key, title, &["Significance level (%)", "Critical value"]);
    for (l, v) in &r.critical_values {
        t.push(vec![Cell::Num(*l), Cell::Num(*v)]);
    }
    t
}

pub fn dummies_table(d: &DummySet) -> Table {
    let mut t = Table::new("dummies", "Event dummies", &["Dummy", "Month", "Residual"]);
    for x in &d.dummies {
        t.push(vec![Cell::text(&x.name), Cell::text(x.month.iso_date()), Cell::Num(x.residual)]);
    }
    t
}

pub fn stability_table(cusum: &TestResult) -> Table {
    let mut t = Table::new(
        "stability",
        "Parameter stability (OLS-CUSUM)",
        &["Test", "Statistic", "p-value", "5% critical value", "Verdict"],
    );
    t.push(vec![
        Cell::text(&cusum.name),
        Cell::Num(cusum.statistic),
        Cell::opt(cusum.p_value),
        critical_cell(cusum),
        verdict(cusum),
    ]);
    t
}

pub fn risk_table(r: &RiskReport) -> Table {
    let mut t = Table::new("risk", "Value at risk (simple returns)", &["Confidence", "VaR", "CVaR"]);
    for row in &r.rows {
        t.push(vec![Cell::Num(row.level), Cell::Num(row.var), Cell::Num(row.cvar)]);
    }
    t
}

pub fn pca_table(p: &PcaResult) -> Table {
    let mut t = Table::new(
        "pca",
        "Principal components of the factors",
        &["Component", "Eigenvalue", "Proportion", "Cumulative"],
    );
    let mut cum = 0.0;
    for (i, (l, s)) in p.eigenvalues.iter().zip(&p.proportions).enumerate() {
        cum += s;
        t.push(vec![Cell::Int(i as i64 + 1), Cell::Num(*l), Cell::Num(*s), Cell::Num(cum)]);
    }
    t
}

pub fn impact_table(r: &ImpactReport) -> Table {
    let mut t = Table::new(
        "impact",
        &format!("Causal impact from {}", r.intervention),
        &["Metric", "Value", "Lower 95%", "Upper 95%"],
    );
    let ci = |name: &str, v: f64, (lo, hi): (f64, f64)| vec![Cell::text(name), Cell::Num(v), Cell::Num(lo), Cell::Num(hi)];
    let plain = |name: &str, v: Cell| vec![Cell::text(name), v, Cell::Empty, Cell::Empty];
    t.push(plain("Pre-period months", Cell::Int(r.pre_len as i64)));
    t.push(plain("Post-period months", Cell::Int(r.post_len as i64)));
    t.push(plain("Average actual", Cell::Num(r.average_actual)));
    t.push(ci("Average predicted", r.average_predicted, r.average_predicted_interval));
    t.push(ci("Average effect", r.average_effect, r.average_effect_interval));
    t.push(plain("Cumulative actual", Cell::Num(r.cumulative_actual)));
    t.push(ci("Cumulative predicted", r.cumulative_predicted, r.cumulative_predicted_interval));
    t.push(ci("Cumulative effect", r.cumulative_effect, r.cumulative_effect_interval));
    t.push(ci("Relative effect (%)", r.relative_effect_pct, r.relative_effect_interval));
    t.push(plain("Tail-area p-value", Cell::Num(r.p_value)));
    t
}

/// Per-month plot data: actual against counterfactual, pointwise and
/// cumulative effect. CSV only.
pub fn impact_series_table(r: &ImpactReport) -> Table {
    let mut t = Table::new(
        "impact_series",
        "Causal impact series",
        &["Month", "Actual", "Predicted", "Lower 95%", "Upper 95%", "Effect", "Cumulative effect"],
    );
    for p in &r.series {
        t.push(vec![
            Cell::text(p.month.iso_date()),
            Cell::Num(p.actual),
            Cell::Num(p.predicted),
            Cell::Num(p.lower),
            Cell::Num(p.upper),
            Cell::Num(p.effect),
            Cell::Num(p.cumulative_effect),
        ]);
    }
    t
}

impl PipelineReport {
    /// Tables in report order, each flagged with whether it appears in the
    /// markdown (the plot-data series is CSV only).
    pub fn tables(&self) -> Vec<(Table, bool)> {
        let baseline = quantile_table("baseline", "Baseline quantile regression, no dummies", std::slice::from_ref(&self.baseline));
        let mut baseline_fit = Table::new("baseline_fit", "Baseline fit", &["Quantile", "Pseudo R²", "Check loss", "Observations"]);
        baseline_fit.push(vec![
            Cell::Num(self.baseline.tau),
            Cell::opt(self.baseline.pseudo_r2),
            Cell::Num(self.baseline.check_loss),
            Cell::Int(self.baseline.residuals.len() as i64),
        ]);
        let ad = self.normality.iter().find(|r| !r.critical_values.is_empty());
        let mut out = vec![
            (metadata_table(&self.metadata), true),
            (descriptive_table(&self.descriptive), true),
            (baseline, true),
            (baseline_fit, true),
            (heteroskedasticity_table(&self.breusch_pagan), true),
            (autocorrelation_table(&self.breusch_godfrey, &self.durbin_watson), true),
            (normality_table(&self.normality), true),
        ];
        if let Some(ad) = ad {
            out.push((critical_values_table("anderson_darling_critical", "Anderson-Darling critical values", ad), true));
        }
        out.extend([
            (specification_table(&self.reset, &self.joint_f), true),
            (dummies_table(&self.dummies), true),
            (quantile_table("quantiles", "Quantile regression with event dummies", &self.fits), true),
            (fit_summary_table(self), true),
            (crossing_table(self), true),
            (stability_table(&self.cusum), true),
            (critical_values_table("cusum_critical", "OLS-CUSUM critical values", &self.cusum), true),
            (risk_table(&self.risk), true),
            (pca_table(&self.pca), true),
            (impact_table(&self.impact), true),
            (impact_series_table(&self.impact), false),
        ]);
        out
    }

    pub fn markdown(&self) -> Result<String> {
        let mut md = format!("# Quantile factor model report: {}\n\n", self.metadata.target);
        md.push_str("Estimates read `coef (se)` with bootstrap standard errors. ");
        md.push_str("One star marks significance at the five percent level, two stars at the one percent level. ");
        md.push_str("Tables round to two decimals; the CSV files next to this report carry full precision.\n\n");
        for (t, in_md) in self.tables() {
            if in_md {
                md.push_str(&t.markdown()?);
            }
        }
        Ok(md)
    }

    /// Renders everything, then writes `report.md` and one CSV per table
    /// into `dir`. If any write fails, files written so far are removed.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut files: Vec<(PathBuf, String)> = vec![(dir.join(REPORT_FILE), self.markdown()?)];
        for (t, _) in self.tables() {
            files.push((dir.join(format!("{}.csv", t.key)), t.csv()?));
        }
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::with_capacity(files.len());
        for (path, body) in files {
            if let Err(e) = fs::write(&path, body) {
                for p in &written {
                    let _ = fs::remove_file(p);
                }
                return Err(Error::io(&path, e).in_stage("write"));
            }
            written.push(path);
        }
        Ok(written)
    }
}
