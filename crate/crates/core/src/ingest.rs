//! FRED-style CSV input, run configuration and monthly panel assembly.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};

use crate::error::{Error, Result};
use crate::transform;

/// A calendar month. Ordering is chronological.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    year: i32,
    month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::Data(format!("month {month} out of range")));
        }
        Ok(Self { year, month })
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn month(self) -> u32 {
        self.month
    }

    /// Months since year 0, used for gap arithmetic.
    pub fn ordinal(self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    pub fn from_ordinal(ordinal: i64) -> Self {
        Self {
            year: ordinal.div_euclid(12) as i32,
            month: ordinal.rem_euclid(12) as u32 + 1,
        }
    }

    pub fn succ(self) -> Self {
        Self::from_ordinal(self.ordinal() + 1)
    }

    /// Number of months from `self` to `other`, inclusive of both ends.
    pub fn span_to(self, other: YearMonth) -> i64 {
        other.ordinal() - self.ordinal() + 1
    }

    /// First-of-month ISO date, the FRED monthly convention.
    pub fn iso_date(self) -> String {
        format!("{:04}-{:02}-01", self.year, self.month)
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = Error;

    /// Accepts `YYYY-MM` or a full ISO date `YYYY-MM-DD`; the day is discarded.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Ok(date) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
            return YearMonth::new(date.year(), date.month());
        }
        if let Ok(date) = NaiveDate::parse_from_str(&format!("{s}-01"), "%Y-%m-%d") {
            if s.len() == 7 {
                return YearMonth::new(date.year(), date.month());
            }
        }
        Err(Error::Data(format!("malformed date `{s}`")))
    }
}

/// One named monthly series. Missing observations are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    name: String,
    observations: Vec<(YearMonth, Option<f64>)>,
}

impl TimeSeries {
    pub fn new(name: impl Into<String>, observations: Vec<(YearMonth, Option<f64>)>) -> Result<Self> {
        let name = name.into();
        if name.trim().is_empty() {
            return Err(Error::Data("series name must be non-empty".into()));
        }
        for pair in observations.windows(2) {
            if pair[1].0 == pair[0].0 {
                return Err(Error::Data(format!("{name}: duplicate month {}", pair[1].0)));
            }
            if pair[1].0 < pair[0].0 {
                return Err(Error::Data(format!(
                    "{name}: dates out of order ({} follows {})",
                    pair[1].0, pair[0].0
                )));
            }
        }
        Ok(Self { name, observations })
    }

    /// Builds a gap-free series of present values starting at `start`.
    pub fn from_values(name: impl Into<String>, start: YearMonth, values: &[f64]) -> Result<Self> {
        let mut month = start;
        let mut obs = Vec::with_capacity(values.len());
        for &v in values {
            obs.push((month, Some(v)));
            month = month.succ();
        }
        Self::new(name, obs)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn observations(&self) -> &[(YearMonth, Option<f64>)] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn months(&self) -> impl Iterator<Item = YearMonth> + '_ {
        self.observations.iter().map(|(m, _)| *m)
    }

    /// Present values only, in date order. Errors if any value is missing.
    pub fn values(&self) -> Result<Vec<f64>> {
        self.observations
            .iter()
            .map(|(m, v)| v.ok_or_else(|| Error::Data(format!("{}: missing value at {m}", self.name))))
            .collect()
    }

    pub fn get(&self, month: YearMonth) -> Option<Option<f64>> {
        self.observations
            .binary_search_by_key(&month, |(m, _)| *m)
            .ok()
            .map(|i| self.observations[i].1)
    }

    pub fn in_window(&self, start: YearMonth, end: YearMonth) -> impl Iterator<Item = &(YearMonth, Option<f64>)> {
        self.observations.iter().filter(move |(m, _)| *m >= start && *m <= end)
    }
}

/// Reads a two-column FRED export (`DATE,<SERIESID>`). A value of `.` marks a
/// missing observation.
pub fn read_fred_csv(path: impl AsRef<Path>) -> Result<TimeSeries> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_fred_csv(&text, path)
}

pub(crate) fn parse_fred_csv(text: &str, path: &Path) -> Result<TimeSeries> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Data(format!("{}: empty file", path.display())))?;
    let name = header
        .split(',')
        .nth(1)
        .map(|s| s.trim().trim_matches('"').to_string())
        .filter(|s| !s.is_empty())
        .ok_or_else(|| parse_err(1, "header must be `DATE,<SERIESID>`".into()))?;

    let mut observations: Vec<(YearMonth, Option<f64>)> = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        let mut fields = raw.trim_end_matches('\r').split(',');
        let (date, value) = match (fields.next(), fields.next(), fields.next()) {
            (Some(d), Some(v), None) => (d.trim(), v.trim()),
            _ => return Err(parse_err(line, format!("expected two columns, got `{raw}`"))),
        };
        let month: YearMonth = date
            .parse()
            .map_err(|_| parse_err(line, format!("malformed date `{date}`")))?;
        let value = if value == "." {
            None
        } else {
            let v: f64 = value
                .parse()
                .map_err(|_| parse_err(line, format!("malformed value `{value}`")))?;
            Some(v)
        };
        if let Some((last, _)) = observations.last() {
            if *last == month {
                return Err(Error::Data(format!(
                    "{}:{line}: duplicate month {month}",
                    path.display()
                )));
            }
            if *last > month {
                return Err(Error::Data(format!(
                    "{}:{line}: dates out of order ({month} follows {last})",
                    path.display()
                )));
            }
        }
        observations.push((month, value));
    }
    if observations.is_empty() {
        return Err(Error::Data(format!("{}: no observations", path.display())));
    }
    TimeSeries::new(name, observations)
}

pub fn write_fred_csv(series: &TimeSeries, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, render_fred_csv(series)).map_err(|e| Error::io(path, e))
}

pub fn render_fred_csv(series: &TimeSeries) -> String {
    let mut out = format!("DATE,{}\n", series.name());
    for (month, value) in series.observations() {
        match value {
            Some(v) => out.push_str(&format!("{},{}\n", month.iso_date(), v)),
            None => out.push_str(&format!("{},.\n", month.iso_date())),
        }
    }
    out
}

/// How a raw level series becomes a regressor column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransformTag {
    /// `ln(p_t/p_{t-1}) - r_f(t)`
    ExcessLogReturn,
    /// `ln(v_t/v_{t-1})`
    LogChange,
    /// `ln(x_t/x_{t-1}) - ln(x_{t-1}/x_{t-2})`
    SecondLogDiff,
    Level,
    /// `x_t - x_{t-1}`, for series that can be zero or negative (yield spreads).
    Difference,
}

impl TransformTag {
    /// Leading observations consumed by the transform.
    pub fn lag(self) -> usize {
        match self {
            TransformTag::Level => 0,
            TransformTag::ExcessLogReturn | TransformTag::LogChange | TransformTag::Difference => 1,
            TransformTag::SecondLogDiff => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TransformTag::ExcessLogReturn => "excess-log-return",
            TransformTag::LogChange => "log-change",
            TransformTag::SecondLogDiff => "second-log-diff",
            TransformTag::Level => "level",
            TransformTag::Difference => "difference",
        }
    }
}

impl FromStr for TransformTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "excess-log-return" => Ok(TransformTag::ExcessLogReturn),
            "log-change" => Ok(TransformTag::LogChange),
            "second-log-diff" => Ok(TransformTag::SecondLogDiff),
            "level" => Ok(TransformTag::Level),
            "difference" => Ok(TransformTag::Difference),
            other => Err(Error::Config(format!("unknown transform tag `{other}`"))),
        }
    }
}

/// One regressor: which raw series, how to transform it, and its column name.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorSpec {
    pub series: String,
    pub transform: TransformTag,
    pub column: String,
}

/// A derived `long - short` series, e.g. the 5y-3m treasury spread.
#[derive(Debug, Clone, PartialEq)]
pub struct SpreadSpec {
    pub name: String,
    pub long: String,
    pub short: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data_dir: PathBuf,
    pub target: String,
    pub riskfree: String,
    pub factors: Vec<FactorSpec>,
    pub spreads: Vec<SpreadSpec>,
    pub start: YearMonth,
    pub end: YearMonth,
    pub quantiles: Vec<f64>,
    pub dummies: usize,
    pub bootstrap: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub quantile_normalize: bool,
    pub seasonal_dummies: bool,
    pub intervention: YearMonth,
    /// Raw series used as controls in the causal-impact regression. Empty
    /// means "every factor source series".
    pub impact_controls: Vec<String>,
    pub bg_lags: Vec<usize>,
}

impl RunConfig {
    /// Loads a `key = value` config file. Relative paths are resolved against
    /// the directory holding the file. `default_data_dir` is used when the
    /// file has no `data_dir` key.
    pub fn load(path: impl AsRef<Path>, default_data_dir: Option<&Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base, default_data_dir)
    }

    pub fn parse(text: &str, base_dir: &Path, default_data_dir: Option<&Path>) -> Result<Self> {
        let mut entries: BTreeMap<String, String> = BTreeMap::new();
        let mut spreads = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", idx + 1)))?;
            let key = key.trim();
            let value = value.trim();
            if let Some(name) = key.strip_prefix("spread.") {
                let (long, short) = value.split_once(" - ").ok_or_else(|| {
                    Error::Config(format!("line {}: spread must read `LONG - SHORT`", idx + 1))
                })?;
                spreads.push(SpreadSpec {
                    name: name.trim().to_string(),
                    long: long.trim().to_string(),
                    short: short.trim().to_string(),
                });
                continue;
            }
            if entries.insert(key.to_string(), value.to_string()).is_some() {
                return Err(Error::Config(format!("duplicate key `{key}`")));
            }
        }

        let take = |entries: &mut BTreeMap<String, String>, key: &str| entries.remove(key);
        let require = |entries: &mut BTreeMap<String, String>, key: &str| {
            entries
                .remove(key)
                .filter(|v| !v.is_empty())
                .ok_or_else(|| Error::Config(format!("missing required key `{key}`")))
        };
        let resolve = |p: &str| {
            let p = PathBuf::from(p);
            if p.is_absolute() {
                p
            } else {
                base_dir.join(p)
            }
        };

        let target = require(&mut entries, "target")?;
        let riskfree = require(&mut entries, "riskfree")?;
        let data_dir = match take(&mut entries, "data_dir") {
            Some(d) => resolve(&d),
            None => default_data_dir
                .map(Path::to_path_buf)
                .ok_or_else(|| Error::Config("no data directory: set `data_dir` or APTQR_DATA_DIR".into()))?,
        };
        let factors = list(&require(&mut entries, "factors")?)
            .into_iter()
            .map(|item| parse_factor(&item))
            .collect::<Result<Vec<_>>>()?;
        let start: YearMonth = parse_with(&require(&mut entries, "start")?, "start")?;
        let end: YearMonth = parse_with(&require(&mut entries, "end")?, "end")?;
        let quantiles = match take(&mut entries, "quantiles") {
            Some(v) => list(&v)
                .iter()
                .map(|s| parse_with::<f64>(s, "quantiles"))
                .collect::<Result<Vec<_>>>()?,
            None => vec![0.25, 0.5, 0.75, 0.9],
        };
        let dummies = opt_parse(take(&mut entries, "dummies"), "dummies")?.unwrap_or(2);
        let bootstrap = opt_parse(take(&mut entries, "bootstrap"), "bootstrap")?.unwrap_or(1000);
        let seed = opt_parse(take(&mut entries, "seed"), "seed")?.unwrap_or(42);
        let output_dir = resolve(&take(&mut entries, "output_dir").unwrap_or_else(|| "out".into()));
        let quantile_normalize =
            opt_parse(take(&mut entries, "quantile_normalize"), "quantile_normalize")?.unwrap_or(false);
        let seasonal_dummies =
            opt_parse(take(&mut entries, "seasonal_dummies"), "seasonal_dummies")?.unwrap_or(false);
        let intervention = match take(&mut entries, "intervention") {
            Some(v) => parse_with(&v, "intervention")?,
            None => YearMonth::new(2020, 3)?,
        };
        let impact_controls = take(&mut entries, "impact_controls")
            .map(|v| list(&v))
            .unwrap_or_default();
        let bg_lags = match take(&mut entries, "bg_lags") {
            Some(v) => list(&v)
                .iter()
                .map(|s| parse_with::<usize>(s, "bg_lags"))
                .collect::<Result<Vec<_>>>()?,
            None => vec![6, 12, 24],
        };
        if let Some(key) = entries.keys().next() {
            return Err(Error::Config(format!("unknown key `{key}`")));
        }

        let config = RunConfig {
            data_dir,
            target,
            riskfree,
            factors,
            spreads,
            start,
            end,
            quantiles,
            dummies,
            bootstrap,
            seed,
            output_dir,
            quantile_normalize,
            seasonal_dummies,
            intervention,
            impact_controls,
            bg_lags,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.quantiles.is_empty() {
            return Err(Error::Config("quantile list is empty".into()));
        }
        if let Some(t) = self.quantiles.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
            return Err(Error::Config(format!("quantile {t} not in (0, 1)")));
        }
        if self.quantiles.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("quantiles must be strictly increasing".into()));
        }
        if self.bootstrap < 100 {
            return Err(Error::Config(format!("bootstrap = {} (< 100)", self.bootstrap)));
        }
        if self.start.span_to(self.end) < 24 {
            return Err(Error::Config(format!(
                "sample window {}..{} spans fewer than 24 months",
                self.start, self.end
            )));
        }
        if self.factors.is_empty() {
            return Err(Error::Config("no factors configured".into()));
        }
        let mut seen = HashSet::new();
        for f in &self.factors {
            if !seen.insert(f.column.as_str()) {
                return Err(Error::Config(format!("duplicate factor column `{}`", f.column)));
            }
            if f.column.starts_with("D_") || f.column.starts_with("M_") || f.column == "Intercept" {
                return Err(Error::Config(format!("factor column name `{}` is reserved", f.column)));
            }
        }
        Ok(())
    }

    /// Every raw series name the run reads from disk, in first-mention order.
    pub fn required_series(&self) -> Vec<String> {
        let spread_names: HashSet<&str> = self.spreads.iter().map(|s| s.name.as_str()).collect();
        let mut out: Vec<String> = Vec::new();
        let mut push = |name: &str| {
            if !spread_names.contains(name) && !out.iter().any(|n| n == name) {
                out.push(name.to_string());
            }
        };
        push(&self.target);
        push(&self.riskfree);
        for f in &self.factors {
            push(&f.series);
        }
        for s in &self.spreads {
            push(&s.long);
            push(&s.short);
        }
        for c in &self.impact_controls {
            push(c);
        }
        out
    }

    pub fn controls(&self) -> Vec<String> {
        if !self.impact_controls.is_empty() {
            return self.impact_controls.clone();
        }
        let mut out: Vec<String> = Vec::new();
        for f in &self.factors {
            if !out.contains(&f.series) {
                out.push(f.series.clone());
            }
        }
        out
    }

    /// Loads every required series as `<data_dir>/<NAME>.csv`.
    pub fn load_series(&self) -> Result<Vec<TimeSeries>> {
        self.required_series()
            .iter()
            .map(|name| {
                let path = self.data_dir.join(format!("{name}.csv"));
                if !path.exists() {
                    return Err(Error::Config(format!(
                        "series `{name}` not found (expected {})",
                        path.display()
                    )));
                }
                let series = read_fred_csv(&path)?;
                // File name wins over header so configs can rename exports.
                TimeSeries::new(name.clone(), series.observations)
            })
            .collect()
    }
}

fn list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

fn parse_with<T: FromStr>(value: &str, key: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
}

fn opt_parse<T: FromStr>(value: Option<String>, key: &str) -> Result<Option<T>> {
    value.map(|v| parse_with(&v, key)).transpose()
}

/// `SERIES:tag[:column]`
fn parse_factor(item: &str) -> Result<FactorSpec> {
    let parts: Vec<&str> = item.split(':').map(str::trim).collect();
    let (series, tag, column) = match parts.as_slice() {
        [s, t] => (*s, *t, *s),
        [s, t, c] => (*s, *t, *c),
        _ => return Err(Error::Config(format!("factor `{item}` must read SERIES:tag[:column]"))),
    };
    if series.is_empty() || column.is_empty() {
        return Err(Error::Config(format!("factor `{item}` has an empty name")));
    }
    Ok(FactorSpec {
        series: series.to_string(),
        transform: tag.parse()?,
        column: column.to_string(),
    })
}

/// Aligned matrix of raw levels, one column per series.
#[derive(Debug, Clone, PartialEq)]
pub struct RawPanel {
    pub months: Vec<YearMonth>,
    pub columns: Vec<(String, Vec<f64>)>,
}

impl RawPanel {
    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
            .ok_or_else(|| Error::Config(format!("series `{name}` not in panel")))
    }

    pub fn series(&self, name: &str) -> Result<TimeSeries> {
        let values = self.column(name)?;
        TimeSeries::new(
            name,
            self.months.iter().copied().zip(values.iter().map(|v| Some(*v))).collect(),
        )
    }

    pub fn n_rows(&self) -> usize {
        self.months.len()
    }
}

/// Inner-joins the configured series on month over `[start, end]`, dropping
/// any month where a configured series is missing or absent.
pub fn assemble_panel(series: &[TimeSeries], config: &RunConfig) -> Result<RawPanel> {
    let mut by_name: HashMap<&str, &TimeSeries> = HashMap::new();
    for s in series {
        if by_name.insert(s.name(), s).is_some() {
            return Err(Error::Data(format!("series `{}` supplied twice", s.name())));
        }
    }
    let mut derived: Vec<TimeSeries> = Vec::new();
    for spec in &config.spreads {
        let long = lookup(&by_name, &spec.long)?;
        let short = lookup(&by_name, &spec.short)?;
        let long = restrict(long, config.start, config.end)?;
        let short = restrict(short, config.start, config.end)?;
        let mut spread = transform::spread(&long, &short)?;
        spread.name = spec.name.clone();
        derived.push(spread);
    }
    for d in &derived {
        by_name.insert(d.name(), d);
    }

    let mut columns: Vec<String> = Vec::new();
    let mut add = |name: &str| {
        if !columns.iter().any(|c| c == name) {
            columns.push(name.to_string());
        }
    };
    add(&config.target);
    add(&config.riskfree);
    for f in &config.factors {
        add(&f.series);
    }
    for c in config.controls().iter() {
        add(c);
    }
    let members: Vec<&TimeSeries> = columns
        .iter()
        .map(|name| lookup(&by_name, name))
        .collect::<Result<_>>()?;

    let mut months = Vec::new();
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); members.len()];
    let mut month = config.start;
    while month <= config.end {
        let row: Option<Vec<f64>> = members.iter().map(|s| s.get(month).flatten()).collect();
        if let Some(row) = row {
            if row.iter().all(|v| v.is_finite()) {
                months.push(month);
                for (col, v) in values.iter_mut().zip(row) {
                    col.push(v);
                }
            }
        }
        month = month.succ();
    }
    if months.is_empty() {
        return Err(Error::Data(format!(
            "empty intersection of configured series over {}..{}",
            config.start, config.end
        )));
    }
    Ok(RawPanel {
        months,
        columns: columns.into_iter().zip(values).collect(),
    })
}

fn lookup<'a>(by_name: &HashMap<&str, &'a TimeSeries>, name: &str) -> Result<&'a TimeSeries> {
    by_name
        .get(name)
        .copied()
        .ok_or_else(|| Error::Config(format!("configured series `{name}` not supplied")))
}

fn restrict(series: &TimeSeries, start: YearMonth, end: YearMonth) -> Result<TimeSeries> {
    TimeSeries::new(series.name(), series.in_window(start, end).copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ym(s: &str) -> YearMonth {
        s.parse().unwrap()
    }

    fn parse(text: &str) -> Result<TimeSeries> {
        parse_fred_csv(text, Path::new("test.csv"))
    }

    #[test]
    fn reads_two_rows() {
        let s = parse("DATE,DCOILWTICO\n2020-04-01,16.55\n2020-05-01,28.56\n").unwrap();
        assert_eq!(s.name(), "DCOILWTICO");
        assert_eq!(
            s.observations(),
            &[(ym("2020-04"), Some(16.55)), (ym("2020-05"), Some(28.56))]
        );
    }

    #[test]
    fn dot_is_missing_and_crlf_is_accepted() {
        let s = parse("DATE,VIX\r\n2020-04-01,.\r\n2020-05-15,28.5\r\n").unwrap();
        assert_eq!(s.observations()[0], (ym("2020-04"), None));
        // mid-month dates coerce to the containing month
        assert_eq!(s.observations()[1], (ym("2020-05"), Some(28.5)));
    }

    #[test]
    fn out_of_order_and_duplicates_are_errors() {
        let err = parse("DATE,X\n2020-05-01,1\n2020-04-01,2\n").unwrap_err();
        assert!(matches!(err, Error::Data(_)), "{err}");
        let err = parse("DATE,X\n2020-05-01,1\n2020-05-20,2\n").unwrap_err();
        assert!(matches!(err, Error::Data(m) if m.contains("duplicate")));
    }

    #[test]
    fn malformed_date_names_line() {
        let err = parse("DATE,X\n2020-05-01,1\n2020/06/01,2\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn empty_file_is_data_error() {
        assert!(matches!(parse(""), Err(Error::Data(_))));
        assert!(matches!(parse("DATE,X\n"), Err(Error::Data(_))));
    }

    #[test]
    fn year_month_roundtrip() {
        let m = ym("2019-12");
        assert_eq!(m.succ(), ym("2020-01"));
        assert_eq!(YearMonth::from_ordinal(m.ordinal()), m);
        assert_eq!(m.to_string(), "2019-12");
        assert_eq!(m.iso_date(), "2019-12-01");
        assert!("2019-13".parse::<YearMonth>().is_err());
        assert_eq!(ym("2018-01").span_to(ym("2022-12")), 60);
    }

    fn config(text: &str) -> Result<RunConfig> {
        RunConfig::parse(text, Path::new("/cfg"), None)
    }

    const BASE: &str = "data_dir = data\ntarget = WTI\nriskfree = TB3\nfactors = A:level, B:second-log-diff:dB\nstart = 2018-01\nend = 2022-12\n";

    #[test]
    fn config_defaults_and_paths() {
        let c = config(BASE).unwrap();
        assert_eq!(c.data_dir, PathBuf::from("/cfg/data"));
        assert_eq!(c.quantiles, vec![0.25, 0.5, 0.75, 0.9]);
        assert_eq!(c.dummies, 2);
        assert_eq!(c.bootstrap, 1000);
        assert_eq!(c.factors[1].column, "dB");
        assert_eq!(c.factors[1].transform, TransformTag::SecondLogDiff);
        assert_eq!(c.controls(), vec!["A", "B"]);
    }

    #[test]
    fn config_rejects_bad_values() {
        assert!(matches!(config(&format!("{BASE}quantiles = 0.5, 0.25\n")), Err(Error::Config(_))));
        assert!(matches!(config(&format!("{BASE}quantiles = 0.5, 1.0\n")), Err(Error::Config(_))));
        assert!(matches!(config(&format!("{BASE}bootstrap = 99\n")), Err(Error::Config(_))));
        assert!(matches!(config(&format!("{BASE}colour = blue\n")), Err(Error::Config(_))));
        let short = BASE.replace("start = 2018-01", "start = 2021-06");
        assert!(matches!(config(&short), Err(Error::Config(_))));
        let no_target = BASE.replace("target = WTI\n", "");
        assert!(matches!(config(&no_target), Err(Error::Config(m)) if m.contains("target")));
        let bad_tag = BASE.replace("A:level", "A:cube-root");
        assert!(matches!(config(&bad_tag), Err(Error::Config(m)) if m.contains("cube-root")));
    }

    #[test]
    fn config_comments_and_spreads() {
        let c = config(&format!("# header\n{BASE}spread.SPREAD = DGS5 - DGS3MO # derived\n")).unwrap();
        assert_eq!(
            c.spreads,
            vec![SpreadSpec {
                name: "SPREAD".into(),
                long: "DGS5".into(),
                short: "DGS3MO".into()
            }]
        );
        assert_eq!(c.required_series(), vec!["WTI", "TB3", "A", "B", "DGS5", "DGS3MO"]);
    }

    fn full(name: &str, start: &str, n: usize, v: f64) -> TimeSeries {
        TimeSeries::from_values(name, ym(start), &vec![v; n]).unwrap()
    }

    fn small_config(factors: &str) -> RunConfig {
        config(&format!(
            "data_dir = d\ntarget = WTI\nriskfree = TB3\nfactors = {factors}\nstart = 2018-01\nend = 2022-12\n"
        ))
        .unwrap()
    }

    #[test]
    fn full_overlap_gives_sixty_rows() {
        let cfg = small_config("A:level");
        let series = vec![full("WTI", "2018-01", 60, 50.0), full("TB3", "2018-01", 60, 1.0), full("A", "2017-01", 80, 3.0)];
        let panel = assemble_panel(&series, &cfg).unwrap();
        assert_eq!(panel.n_rows(), 60);
        let names: Vec<&str> = panel.columns.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(names, vec!["WTI", "TB3", "A"]);
    }

    #[test]
    fn missing_month_is_dropped() {
        let cfg = small_config("A:level");
        let mut obs: Vec<_> = full("A", "2018-01", 60, 3.0).observations().to_vec();
        obs[26].1 = None; // 2020-03
        let a = TimeSeries::new("A", obs).unwrap();
        let series = vec![full("WTI", "2018-01", 60, 50.0), full("TB3", "2018-01", 60, 1.0), a];
        let panel = assemble_panel(&series, &cfg).unwrap();
        assert_eq!(panel.n_rows(), 59);
        assert!(!panel.months.contains(&ym("2020-03")));
    }

    #[test]
    fn disjoint_windows_and_missing_series() {
        let cfg = small_config("A:level");
        let series = vec![full("WTI", "2018-01", 24, 50.0), full("TB3", "2020-01", 36, 1.0), full("A", "2018-01", 60, 3.0)];
        assert!(matches!(assemble_panel(&series, &cfg), Err(Error::Data(m)) if m.contains("empty")));
        let series = vec![full("WTI", "2018-01", 60, 50.0), full("TB3", "2018-01", 60, 1.0)];
        assert!(matches!(assemble_panel(&series, &cfg), Err(Error::Config(_))));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn csv_roundtrip(values in proptest::collection::vec(proptest::option::weighted(0.9, -1e6f64..1e6), 1..40), start in 0i64..3000) {
                let obs: Vec<_> = values.iter().enumerate()
                    .map(|(i, v)| (YearMonth::from_ordinal(24000 + start + i as i64), *v))
                    .collect();
                let s = TimeSeries::new("SER", obs).unwrap();
                let back = parse_fred_csv(&render_fred_csv(&s), Path::new("x")).unwrap();
                prop_assert_eq!(back, s);
            }

            #[test]
            fn panel_rows_bounded_and_complete(holes in proptest::collection::vec(proptest::bool::weighted(0.15), 60)) {
                let cfg = small_config("A:level");
                let mut obs: Vec<_> = full("A", "2018-01", 60, 3.0).observations().to_vec();
                for (o, h) in obs.iter_mut().zip(&holes) {
                    if *h { o.1 = None; }
                }
                let a = TimeSeries::new("A", obs).unwrap();
                let present = holes.iter().filter(|h| !**h).count();
                let series = vec![full("WTI", "2018-01", 60, 50.0), full("TB3", "2018-01", 60, 1.0), a];
                match assemble_panel(&series, &cfg) {
                    Ok(p) => {
                        prop_assert!(p.n_rows() <= present);
                        prop_assert!(p.columns.iter().all(|(_, c)| c.len() == p.n_rows() && c.iter().all(|v| v.is_finite())));
                    }
                    Err(_) => prop_assert_eq!(present, 0),
                }
            }
        }
    }
}
