use crate::error::{Error, Result};

/// `**` below 1%, `*` below 5%.
pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

/// Two-decimal rendering used in markdown; never prints `-0.00`.
pub fn fmt2(v: f64) -> String {
    if v.is_nan() {
        return "n/a".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

/// Shortest round-trip rendering used in CSV.
pub fn fmt_full(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Int(i64),
    Num(f64),
    /// Coefficient with optional bootstrap standard error and p-value;
    /// expands to three CSV columns.
    Estimate { coef: f64, se: Option<f64>, p: Option<f64> },
    Empty,
}

impl Cell {
    pub fn text(s: impl Into<String>) -> Self {
        Cell::Text(s.into())
    }

    pub fn opt(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }

    fn markdown(&self) -> String {
        match self {
            Cell::Text(s) => s.replace('|', "\\|"),
            Cell::Int(i) => i.to_string(),
            Cell::Num(v) => fmt2(*v),
            Cell::Estimate { coef, se, p } => {
                let mut s = format!("{}{}", fmt2(*coef), p.map_or("", stars));
                if let Some(se) = se {
                    s.push_str(&format!(" ({})", fmt2(*se)));
                }
                s
            }
            Cell::Empty => String::new(),
        }
    }

    fn csv(&self) -> Vec<String> {
        let opt = |v: &Option<f64>| v.map_or(String::new(), fmt_full);
        match self {
            Cell::Text(s) => vec![s.clone()],
            Cell::Int(i) => vec![i.to_string()],
            Cell::Num(v) => vec![fmt_full(*v)],
            Cell::Estimate { coef, se, p } => vec![fmt_full(*coef), opt(se), opt(p)],
            Cell::Empty => vec![String::new()],
        }
    }
}

/// One report table. `key` names its CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub key: String,
    pub title: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(key: &str, title: &str, headers: &[&str]) -> Self {
        Self {
            key: key.into(),
            title: title.into(),
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        self.rows.push(row);
    }

    /// Every row has one cell per header, and a column holding estimates
    /// holds nothing else (so the CSV header expansion is well defined).
    fn estimate_columns(&self) -> Result<Vec<bool>> {
        let k = self.headers.len();
        let mut est = vec![None; k];
        for (r, row) in self.rows.iter().enumerate() {
            if row.len() != k {
                return Err(Error::Internal(format!(
                    "table `{}` row {r} has {} cells for {k} columns",
                    self.key,
                    row.len()
                )));
            }
            for (j, cell) in row.iter().enumerate() {
                if matches!(cell, Cell::Empty) {
                    continue;
                }
                let is_est = matches!(cell, Cell::Estimate { .. });
                match est[j] {
                    None => est[j] = Some(is_est),
                    Some(prev) if prev != is_est => {
                        return Err(Error::Internal(format!(
                            "table `{}` column `{}` mixes estimates and plain values",
                            self.key, self.headers[j]
                        )))
                    }
                    _ => {}
                }
            }
        }
        Ok(est.into_iter().map(|e| e.unwrap_or(false)).collect())
    }

    pub fn markdown(&self) -> Result<String> {
        self.estimate_columns()?;
        let line = |cells: Vec<String>| format!("| {} |\n", cells.join(" | "));
        let mut out = format!("## {}\n\n", self.title);
        out.push_str(&line(self.headers.clone()));
        out.push_str(&line(self.headers.iter().map(|_| "---".to_string()).collect()));
        for row in &self.rows {
            out.push_str(&line(row.iter().map(Cell::markdown).collect()));
        }
        out.push('\n');
        Ok(out)
    }

    pub fn csv(&self) -> Result<String> {
        let est = self.estimate_columns()?;
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let mut header = Vec::new();
        for (h, e) in self.headers.iter().zip(&est) {
            header.push(h.clone());
            if *e {
                header.push(format!("{h}_se"));
                header.push(format!("{h}_p"));
            }
        }
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = Vec::new();
            for (cell, e) in row.iter().zip(&est) {
                match (cell, e) {
                    (Cell::Empty, true) => rec.extend([String::new(), String::new(), String::new()]),
                    _ => rec.extend(cell.csv()),
                }
            }
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Internal(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Internal(e.to_string()))
    }
}

/// CSV and markdown renderings of `table`.
pub fn emit_table(table: &Table) -> Result<(String, String)> {
    Ok((table.csv()?, table.markdown()?))
}
