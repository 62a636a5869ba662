use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalCell {
    pub method: String,
    pub ood_split: String,
    pub auroc: f64,
    pub fpr95: f64,
    pub n_id: usize,
    pub n_ood: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedCell {
    pub method: String,
    pub ood_split: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub id_accuracy: Option<f64>,
    pub cells: Vec<EvalCell>,
    #[serde(default)]
    pub failures: Vec<FailedCell>,
    #[serde(default)]
    pub config: serde_json::Value,
}

#[derive(Debug, Clone, Default)]
pub struct ReportMeta {
    pub dataset: String,
    pub id_accuracy: Option<f64>,
    pub failures: Vec<FailedCell>,
    pub config: serde_json::Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Csv,
    Json,
}

impl Format {
    pub fn extension(&self) -> &'static str {
        match self {
            Format::Text => "txt",
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "text" | "txt" => Ok(Format::Text),
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Config(format!(
                "unknown report format '{other}' (text, csv, json)"
            ))),
        }
    }
}

pub fn build_report(cells: Vec<EvalCell>, meta: ReportMeta) -> Result<EvalReport> {
    let mut seen = HashSet::new();
    for c in &cells {
        if !seen.insert((c.method.as_str(), c.ood_split.as_str())) {
            return Err(Error::DuplicateCell {
                method: c.method.clone(),
                ood_split: c.ood_split.clone(),
            });
        }
        if !(0.0..=1.0).contains(&c.auroc) || !(0.0..=1.0).contains(&c.fpr95) {
            return Err(Error::Config(format!(
                "cell ({}, {}) has metrics outside [0, 1]",
                c.method, c.ood_split
            )));
        }
        if c.n_id == 0 || c.n_ood == 0 {
            return Err(Error::Config(format!(
                "cell ({}, {}) has an empty side",
                c.method, c.ood_split
            )));
        }
    }
    Ok(EvalReport {
        dataset: meta.dataset,
        id_accuracy: meta.id_accuracy,
        cells,
        failures: meta.failures,
        config: meta.config,
    })
}

fn first_seen<'a>(items: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut out: Vec<&str> = Vec::new();
    for s in items {
        if !out.contains(&s) {
            out.push(s);
        }
    }
    out
}

impl EvalReport {
    pub fn methods(&self) -> Vec<&str> {
        first_seen(
            self.cells
                .iter()
                .map(|c| c.method.as_str())
                .chain(self.failures.iter().map(|f| f.method.as_str())),
        )
    }

    pub fn ood_splits(&self) -> Vec<&str> {
        first_seen(
            self.cells
                .iter()
                .map(|c| c.ood_split.as_str())
                .chain(self.failures.iter().map(|f| f.ood_split.as_str())),
        )
    }

    pub fn cell(&self, method: &str, ood_split: &str) -> Option<&EvalCell> {
        self.cells
            .iter()
            .find(|c| c.method == method && c.ood_split == ood_split)
    }

    fn render_text(&self) -> String {
        let methods = self.methods();
        let splits = self.ood_splits();
        let mut best: BTreeMap<&str, f64> = BTreeMap::new();
        for c in &self.cells {
            let e = best
                .entry(c.ood_split.as_str())
                .or_insert(f64::NEG_INFINITY);
            *e = e.max(c.auroc);
        }
        let name_w = methods.iter().map(|m| m.len()).max().unwrap_or(0).max(6);
        let col_w = splits.iter().map(|s| s.len()).max().unwrap_or(0).max(7);

        let mut out = String::new();
        let _ = writeln!(out, "dataset: {}", self.dataset);
        if let Some(acc) = self.id_accuracy {
            let _ = writeln!(out, "ID accuracy: {:.2}%", acc * 100.0);
        }
        let _ = writeln!(out, "AUROC (%)");
        let _ = write!(out, "{:<name_w$}", "method");
        for s in &splits {
            let _ = write!(out, "  {s:>col_w$}");
        }
        out.push('\n');
        for m in &methods {
            let _ = write!(out, "{m:<name_w$}");
            for s in &splits {
                let text = match self.cell(m, s) {
                    Some(c) => {
                        let mark = if best.get(s) == Some(&c.auroc) {
                            "*"
                        } else {
                            " "
                        };
                        format!("{:.2}{mark}", c.auroc * 100.0)
                    }
                    None if self
                        .failures
                        .iter()
                        .any(|f| f.method == *m && f.ood_split == *s) =>
                    {
                        "failed ".to_string()
                    }
                    None => "- ".to_string(),
                };
                let _ = write!(out, "  {text:>col_w$}");
            }
            out.push('\n');
        }
        for f in &self.failures {
            let _ = writeln!(out, "failed: {} on {}: {}", f.method, f.ood_split, f.error);
        }
        out
    }

    fn render_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["method", "ood_split", "auroc", "fpr95", "n_id", "n_ood"])?;
        for c in &self.cells {
            w.write_record([
                c.method.clone(),
                c.ood_split.clone(),
                c.auroc.to_string(),
                c.fpr95.to_string(),
                c.n_id.to_string(),
                c.n_ood.to_string(),
            ])?;
        }
        w.into_inner()
            .map_err(|e| Error::Config(format!("csv flush failed: {e}")))
    }
}

pub fn render_report(report: &EvalReport, format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Text => Ok(report.render_text().into_bytes()),
        Format::Csv => report.render_csv(),
        Format::Json => {
            let mut bytes = serde_json::to_vec_pretty(report)?;
            bytes.push(b'\n');
            Ok(bytes)
        }
    }
}

/// Cells from a rendered CSV report.
pub fn parse_csv(bytes: &[u8]) -> Result<Vec<EvalCell>> {
    let mut r = csv::Reader::from_reader(bytes);
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Per-cell median AUROC and FPR over several runs of the same grid.
/// A cell appears only if it succeeded in every run.
pub fn median_report(runs: &[EvalReport], meta: ReportMeta) -> Result<EvalReport> {
    let first = runs.first().ok_or(Error::EmptyInput("report list"))?;
    let mut cells = Vec::new();
    let mut failures = meta.failures.clone();
    for c in &first.cells {
        let matched: Vec<&EvalCell> = runs
            .iter()
            .filter_map(|r| r.cell(&c.method, &c.ood_split))
            .collect();
        if matched.len() != runs.len() {
            failures.push(FailedCell {
                method: c.method.clone(),
                ood_split: c.ood_split.clone(),
                error: format!("succeeded in {} of {} runs", matched.len(), runs.len()),
            });
            continue;
        }
        cells.push(EvalCell {
            method: c.method.clone(),
            ood_split: c.ood_split.clone(),
            auroc: median(matched.iter().map(|m| m.auroc).collect()),
            fpr95: median(matched.iter().map(|m| m.fpr95).collect()),
            n_id: c.n_id,
            n_ood: c.n_ood,
        });
    }
    for f in &first.failures {
        if !failures
            .iter()
            .any(|g| g.method == f.method && g.ood_split == f.ood_split)
        {
            failures.push(f.clone());
        }
    }
    let accs: Vec<f64> = runs.iter().filter_map(|r| r.id_accuracy).collect();
    build_report(
        cells,
        ReportMeta {
            id_accuracy: meta
                .id_accuracy
                .or_else(|| (accs.len() == runs.len()).then(|| median(accs))),
            failures,
            ..meta
        },
    )
}
