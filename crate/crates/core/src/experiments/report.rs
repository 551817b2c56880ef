//! Result types and the CSV writer.

use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

use crate::error::Result;
use crate::group::GroupElement;
use crate::spaces::NormReport;

/// Value of the `schema` column; bumped whenever columns change.
pub const SCHEMA: &str = "hmorrey-csv/1";

pub const COLUMNS: [&str; 15] = [
    "schema",
    "experiment",
    "kind",
    "series",
    "label",
    "param",
    "input",
    "output",
    "ratio",
    "value",
    "witness_center",
    "witness_radius",
    "balls_tested",
    "convergence",
    "passed",
];

/// One CSV row. Columns that do not apply to a row kind are left empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Record {
    pub schema: String,
    pub experiment: String,
    /// `ratio`, `summary`, `diagnostic`, `check`, `norm`, `kernel` or `rho`.
    pub kind: String,
    pub series: String,
    pub label: String,
    pub param: Option<f64>,
    pub input: Option<f64>,
    pub output: Option<f64>,
    pub ratio: Option<f64>,
    pub value: Option<f64>,
    pub witness_center: Option<String>,
    pub witness_radius: Option<f64>,
    pub balls_tested: Option<usize>,
    pub convergence: Option<f64>,
    pub passed: Option<bool>,
}

impl Record {
    pub fn new(experiment: &str, kind: &str, series: &str, label: &str) -> Self {
        Self {
            schema: SCHEMA.into(),
            experiment: experiment.into(),
            kind: kind.into(),
            series: series.into(),
            label: label.into(),
            ..Default::default()
        }
    }

    pub fn with_norm(mut self, r: &NormReport) -> Self {
        self.value = Some(r.value);
        self.witness_center = Some(format_point(&r.witness.center));
        self.witness_radius = Some(r.witness.radius);
        self.balls_tested = Some(r.balls_tested);
        self.convergence = Some(r.convergence);
        self
    }
}

/// Coordinates joined by `;`.
pub fn format_point(u: &GroupElement) -> String {
    u.coords().iter().map(|c| c.to_string()).collect::<Vec<_>>().join(";")
}

/// Ratio of one test function in one series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub series: String,
    pub label: String,
    pub param: f64,
    pub input_norm: f64,
    pub output_norm: f64,
    pub ratio: f64,
    pub output: NormReport,
}

/// Max ratio of a series on the base family and on the doubled family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub series: String,
    pub param: f64,
    pub max_ratio: f64,
    pub max_ratio_doubled: f64,
    /// `|max_doubled − max| / max`.
    pub drift: f64,
}

impl Summary {
    pub fn new(series: &str, param: f64, max_ratio: f64, max_ratio_doubled: f64) -> Self {
        Self {
            series: series.into(),
            param,
            max_ratio,
            max_ratio_doubled,
            drift: (max_ratio_doubled - max_ratio).abs() / max_ratio,
        }
    }

    /// Finite and within `tol` under doubling.
    pub fn stable(&self, tol: f64) -> bool {
        self.max_ratio.is_finite() && self.max_ratio_doubled.is_finite() && self.max_ratio > 0.0 && self.drift <= tol
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub label: String,
    pub param: Option<f64>,
    pub value: f64,
    pub passed: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct RatioReport {
    pub experiment: String,
    pub rows: Vec<RatioRow>,
    pub summaries: Vec<Summary>,
    pub diagnostics: Vec<Diagnostic>,
    /// Index into `summaries` of the headline series.
    pub primary: usize,
}

impl RatioReport {
    pub fn primary(&self) -> &Summary {
        &self.summaries[self.primary]
    }

    pub fn summary(&self, series: &str) -> Option<&Summary> {
        self.summaries.iter().find(|s| s.series == series)
    }

    pub fn diagnostic(&self, label: &str) -> Option<&Diagnostic> {
        self.diagnostics.iter().find(|d| d.label == label)
    }

    pub fn max_ratio(&self) -> f64 {
        self.primary().max_ratio
    }

    /// Drift of the headline max ratio under family doubling.
    pub fn stability(&self) -> f64 {
        self.primary().drift
    }

    pub fn records(&self) -> Vec<Record> {
        let exp = &self.experiment;
        let mut out = Vec::new();
        for r in &self.rows {
            let mut rec = Record::new(exp, "ratio", &r.series, &r.label).with_norm(&r.output);
            rec.param = Some(r.param);
            rec.input = Some(r.input_norm);
            rec.output = Some(r.output_norm);
            rec.ratio = Some(r.ratio);
            out.push(rec);
        }
        for (i, s) in self.summaries.iter().enumerate() {
            let label = if i == self.primary { "primary" } else { "" };
            let mut rec = Record::new(exp, "summary", &s.series, label);
            rec.param = Some(s.param);
            rec.input = Some(s.max_ratio);
            rec.output = Some(s.max_ratio_doubled);
            rec.ratio = Some(s.max_ratio);
            rec.value = Some(s.drift);
            rec.passed = Some(s.stable(0.1));
            out.push(rec);
        }
        out.extend(self.diagnostics.iter().map(|d| diagnostic_record(exp, d)));
        out
    }
}

pub fn diagnostic_record(exp: &str, d: &Diagnostic) -> Record {
    let mut rec = Record::new(exp, "diagnostic", "", &d.label);
    rec.param = d.param;
    rec.value = Some(d.value);
    rec.passed = d.passed;
    rec
}

/// Result of one inequality check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub name: String,
    pub instances: usize,
    pub violations: usize,
    /// Smallest `rhs/lhs` over instances (at least 1 when nothing is violated).
    pub min_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct CheckReport {
    pub experiment: String,
    pub checks: Vec<CheckRow>,
    pub diagnostics: Vec<Diagnostic>,
}

impl CheckReport {
    pub fn total_violations(&self) -> usize {
        self.checks.iter().map(|c| c.violations).sum()
    }

    pub fn check(&self, name: &str) -> Option<&CheckRow> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn records(&self) -> Vec<Record> {
        let mut out: Vec<Record> = self
            .checks
            .iter()
            .map(|c| {
                let mut rec = Record::new(&self.experiment, "check", "", &c.name);
                rec.param = Some(c.instances as f64);
                rec.value = Some(c.violations as f64);
                rec.ratio = Some(c.min_margin);
                rec.passed = Some(c.violations == 0);
                rec
            })
            .collect();
        out.extend(self.diagnostics.iter().map(|d| diagnostic_record(&self.experiment, d)));
        out
    }
}

/// Writes records with a header row. Floats use Rust's shortest round-trip
/// formatting, so output is byte-identical across runs.
pub fn write_csv<W: Write>(w: W, records: &[Record]) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(true).from_writer(w);
    if records.is_empty() {
        wtr.write_record(COLUMNS)?;
    }
    for r in records {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_csv_file(path: &Path, records: &[Record]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_csv(std::fs::File::create(path)?, records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_carries_schema_column() {
        let mut buf = Vec::new();
        let mut r = Record::new("hls", "summary", "hls", "primary");
        r.ratio = Some(0.125);
        write_csv(&mut buf, &[r]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("schema,experiment,kind,series,label,param"));
        assert!(lines.next().unwrap().starts_with("hmorrey-csv/1,hls,summary,hls,primary,,,,0.125"));
    }
}
