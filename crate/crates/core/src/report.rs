//! Report rendering. Every float is rounded to 6 significant digits and
//! every absent optional value is written as `n/a`.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde_json::Value;

use crate::classifiers::Metrics;
use crate::error::{Error, Result};
use crate::model::write_atomic;
use crate::pipeline::RunReport;

pub const NA: &str = "n/a";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
            ReportFormat::Markdown => "md",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            _ => Err(Error::Config(format!("unknown report format `{s}`"))),
        }
    }
}

/// Round to 6 significant digits.
pub fn round6(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.5e}").parse().unwrap_or(x)
}

fn num(x: f64) -> String {
    format!("{}", round6(x))
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| NA.to_string(), num)
}

fn round_value(v: &mut Value) {
    match v {
        Value::Null => *v = Value::String(NA.into()),
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().and_then(|x| serde_json::Number::from_f64(round6(x))) {
                *n = r;
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_value),
        Value::Object(o) => o.values_mut().for_each(round_value),
        _ => {}
    }
}

fn restore_na(v: &mut Value) {
    match v {
        Value::String(s) if s == NA => *v = Value::Null,
        Value::Array(a) => a.iter_mut().for_each(restore_na),
        Value::Object(o) => o.values_mut().for_each(restore_na),
        _ => {}
    }
}

pub fn render_json(report: &RunReport) -> Result<String> {
    let mut v = serde_json::to_value(report)?;
    round_value(&mut v);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

/// Parse a JSON report written by [`render_json`]. Values come back rounded.
pub fn parse_json(text: &str) -> Result<RunReport> {
    let mut v: Value = serde_json::from_str(text)?;
    if let Value::Object(o) = &mut v {
        for (k, field) in o.iter_mut() {
            // Config values are free-form strings and are left alone.
            if k != "config" {
                restore_na(field);
            }
        }
    }
    Ok(serde_json::from_value(v)?)
}

pub const CSV_HEADER: &str = "fold,model,tpr,fpr,accuracy,auc";

fn metric_cells(m: &Metrics) -> String {
    format!("{},{},{},{}", num(m.tpr), opt(m.fpr), opt(m.accuracy), opt(m.auc))
}

pub fn render_csv(report: &RunReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for f in &report.folds {
        for model in &report.models {
            let cells = f.metrics.get(model).map_or_else(|| [NA; 4].join(","), metric_cells);
            let _ = writeln!(out, "{},{model},{cells}", f.fold);
        }
    }
    for model in &report.models {
        let cells = report.mean.get(model).map_or_else(|| [NA; 4].join(","), metric_cells);
        let _ = writeln!(out, "mean,{model},{cells}");
    }
    out
}

/// One CSV metrics row: (fold, model, [tpr, fpr, accuracy, auc]).
pub type CsvRow = (String, String, [Option<f64>; 4]);

pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(Error::invalid("csv report header mismatch"));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let cells: Vec<&str> = l.split(',').collect();
            if cells.len() != 6 {
                return Err(Error::invalid(format!("csv row has {} cells: {l}", cells.len())));
            }
            let mut values = [None; 4];
            for (slot, c) in values.iter_mut().zip(&cells[2..]) {
                if *c != NA {
                    *slot = Some(c.parse().map_err(|_| Error::invalid(format!("bad number `{c}`")))?);
                }
            }
            Ok((cells[0].to_string(), cells[1].to_string(), values))
        })
        .collect()
}

/// The same rows as [`render_csv`], taken from a report.
pub fn metric_rows(report: &RunReport) -> Vec<CsvRow> {
    let cells = |m: Option<&Metrics>| match m {
        Some(m) => [Some(m.tpr), m.fpr, m.accuracy, m.auc].map(|x| x.map(round6)),
        None => [None; 4],
    };
    let mut rows = Vec::new();
    for f in &report.folds {
        for model in &report.models {
            rows.push((f.fold.to_string(), model.clone(), cells(f.metrics.get(model))));
        }
    }
    for model in &report.models {
        rows.push(("mean".into(), model.clone(), cells(report.mean.get(model))));
    }
    rows
}

fn table(out: &mut String, header: &[&str], rows: &[Vec<String>]) {
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(header.len()));
    for r in rows {
        let _ = writeln!(out, "| {} |", r.join(" | "));
    }
}

pub fn render_markdown(report: &RunReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# Run report: {}\n", report.task);
    let _ = writeln!(out, "- seed: {}", report.seed);
    let _ = writeln!(out, "- format version: {}", report.format_version);
    let _ = writeln!(out, "- folds: {}\n", report.folds.len());

    for model in &report.models {
        let _ = writeln!(out, "## Metrics: {model}\n");
        let cells = |m: Option<&Metrics>| match m {
            Some(m) => vec![num(m.tpr), opt(m.fpr), opt(m.accuracy), opt(m.auc)],
            None => vec![NA.to_string(); 4],
        };
        let mut rows: Vec<Vec<String>> = report
            .folds
            .iter()
            .map(|f| {
                let mut r = vec![f.fold.to_string(), f.n_train.to_string(), f.n_test.to_string()];
                r.extend(cells(f.metrics.get(model)));
                r
            })
            .collect();
        let mut mean = vec!["mean".to_string(), String::new(), String::new()];
        mean.extend(cells(report.mean.get(model)));
        rows.push(mean);
        table(&mut out, &["fold", "n_train", "n_test", "tpr", "fpr", "accuracy", "auc"], &rows);
        out.push('\n');
    }

    let _ = writeln!(out, "## Feature importance\n");
    match &report.importances {
        Some(imp) => {
            let rows: Vec<Vec<String>> = imp.iter().map(|i| vec![i.feature.clone(), num(i.importance)]).collect();
            table(&mut out, &["feature", "importance"], &rows);
        }
        None => out.push_str(NA),
    }
    out.push_str("\n\n## Propagation\n\n");
    match &report.propagation {
        Some(p) => {
            for (name, r) in [("collusive", &p.collusive), ("other", &p.other)] {
                let _ = writeln!(
                    out,
                    "{name}: {} videos with peaks, {} without\n",
                    r.videos_with_peaks, r.videos_without_peaks
                );
                if r.thresholds_days.is_empty() {
                    let _ = writeln!(out, "{NA}\n");
                    continue;
                }
                let rows: Vec<Vec<String>> = r
                    .thresholds_days
                    .iter()
                    .enumerate()
                    .map(|(i, t)| {
                        vec![
                            num(*t),
                            r.initial_burst_cdf.get(i).map_or(NA.into(), |v| num(*v)),
                            r.lifetime_cdf.get(i).map_or(NA.into(), |v| num(*v)),
                        ]
                    })
                    .collect();
                table(&mut out, &["days", "initial_burst_cdf", "lifetime_cdf"], &rows);
                out.push('\n');
            }
        }
        None => out.push_str(&format!("{NA}\n\n")),
    }
    out.push_str("## Timings (s)\n\n");
    match &report.timings {
        Some(t) => {
            let rows: Vec<Vec<String>> = t.iter().map(|(k, v)| vec![k.clone(), num(*v)]).collect();
            table(&mut out, &["stage", "seconds"], &rows);
        }
        None => out.push_str(NA),
    }
    out.push_str("\n\n## Label reads\n\n");
    match &report.label_audit {
        Some(a) => {
            let rows: Vec<Vec<String>> =
                a.reads_by_stage.iter().map(|(k, v)| vec![k.clone(), v.to_string()]).collect();
            table(&mut out, &["stage", "reads"], &rows);
        }
        None => out.push_str(NA),
    }
    out.push_str("\n\n## Seeds\n\n");
    let rows: Vec<Vec<String>> = report.seeds.iter().map(|(k, v)| vec![k.clone(), v.to_string()]).collect();
    table(&mut out, &["stage", "seed"], &rows);
    out.push_str("\n## Config\n\n");
    let rows: Vec<Vec<String>> = report.config.iter().map(|(k, v)| vec![k.clone(), v.clone()]).collect();
    table(&mut out, &["key", "value"], &rows);
    out
}

pub fn render(report: &RunReport, format: ReportFormat) -> Result<String> {
    Ok(match format {
        ReportFormat::Json => render_json(report)?,
        ReportFormat::Csv => render_csv(report),
        ReportFormat::Markdown => render_markdown(report),
    })
}

pub fn write_report(report: &RunReport, format: ReportFormat, path: &Path) -> Result<()> {
    write_atomic(path, render(report, format)?.as_bytes())
}
