//! Versioned CSV reports with a provenance header.
//!
//! Layout: `#`-prefixed header lines (format version, table kind, every
//! configuration value), one row of column names, then numeric rows. Numbers
//! use Rust's shortest round-trip formatting, so identical runs produce
//! byte-identical files.

use std::fmt::Write as _;

use crate::coupling::{ContractionReport, StepSummary};
use crate::error::{Error, Result};

pub const FORMAT: &str = "fixed-stress-csv";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct CsvTable {
    pub version: u32,
    pub kind: String,
    pub provenance: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

fn format_value(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:e}")
    }
}

pub fn render_csv<const N: usize>(
    kind: &str,
    provenance: &[(String, String)],
    header: &[&str; N],
    rows: impl IntoIterator<Item = [f64; N]>,
) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {FORMAT} v{VERSION}");
    let _ = writeln!(s, "# kind = {kind}");
    for (k, v) in provenance {
        let _ = writeln!(s, "# {k} = {v}");
    }
    let _ = writeln!(s, "{}", header.join(","));
    for row in rows {
        let _ = writeln!(s, "{}", row.iter().map(|v| format_value(*v)).collect::<Vec<_>>().join(","));
    }
    s
}

pub fn render_reports(provenance: &[(String, String)], reports: &[ContractionReport]) -> String {
    render_csv("contraction", provenance, &ContractionReport::FIELDS, reports.iter().map(|r| r.values()))
}

pub fn render_steps(provenance: &[(String, String)], steps: &[StepSummary]) -> String {
    render_csv("steps", provenance, &StepSummary::FIELDS, steps.iter().map(|s| s.values()))
}

pub fn parse_csv(text: &str) -> Result<CsvTable> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, first) = lines.next().ok_or(Error::Parse { line: 1, message: "empty file".into() })?;
    let version = first
        .strip_prefix(&format!("# {FORMAT} v"))
        .and_then(|v| v.trim().parse::<u32>().ok())
        .ok_or_else(|| Error::Parse { line: 1, message: format!("not a {FORMAT} file") })?;
    if version != VERSION {
        return Err(Error::Parse { line: 1, message: format!("unsupported format version {version}") });
    }
    let mut table = CsvTable { version, kind: String::new(), provenance: Vec::new(), header: Vec::new(), rows: Vec::new() };
    for (line, l) in lines {
        if let Some(meta) = l.strip_prefix('#') {
            let (k, v) = meta
                .split_once('=')
                .ok_or_else(|| Error::Parse { line, message: "malformed header line".into() })?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if k == "kind" {
                table.kind = v;
            } else {
                table.provenance.push((k, v));
            }
        } else if table.header.is_empty() {
            table.header = l.split(',').map(str::to_string).collect();
        } else if !l.trim().is_empty() {
            let row = l
                .split(',')
                .map(|t| t.parse::<f64>().map_err(|_| Error::Parse { line, message: format!("bad number `{t}`") }))
                .collect::<Result<Vec<_>>>()?;
            if row.len() != table.header.len() {
                return Err(Error::Parse { line, message: format!("{} columns, header has {}", row.len(), table.header.len()) });
            }
            table.rows.push(row);
        }
    }
    if table.header.is_empty() {
        return Err(Error::Parse { line: 1, message: "missing column header".into() });
    }
    Ok(table)
}

/// Plain-text per-step summary of a contraction report table.
pub fn render_summary(table: &CsvTable) -> Result<String> {
    if table.kind != "contraction" {
        return Err(Error::config("kind", format!("expected a contraction report, found `{}`", table.kind)));
    }
    let col = |name: &str| table.column(name).ok_or_else(|| Error::config(name, "column missing from report"));
    let (step, it, metric, ratio) = (col("step")?, col("iteration")?, col("metric_sigma")?, col("ratio")?);
    let (ledger, stated, slack) = (col("ledger_residual")?, col("ledger_residual_stated")?, col("young_slack")?);
    let (rhs_prev, plastic) = (col("rhs_prev")?, col("plastic_points")?);

    let mut out = String::new();
    let _ = writeln!(out, "contraction summary ({} iterations)", table.rows.len());
    let mut steps: Vec<f64> = table.rows.iter().map(|r| r[step]).collect();
    steps.dedup();
    for s in steps {
        let rows: Vec<&Vec<f64>> = table.rows.iter().filter(|r| r[step] == s).collect();
        let last = rows.last().expect("step has rows");
        let ratios: Vec<f64> = rows.iter().skip(1).filter(|r| r[rhs_prev] > 0.0).map(|r| r[ratio]).collect();
        let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
        let geo = if ratios.is_empty() || ratios.contains(&0.0) {
            0.0
        } else {
            (ratios.iter().map(|r| r.ln()).sum::<f64>() / ratios.len() as f64).exp()
        };
        let inequality = rows.iter().all(|r| r[metric] <= r[rhs_prev] * (1.0 + 1e-8));
        let _ = writeln!(
            out,
            "step {s}: iterations {}, final metric {:.3e}, max ratio {:.4}, geometric-mean ratio {:.4}, contraction {}",
            last[it],
            last[metric],
            max_ratio,
            geo,
            if inequality { "holds" } else { "VIOLATED" }
        );
        let _ = writeln!(
            out,
            "  closed ledger max {:.2e}, stated ledger max {:.2e}, min Young slack {:.3e}, plastic points {}",
            rows.iter().map(|r| r[ledger]).fold(0.0, f64::max),
            rows.iter().map(|r| r[stated]).fold(0.0, f64::max),
            rows.iter().map(|r| r[slack]).fold(f64::INFINITY, f64::min),
            last[plastic]
        );
        let _ = writeln!(
            out,
            "  ratios: {}",
            rows.iter().map(|r| format!("{:.4}", r[ratio])).collect::<Vec<_>>().join(" ")
        );
    }
    Ok(out)
}
