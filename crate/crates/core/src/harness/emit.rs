//! Report serialization: CSV, JSON and a standalone log-log SVG chart.
//!
//! Floats are written with 12 significant digits so outputs are
//! byte-stable across platforms and thread counts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use super::config::Format;
use crate::error::Result;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Bool(bool),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}
impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}
impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x as i64)
    }
}
impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Bool(x)
    }
}
impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}
impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.11e}")
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => fmt_float(*x),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(i) => json!(i),
            Cell::Float(x) if x.is_finite() => {
                let rounded: f64 = fmt_float(*x).parse().expect("formatted float parses");
                json!(rounded)
            }
            Cell::Float(x) => json!(fmt_float(*x)),
            Cell::Bool(b) => json!(b),
            Cell::Text(s) => json!(s),
        }
    }

    fn text(&self) -> String {
        match self {
            Cell::Float(x) if x.is_finite() => format!("{x:.6e}"),
            other => other.csv(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.iter().map(Cell::csv).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }

    fn to_json(&self) -> Value {
        json!({
            "columns": self.columns,
            "rows": self.rows.iter().map(|r| r.iter().map(Cell::json).collect::<Vec<_>>()).collect::<Vec<_>>(),
        })
    }

    pub fn to_text(&self) -> String {
        let cells: Vec<Vec<String>> = self.rows.iter().map(|r| r.iter().map(Cell::text).collect()).collect();
        let widths: Vec<usize> = (0..self.columns.len())
            .map(|j| cells.iter().map(|r| r[j].len()).chain([self.columns[j].len()]).max().unwrap_or(0))
            .collect();
        let line = |vals: Vec<&str>| {
            vals.iter().zip(&widths).map(|(v, w)| format!("{v:>w$}")).collect::<Vec<_>>().join("  ")
        };
        let mut out = line(self.columns.iter().map(String::as_str).collect());
        out.push('\n');
        for r in &cells {
            out.push_str(&line(r.iter().map(String::as_str).collect()));
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Meta {
    pub config_hash: String,
    pub master_seed: u64,
    pub version: String,
}

impl Meta {
    pub fn new(config_hash: String, master_seed: u64) -> Self {
        Meta { config_hash, master_seed, version: env!("CARGO_PKG_VERSION").into() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub experiment: String,
    pub meta: Meta,
    pub tables: Vec<Table>,
    /// Scalar results, in display order.
    pub summary: Vec<(String, Cell)>,
    pub chart: Option<Chart>,
}

impl Report {
    pub fn new(experiment: &str, meta: Meta) -> Self {
        Report { experiment: experiment.into(), meta, tables: Vec::new(), summary: Vec::new(), chart: None }
    }

    pub fn note(&mut self, key: &str, value: impl Into<Cell>) {
        self.summary.push((key.into(), value.into()));
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn summary_value(&self, key: &str) -> Option<&Cell> {
        self.summary.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    /// Metadata and summary as a two-column key/value table.
    pub fn meta_table(&self) -> Table {
        let mut t = Table::new("meta", &["key", "value"]);
        t.push(vec!["experiment".into(), self.experiment.clone().into()]);
        t.push(vec!["config_hash".into(), self.meta.config_hash.clone().into()]);
        t.push(vec!["master_seed".into(), Cell::Text(self.meta.master_seed.to_string())]);
        t.push(vec!["version".into(), self.meta.version.clone().into()]);
        for (k, v) in &self.summary {
            t.push(vec![k.clone().into(), v.clone()]);
        }
        t
    }

    pub fn to_json(&self) -> String {
        let mut tables = Map::new();
        for t in &self.tables {
            tables.insert(t.name.clone(), t.to_json());
        }
        let mut summary = Map::new();
        for (k, v) in &self.summary {
            summary.insert(k.clone(), v.json());
        }
        let v = json!({
            "experiment": self.experiment,
            "meta": {
                "config_hash": self.meta.config_hash,
                "master_seed": self.meta.master_seed.to_string(),
                "version": self.meta.version,
            },
            "summary": summary,
            "tables": tables,
        });
        let mut s = serde_json::to_string_pretty(&v).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for t in &self.tables {
            let _ = writeln!(out, "[{}]", t.name);
            out.push_str(&t.to_text());
            out.push('\n');
        }
        out.push_str(&self.meta_table().to_text());
        out
    }

    pub fn to_svg(&self) -> Option<String> {
        self.chart.as_ref().map(|c| svg_chart(c, &self.meta.config_hash))
    }
}

/// Writes the report in `format` under `dir`; returns the files written.
/// CSV produces one file per table plus `<experiment>_meta.csv`; SVG is
/// skipped for reports without a chart.
pub fn emit(report: &Report, format: Format, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut write = |name: String, body: String| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, body)?;
        written.push(path);
        Ok(())
    };
    match format {
        Format::Csv => {
            for t in report.tables.iter().chain([&report.meta_table()]) {
                write(format!("{}_{}.csv", report.experiment, t.name), t.to_csv())?;
            }
        }
        Format::Json => write(format!("{}.json", report.experiment), report.to_json())?,
        Format::Svg => {
            if let Some(svg) = report.to_svg() {
                write(format!("{}.svg", report.experiment), svg)?;
            }
        }
    }
    Ok(written)
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn svg_chart(chart: &Chart, hash: &str) -> String {
    let (w, h) = (640.0, 420.0);
    let (left, right, top, bottom) = (70.0, 150.0, 40.0, 50.0);
    let pts: Vec<(f64, f64)> = chart
        .series
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
        .collect();
    let bounds = |f: fn(&(f64, f64)) -> f64| {
        let lo = pts.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = pts.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        if lo.is_finite() {
            (lo.log10().floor(), hi.log10().ceil().max(lo.log10().floor() + 1.0))
        } else {
            (0.0, 1.0)
        }
    };
    let (x0, x1) = bounds(|p| p.0);
    let (y0, y1) = bounds(|p| p.1);
    let px = |x: f64| left + (x.log10() - x0) / (x1 - x0) * (w - left - right);
    let py = |y: f64| h - bottom - (y.log10() - y0) / (y1 - y0) * (h - top - bottom);

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, "<!-- config {hash} -->");
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, (w - right + left) / 2.0, escape_xml(&chart.title));
    let (ax0, ax1, ay0, ay1) = (left, w - right, h - bottom, top);
    let _ = writeln!(s, r#"<path d="M{ax0} {ay1} L{ax0} {ay0} L{ax1} {ay0}" fill="none" stroke="black"/>"#);
    for d in (x0 as i32)..=(x1 as i32) {
        let x = px(10f64.powi(d));
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{ay0}" x2="{x:.2}" y2="{}" stroke="black"/>"#, ay0 + 5.0);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{}" text-anchor="middle">1e{d}</text>"#, ay0 + 18.0);
    }
    for d in (y0 as i32)..=(y1 as i32) {
        let y = py(10f64.powi(d));
        let _ = writeln!(s, r#"<line x1="{}" y1="{y:.2}" x2="{ax0}" y2="{y:.2}" stroke="black"/>"#, ax0 - 5.0);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">1e{d}</text>"#, ax0 - 8.0, y + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (ax0 + ax1) / 2.0, h - 12.0, escape_xml(&chart.x_label));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
        (ay0 + ay1) / 2.0,
        escape_xml(&chart.y_label)
    );
    for (i, series) in chart.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = series
            .points
            .iter()
            .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, coords.join(" "));
        for c in &coords {
            let (cx, cy) = c.split_once(',').expect("coordinate pair");
            let _ = writeln!(s, r#"<circle cx="{cx}" cy="{cy}" r="3" fill="{color}"/>"#);
        }
        let ly = top + 10.0 + 18.0 * i as f64;
        let _ = writeln!(s, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, ax1 + 15.0, ax1 + 35.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, ax1 + 40.0, ly + 4.0, escape_xml(&series.name));
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_report() -> Report {
        let mut r = Report::new("demo", Meta { config_hash: "abc".into(), master_seed: 1, version: "0".into() });
        let mut t = Table::new("rows", &["n", "procedure", "mean"]);
        t.push(vec![64usize.into(), "pooled".into(), 0.1f64.into()]);
        t.push(vec![128usize.into(), "a,b".into(), f64::INFINITY.into()]);
        r.tables.push(t);
        r.note("slope", -1.0 / 3.0);
        r.chart = Some(Chart {
            title: "t".into(),
            x_label: "n".into(),
            y_label: "risk".into(),
            series: vec![Series { name: "pooled".into(), points: vec![(64.0, 0.1), (128.0, 0.05)] }],
        });
        r
    }

    #[test]
    fn float_format_has_12_significant_digits() {
        assert_eq!(fmt_float(1.0 / 3.0), "3.33333333333e-1");
        assert_eq!(fmt_float(1234.5), "1.23450000000e3");
        assert_eq!(fmt_float(f64::INFINITY), "inf");
    }

    #[test]
    fn csv_layout() {
        let r = sample_report();
        assert_eq!(r.tables[0].to_csv(), "n,procedure,mean\n64,pooled,1.00000000000e-1\n128,\"a,b\",inf\n");
        assert!(r.meta_table().to_csv().contains("slope,-3.33333333333e-1\n"));
    }

    #[test]
    fn json_is_stable_and_rounded() {
        let r = sample_report();
        let a = r.to_json();
        assert_eq!(a, sample_report().to_json());
        let v: Value = serde_json::from_str(&a).unwrap();
        assert_eq!(v["summary"]["slope"].as_f64().unwrap(), -0.333333333333);
        assert_eq!(v["tables"]["rows"]["rows"][1][2], "inf");
    }

    #[test]
    fn svg_is_standalone() {
        let svg = sample_report().to_svg().unwrap();
        assert!(svg.starts_with("<?xml"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 1);
    }

    #[test]
    fn emit_writes_files() {
        let dir = tempfile::tempdir().unwrap();
        let r = sample_report();
        let csv = emit(&r, Format::Csv, dir.path()).unwrap();
        assert_eq!(csv.len(), 2);
        assert!(dir.path().join("demo_rows.csv").exists());
        assert_eq!(emit(&r, Format::Svg, dir.path()).unwrap().len(), 1);
        let mut no_chart = r.clone();
        no_chart.chart = None;
        assert!(emit(&no_chart, Format::Svg, dir.path()).unwrap().is_empty());
    }
}
