//! Tables with a reproduction manifest, written as CSV or JSON, and plain
//! SVG line charts.

use std::fmt::Write as _;

use anyhow::Result;
use serde_json::{json, Map, Value as Json};

use crate::config::Format;

pub const TOOL: &str = concat!("feller-cli ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Real(f64),
    Count(u64),
    Text(String),
}

impl Value {
    fn csv(&self) -> String {
        match self {
            Value::Real(v) if v.is_nan() => String::new(),
            // 17 significant digits round-trip every f64
            Value::Real(v) => format!("{v:.16e}"),
            Value::Count(n) => n.to_string(),
            Value::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Json {
        match self {
            Value::Real(v) => serde_json::Number::from_f64(*v).map_or(Json::Null, Json::Number),
            Value::Count(n) => json!(n),
            Value::Text(s) => json!(s),
        }
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Real(v)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_string())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Text(s)
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    /// Versioned name of the column layout.
    pub schema: &'static str,
    pub command: String,
    pub config: Vec<(String, String)>,
    /// Facts about the run that are derived, not configured.
    pub report: Vec<(String, String)>,
    pub columns: &'static [&'static str],
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => Ok(self.to_json()),
        }
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut out = String::new();
        writeln!(out, "# {TOOL}")?;
        writeln!(out, "# schema: {}", self.schema)?;
        writeln!(out, "# command: {}", self.command)?;
        for (k, v) in &self.config {
            writeln!(out, "# config: {k}={v}")?;
        }
        for (k, v) in &self.report {
            writeln!(out, "# report: {k}={v}")?;
        }
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(self.columns)?;
        for row in &self.rows {
            writer.write_record(row.iter().map(Value::csv))?;
        }
        out.push_str(&String::from_utf8(writer.into_inner()?)?);
        Ok(out)
    }

    pub fn to_json(&self) -> String {
        let pairs = |entries: &[(String, String)]| {
            entries
                .iter()
                .map(|(k, v)| (k.clone(), json!(v)))
                .collect::<Map<String, Json>>()
        };
        let doc = json!({
            "tool": TOOL,
            "schema": self.schema,
            "command": self.command,
            "config": pairs(&self.config),
            "report": pairs(&self.report),
            "columns": self.columns,
            "rows": self.rows.iter().map(|r| r.iter().map(Value::json).collect::<Vec<_>>()).collect::<Vec<_>>(),
        });
        let mut text = serde_json::to_string_pretty(&doc).expect("tables serialise");
        text.push('\n');
        text
    }
}

/// One polyline of a chart.
#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// A line chart with labelled axis ranges and a legend.
pub fn svg(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (w, h, m) = (720.0, 440.0, 60.0);
    let finite = series
        .iter()
        .flat_map(|s| s.points.iter())
        .filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in finite {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x0 > x1 {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-300 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-300 {
        y1 = y0 + 1.0;
    }
    let px = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let py = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);

    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(
        out,
        r#"<polyline fill="none" stroke="black" points="{m},{m} {m},{b} {r},{b}"/>"#,
        b = h - m,
        r = w - m
    );
    let _ = writeln!(out, r#"<text x="{m}" y="{}" text-anchor="middle">{x0:.4}</text>"#, h - m + 16.0);
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{x1:.4}</text>"#, w - m, h - m + 16.0);
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{y0:.4}</text>"#, m - 4.0, h - m);
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{y1:.4}</text>"#, m - 4.0, m + 4.0);
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, w / 2.0, h - 16.0, escape(x_label));
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        h / 2.0,
        h / 2.0,
        escape(y_label)
    );
    for (k, s) in series.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(out, r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
        let ly = m + 14.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{ly}" fill="{colour}">{}</text>"#,
            w - m + 4.0,
            escape(&s.name)
        );
    }
    out.push_str("</svg>\n");
    out
}
