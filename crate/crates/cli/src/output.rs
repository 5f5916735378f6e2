//! CSV tables with a provenance line, and self-contained SVG charts.

use std::fmt::Write;
use std::path::Path;

use crate::error::{CliError, CliResult};

/// A CSV table; every row has one cell per column.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Table { columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    /// Serializes with `# ` comment lines before and after the body.
    pub fn to_csv(&self, header: &[String], footer: &[String]) -> CliResult<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| CliError::Invalid(format!("csv: {e}"));
        w.write_record(&self.columns).map_err(io)?;
        for row in &self.rows {
            w.write_record(row).map_err(io)?;
        }
        let body = w.into_inner().map_err(|e| CliError::Invalid(format!("csv: {e}")))?;
        let mut out = String::new();
        for line in header {
            let _ = writeln!(out, "# {line}");
        }
        out.push_str(&String::from_utf8(body).expect("utf8 cells"));
        for line in footer {
            let _ = writeln!(out, "# {line}");
        }
        Ok(out)
    }
}

/// Shortest round-trip decimal form, identical on every platform.
pub fn num(x: f64) -> String {
    format!("{x}")
}

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// A line/scatter chart, optionally on log₂ axes.
#[derive(Clone, Debug, PartialEq)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log: bool,
    pub series: Vec<Series>,
}

const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

impl Chart {
    pub fn to_svg(&self) -> String {
        let (w, h, pad) = (640.0, 420.0, 60.0);
        let tf = |v: f64| if self.log { v.max(f64::MIN_POSITIVE).log2() } else { v };
        let pts: Vec<(f64, f64)> =
            self.series.iter().flat_map(|s| s.points.iter().map(|&(x, y)| (tf(x), tf(y)))).collect();
        let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for &(x, y) in &pts {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if pts.is_empty() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        if x1 - x0 < 1e-12 {
            x1 = x0 + 1.0;
        }
        if y1 - y0 < 1e-12 {
            y1 = y0 + 1.0;
        }
        let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
        let sy = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(&self.title));
        let _ = writeln!(
            out,
            r#"<path d="M{pad} {pad} V{} H{}" fill="none" stroke="black"/>"#,
            h - pad,
            w - pad
        );
        let axis = |l: &str| if self.log { format!("log2 {l}") } else { l.to_string() };
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, w / 2.0, h - 16.0, escape(&axis(&self.x_label)));
        let _ = writeln!(
            out,
            r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
            h / 2.0,
            h / 2.0,
            escape(&axis(&self.y_label))
        );
        for (v, label_x) in [(x0, sx(x0)), (x1, sx(x1))] {
            let _ = writeln!(out, r#"<text x="{label_x:.1}" y="{}" text-anchor="middle">{v:.3}</text>"#, h - pad + 16.0);
        }
        for (v, label_y) in [(y0, sy(y0)), (y1, sy(y1))] {
            let _ = writeln!(out, r#"<text x="{}" y="{label_y:.1}" text-anchor="end">{v:.3}</text>"#, pad - 6.0);
        }
        for (i, s) in self.series.iter().enumerate() {
            let colour = PALETTE[i % PALETTE.len()];
            let coords: Vec<String> =
                s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(tf(x)), sy(tf(y)))).collect();
            let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="{colour}"/>"#, coords.join(" "));
            for c in &coords {
                let (cx, cy) = c.split_once(',').expect("pair");
                let _ = writeln!(out, r#"<circle cx="{cx}" cy="{cy}" r="3" fill="{colour}"/>"#);
            }
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" fill="{colour}">{}</text>"#,
                w - pad - 120.0,
                pad + 16.0 * i as f64,
                escape(&s.name)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_comments_header_and_rows() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["1".into(), num(0.5)]);
        let text = t.to_csv(&["prov".into()], &["fit".into()]).unwrap();
        assert_eq!(text, "# prov\na,b\n1,0.5\n# fit\n");
    }

    #[test]
    fn svg_is_well_formed_enough() {
        let c = Chart {
            title: "t".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            log: true,
            series: vec![Series { name: "s".into(), points: vec![(2.0, 4.0), (4.0, 16.0)] }],
        };
        let svg = c.to_svg();
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<circle").count(), 2);
    }
}
