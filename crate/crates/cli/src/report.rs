//! Self-contained SVG charts and a markdown summary of evaluation results.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use mva_core::train::EpochRecord;

use crate::error::{CliError, Result};

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ResultRow {
    pub scenario: String,
    pub method: String,
    pub density: String,
    pub missing: usize,
    pub accuracy: f64,
    pub seconds: Option<f64>,
}

fn parse_error(path: &Path, e: &csv::Error) -> CliError {
    let line = e.position().map_or(0, |p| p.line());
    CliError::Input(format!("{}:{line}: {e}", path.display()))
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| parse_error(path, &e))?;
    let mut rows = Vec::new();
    for rec in rdr.deserialize() {
        rows.push(rec.map_err(|e| parse_error(path, &e))?);
    }
    Ok(rows)
}

pub fn read_history(path: &Path) -> Result<Vec<EpochRecord>> {
    #[derive(Deserialize)]
    struct Row {
        epoch: usize,
        train_loss: f64,
        val_loss: f64,
        val_acc: f64,
    }
    let mut rdr = csv::Reader::from_path(path).map_err(|e| parse_error(path, &e))?;
    let mut out = Vec::new();
    for rec in rdr.deserialize::<Row>() {
        let r = rec.map_err(|e| parse_error(path, &e))?;
        out.push(EpochRecord {
            epoch: r.epoch,
            train_loss: r.train_loss,
            val_loss: r.val_loss,
            val_acc: r.val_acc,
            tau: f64::NAN,
        });
    }
    Ok(out)
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Frame {
    svg: String,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn new(title: &str, x_label: &str, y_label: &str, y_min: f64, y_max: f64) -> Self {
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
            (LEFT + W - RIGHT) / 2.0,
            esc(title)
        );
        let (x0, y0, x1, y1) = (LEFT, H - BOTTOM, W - RIGHT, TOP);
        let _ = writeln!(
            svg,
            r#"<g class="axes" stroke="black"><line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}"/><line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}"/></g>"#
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            (x0 + x1) / 2.0,
            H - 12.0,
            esc(x_label)
        );
        let _ = writeln!(
            svg,
            r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            esc(y_label)
        );
        let mut f = Self { svg, y_min, y_max };
        for i in 0..=4 {
            let v = y_min + (y_max - y_min) * i as f64 / 4.0;
            let y = f.y(v);
            let _ = writeln!(
                f.svg,
                r##"<line x1="{}" y1="{y}" x2="{x0}" y2="{y}" stroke="black"/><text x="{}" y="{}" text-anchor="end">{}</text>"##,
                x0 - 4.0,
                x0 - 6.0,
                y + 4.0,
                fmt_tick(v)
            );
        }
        f
    }

    fn y(&self, v: f64) -> f64 {
        let span = (self.y_max - self.y_min).max(1e-12);
        H - BOTTOM - (v - self.y_min) / span * (H - BOTTOM - TOP)
    }

    fn x_tick(&mut self, x: f64, label: &str) {
        let y0 = H - BOTTOM;
        let _ = writeln!(
            self.svg,
            r#"<line x1="{x}" y1="{y0}" x2="{x}" y2="{}" stroke="black"/><text x="{x}" y="{}" text-anchor="middle">{}</text>"#,
            y0 + 4.0,
            y0 + 18.0,
            esc(label)
        );
    }

    fn legend(&mut self, names: &[String]) {
        for (k, name) in names.iter().enumerate() {
            let y = TOP + 10.0 + 20.0 * k as f64;
            let x = W - RIGHT + 15.0;
            let _ = writeln!(
                self.svg,
                r#"<g class="legend-entry"><rect x="{x}" y="{}" width="12" height="12" fill="{}"/><text x="{}" y="{}">{}</text></g>"#,
                y - 10.0,
                COLORS[k % COLORS.len()],
                x + 18.0,
                y,
                esc(name)
            );
        }
    }

    fn finish(mut self) -> String {
        self.svg.push_str("</svg>\n");
        self.svg
    }
}

fn fmt_tick(v: f64) -> String {
    if v.abs() >= 10.0 || v == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

/// Grouped bars: one group per category, one bar per series.
pub fn bar_chart(title: &str, x_label: &str, categories: &[String], series: &[(String, Vec<Option<f64>>)]) -> String {
    let mut f = Frame::new(title, x_label, "accuracy (%)", 0.0, 100.0);
    let plot_w = W - RIGHT - LEFT;
    let group_w = plot_w / categories.len().max(1) as f64;
    let bar_w = group_w * 0.8 / series.len().max(1) as f64;
    for (c, cat) in categories.iter().enumerate() {
        let gx = LEFT + group_w * c as f64;
        f.x_tick(gx + group_w / 2.0, cat);
        for (s, (_, vals)) in series.iter().enumerate() {
            if let Some(Some(v)) = vals.get(c) {
                let x = gx + group_w * 0.1 + bar_w * s as f64;
                let y = f.y(*v);
                let _ = writeln!(
                    f.svg,
                    r#"<rect class="bar" x="{x:.2}" y="{y:.2}" width="{bar_w:.2}" height="{:.2}" fill="{}"/>"#,
                    H - BOTTOM - y,
                    COLORS[s % COLORS.len()]
                );
            }
        }
    }
    f.legend(&series.iter().map(|s| s.0.clone()).collect::<Vec<_>>());
    f.finish()
}

/// Polylines over numeric x values.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let pts = || series.iter().flat_map(|s| s.1.iter()).filter(|p| p.0.is_finite() && p.1.is_finite());
    let (mut x_min, mut x_max) = pts().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (mut y_min, mut y_max) = pts().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
    if !x_min.is_finite() {
        (x_min, x_max, y_min, y_max) = (0.0, 1.0, 0.0, 1.0);
    }
    if x_max <= x_min {
        x_max = x_min + 1.0;
    }
    if y_label.starts_with("accuracy") {
        (y_min, y_max) = (0.0, 100.0);
    } else if y_max <= y_min {
        y_max = y_min + 1.0;
    } else {
        y_min = y_min.min(0.0);
    }
    let mut f = Frame::new(title, x_label, y_label, y_min, y_max);
    let sx = |x: f64| LEFT + (x - x_min) / (x_max - x_min) * (W - RIGHT - LEFT);
    let xs: BTreeSet<i64> = pts().map(|p| (p.0 * 1000.0).round() as i64).collect();
    let step = (xs.len() / 10).max(1);
    for x in xs.iter().step_by(step) {
        let v = *x as f64 / 1000.0;
        f.x_tick(sx(v), &fmt_tick(v));
    }
    for (k, (_, s)) in series.iter().enumerate() {
        let path: Vec<String> = s
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), f.y(y)))
            .collect();
        if path.is_empty() {
            continue;
        }
        let color = COLORS[k % COLORS.len()];
        let _ = writeln!(
            f.svg,
            r#"<polyline class="series" fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            path.join(" ")
        );
    }
    f.legend(&series.iter().map(|s| s.0.clone()).collect::<Vec<_>>());
    f.finish()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

const DENSITY_ORDER: [&str; 3] = ["low", "moderate", "high"];

fn density_rank(d: &str) -> (usize, String) {
    (DENSITY_ORDER.iter().position(|x| *x == d).unwrap_or(DENSITY_ORDER.len()), d.to_string())
}

/// `method → key → mean accuracy`.
fn table<K: Ord + Clone>(rows: &[ResultRow], key: impl Fn(&ResultRow) -> K) -> BTreeMap<String, BTreeMap<K, f64>> {
    let mut acc: BTreeMap<String, BTreeMap<K, Vec<f64>>> = BTreeMap::new();
    for r in rows {
        acc.entry(r.method.clone()).or_default().entry(key(r)).or_default().push(r.accuracy);
    }
    acc.into_iter()
        .map(|(m, cells)| (m, cells.into_iter().map(|(k, v)| (k, mean(&v))).collect()))
        .collect()
}

pub fn density_chart(rows: &[ResultRow]) -> String {
    let t = table(rows, |r| density_rank(&r.density));
    let cats: BTreeSet<(usize, String)> = t.values().flat_map(|c| c.keys().cloned()).collect();
    let cats: Vec<(usize, String)> = cats.into_iter().collect();
    let series: Vec<(String, Vec<Option<f64>>)> = t
        .iter()
        .map(|(m, cells)| (m.clone(), cats.iter().map(|c| cells.get(c).copied()).collect()))
        .collect();
    let labels: Vec<String> = cats.into_iter().map(|c| c.1).collect();
    bar_chart("Accuracy by density", "density", &labels, &series)
}

pub fn missing_chart(rows: &[ResultRow]) -> String {
    let t = table(rows, |r| r.missing);
    let series: Vec<(String, Vec<(f64, f64)>)> = t
        .iter()
        .map(|(m, cells)| (m.clone(), cells.iter().map(|(&k, &v)| (k as f64, v)).collect()))
        .collect();
    line_chart("Accuracy by missing targets", "missing targets", "accuracy (%)", &series)
}

pub fn loss_chart(history: &[EpochRecord]) -> String {
    let series = vec![
        ("train".to_string(), history.iter().map(|h| (h.epoch as f64, h.train_loss)).collect()),
        ("validation".to_string(), history.iter().map(|h| (h.epoch as f64, h.val_loss)).collect()),
    ];
    line_chart("Loss", "epoch", "loss", &series)
}

/// Mean accuracy per method and density, then per method and missing count.
pub fn summary_markdown(rows: &[ResultRow]) -> String {
    let mut s = String::from("# Results\n\n");
    let by_density = table(rows, |r| density_rank(&r.density));
    let by_missing = table(rows, |r| r.missing);
    let mut write = |title: &str, cols: Vec<String>, cells: Vec<(String, Vec<Option<f64>>)>| {
        let _ = writeln!(s, "## {title}\n");
        let _ = writeln!(s, "| method | {} |", cols.join(" | "));
        let _ = writeln!(s, "|---|{}", "---|".repeat(cols.len()));
        for (m, vals) in cells {
            let v: Vec<String> = vals.iter().map(|v| v.map_or("-".into(), |x| format!("{x:.2}"))).collect();
            let _ = writeln!(s, "| {m} | {} |", v.join(" | "));
        }
        s.push('\n');
    };
    let dcols: BTreeSet<(usize, String)> = by_density.values().flat_map(|c| c.keys().cloned()).collect();
    write(
        "Mean accuracy (%) by density",
        dcols.iter().map(|c| c.1.clone()).collect(),
        by_density
            .iter()
            .map(|(m, c)| (m.clone(), dcols.iter().map(|k| c.get(k).copied()).collect()))
            .collect(),
    );
    let mcols: BTreeSet<usize> = by_missing.values().flat_map(|c| c.keys().copied()).collect();
    write(
        "Mean accuracy (%) by missing targets",
        mcols.iter().map(|c| c.to_string()).collect(),
        by_missing
            .iter()
            .map(|(m, c)| (m.clone(), mcols.iter().map(|k| c.get(k).copied()).collect()))
            .collect(),
    );
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(method: &str, density: &str, missing: usize, acc: f64) -> ResultRow {
        ResultRow {
            scenario: format!("{density}-{missing}"),
            method: method.into(),
            density: density.into(),
            missing,
            accuracy: acc,
            seconds: None,
        }
    }

    #[test]
    fn empty_chart_has_axes() {
        let svg = density_chart(&[]);
        assert!(svg.contains(r#"class="axes""#));
        assert!(!svg.contains("legend-entry"));
    }

    #[test]
    fn legend_per_method() {
        let rows = [row("gmva", "low", 0, 99.0), row("ed", "low", 0, 90.0), row("ed", "high", 2, 80.0)];
        assert_eq!(density_chart(&rows).matches("legend-entry").count(), 2);
        assert_eq!(missing_chart(&rows).matches("legend-entry").count(), 2);
    }

    #[test]
    fn summary_orders_densities() {
        let rows = [row("ed", "high", 0, 80.0), row("ed", "low", 0, 90.0)];
        let md = summary_markdown(&rows);
        assert!(md.contains("| method | low | high |"), "{md}");
        assert!(md.contains("| ed | 90.00 | 80.00 |"));
    }

    #[test]
    fn labels_are_escaped() {
        let svg = line_chart("a<b", "x", "y", &[("s&t".into(), vec![(0.0, 1.0)])]);
        assert!(svg.contains("a&lt;b") && svg.contains("s&amp;t"));
    }
}
