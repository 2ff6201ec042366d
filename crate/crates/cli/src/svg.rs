//! Minimal deterministic SVG line charts.

use std::fmt::Write;

use crate::Failure;

pub const WIDTH: f64 = 960.0;
pub const HEIGHT: f64 = 540.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Line {
    pub fn new(label: impl Into<String>, x: &[f64], y: &[f64]) -> Self {
        Self { label: label.into(), x: x.to_vec(), y: y.to_vec() }
    }
}

/// A labeled vertical rule, e.g. an intervention onset.
#[derive(Debug, Clone, PartialEq)]
pub struct Marker {
    pub x: f64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub lines: Vec<Line>,
    pub markers: Vec<Marker>,
}

#[derive(Debug, Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let span = hi - lo;
        let pad = if span > 0.0 { 0.05 * span } else { (0.05 * lo.abs()).max(1.0) };
        Self { lo: lo - pad, hi: hi + pad }
    }

    fn map(&self, v: f64, from: f64, to: f64) -> f64 {
        from + (v - self.lo) / (self.hi - self.lo) * (to - from)
    }

    /// Round-number ticks inside the axis range, and the tick step.
    fn ticks(&self) -> (Vec<f64>, f64) {
        let raw = (self.hi - self.lo) / 5.0;
        let magnitude = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0]
            .iter()
            .map(|m| m * magnitude)
            .find(|s| *s >= raw)
            .unwrap_or(10.0 * magnitude);
        let first = (self.lo / step).ceil() as i64;
        let last = (self.hi / step).floor() as i64;
        ((first..=last).map(|k| k as f64 * step).collect(), step)
    }
}

fn tick_label(v: f64, step: f64) -> String {
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let text = format!("{v:.decimals$}");
    if text.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        "0".into()
    } else {
        text
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Renders `chart` on a 960×540 canvas with padded linear axes, one
/// polyline per line in input order, a legend and any markers.
pub fn emit_svg(chart: &Chart) -> Result<String, Failure> {
    if chart.lines.is_empty() || chart.lines.iter().any(|l| l.x.is_empty()) {
        return Err(Failure::Internal("chart needs at least one non-empty series".into()));
    }
    for line in &chart.lines {
        if line.x.len() != line.y.len() {
            return Err(Failure::Internal(format!("series `{}` has mismatched x and y", line.label)));
        }
        if line.x.iter().chain(&line.y).any(|v| !v.is_finite()) {
            return Err(Failure::Numerical(format!("series `{}` has non-finite values", line.label)));
        }
    }
    let xa = Axis::fit(chart.lines.iter().flat_map(|l| l.x.iter().copied()));
    let ya = Axis::fit(chart.lines.iter().flat_map(|l| l.y.iter().copied()));
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM, TOP);
    let px = |v: f64| xa.map(v, x0, x1);
    let py = |v: f64| ya.map(v, y0, y1);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{:.2}" y="28" text-anchor="middle" font-size="16">{}</text>"#, WIDTH / 2.0, escape(&chart.title));

    let (xticks, xstep) = xa.ticks();
    let (yticks, ystep) = ya.ticks();
    let _ = writeln!(s, r##"<g stroke="#dddddd" stroke-width="1">"##);
    for &t in &xticks {
        let _ = writeln!(s, r#"<line x1="{0:.2}" y1="{y0:.2}" x2="{0:.2}" y2="{y1:.2}"/>"#, px(t));
    }
    for &t in &yticks {
        let _ = writeln!(s, r#"<line x1="{x0:.2}" y1="{0:.2}" x2="{x1:.2}" y2="{0:.2}"/>"#, py(t));
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(
        s,
        r#"<rect x="{x0:.2}" y="{y1:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y0 - y1
    );
    let _ = writeln!(s, r#"<g text-anchor="middle">"#);
    for &t in &xticks {
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, px(t), y0 + 18.0, tick_label(t, xstep));
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<g text-anchor="end">"#);
    for &t in &yticks {
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, x0 - 6.0, py(t) + 4.0, tick_label(t, ystep));
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 18.0,
        escape(&chart.x_label)
    );
    let (lx, ly) = (22.0, (y0 + y1) / 2.0);
    let _ = writeln!(
        s,
        r#"<text x="{lx:.2}" y="{ly:.2}" text-anchor="middle" transform="rotate(-90 {lx:.2} {ly:.2})">{}</text>"#,
        escape(&chart.y_label)
    );

    for marker in &chart.markers {
        let x = px(marker.x);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{y1:.2}" stroke="#444444" stroke-dasharray="6 4"/>"##
        );
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, x + 4.0, y1 + 14.0, escape(&marker.label));
    }

    for (k, line) in chart.lines.iter().enumerate() {
        let mut points = String::new();
        for (i, (x, y)) in line.x.iter().zip(&line.y).enumerate() {
            if i > 0 {
                points.push(' ');
            }
            let _ = write!(points, "{:.2},{:.2}", px(*x), py(*y));
        }
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{}" stroke-width="2" points="{points}"><title>{}</title></polyline>"#,
            PALETTE[k % PALETTE.len()],
            escape(&line.label)
        );
    }

    let legend_x = x1 - 180.0;
    let _ = writeln!(
        s,
        r##"<rect x="{:.2}" y="{:.2}" width="170" height="{:.2}" fill="white" fill-opacity="0.85" stroke="#999999"/>"##,
        legend_x,
        y1 + 8.0,
        10.0 + 18.0 * chart.lines.len() as f64
    );
    for (k, line) in chart.lines.iter().enumerate() {
        let y = y1 + 24.0 + 18.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{}" stroke-width="2"/>"#,
            legend_x + 8.0,
            legend_x + 32.0,
            PALETTE[k % PALETTE.len()]
        );
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, legend_x + 40.0, y + 4.0, escape(&line.label));
    }
    s.push_str("</svg>\n");
    Ok(s)
}
