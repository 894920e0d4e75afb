//! Minimal self-contained SVG line and scatter plots.

use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesStyle {
    Line,
    Scatter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub style: SeriesStyle,
}

impl Series {
    pub fn new(label: impl Into<String>, x: Vec<f64>, y: Vec<f64>, style: SeriesStyle) -> Self {
        Series { label: label.into(), x, y, style }
    }
}

#[derive(Debug, Clone, Default)]
pub struct PlotLabels {
    pub title: String,
    pub x: String,
    pub y: String,
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if hi - lo > 0.0 {
        let pad = 0.04 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        (lo - 1.0, hi + 1.0)
    }
}

/// Render the series to an SVG document with axes, ticks and a legend.
/// Every data point is drawn as a `circle` of class `marker`.
pub fn render_svg(series: &[Series], labels: &PlotLabels) -> Result<String> {
    if series.is_empty() || series.iter().all(|s| s.x.is_empty()) {
        return Err(Error::InvalidInput("nothing to plot".into()));
    }
    for s in series {
        if s.x.len() != s.y.len() {
            return Err(Error::shape(
                format!("{} y values in series '{}'", s.x.len(), s.label),
                format!("{}", s.y.len()),
            ));
        }
        if s.x.iter().chain(&s.y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("series '{}' has non-finite values", s.label)));
        }
    }
    let (x0, x1) = range(series.iter().flat_map(|s| s.x.iter().copied()));
    let (y0, y1) = range(series.iter().flat_map(|s| s.y.iter().copied()));
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    if !labels.title.is_empty() {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            LEFT + pw / 2.0,
            escape(&labels.title)
        );
    }
    let _ = writeln!(out, r#"<g class="axes" stroke="black" fill="none">"#);
    let _ = writeln!(
        out,
        r#"<line x1="{LEFT}" y1="{}" x2="{}" y2="{}"/>"#,
        TOP + ph,
        LEFT + pw,
        TOP + ph
    );
    let _ = writeln!(out, r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{}"/>"#, TOP + ph);
    out.push_str("</g>\n<g class=\"ticks\">\n");
    for t in 0..=4 {
        let f = t as f64 / 4.0;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
            sx(xv),
            TOP + ph + 16.0,
            tick(xv)
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            sy(yv) + 4.0,
            tick(yv)
        );
    }
    out.push_str("</g>\n");
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        H - 10.0,
        escape(&labels.x)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(&labels.y)
    );

    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let _ = writeln!(out, r#"<g class="series" fill="{color}" stroke="{color}">"#);
        if s.style == SeriesStyle::Line && s.x.len() > 1 {
            let pts: Vec<String> = s
                .x
                .iter()
                .zip(&s.y)
                .map(|(&x, &y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            let _ = writeln!(out, r#"<polyline fill="none" points="{}"/>"#, pts.join(" "));
        }
        let r = if s.style == SeriesStyle::Line { 2.0 } else { 1.8 };
        for (&x, &y) in s.x.iter().zip(&s.y) {
            let _ = writeln!(
                out,
                r#"<circle class="marker" cx="{:.2}" cy="{:.2}" r="{r}" stroke="none"/>"#,
                sx(x),
                sy(y)
            );
        }
        out.push_str("</g>\n");
    }

    out.push_str("<g class=\"legend\">\n");
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let y = TOP + 10.0 + 18.0 * i as f64;
        let lx = W - RIGHT + 14.0;
        let _ = writeln!(
            out,
            r#"<g class="legend-entry"><rect x="{lx}" y="{}" width="12" height="8" fill="{color}"/><text x="{}" y="{}">{}</text></g>"#,
            y - 7.0,
            lx + 18.0,
            y + 1.0,
            escape(&s.label)
        );
    }
    out.push_str("</g>\n</svg>\n");
    Ok(out)
}

fn tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e5).contains(&a) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

pub fn emit_plot(series: &[Series], labels: &PlotLabels, path: &std::path::Path) -> Result<()> {
    let svg = render_svg(series, labels)?;
    std::fs::write(path, svg)?;
    Ok(())
}
