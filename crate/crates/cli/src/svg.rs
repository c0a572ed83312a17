//! Minimal standalone SVG plots.

use std::fmt::Write as _;

use sgnlab_core::stats::Histogram;

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: f64 = 56.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
    log_x: bool,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        let (x, (a, b)) = if self.log_x { (x.log2(), (self.x.0.log2(), self.x.1.log2())) } else { (x, self.x) };
        let t = if b > a { (x - a) / (b - a) } else { 0.5 };
        MARGIN + t * (W - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        let (a, b) = self.y;
        let t = if b > a { (y - a) / (b - a) } else { 0.5 };
        H - MARGIN - t * (H - 2.0 * MARGIN)
    }
}

fn open(out: &mut String, title: &str, xlabel: &str, ylabel: &str) {
    write!(
        out,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">
<rect width="{W}" height="{H}" fill="white"/>
<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>
<text x="{}" y="{}" text-anchor="middle">{}</text>
<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>
"#,
        W / 2.0,
        escape(title),
        W / 2.0,
        H - 12.0,
        escape(xlabel),
        H / 2.0,
        H / 2.0,
        escape(ylabel)
    )
    .unwrap();
}

fn axes(out: &mut String, f: &Frame, xticks: &[f64]) {
    let (x0, x1, y0, y1) = (MARGIN, W - MARGIN, H - MARGIN, MARGIN);
    writeln!(out, r#"<path d="M{x0} {y1} L{x0} {y0} L{x1} {y0}" fill="none" stroke="black"/>"#).unwrap();
    for &t in xticks {
        let x = f.px(t);
        writeln!(out, r#"<line x1="{x:.2}" y1="{y0}" x2="{x:.2}" y2="{}" stroke="black"/>"#, y0 + 4.0).unwrap();
        writeln!(out, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, y0 + 18.0, fmt_tick(t)).unwrap();
    }
    for k in 0..=4 {
        let v = f.y.0 + (f.y.1 - f.y.0) * k as f64 / 4.0;
        let y = f.py(v);
        writeln!(out, r#"<line x1="{}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/>"#, x0 - 4.0).unwrap();
        writeln!(out, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 6.0, y + 4.0, fmt_tick(v)).unwrap();
    }
}

fn fmt_tick(v: f64) -> String {
    if v == v.round() && v.abs() < 1e6 {
        format!("{v:.0}")
    } else if v.abs() >= 0.01 && v.abs() < 1e4 {
        format!("{v:.2}")
    } else {
        format!("{v:.1e}")
    }
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
}

/// Line plot of several series. With `log_x` the x axis is log₂-scaled and
/// ticks are placed at the distinct x values.
pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series], y_range: Option<(f64, f64)>, log_x: bool) -> String {
    let mut xs: Vec<f64> = series.iter().flat_map(|s| s.points.iter().map(|p| p.0)).filter(|x| x.is_finite()).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let x = bounds(xs.iter().copied());
    let y = y_range.unwrap_or_else(|| bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.1))));
    let frame = Frame { x: if x.0.is_finite() { x } else { (0.0, 1.0) }, y: if y.0.is_finite() { y } else { (0.0, 1.0) }, log_x };
    let mut out = String::new();
    open(&mut out, title, xlabel, ylabel);
    let ticks: Vec<f64> = if log_x || xs.len() <= 8 { xs.clone() } else { (0..=4).map(|k| frame.x.0 + (frame.x.1 - frame.x.0) * k as f64 / 4.0).collect() };
    axes(&mut out, &frame, &ticks);
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(a, b)| format!("{:.2},{:.2}", frame.px(a), frame.py(b)))
            .collect();
        if !pts.is_empty() {
            writeln!(out, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, pts.join(" ")).unwrap();
            for p in &pts {
                let (a, b) = p.split_once(',').unwrap();
                writeln!(out, r#"<circle cx="{a}" cy="{b}" r="3" fill="{color}"/>"#).unwrap();
            }
        }
        let ly = MARGIN + 16.0 * i as f64;
        writeln!(out, r#"<rect x="{}" y="{}" width="10" height="10" fill="{color}"/>"#, W - MARGIN - 110.0, ly - 9.0).unwrap();
        writeln!(out, r#"<text x="{}" y="{ly}">{}</text>"#, W - MARGIN - 95.0, escape(&s.label)).unwrap();
    }
    out.push_str("</svg>\n");
    out
}

/// Bar histogram, with optional vertical markers `(x, label)`.
pub fn histogram_plot(title: &str, xlabel: &str, hist: &Histogram, markers: &[(f64, String)]) -> String {
    let mut out = String::new();
    open(&mut out, title, xlabel, "count");
    if hist.counts.is_empty() {
        out.push_str("</svg>\n");
        return out;
    }
    let x = (hist.edges[0], *hist.edges.last().unwrap());
    let ymax = hist.counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let frame = Frame { x, y: (0.0, ymax), log_x: false };
    let ticks: Vec<f64> = (0..=4).map(|k| x.0 + (x.1 - x.0) * k as f64 / 4.0).collect();
    axes(&mut out, &frame, &ticks);
    for (i, &c) in hist.counts.iter().enumerate() {
        let (a, b) = (frame.px(hist.edges[i]), frame.px(hist.edges[i + 1]));
        let top = frame.py(c as f64);
        writeln!(
            out,
            r##"<rect x="{a:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="#1f77b4" stroke="white" stroke-width="0.5"/>"##,
            (b - a).max(0.0),
            (frame.py(0.0) - top).max(0.0)
        )
        .unwrap();
    }
    for (i, (m, label)) in markers.iter().enumerate() {
        if !(m.is_finite() && *m >= x.0 && *m <= x.1) {
            continue;
        }
        let px = frame.px(*m);
        let color = COLORS[(i + 1) % COLORS.len()];
        writeln!(out, r#"<line x1="{px:.2}" y1="{MARGIN}" x2="{px:.2}" y2="{}" stroke="{color}" stroke-dasharray="4 3"/>"#, H - MARGIN).unwrap();
        writeln!(out, r#"<text x="{:.2}" y="{}" fill="{color}">{}</text>"#, px + 3.0, MARGIN + 12.0 + 14.0 * i as f64, escape(label)).unwrap();
    }
    out.push_str("</svg>\n");
    out
}
