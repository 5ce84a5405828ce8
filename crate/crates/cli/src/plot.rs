//! Minimal SVG charts: line, step and scatter series on linear axes.

use std::fmt::Write;

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 500.0;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Style {
    Line,
    /// Histogram outline: each point is a bucket center, drawn `width` wide.
    Step {
        width: f64,
    },
    Scatter,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub style: Style,
}

impl Series {
    pub fn line(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series {
            label: label.into(),
            points,
            style: Style::Line,
        }
    }

    pub fn step(label: impl Into<String>, points: Vec<(f64, f64)>, width: f64) -> Self {
        Series {
            label: label.into(),
            points,
            style: Style::Step { width },
        }
    }

    pub fn scatter(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series {
            label: label.into(),
            points,
            style: Style::Scatter,
        }
    }

    /// Outline vertices; steps expand to bucket edges.
    fn vertices(&self) -> Vec<(f64, f64)> {
        match self.style {
            Style::Step { width } => {
                let half = width / 2.0;
                let mut v = Vec::with_capacity(self.points.len() * 2 + 2);
                if let Some(&(x, _)) = self.points.first() {
                    v.push((x - half, 0.0));
                }
                for &(x, y) in &self.points {
                    v.push((x - half, y));
                    v.push((x + half, y));
                }
                if let Some(&(x, _)) = self.points.last() {
                    v.push((x + half, 0.0));
                }
                v
            }
            _ => self.points.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

/// A rectangle of the canvas with data bounds mapped onto it.
struct Frame {
    left: f64,
    top: f64,
    width: f64,
    height: f64,
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        self.left + (x - self.x.0) / (self.x.1 - self.x.0) * self.width
    }

    fn py(&self, y: f64) -> f64 {
        self.top + self.height - (y - self.y.0) / (self.y.1 - self.y.0) * self.height
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Padded bounds; degenerate ranges are widened so the mapping stays finite.
fn bounds(values: impl Iterator<Item = f64>, pad: f64) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let p = (hi - lo) * pad;
    (lo - p, hi + p)
}

/// Round tick values covering `range`, about five of them.
fn ticks(range: (f64, f64)) -> Vec<f64> {
    let raw = (range.1 - range.0) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (range.0 / step).ceil() as i64;
    let last = (range.1 / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    let v = if v.abs() < 1e-12 { 0.0 } else { v };
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

fn draw_panel(svg: &mut String, chart: &Chart, frame: &Frame) {
    let bottom = frame.top + frame.height;
    let _ = writeln!(
        svg,
        r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#444"/>"##,
        frame.left, frame.top, frame.width, frame.height
    );
    for t in ticks(frame.x) {
        let x = frame.px(t);
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.1}" y1="{bottom:.1}" x2="{x:.1}" y2="{:.1}" stroke="#444"/><text x="{x:.1}" y="{:.1}" font-size="11" text-anchor="middle">{}</text>"##,
            bottom + 4.0,
            bottom + 17.0,
            tick_label(t)
        );
    }
    for t in ticks(frame.y) {
        let y = frame.py(t);
        let _ = writeln!(
            svg,
            r##"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#444"/><text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{}</text>"##,
            frame.left - 4.0,
            frame.left,
            frame.left - 6.0,
            y + 4.0,
            tick_label(t)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-size="14" text-anchor="middle">{}</text>"#,
        frame.left + frame.width / 2.0,
        frame.top - 10.0,
        escape(&chart.title)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{}</text>"#,
        frame.left + frame.width / 2.0,
        bottom + 36.0,
        escape(&chart.x_label)
    );
    let (yx, yy) = (frame.left - 48.0, frame.top + frame.height / 2.0);
    let _ = writeln!(
        svg,
        r#"<text x="{yx:.1}" y="{yy:.1}" font-size="12" text-anchor="middle" transform="rotate(-90 {yx:.1} {yy:.1})">{}</text>"#,
        escape(&chart.y_label)
    );

    let _ = writeln!(
        svg,
        r#"<clipPath id="c{0:.0}"><rect x="{0:.1}" y="{1:.1}" width="{2:.1}" height="{3:.1}"/></clipPath><g clip-path="url(#c{0:.0})">"#,
        frame.left, frame.top, frame.width, frame.height
    );
    for (i, s) in chart.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        match s.style {
            Style::Scatter => {
                for &(x, y) in &s.points {
                    let _ = writeln!(
                        svg,
                        r#"<circle cx="{:.1}" cy="{:.1}" r="1.8" fill="{color}" fill-opacity="0.5"/>"#,
                        frame.px(x),
                        frame.py(y)
                    );
                }
            }
            _ => {
                let pts: Vec<String> = s
                    .vertices()
                    .iter()
                    .filter(|(x, y)| x.is_finite() && y.is_finite())
                    .map(|&(x, y)| format!("{:.1},{:.1}", frame.px(x), frame.py(y)))
                    .collect();
                let _ = writeln!(
                    svg,
                    r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                    pts.join(" ")
                );
            }
        }
    }
    svg.push_str("</g>\n");

    for (i, s) in chart.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let y = frame.top + 14.0 + 16.0 * i as f64;
        let x = frame.left + frame.width - 150.0;
        let _ = writeln!(
            svg,
            r#"<rect x="{x:.1}" y="{:.1}" width="12" height="4" fill="{color}"/><text x="{:.1}" y="{:.1}" font-size="11">{}</text>"#,
            y - 4.0,
            x + 18.0,
            y + 1.0,
            escape(&s.label)
        );
    }
}

fn frame_for(chart: &Chart, left: f64, top: f64, width: f64, height: f64) -> Frame {
    let vertices: Vec<(f64, f64)> = chart.series.iter().flat_map(|s| s.vertices()).collect();
    let x = bounds(vertices.iter().map(|p| p.0), 0.02);
    let y = bounds(vertices.iter().map(|p| p.1), 0.05);
    Frame {
        left,
        top,
        width,
        height,
        x,
        y,
    }
}

fn document(body: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n"
    )
}

pub fn render(chart: &Chart) -> String {
    let mut svg = String::new();
    let frame = frame_for(chart, 80.0, 40.0, WIDTH - 110.0, HEIGHT - 100.0);
    draw_panel(&mut svg, chart, &frame);
    document(&svg)
}

/// Side-by-side panels sharing the canvas, e.g. one per synthetic dataset.
pub fn render_panels(charts: &[Chart]) -> String {
    let mut svg = String::new();
    let n = charts.len().max(1) as f64;
    let slot = (WIDTH - 20.0) / n;
    for (i, chart) in charts.iter().enumerate() {
        let frame = frame_for(
            chart,
            10.0 + slot * i as f64 + 70.0,
            40.0,
            slot - 90.0,
            HEIGHT - 100.0,
        );
        draw_panel(&mut svg, chart, &frame);
    }
    document(&svg)
}
