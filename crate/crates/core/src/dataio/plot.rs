//! Standalone SVG figures: scatter-and-line plots for series and heat maps
//! for Ramsey grids. Output depends only on the input values.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::protocols::{ExperimentSeries, RamseyGrid, SeriesKind};

#[derive(Debug, Clone, PartialEq)]
pub struct PlotStyle {
    pub title: String,
    pub width: f64,
    pub height: f64,
    pub x_label: String,
    pub y_label: String,
    /// Axis values are divided by this before labelling (e.g. `1e-6` for us).
    pub x_unit: f64,
    pub y_unit: f64,
    /// Dotted vertical marker, in axis units (e.g. end of the drive).
    pub break_at: Option<f64>,
}

impl PlotStyle {
    pub fn for_series(series: &ExperimentSeries) -> Self {
        match series.kind {
            SeriesKind::RingUpRingDown => Self {
                title: "ring-up / ring-down".into(),
                x_label: "t (us)".into(),
                x_unit: 1e-6,
                ..Self::default()
            },
            SeriesKind::Spectroscopy => Self {
                title: "spectroscopy".into(),
                x_label: "detuning (kHz)".into(),
                x_unit: 1e3,
                ..Self::default()
            },
        }
    }

    pub fn for_grid() -> Self {
        Self {
            title: "Ramsey".into(),
            x_label: "phi (rad)".into(),
            y_label: "tau (us)".into(),
            y_unit: 1e-6,
            ..Self::default()
        }
    }
}

impl Default for PlotStyle {
    fn default() -> Self {
        Self {
            title: String::new(),
            width: 640.0,
            height: 420.0,
            x_label: "x".into(),
            y_label: "nbar".into(),
            x_unit: 1.0,
            y_unit: 1.0,
            break_at: None,
        }
    }
}

const LEFT: f64 = 70.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn label(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    w: f64,
    h: f64,
    right: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (self.w - LEFT - self.right)
    }

    fn py(&self, y: f64) -> f64 {
        self.h - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (self.h - TOP - BOTTOM)
    }

    fn axes(&self, svg: &mut String, style: &PlotStyle) {
        let (l, r, t, b) = (LEFT, self.w - self.right, TOP, self.h - BOTTOM);
        let _ = writeln!(
            svg,
            r#"<rect x="{l:.2}" y="{t:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
            r - l,
            b - t
        );
        for k in 0..=4 {
            let f = k as f64 / 4.0;
            let xv = self.x0 + f * (self.x1 - self.x0);
            let yv = self.y0 + f * (self.y1 - self.y0);
            let (x, y) = (self.px(xv), self.py(yv));
            let _ = writeln!(
                svg,
                r#"<line x1="{x:.2}" y1="{b:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"#,
                b + 5.0,
                b + 18.0,
                label(xv / style.x_unit)
            );
            let _ = writeln!(
                svg,
                r#"<line x1="{:.2}" y1="{y:.2}" x2="{l:.2}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"#,
                l - 5.0,
                l - 8.0,
                y + 4.0,
                label(yv / style.y_unit)
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">{}</text>"#,
            0.5 * (l + r),
            self.h - 12.0,
            escape(&style.x_label)
        );
        let _ = writeln!(
            svg,
            r#"<text x="16" y="{:.2}" font-size="13" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
            0.5 * (t + b),
            0.5 * (t + b),
            escape(&style.y_label)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="24" font-size="15" text-anchor="middle">{}</text>"#,
            0.5 * self.w,
            escape(&style.title)
        );
    }
}

fn open(style: &PlotStyle) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
        w = style.width,
        h = style.height
    )
}

/// Line plot with one `<circle>` marker per point.
pub fn plot_series(series: &ExperimentSeries, style: &PlotStyle) -> Result<String> {
    if series.is_empty() {
        return Err(Error::Empty("series"));
    }
    let (x0, x1) = range(series.axis.iter().copied().chain(style.break_at));
    let (y0, y1) = range(series.nbar.iter().copied().chain(std::iter::once(0.0)));
    let frame = Frame {
        x0,
        x1,
        y0,
        y1: y1 + 0.05 * (y1 - y0),
        w: style.width,
        h: style.height,
        right: RIGHT,
    };
    let mut svg = open(style);
    frame.axes(&mut svg, style);
    let mut order: Vec<usize> = (0..series.len()).collect();
    order.sort_by(|&a, &b| series.axis[a].total_cmp(&series.axis[b]));
    let points: Vec<String> = order
        .iter()
        .map(|&i| format!("{:.2},{:.2}", frame.px(series.axis[i]), frame.py(series.nbar[i])))
        .collect();
    let _ = writeln!(
        svg,
        r##"<polyline points="{}" fill="none" stroke="#1f4e99" stroke-width="1.2"/>"##,
        points.join(" ")
    );
    for &i in &order {
        let _ = writeln!(
            svg,
            r##"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="#1f4e99"/>"##,
            frame.px(series.axis[i]),
            frame.py(series.nbar[i])
        );
    }
    if let Some(b) = style.break_at {
        let x = frame.px(b);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{TOP:.2}" x2="{x:.2}" y2="{:.2}" stroke="black" stroke-dasharray="2,3"/>"#,
            style.height - BOTTOM
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Sequential white-to-blue colour for `f` in `[0, 1]`.
fn colour(f: f64) -> String {
    let f = if f.is_finite() { f.clamp(0.0, 1.0) } else { 0.0 };
    let lerp = |a: f64, b: f64| (a + (b - a) * f).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(255.0, 8.0), lerp(255.0, 48.0), lerp(255.0, 107.0))
}

fn edges(centres: &[f64]) -> Vec<f64> {
    let n = centres.len();
    if n == 1 {
        return vec![centres[0] - 0.5, centres[0] + 0.5];
    }
    let mut e = Vec::with_capacity(n + 1);
    e.push(centres[0] - 0.5 * (centres[1] - centres[0]));
    for w in centres.windows(2) {
        e.push(0.5 * (w[0] + w[1]));
    }
    e.push(centres[n - 1] + 0.5 * (centres[n - 1] - centres[n - 2]));
    e
}

/// Heat map with one `class="cell"` rectangle per grid point and a
/// labelled colour scale. `phi` runs along x, `tau` along y.
pub fn plot_grid(grid: &RamseyGrid, style: &PlotStyle) -> Result<String> {
    if grid.is_empty() {
        return Err(Error::Empty("grid"));
    }
    let mut phi_order: Vec<usize> = (0..grid.phis.len()).collect();
    phi_order.sort_by(|&a, &b| grid.phis[a].total_cmp(&grid.phis[b]));
    let mut tau_order: Vec<usize> = (0..grid.taus.len()).collect();
    tau_order.sort_by(|&a, &b| grid.taus[a].total_cmp(&grid.taus[b]));
    let phis: Vec<f64> = phi_order.iter().map(|&j| grid.phis[j]).collect();
    let taus: Vec<f64> = tau_order.iter().map(|&i| grid.taus[i]).collect();
    let xe = edges(&phis);
    let ye = edges(&taus);
    let frame = Frame {
        x0: xe[0],
        x1: xe[xe.len() - 1],
        y0: ye[0],
        y1: ye[ye.len() - 1],
        w: style.width,
        h: style.height,
        right: 110.0,
    };
    let (z0, z1) = range(grid.nbar.iter().flatten().copied());
    let mut svg = open(style);
    for (a, &i) in tau_order.iter().enumerate() {
        for (b, &j) in phi_order.iter().enumerate() {
            let (xa, xb) = (frame.px(xe[b]), frame.px(xe[b + 1]));
            let (ya, yb) = (frame.py(ye[a + 1]), frame.py(ye[a]));
            let _ = writeln!(
                svg,
                r#"<rect class="cell" x="{xa:.2}" y="{ya:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                xb - xa,
                yb - ya,
                colour((grid.nbar[i][j] - z0) / (z1 - z0))
            );
        }
    }
    frame.axes(&mut svg, style);
    let sx = style.width - 90.0;
    let (top, bottom) = (TOP, style.height - BOTTOM);
    let steps = 32;
    for k in 0..steps {
        let h = (bottom - top) / steps as f64;
        let _ = writeln!(
            svg,
            r#"<rect class="scale" x="{sx:.2}" y="{:.2}" width="16" height="{:.2}" fill="{}"/>"#,
            bottom - (k + 1) as f64 * h,
            h + 0.3,
            colour((k as f64 + 0.5) / steps as f64)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="11">{}</text>"#,
        sx + 20.0,
        bottom,
        label(z0)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="11">{}</text>"#,
        sx + 20.0,
        top + 10.0,
        label(z1)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="12">nbar</text>"#,
        sx,
        top - 6.0
    );
    svg.push_str("</svg>\n");
    Ok(svg)
}
