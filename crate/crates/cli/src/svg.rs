//! Self-contained SVG charts on a fixed 800x600 canvas.

use std::fmt::Write as _;

use thiserror::Error;

use crate::numfmt::fmt_sig;

/// Canvas width.
pub const WIDTH: f64 = 800.0;
/// Canvas height.
pub const HEIGHT: f64 = 600.0;

const LEFT: f64 = 90.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 70.0;
const PAD_FRACTION: f64 = 0.05;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// How a series is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesStyle {
    /// One circle per point.
    Scatter,
    /// One polyline through the points in order.
    Line,
}

/// A named set of points.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSeries {
    /// Legend text.
    pub name: String,
    /// Data coordinates.
    pub points: Vec<(f64, f64)>,
    /// Drawing style.
    pub style: SeriesStyle,
    /// Log-scaled x axis.
    pub log_x: bool,
    /// Log-scaled y axis.
    pub log_y: bool,
}

/// Plot failures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlotError {
    /// A coordinate is NaN or infinite.
    #[error("series `{series}` point {index} has a non-finite coordinate")]
    NonFiniteCoordinate {
        /// Series name.
        series: String,
        /// Point index.
        index: usize,
    },
    /// A coordinate on a log axis is not positive.
    #[error("series `{series}` point {index} is not positive on a log axis")]
    NonPositiveOnLogAxis {
        /// Series name.
        series: String,
        /// Point index.
        index: usize,
    },
    /// No series, or a series with no points.
    #[error("nothing to plot")]
    Empty,
    /// Series disagree on axis scaling.
    #[error("all series must share the same axis scaling")]
    MixedScales,
}

#[derive(Clone, Copy)]
struct Axis {
    log: bool,
    lo: f64,
    hi: f64,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            let t = if log { v.log10() } else { v };
            lo = lo.min(t);
            hi = hi.max(t);
        }
        if hi - lo <= 0.0 {
            let pad = if log { 0.5 } else { (lo.abs() * 0.1).max(1.0) };
            return Self { log, lo: lo - pad, hi: hi + pad };
        }
        let pad = (hi - lo) * PAD_FRACTION;
        Self { log, lo: lo - pad, hi: hi + pad }
    }

    fn transform(&self, v: f64) -> f64 {
        if self.log {
            v.log10()
        } else {
            v
        }
    }

    /// Position in [0, 1] along the axis.
    fn unit(&self, v: f64) -> f64 {
        (self.transform(v) - self.lo) / (self.hi - self.lo)
    }

    /// Major ticks (decades on a log axis) and minor ticks, in data units.
    fn ticks(&self) -> (Vec<f64>, Vec<f64>) {
        let mut major = Vec::new();
        let mut minor = Vec::new();
        if self.log {
            let first = self.lo.floor() as i32;
            let last = self.hi.ceil() as i32;
            for e in first..=last {
                let decade = 10f64.powi(e);
                if (self.lo..=self.hi).contains(&(e as f64)) {
                    major.push(decade);
                }
                for k in 2..10 {
                    let t = e as f64 + (k as f64).log10();
                    if (self.lo..=self.hi).contains(&t) {
                        minor.push(k as f64 * decade);
                    }
                }
            }
        } else {
            let span = self.hi - self.lo;
            let raw = span / 5.0;
            let mag = 10f64.powf(raw.log10().floor());
            let step = [1.0, 2.0, 5.0, 10.0]
                .into_iter()
                .map(|m| m * mag)
                .find(|s| span / s <= 6.0)
                .unwrap_or(10.0 * mag);
            let mut t = (self.lo / step).ceil() * step;
            while t <= self.hi {
                major.push(t);
                t += step;
            }
        }
        (major, minor)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn validate(series: &[PlotSeries]) -> Result<(bool, bool), PlotError> {
    let first = series.first().ok_or(PlotError::Empty)?;
    let (log_x, log_y) = (first.log_x, first.log_y);
    for s in series {
        if s.points.is_empty() {
            return Err(PlotError::Empty);
        }
        if (s.log_x, s.log_y) != (log_x, log_y) {
            return Err(PlotError::MixedScales);
        }
        for (index, &(x, y)) in s.points.iter().enumerate() {
            if !x.is_finite() || !y.is_finite() {
                return Err(PlotError::NonFiniteCoordinate {
                    series: s.name.clone(),
                    index,
                });
            }
            if (log_x && x <= 0.0) || (log_y && y <= 0.0) {
                return Err(PlotError::NonPositiveOnLogAxis {
                    series: s.name.clone(),
                    index,
                });
            }
        }
    }
    Ok((log_x, log_y))
}

/// Renders `series` as an SVG 1.1 document. Scatter points become
/// `<circle class="marker">` elements and each line series one `<polyline>`.
pub fn emit_svg_plot(
    series: &[PlotSeries],
    x_label: &str,
    y_label: &str,
) -> Result<String, PlotError> {
    let (log_x, log_y) = validate(series)?;
    let all = || series.iter().flat_map(|s| s.points.iter().copied());
    let xa = Axis::fit(all().map(|p| p.0), log_x);
    let ya = Axis::fit(all().map(|p| p.1), log_y);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + xa.unit(x) * plot_w;
    let py = |y: f64| TOP + (1.0 - ya.unit(y)) * plot_h;

    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" style="fill:#ffffff"/>"#);

    let (x_major, x_minor) = xa.ticks();
    let (y_major, y_minor) = ya.ticks();
    let bottom = TOP + plot_h;
    let right = LEFT + plot_w;
    for x in &x_minor {
        let _ = writeln!(
            out,
            r#"<line class="grid-minor" x1="{0:.2}" y1="{TOP:.2}" x2="{0:.2}" y2="{bottom:.2}" style="stroke:#eeeeee;stroke-width:0.5"/>"#,
            px(*x)
        );
    }
    for y in &y_minor {
        let _ = writeln!(
            out,
            r#"<line class="grid-minor" x1="{LEFT:.2}" y1="{0:.2}" x2="{right:.2}" y2="{0:.2}" style="stroke:#eeeeee;stroke-width:0.5"/>"#,
            py(*y)
        );
    }
    for x in &x_major {
        let _ = writeln!(
            out,
            r#"<line class="grid" x1="{0:.2}" y1="{TOP:.2}" x2="{0:.2}" y2="{bottom:.2}" style="stroke:#cccccc;stroke-width:1"/>"#,
            px(*x)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" style="font-family:sans-serif;font-size:12px;text-anchor:middle">{}</text>"#,
            px(*x),
            bottom + 18.0,
            fmt_sig(*x, 4)
        );
    }
    for y in &y_major {
        let _ = writeln!(
            out,
            r#"<line class="grid" x1="{LEFT:.2}" y1="{0:.2}" x2="{right:.2}" y2="{0:.2}" style="stroke:#cccccc;stroke-width:1"/>"#,
            py(*y)
        );
    }
    // Log y axes over less than a decade would otherwise carry no labels.
    let y_labelled: Vec<f64> = if y_major.is_empty() { y_minor.clone() } else { y_major.clone() };
    for y in &y_labelled {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" style="font-family:sans-serif;font-size:12px;text-anchor:end">{}</text>"#,
            LEFT - 8.0,
            py(*y) + 4.0,
            fmt_sig(*y, 4)
        );
    }
    let _ = writeln!(
        out,
        r#"<rect x="{LEFT:.2}" y="{TOP:.2}" width="{plot_w:.2}" height="{plot_h:.2}" style="fill:none;stroke:#000000;stroke-width:1"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" style="font-family:sans-serif;font-size:14px;text-anchor:middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 20.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="20" y="{0:.2}" transform="rotate(-90 20 {0:.2})" style="font-family:sans-serif;font-size:14px;text-anchor:middle">{1}</text>"#,
        TOP + plot_h / 2.0,
        escape(y_label)
    );

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        match s.style {
            SeriesStyle::Scatter => {
                for &(x, y) in &s.points {
                    let _ = writeln!(
                        out,
                        r#"<circle class="marker" cx="{:.2}" cy="{:.2}" r="4" style="fill:{color};stroke:none"/>"#,
                        px(x),
                        py(y)
                    );
                }
            }
            SeriesStyle::Line => {
                let pts: Vec<String> = s
                    .points
                    .iter()
                    .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
                    .collect();
                let _ = writeln!(
                    out,
                    r#"<polyline points="{}" style="fill:none;stroke:{color};stroke-width:2"/>"#,
                    pts.join(" ")
                );
            }
        }
        let _ = writeln!(
            out,
            r#"<text class="legend" x="{:.2}" y="{:.2}" style="font-family:sans-serif;font-size:12px;fill:{color}">{}</text>"#,
            right - 200.0,
            TOP + 18.0 + 16.0 * i as f64,
            escape(&s.name)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}
