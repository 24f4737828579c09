//! Minimal deterministic SVG line charts of efficiency curves.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::scenario::CurveRow;

pub const COLUMNS: [&str; 4] = ["R_overlap", "dephasing_factor", "loss_factor", "R_total"];

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 24.0;
const BOTTOM: f64 = 64.0;
const COLORS: [&str; 4] = ["#1f77b4", "#2ca02c", "#9467bd", "#d62728"];

#[derive(Debug, Clone, PartialEq)]
pub struct RenderOptions {
    pub log_y: bool,
    pub columns: Vec<String>,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions { log_y: false, columns: COLUMNS.iter().map(|s| s.to_string()).collect() }
    }
}

/// Data-to-pixel mapping of the plot area. It is written into the SVG as
/// `data-*` attributes so that coordinates can be mapped back.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axes {
    pub x_min: f64,
    pub x_max: f64,
    /// In log10 units when `log_y`.
    pub y_min: f64,
    pub y_max: f64,
    pub log_y: bool,
}

impl Axes {
    pub fn px(&self, t: f64) -> f64 {
        LEFT + (t - self.x_min) / (self.x_max - self.x_min) * (WIDTH - LEFT - RIGHT)
    }

    pub fn py(&self, v: f64) -> f64 {
        let v = if self.log_y { v.max(10f64.powf(self.y_min)).log10() } else { v };
        HEIGHT - BOTTOM - (v - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - TOP - BOTTOM)
    }

    pub fn value_at(&self, py: f64) -> f64 {
        let v = self.y_min + (HEIGHT - BOTTOM - py) / (HEIGHT - TOP - BOTTOM) * (self.y_max - self.y_min);
        if self.log_y { 10f64.powf(v) } else { v }
    }

    pub fn time_at(&self, px: f64) -> f64 {
        self.x_min + (px - LEFT) / (WIDTH - LEFT - RIGHT) * (self.x_max - self.x_min)
    }

    /// Reads the mapping back from a rendered chart.
    pub fn from_svg(svg: &str) -> Option<Axes> {
        let attr = |name: &str| -> Option<f64> {
            let key = format!("{name}=\"");
            let start = svg.find(&key)? + key.len();
            let end = start + svg[start..].find('"')?;
            svg[start..end].parse().ok()
        };
        Some(Axes {
            x_min: attr("data-x-min")?,
            x_max: attr("data-x-max")?,
            y_min: attr("data-y-min")?,
            y_max: attr("data-y-max")?,
            log_y: attr("data-log-y")? != 0.0,
        })
    }
}

fn column(row: &CurveRow, name: &str) -> f64 {
    match name {
        "R_overlap" => row.r_overlap,
        "dephasing_factor" => row.dephasing_factor,
        "loss_factor" => row.loss_factor,
        _ => row.r_total,
    }
}

fn axes_for(rows: &[CurveRow], columns: &[String], log_y: bool) -> Axes {
    let x_min = rows[0].t_ms;
    let mut x_max = rows[rows.len() - 1].t_ms;
    if x_max <= x_min {
        x_max = x_min + 1.0;
    }
    let values = || rows.iter().flat_map(|r| columns.iter().map(move |c| column(r, c)));
    if log_y {
        let lo = values().filter(|v| *v > 0.0).fold(f64::INFINITY, f64::min);
        let lo = if lo.is_finite() { lo.log10().floor() } else { -3.0 };
        let hi = values().fold(f64::MIN, f64::max).max(1.0).log10().ceil().max(lo + 1.0);
        Axes { x_min, x_max, y_min: lo, y_max: hi, log_y }
    } else {
        let lo = values().fold(0.0, f64::min);
        let hi = values().fold(1.0, f64::max);
        Axes { x_min, x_max, y_min: lo, y_max: hi * 1.05, log_y }
    }
}

fn ticks(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let raw = (hi - lo) / count as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step + 1e-9).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn label(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

pub fn render_svg(rows: &[CurveRow], options: &RenderOptions) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::invalid("nothing to render: the curve has no rows"));
    }
    if options.columns.is_empty() {
        return Err(Error::invalid("no columns requested"));
    }
    if let Some(c) = options.columns.iter().find(|c| !COLUMNS.contains(&c.as_str())) {
        return Err(Error::invalid(format!("unknown column `{c}` (expected one of {})", COLUMNS.join(", "))));
    }
    let ax = axes_for(rows, &options.columns, options.log_y);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" data-x-min="{}" data-x-max="{}" data-y-min="{}" data-y-max="{}" data-log-y="{}">"#,
        ax.x_min,
        ax.x_max,
        ax.y_min,
        ax.y_max,
        u8::from(ax.log_y)
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let (x0, x1) = (LEFT, WIDTH - RIGHT);
    let (y0, y1) = (HEIGHT - BOTTOM, TOP);
    let _ = writeln!(s, r#"<g stroke="black" stroke-width="1" fill="none">"#);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}"/>"#);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}"/>"#);
    s.push_str("</g>\n");

    let _ = writeln!(s, r#"<g font-family="sans-serif" font-size="12" fill="black">"#);
    for t in ticks(ax.x_min, ax.x_max, 8) {
        let x = ax.px(t);
        let _ = writeln!(s, r#"<line x1="{x:.3}" y1="{y0}" x2="{x:.3}" y2="{}" stroke="black"/>"#, y0 + 5.0);
        let _ = writeln!(s, r#"<text x="{x:.3}" y="{}" text-anchor="middle">{}</text>"#, y0 + 20.0, label(t));
    }
    let y_ticks: Vec<(f64, String)> = if ax.log_y {
        (ax.y_min as i64..=ax.y_max as i64).map(|e| (10f64.powi(e as i32), format!("1e{e}"))).collect()
    } else {
        ticks(ax.y_min, ax.y_max, 6).into_iter().map(|v| (v, label(v))).collect()
    };
    for (v, text) in y_ticks {
        let y = ax.py(v);
        let _ = writeln!(s, r#"<line x1="{}" y1="{y:.3}" x2="{x0}" y2="{y:.3}" stroke="black"/>"#, x0 - 5.0);
        let _ = writeln!(s, r#"<text x="{}" y="{:.3}" text-anchor="end">{text}</text>"#, x0 - 8.0, y + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">t (ms)</text>"#, 0.5 * (x0 + x1), HEIGHT - 20.0);
    let _ = writeln!(
        s,
        r#"<text x="20" y="{0}" text-anchor="middle" transform="rotate(-90 20 {0})">normalized efficiency</text>"#,
        0.5 * (y0 + y1)
    );
    s.push_str("</g>\n");

    for (k, name) in options.columns.iter().enumerate() {
        let color = COLORS[COLUMNS.iter().position(|c| c == name).unwrap_or(0)];
        let points: Vec<String> =
            rows.iter().map(|r| format!("{:.6},{:.6}", ax.px(r.t_ms), ax.py(column(r, name)))).collect();
        let _ = writeln!(
            s,
            r#"<polyline data-column="{name}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            points.join(" ")
        );
        let ly = TOP + 16.0 + 16.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{ly}" font-family="sans-serif" font-size="12" fill="{color}" text-anchor="end">{name}</text>"#,
            x1 - 8.0
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Points of the polyline for `column`, in pixel coordinates.
pub fn polyline_points(svg: &str, column: &str) -> Option<Vec<(f64, f64)>> {
    let key = format!("data-column=\"{column}\"");
    let start = svg.find(&key)?;
    let pts = &svg[start..];
    let p0 = pts.find("points=\"")? + 8;
    let p1 = p0 + pts[p0..].find('"')?;
    pts[p0..p1]
        .split_whitespace()
        .map(|pair| {
            let (x, y) = pair.split_once(',')?;
            Some((x.parse().ok()?, y.parse().ok()?))
        })
        .collect()
}
