//! Deterministic SVG line charts.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const PALETTE: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];
const MARGIN_LEFT: f64 = 60.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 36.0;
const MARGIN_BOTTOM: f64 = 30.0;
const LEGEND_ROW: f64 = 16.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlotError {
    #[error("plot has no series")]
    EmptySeries,
    #[error("series {0:?} has no points")]
    EmptyPoints(String),
    #[error("series {0:?} contains a non-finite point")]
    NonFinite(String),
    #[error("plot dimensions must be positive")]
    InvalidDimensions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    /// All series on one set of axes.
    Overlay,
    /// One stacked panel per series.
    Decomposition,
    Density,
    SearchProgress,
}

impl PlotKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PlotKind::Overlay => "overlay",
            PlotKind::Decomposition => "decomposition",
            PlotKind::Density => "density",
            PlotKind::SearchProgress => "search_progress",
        }
    }
}

impl std::str::FromStr for PlotKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "overlay" => Ok(PlotKind::Overlay),
            "decomposition" => Ok(PlotKind::Decomposition),
            "density" => Ok(PlotKind::Density),
            "search_progress" => Ok(PlotKind::SearchProgress),
            other => Err(format!("unknown plot kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            name: name.into(),
            points,
        }
    }

    /// Points `(i, ys[i])`.
    pub fn indexed(name: impl Into<String>, ys: &[f64]) -> Self {
        Self::new(name, ys.iter().enumerate().map(|(i, &y)| (i as f64, y)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSpec {
    pub kind: PlotKind,
    pub series: Vec<Series>,
    pub title: String,
    pub width: u32,
    pub height: u32,
}

impl PlotSpec {
    pub fn new(kind: PlotKind, title: impl Into<String>, series: Vec<Series>) -> Self {
        Self {
            kind,
            series,
            title: title.into(),
            width: 900,
            height: if kind == PlotKind::Decomposition { 720 } else { 400 },
        }
    }

    fn validate(&self) -> Result<(), PlotError> {
        if self.series.is_empty() {
            return Err(PlotError::EmptySeries);
        }
        if self.width == 0 || self.height == 0 {
            return Err(PlotError::InvalidDimensions);
        }
        for s in &self.series {
            if s.points.is_empty() {
                return Err(PlotError::EmptyPoints(s.name.clone()));
            }
            if s.points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
                return Err(PlotError::NonFinite(s.name.clone()));
            }
        }
        Ok(())
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn unescape(s: &str) -> String {
    s.replace("&quot;", "\"")
        .replace("&gt;", ">")
        .replace("&lt;", "<")
        .replace("&amp;", "&")
}

/// Data range padded so that a constant series sits mid-panel.
fn bounds<'a>(series: impl Iterator<Item = &'a Series> + Clone) -> ((f64, f64), (f64, f64)) {
    let pts = series.flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x1 <= x0 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 <= y0 {
        let pad = if y0 == 0.0 { 1.0 } else { y0.abs() * 0.5 };
        y0 -= pad;
        y1 += pad;
    }
    ((x0, x1), (y0, y1))
}

struct Panel {
    left: f64,
    top: f64,
    width: f64,
    height: f64,
}

fn fmt_tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e5 || v.abs() < 1e-3) {
        format!("{v:.3e}")
    } else {
        format!("{v:.3}")
    }
}

fn draw_panel(out: &mut String, panel: &Panel, series: &[(usize, &Series)]) {
    let ((x0, x1), (y0, y1)) = bounds(series.iter().map(|(_, s)| *s));
    let sx = |x: f64| panel.left + (x - x0) / (x1 - x0) * panel.width;
    let sy = |y: f64| panel.top + panel.height - (y - y0) / (y1 - y0) * panel.height;
    let bottom = panel.top + panel.height;
    let right = panel.left + panel.width;
    let _ = writeln!(
        out,
        r##"<g class="axes" stroke="#333" stroke-width="1"><line x1="{l:.2}" y1="{b:.2}" x2="{r:.2}" y2="{b:.2}"/><line x1="{l:.2}" y1="{t:.2}" x2="{l:.2}" y2="{b:.2}"/></g>"##,
        l = panel.left,
        r = right,
        t = panel.top,
        b = bottom,
    );
    let _ = writeln!(
        out,
        r##"<g class="ticks" font-size="10" fill="#333"><text x="{lx:.2}" y="{b:.2}" text-anchor="end">{ymin}</text><text x="{lx:.2}" y="{ty:.2}" text-anchor="end">{ymax}</text><text x="{l:.2}" y="{bx:.2}">{xmin}</text><text x="{r:.2}" y="{bx:.2}" text-anchor="end">{xmax}</text></g>"##,
        lx = panel.left - 4.0,
        ty = panel.top + 10.0,
        l = panel.left,
        r = right,
        b = bottom,
        bx = bottom + 12.0,
        ymin = fmt_tick(y0),
        ymax = fmt_tick(y1),
        xmin = fmt_tick(x0),
        xmax = fmt_tick(x1),
    );
    for &(color_idx, s) in series {
        let mut pts = String::new();
        for (i, &(x, y)) in s.points.iter().enumerate() {
            if i > 0 {
                pts.push(' ');
            }
            let _ = write!(pts, "{:.2},{:.2}", sx(x), sy(y));
        }
        let _ = writeln!(
            out,
            r#"<polyline data-series="{}" fill="none" stroke="{}" stroke-width="1.2" points="{}"/>"#,
            escape(&s.name),
            PALETTE[color_idx % PALETTE.len()],
            pts
        );
    }
}

/// Self-contained SVG document; identical specs give identical bytes.
pub fn render_svg(spec: &PlotSpec) -> Result<Vec<u8>, PlotError> {
    spec.validate()?;
    let (w, h) = (f64::from(spec.width), f64::from(spec.height));
    let legend_h = LEGEND_ROW * spec.series.len() as f64;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}" font-family="sans-serif">"#,
        spec.width, spec.height, spec.width, spec.height
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<title>{t}</title>
<text class="title" x="{x:.2}" y="20" text-anchor="middle" font-size="14">{t}</text>"#,
        t = escape(&spec.title),
        x = w / 2.0,
    );

    let plot_w = (w - MARGIN_LEFT - MARGIN_RIGHT).max(1.0);
    let plot_h = (h - MARGIN_TOP - MARGIN_BOTTOM - legend_h).max(1.0);
    let indexed: Vec<(usize, &Series)> = spec.series.iter().enumerate().collect();
    match spec.kind {
        PlotKind::Decomposition => {
            let k = indexed.len() as f64;
            let gap = 24.0;
            let panel_h = ((plot_h - gap * (k - 1.0)) / k).max(1.0);
            for (i, entry) in indexed.iter().enumerate() {
                let panel = Panel {
                    left: MARGIN_LEFT,
                    top: MARGIN_TOP + i as f64 * (panel_h + gap),
                    width: plot_w,
                    height: panel_h,
                };
                let _ = writeln!(out, r#"<g class="panel" data-index="{i}">"#);
                draw_panel(&mut out, &panel, std::slice::from_ref(entry));
                let _ = writeln!(out, "</g>");
            }
        }
        _ => {
            let panel = Panel {
                left: MARGIN_LEFT,
                top: MARGIN_TOP,
                width: plot_w,
                height: plot_h,
            };
            let _ = writeln!(out, r#"<g class="panel" data-index="0">"#);
            draw_panel(&mut out, &panel, &indexed);
            let _ = writeln!(out, "</g>");
        }
    }

    let _ = writeln!(out, r#"<g class="legend" font-size="11">"#);
    for (i, s) in spec.series.iter().enumerate() {
        let y = h - MARGIN_BOTTOM - legend_h + LEGEND_ROW * (i as f64 + 1.0) + 12.0;
        let _ = writeln!(
            out,
            r#"<g class="legend-entry"><line x1="{x:.2}" y1="{ly:.2}" x2="{x2:.2}" y2="{ly:.2}" stroke="{c}" stroke-width="2"/><text x="{tx:.2}" y="{y:.2}">{name}</text></g>"#,
            x = MARGIN_LEFT,
            x2 = MARGIN_LEFT + 18.0,
            tx = MARGIN_LEFT + 24.0,
            ly = y - 4.0,
            c = PALETTE[i % PALETTE.len()],
            name = escape(&s.name),
        );
    }
    let _ = writeln!(out, "</g>\n</svg>");
    Ok(out.into_bytes())
}

/// What [`read_svg`] recovers from a rendered chart.
#[derive(Debug, Clone, PartialEq)]
pub struct SvgSummary {
    pub title: String,
    /// Series name and pixel coordinates per polyline, in document order.
    pub polylines: Vec<(String, Vec<(f64, f64)>)>,
    pub legend_entries: usize,
    pub panels: usize,
}

fn attr<'a>(tag: &'a str, name: &str) -> Option<&'a str> {
    let key = format!(" {name}=\"");
    let start = tag.find(&key)? + key.len();
    let len = tag[start..].find('"')?;
    Some(&tag[start..start + len])
}

/// Reads back the structure of an SVG produced by [`render_svg`].
pub fn read_svg(svg: &str) -> Option<SvgSummary> {
    if !svg.starts_with("<svg ") || !svg.trim_end().ends_with("</svg>") {
        return None;
    }
    let title_start = svg.find("<title>")? + "<title>".len();
    let title_len = svg[title_start..].find("</title>")?;
    let title = unescape(&svg[title_start..title_start + title_len]);
    let mut polylines = Vec::new();
    for chunk in svg.split("<polyline").skip(1) {
        let tag = &chunk[..chunk.find("/>")?];
        let name = unescape(attr(tag, "data-series")?);
        let points = attr(tag, "points")?
            .split(' ')
            .map(|p| {
                let (x, y) = p.split_once(',')?;
                Some((x.parse().ok()?, y.parse().ok()?))
            })
            .collect::<Option<Vec<(f64, f64)>>>()?;
        polylines.push((name, points));
    }
    Some(SvgSummary {
        title,
        polylines,
        legend_entries: svg.matches(r#"<g class="legend-entry">"#).count(),
        panels: svg.matches(r#"<g class="panel""#).count(),
    })
}
