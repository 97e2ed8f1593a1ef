//! Minimal deterministic SVG line plots on log-log axes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::simulator::TraceRow;

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("nothing to plot: every series is empty or non-positive")]
    EmptyTrace,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Debug)]
pub struct Figure {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Decade range covering `[lo, hi]` in log10 units.
fn decades(lo: f64, hi: f64) -> (f64, f64) {
    let (a, b) = (lo.log10().floor(), hi.log10().ceil());
    if a == b {
        (a, a + 1.0)
    } else {
        (a, b)
    }
}

/// Render series on log-log axes. Points with a non-positive or non-finite
/// coordinate are skipped.
pub fn render_svg(fig: &Figure, series: &[Series]) -> Result<String, PlotError> {
    let clean: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            s.points.iter().copied().filter(|&(x, y)| x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite()).collect()
        })
        .collect();
    let all: Vec<(f64, f64)> = clean.iter().flatten().copied().collect();
    if all.is_empty() {
        return Err(PlotError::EmptyTrace);
    }
    let fold = |f: fn(f64, f64) -> f64, init: f64, pick: fn(&(f64, f64)) -> f64| all.iter().map(pick).fold(init, f);
    let (x0, x1) = decades(fold(f64::min, f64::INFINITY, |p| p.0), fold(f64::max, 0.0, |p| p.0));
    let (y0, y1) = decades(fold(f64::min, f64::INFINITY, |p| p.1), fold(f64::max, 0.0, |p| p.1));
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x.log10() - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (y1 - y.log10()) / (y1 - y0) * ph;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + pw / 2.0,
        escape(&fig.title)
    );
    let _ = writeln!(out, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    let xs_step = ((x1 - x0) / 8.0).ceil().max(1.0);
    let mut d = x0;
    while d <= x1 {
        let px = LEFT + (d - x0) / (x1 - x0) * pw;
        let _ = writeln!(
            out,
            r##"<line x1="{px:.1}" y1="{TOP}" x2="{px:.1}" y2="{:.1}" stroke="#ddd"/><text x="{px:.1}" y="{:.1}" text-anchor="middle">1e{d}</text>"##,
            TOP + ph,
            TOP + ph + 16.0
        );
        d += xs_step;
    }
    let ys_step = ((y1 - y0) / 8.0).ceil().max(1.0);
    let mut d = y0;
    while d <= y1 {
        let py = TOP + (y1 - d) / (y1 - y0) * ph;
        let _ = writeln!(
            out,
            r##"<line x1="{LEFT}" y1="{py:.1}" x2="{:.1}" y2="{py:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">1e{d}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            py + 4.0
        );
        d += ys_step;
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 18.0,
        escape(&fig.x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="20" y="{:.1}" text-anchor="middle" transform="rotate(-90 20 {:.1})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(&fig.y_label)
    );
    for (idx, (s, pts)) in series.iter().zip(&clean).enumerate() {
        let color = COLORS[idx % COLORS.len()];
        if !pts.is_empty() {
            let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            let _ = writeln!(
                out,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                path.join(" ")
            );
        }
        let ly = TOP + 16.0 + 18.0 * idx as f64;
        let lx = LEFT + pw + 12.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&s.name)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn stationarity_series(name: &str, rows: &[TraceRow]) -> Series {
    Series { name: name.into(), points: rows.iter().map(|r| (r.k as f64, r.stat_total)).collect() }
}

pub fn residual_series(name: &str, rows: &[TraceRow]) -> Series {
    Series { name: name.into(), points: rows.iter().map(|r| (r.k as f64, r.res_combined)).collect() }
}

/// Stationarity against cumulative transmitted scalars.
pub fn communication_series(name: &str, rows: &[TraceRow]) -> Series {
    Series { name: name.into(), points: rows.iter().map(|r| (r.scalars_tx as f64, r.stat_total)).collect() }
}

/// Write `stationarity.svg`, `residuals.svg` and `stationarity_vs_scalars.svg`
/// for one or more labelled traces.
pub fn write_plots(dir: &Path, traces: &[(&str, &[TraceRow])]) -> Result<Vec<PathBuf>, PlotError> {
    type MakeSeries = fn(&str, &[TraceRow]) -> Series;
    let figures: [(&str, &str, &str, MakeSeries); 3] = [
        ("stationarity.svg", "iteration k", "stationarity measure", stationarity_series),
        ("residuals.svg", "iteration k", "constraint residual", residual_series),
        ("stationarity_vs_scalars.svg", "scalars transmitted", "stationarity measure", communication_series),
    ];
    let mut written = Vec::new();
    for (file, x_label, y_label, make) in figures {
        let series: Vec<Series> = traces.iter().map(|(name, rows)| make(name, rows)).collect();
        let fig = Figure {
            title: file.trim_end_matches(".svg").replace('_', " "),
            x_label: x_label.into(),
            y_label: y_label.into(),
        };
        let svg = render_svg(&fig, &series)?;
        let path = dir.join(file);
        std::fs::write(&path, svg)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig() -> Figure {
        Figure { title: "t".into(), x_label: "iteration k".into(), y_label: "stationarity measure".into() }
    }

    #[test]
    fn renders_labels_and_legend() {
        let s = Series { name: "hsm_admm".into(), points: (1..50).map(|k| (k as f64, 1.0 / k as f64)).collect() };
        let svg = render_svg(&fig(), std::slice::from_ref(&s)).unwrap();
        assert!(svg.contains("iteration k"));
        assert!(svg.contains("stationarity measure"));
        assert!(svg.contains("hsm_admm"));
        assert!(svg.contains("<polyline"));
        assert_eq!(svg, render_svg(&fig(), &[s]).unwrap());
    }

    #[test]
    fn empty_is_an_error() {
        assert!(matches!(render_svg(&fig(), &[]), Err(PlotError::EmptyTrace)));
        let s = Series { name: "x".into(), points: vec![(0.0, 1.0), (1.0, f64::NAN)] };
        assert!(matches!(render_svg(&fig(), &[s]), Err(PlotError::EmptyTrace)));
    }
}
