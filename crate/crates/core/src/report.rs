//! CSV / JSON persistence and small hand-written SVG plots.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ssa::{signal, Trajectory};

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct TrajectoryRow {
    time_s: f64,
    compartment: usize,
    np_free: f64,
    receptors_free: f64,
    complexes: f64,
    np_internal: f64,
    cell_alive: bool,
}

/// Long-format trajectory: one row per (sample, compartment).
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        for i in 0..s.len() {
            w.serialize(TrajectoryRow {
                time_s: *t,
                compartment: i,
                np_free: s.np_free[i],
                receptors_free: s.receptors_free[i],
                complexes: s.complexes[i],
                np_internal: s.np_internal[i],
                cell_alive: s.cell_alive[i],
            })?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: f64 = 50.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn open_svg(out: &mut String, w: f64, h: f64, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{}</text>"#,
        w / 2.0,
        escape(title)
    );
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo <= 0.0 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

/// Line chart of named `(x, y)` series.
pub fn line_chart_svg(title: &str, x_label: &str, y_label: &str, series: &[(&str, Vec<(f64, f64)>)]) -> String {
    let (x0, x1) = bounds(series.iter().flat_map(|(_, p)| p.iter().map(|q| q.0)));
    let (y0, y1) = bounds(series.iter().flat_map(|(_, p)| p.iter().map(|q| q.1)));
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let sy = |y: f64| H - MARGIN - (y - y0) / (y1 - y0) * (H - 2.0 * MARGIN);

    let mut out = String::new();
    open_svg(&mut out, W, H, title);
    let _ = writeln!(
        out,
        r#"<polyline points="{m},{t} {m},{b} {r},{b}" fill="none" stroke="black"/>"#,
        m = MARGIN,
        t = MARGIN,
        b = H - MARGIN,
        r = W - MARGIN
    );
    for (v, anchor, x, y) in [
        (x0, "start", MARGIN, H - MARGIN + 14.0),
        (x1, "end", W - MARGIN, H - MARGIN + 14.0),
    ] {
        let _ = writeln!(out, r#"<text x="{x}" y="{y}" text-anchor="{anchor}">{v:.4}</text>"#);
    }
    for (v, y) in [(y0, H - MARGIN), (y1, MARGIN)] {
        let _ = writeln!(out, r#"<text x="{}" y="{y}" text-anchor="end">{v:.4}</text>"#, MARGIN - 4.0);
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        W / 2.0,
        H - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
    for (k, (name, pts)) in series.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let mut path = String::new();
        for &(x, y) in pts.iter().filter(|p| p.0.is_finite() && p.1.is_finite()) {
            let _ = write!(path, "{:.2},{:.2} ", sx(x), sy(y));
        }
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#,
            path.trim_end()
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" fill="{colour}">{}</text>"#,
            W - MARGIN - 120.0,
            MARGIN + 14.0 * k as f64,
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Counts of `values` in `bins` equal-width bins over `[lo, hi]`.
pub fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<usize> {
    let mut counts = vec![0; bins];
    if bins == 0 || hi <= lo {
        return counts;
    }
    for &v in values.iter().filter(|v| v.is_finite()) {
        let k = ((v - lo) / (hi - lo) * bins as f64).floor();
        counts[(k.max(0.0) as usize).min(bins - 1)] += 1;
    }
    counts
}

/// A row of histogram panels, one per `(name, values, [lo, hi])`.
pub fn histograms_svg(title: &str, panels: &[(&str, Vec<f64>, [f64; 2])], bins: usize) -> String {
    let pw = 220.0;
    let ph = 200.0;
    let width = pw * panels.len().max(1) as f64;
    let height = ph + 40.0;
    let mut out = String::new();
    open_svg(&mut out, width, height, title);
    for (k, (name, values, [lo, hi])) in panels.iter().enumerate() {
        let counts = histogram(values, *lo, *hi, bins);
        let max = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
        let left = k as f64 * pw + 20.0;
        let base = height - 30.0;
        let bw = (pw - 40.0) / bins.max(1) as f64;
        for (b, &c) in counts.iter().enumerate() {
            let bh = c as f64 / max * (ph - 50.0);
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                left + b as f64 * bw,
                base - bh,
                bw * 0.9,
                bh,
                PALETTE[k % PALETTE.len()]
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{} [{lo}, {hi}]</text>"#,
            left + (pw - 40.0) / 2.0,
            base + 16.0,
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Bound-plus-internalized signal per compartment (columns) over time
/// (rows), log-scaled to grey levels.
pub fn penetration_heatmap_svg(title: &str, traj: &Trajectory) -> String {
    let rows: Vec<Vec<f64>> = traj.states.iter().map(signal).collect();
    let n = rows.first().map_or(0, Vec::len).max(1);
    let max = rows.iter().flatten().copied().fold(0.0_f64, f64::max);
    let cw = ((W - 2.0 * MARGIN) / n as f64).max(1.0);
    let rh = ((H - 2.0 * MARGIN) / rows.len().max(1) as f64).max(0.5);
    let mut out = String::new();
    open_svg(&mut out, W, H, title);
    for (r, row) in rows.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            let level = if max > 0.0 && v > 0.0 {
                ((1.0 + v).ln() / (1.0 + max).ln()).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let grey = (255.0 * (1.0 - level)).round() as u8;
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="rgb({grey},{grey},{grey})"/>"#,
                MARGIN + c as f64 * cw,
                MARGIN + r as f64 * rh,
                cw,
                rh
            );
        }
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">compartment (cell widths from the vessel) →</text>"#,
        W / 2.0,
        H - 20.0
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">time ↓</text>"#,
        H / 2.0,
        H / 2.0
    );
    out.push_str("</svg>\n");
    out
}
