//! Standalone SVG renderings of the summary and dependence data.

use std::fmt::Write as _;

use super::{DependenceData, SummaryData};

const WIDTH: f64 = 720.0;
const LEFT: f64 = 120.0;
const RIGHT: f64 = 40.0;
const TOP: f64 = 40.0;
const ROW: f64 = 36.0;

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (-1.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 1.0, hi + 1.0)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

/// Blue (low feature value) to red (high).
fn color(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let r = (30.0 + 225.0 * t) as u8;
    let b = (255.0 - 225.0 * t) as u8;
    format!("#{r:02x}40{b:02x}")
}

/// Deterministic vertical spread in (−0.5, 0.5) for instance `i`.
fn jitter(i: usize) -> f64 {
    let h = (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 40;
    h as f64 / (1u64 << 24) as f64 - 0.5
}

fn header(out: &mut String, width: f64, height: f64, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{title}</text>"#, width / 2.0);
}

/// One row per feature in summary order: a dot per instance at its SHAP
/// value, colored by the feature value's rank within its column.
pub fn summary_svg(s: &SummaryData) -> String {
    let height = TOP + ROW * s.features.len() as f64 + 50.0;
    let (lo, hi) = extent(s.features.iter().flat_map(|f| f.points.iter().map(|p| p.1)));
    let sx = |v: f64| LEFT + (v - lo) / (hi - lo) * (WIDTH - LEFT - RIGHT);
    let mut out = String::new();
    header(&mut out, WIDTH, height, "SHAP summary");
    let zero = sx(0.0);
    let bottom = TOP + ROW * s.features.len() as f64;
    let _ = writeln!(out, r##"<line x1="{zero:.2}" y1="{TOP}" x2="{zero:.2}" y2="{bottom}" stroke="#999"/>"##);
    for (row, f) in s.features.iter().enumerate() {
        let cy = TOP + ROW * (row as f64 + 0.5);
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{} ({:.3})</text>"#,
            LEFT - 8.0,
            cy + 4.0,
            f.feature.name(),
            f.mean_abs_shap
        );
        let (vlo, vhi) = extent(f.points.iter().map(|p| p.0));
        for (i, &(value, shap)) in f.points.iter().enumerate() {
            let _ = writeln!(
                out,
                r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="{}" fill-opacity="0.6"/>"#,
                sx(shap),
                cy + jitter(i) * ROW * 0.7,
                color((value - vlo) / (vhi - vlo))
            );
        }
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">SHAP value (log-odds)</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        bottom + 30.0
    );
    for v in [lo, 0.0, hi] {
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{v:.2}</text>"#, sx(v), bottom + 15.0);
    }
    out.push_str("</svg>\n");
    out
}

/// Scatter of feature value against SHAP value.
pub fn dependence_svg(d: &DependenceData) -> String {
    let height = 480.0;
    let (bottom, top) = (height - 50.0, TOP);
    let (xlo, xhi) = extent(d.points.iter().map(|p| p.0));
    let (ylo, yhi) = extent(d.points.iter().map(|p| p.1));
    let sx = |v: f64| LEFT + (v - xlo) / (xhi - xlo) * (WIDTH - LEFT - RIGHT);
    let sy = |v: f64| bottom - (v - ylo) / (yhi - ylo) * (bottom - top);
    let mut out = String::new();
    header(&mut out, WIDTH, height, &format!("SHAP dependence: {}", d.feature.name()));
    let _ = writeln!(
        out,
        r##"<rect x="{LEFT}" y="{top}" width="{:.2}" height="{:.2}" fill="none" stroke="#999"/>"##,
        WIDTH - LEFT - RIGHT,
        bottom - top
    );
    if ylo < 0.0 && yhi > 0.0 {
        let y0 = sy(0.0);
        let _ =
            writeln!(out, r##"<line x1="{LEFT}" y1="{y0:.2}" x2="{:.2}" y2="{y0:.2}" stroke="#ccc"/>"##, WIDTH - RIGHT);
    }
    for &(x, y) in &d.points {
        let _ = writeln!(
            out,
            r##"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="#1f60c0" fill-opacity="0.6"/>"##,
            sx(x),
            sy(y)
        );
    }
    for v in [xlo, xhi] {
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{v:.2}</text>"#, sx(v), bottom + 15.0);
    }
    for v in [ylo, yhi] {
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.2}</text>"#, LEFT - 6.0, sy(v) + 4.0);
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        bottom + 35.0,
        d.feature.name()
    );
    let _ = writeln!(
        out,
        r#"<text x="20" y="{:.2}" transform="rotate(-90 20 {:.2})" text-anchor="middle">SHAP value (log-odds)</text>"#,
        (top + bottom) / 2.0,
        (top + bottom) / 2.0
    );
    out.push_str("</svg>\n");
    out
}
