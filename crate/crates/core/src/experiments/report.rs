//! Self-contained SVG charts from suite results.
//!
//! One line per (model, train, test) series: the median UAR over seeds at
//! each target fraction, with whiskers spanning the per-seed min and max.
//! The output depends only on the rows, so repeated report runs are
//! byte-identical.

use super::suite::{SuiteResult, SuiteRow};
use super::ExperimentError;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 540.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 390.0;

const PALETTE: [&str; 8] = [
    "#1b6ca8", "#d1495b", "#2e8b57", "#e1851f", "#7251b5", "#8c564b", "#17becf", "#666666",
];

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Median plus range of the per-seed UAR values at one fraction.
struct PointStats {
    fraction: f64,
    median: f64,
    min: f64,
    max: f64,
}

fn median_of(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Group successful rows into per-series sweep curves.
fn series_points(rows: &[SuiteRow]) -> BTreeMap<String, Vec<PointStats>> {
    let mut grouped: BTreeMap<String, BTreeMap<u64, Vec<f64>>> = BTreeMap::new();
    for row in rows {
        let (Some(uar), None) = (row.uar, &row.error) else { continue };
        if !row.fraction.is_finite() || !uar.is_finite() {
            continue;
        }
        let label = format!("{} {}\u{2192}{}", row.model, row.train, row.test);
        grouped
            .entry(label)
            .or_default()
            // Fractions are non-negative, so bit order matches numeric order.
            .entry(row.fraction.to_bits())
            .or_default()
            .push(uar);
    }
    grouped
        .into_iter()
        .map(|(label, by_fraction)| {
            let points = by_fraction
                .into_iter()
                .map(|(bits, mut uars)| {
                    uars.sort_by(|a, b| a.partial_cmp(b).expect("finite UAR values"));
                    PointStats {
                        fraction: f64::from_bits(bits),
                        median: median_of(&uars),
                        min: uars[0],
                        max: *uars.last().expect("non-empty group"),
                    }
                })
                .collect();
            (label, points)
        })
        .collect()
}

/// Round a range outward to tenths, keeping it inside [0, 1] and at least
/// 0.2 wide so flat curves stay visible.
fn y_domain(lo: f64, hi: f64) -> (f64, f64) {
    let mut lo = (lo * 10.0).floor() / 10.0;
    let mut hi = (hi * 10.0).ceil() / 10.0;
    while hi - lo < 0.2 - 1e-9 {
        lo -= 0.1;
        hi += 0.1;
    }
    (lo.max(0.0), hi.min(1.0))
}

/// Render the sweep chart for `result` to `path`.
///
/// Error rows are skipped; when nothing is plottable the file still holds a
/// valid SVG stating so.
pub fn write_sweep_svg(path: &Path, result: &SuiteResult) -> Result<(), ExperimentError> {
    let series = series_points(&result.rows);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" \
         font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(svg, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");

    if series.is_empty() {
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">no data</text>",
            WIDTH / 2.0,
            HEIGHT / 2.0
        );
        let _ = writeln!(svg, "</svg>");
        std::fs::write(path, svg)?;
        return Ok(());
    }

    let all: Vec<&PointStats> = series.values().flatten().collect();
    let x_lo = all.iter().map(|p| p.fraction).fold(f64::INFINITY, f64::min);
    let x_hi = all.iter().map(|p| p.fraction).fold(f64::NEG_INFINITY, f64::max);
    let (x_lo, x_hi) = if x_hi - x_lo < 1e-12 { (x_lo - 0.05, x_hi + 0.05) } else { (x_lo, x_hi) };
    let y_lo_data = all.iter().map(|p| p.min).fold(f64::INFINITY, f64::min);
    let y_hi_data = all.iter().map(|p| p.max).fold(f64::NEG_INFINITY, f64::max);
    let (y_lo, y_hi) = y_domain(y_lo_data, y_hi_data);

    let x_px = |f: f64| LEFT + (f - x_lo) / (x_hi - x_lo) * (RIGHT - LEFT);
    let y_px = |u: f64| TOP + (y_hi - u) / (y_hi - y_lo) * (BOTTOM - TOP);

    // Axes and horizontal gridlines at tenths.
    let _ = writeln!(
        svg,
        "<line x1=\"{LEFT}\" y1=\"{BOTTOM}\" x2=\"{RIGHT}\" y2=\"{BOTTOM}\" stroke=\"black\"/>"
    );
    let _ = writeln!(
        svg,
        "<line x1=\"{LEFT}\" y1=\"{TOP}\" x2=\"{LEFT}\" y2=\"{BOTTOM}\" stroke=\"black\"/>"
    );
    let mut tick = (y_lo * 10.0).round() as i64;
    while tick as f64 / 10.0 <= y_hi + 1e-9 {
        let v = tick as f64 / 10.0;
        let y = y_px(v);
        let _ = writeln!(
            svg,
            "<line x1=\"{LEFT}\" y1=\"{y:.2}\" x2=\"{RIGHT}\" y2=\"{y:.2}\" \
             stroke=\"#dddddd\"/>\
             <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{v:.1}</text>",
            LEFT - 6.0,
            y + 4.0
        );
        tick += 1;
    }
    let mut x_ticks: Vec<f64> = all.iter().map(|p| p.fraction).collect();
    x_ticks.sort_by(|a, b| a.partial_cmp(b).expect("finite fractions"));
    x_ticks.dedup();
    for f in &x_ticks {
        let x = x_px(*f);
        let _ = writeln!(
            svg,
            "<line x1=\"{x:.2}\" y1=\"{BOTTOM}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\
             <text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{f}</text>",
            BOTTOM + 5.0,
            BOTTOM + 20.0
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">target fraction</text>",
        (LEFT + RIGHT) / 2.0,
        HEIGHT - 8.0
    );
    let _ = writeln!(
        svg,
        "<text x=\"16\" y=\"{:.2}\" text-anchor=\"middle\" \
         transform=\"rotate(-90 16 {:.2})\">UAR (median, min\u{2013}max)</text>",
        (TOP + BOTTOM) / 2.0,
        (TOP + BOTTOM) / 2.0
    );

    for (i, (label, points)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = points
            .iter()
            .map(|p| format!("{:.2},{:.2}", x_px(p.fraction), y_px(p.median)))
            .collect();
        let _ = writeln!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>",
            coords.join(" ")
        );
        for p in points {
            let x = x_px(p.fraction);
            let _ = writeln!(
                svg,
                "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" \
                 stroke=\"{color}\"/>\
                 <circle cx=\"{x:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>",
                y_px(p.min),
                y_px(p.max),
                y_px(p.median)
            );
        }
        let ly = TOP + 16.0 * i as f64;
        let _ = writeln!(
            svg,
            "<line x1=\"{:.2}\" y1=\"{ly:.2}\" x2=\"{:.2}\" y2=\"{ly:.2}\" \
             stroke=\"{color}\" stroke-width=\"2\"/>\
             <text x=\"{:.2}\" y=\"{:.2}\">{}</text>",
            RIGHT + 12.0,
            RIGHT + 34.0,
            RIGHT + 40.0,
            ly + 4.0,
            xml_escape(label)
        );
    }
    let _ = writeln!(svg, "</svg>");
    std::fs::write(path, svg)?;
    Ok(())
}
