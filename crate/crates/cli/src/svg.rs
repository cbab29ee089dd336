//! Fixed-layout SVG line chart with a log10 y axis and shaded bands.

use std::fmt::Write as _;

use crate::table::{AggregateRow, SeriesKey};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];
/// Floor applied before taking logs, so nonpositive band edges stay drawable.
const LOG_FLOOR: f64 = 1e-300;

fn log10(v: f64) -> f64 {
    v.max(LOG_FLOOR).log10()
}

pub fn render(rows: &[AggregateRow]) -> String {
    let mut series: Vec<(SeriesKey, Vec<&AggregateRow>)> = Vec::new();
    for r in rows {
        match series.iter_mut().find(|(k, _)| *k == r.series) {
            Some((_, v)) => v.push(r),
            None => series.push((r.series.clone(), vec![r])),
        }
    }
    let max_epoch = rows.iter().map(|r| r.epoch).max().unwrap_or(0).max(1) as f64;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for r in rows {
        for v in [r.mean, r.ci_low.max(r.mean * 1e-3), r.ci_high] {
            if v > 0.0 && v.is_finite() {
                lo = lo.min(log10(v));
                hi = hi.max(log10(v));
            }
        }
    }
    if !lo.is_finite() {
        (lo, hi) = (-1.0, 0.0);
    }
    let (lo, hi) = (lo.floor(), hi.ceil().max(lo.floor() + 1.0));
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |e: usize| LEFT + e as f64 / max_epoch * plot_w;
    let sy = |v: f64| TOP + (hi - log10(v).clamp(lo, hi)) / (hi - lo) * plot_h;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    for p in (lo as i64)..=(hi as i64) {
        let y = sy(10f64.powi(p as i32));
        let _ = writeln!(
            out,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">1e{p}</text>"##,
            LEFT + plot_w,
            LEFT - 6.0,
            y + 4.0
        );
    }
    for j in 0..=4 {
        let e = (max_epoch * j as f64 / 4.0).round() as usize;
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{e}</text>"#,
            sx(e),
            TOP + plot_h + 18.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">epoch</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        out,
        r#"<text transform="translate(16 {:.2}) rotate(-90)" text-anchor="middle">normalized V (log scale)</text>"#,
        TOP + plot_h / 2.0
    );
    for (i, (key, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut band = String::new();
        for (j, r) in pts.iter().enumerate() {
            let _ = write!(band, "{}{:.2},{:.2} ", if j == 0 { "M" } else { "L" }, sx(r.epoch), sy(r.ci_high));
        }
        for r in pts.iter().rev() {
            let _ = write!(band, "L{:.2},{:.2} ", sx(r.epoch), sy(r.ci_low));
        }
        let _ = writeln!(out, r#"<path d="{}Z" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, band);
        let line: Vec<String> = pts.iter().map(|r| format!("{:.2},{:.2}", sx(r.epoch), sy(r.mean))).collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            line.join(" ")
        );
        let ly = TOP + 14.0 + 18.0 * i as f64;
        let lx = WIDTH - RIGHT + 12.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx}" y1="{ly}" x2="{:.1}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{} {} b={}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            key.0,
            key.1,
            key.2
        );
    }
    out.push_str("</svg>\n");
    out
}
