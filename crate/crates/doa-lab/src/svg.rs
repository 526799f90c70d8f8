//! Minimal SVG line charts for the CSV outputs.
//!
//! The CSVs are the source of truth; these renderings exist so a run can be
//! eyeballed without external tooling. Only what the figures need is
//! implemented: polylines over linear or log10 axes, ticks, and a legend.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{DoaLabError, Result};

/// One polyline; points with non-finite coordinates are skipped.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Chart frame and axis configuration.
#[derive(Debug, Clone)]
pub struct ChartSpec {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    /// Plot y on a log10 axis (points with y <= 0 are dropped).
    pub log_y: bool,
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 55.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

fn nice_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let span = (hi - lo).abs().max(f64::MIN_POSITIVE);
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|s| s * mag)
        .find(|&s| span / s <= target as f64 + 0.5)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() * step;
    let mut ticks = Vec::new();
    let mut t = first;
    while t <= hi + 1e-9 * span {
        ticks.push(t);
        t += step;
    }
    ticks
}

fn fmt_tick(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let a = x.abs();
    if (1e-3..1e4).contains(&a) {
        let s = format!("{x:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_string()
    } else {
        format!("{x:.1e}")
    }
}

/// Renders the chart to an SVG document string.
pub fn render_chart(spec: &ChartSpec, series: &[Series]) -> Result<String> {
    let mut pts: Vec<Vec<(f64, f64)>> = Vec::with_capacity(series.len());
    for s in series {
        let filtered: Vec<(f64, f64)> = s
            .points
            .iter()
            .copied()
            .filter(|(x, y)| x.is_finite() && y.is_finite() && (!spec.log_y || *y > 0.0))
            .map(|(x, y)| (x, if spec.log_y { y.log10() } else { y }))
            .collect();
        pts.push(filtered);
    }
    let all: Vec<(f64, f64)> = pts.iter().flatten().copied().collect();
    if all.is_empty() {
        return Err(DoaLabError::InvalidArgument(
            "no finite points to plot".into(),
        ));
    }
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x0 == x1 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y0 == y1 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad = 0.04;
    let (xs, ys) = (x1 - x0, y1 - y0);
    x0 -= pad * xs;
    x1 += pad * xs;
    y0 -= pad * ys;
    y1 += pad * ys;

    let px = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * (WIDTH - MARGIN_L - MARGIN_R);
    let py = |y: f64| HEIGHT - MARGIN_B - (y - y0) / (y1 - y0) * (HEIGHT - MARGIN_T - MARGIN_B);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(&spec.title)
    );
    // Frame.
    let _ = writeln!(
        s,
        r##"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{}" height="{}" fill="none" stroke="#333"/>"##,
        WIDTH - MARGIN_L - MARGIN_R,
        HEIGHT - MARGIN_T - MARGIN_B
    );
    // Ticks and grid.
    for t in nice_ticks(x0, x1, 8) {
        let x = px(t);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{MARGIN_T}" x2="{x:.2}" y2="{}" stroke="#ddd"/>"##,
            HEIGHT - MARGIN_B
        );
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            HEIGHT - MARGIN_B + 16.0,
            fmt_tick(t)
        );
    }
    for t in nice_ticks(y0, y1, 6) {
        let y = py(t);
        let _ = writeln!(
            s,
            r##"<line x1="{MARGIN_L}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#ddd"/>"##,
            WIDTH - MARGIN_R
        );
        let label = if spec.log_y {
            format!("1e{}", fmt_tick(t))
        } else {
            fmt_tick(t)
        };
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">{label}</text>"#,
            MARGIN_L - 6.0,
            y + 4.0
        );
    }
    // Axis labels.
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>"#,
        (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
        HEIGHT - 12.0,
        escape(&spec.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
        (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
        escape(&spec.y_label)
    );
    // Series.
    for (i, (serie, filtered)) in series.iter().zip(pts.iter()).enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if !filtered.is_empty() {
            let path: Vec<String> = filtered
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.8"/>"#,
                path.join(" ")
            );
        }
        // Legend row.
        let ly = MARGIN_T + 14.0 + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{ly:.2}" x2="{}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
            WIDTH - MARGIN_R - 150.0,
            WIDTH - MARGIN_R - 125.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.2}" font-family="sans-serif" font-size="12">{}</text>"#,
            WIDTH - MARGIN_R - 118.0,
            ly + 4.0,
            escape(&serie.label)
        );
    }
    let _ = writeln!(s, "</svg>");
    Ok(s)
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders and writes the chart next to its CSV.
pub fn write_chart(path: &Path, spec: &ChartSpec, series: &[Series]) -> Result<()> {
    let doc = render_chart(spec, series)?;
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, doc)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo_series() -> Vec<Series> {
        vec![
            Series {
                label: "gmusic".into(),
                points: (0..20).map(|i| (i as f64, 1e-4 * (1.0 + i as f64))).collect(),
            },
            Series {
                label: "music".into(),
                points: (0..20).map(|i| (i as f64, 2e-4 * (1.0 + i as f64))).collect(),
            },
        ]
    }

    #[test]
    fn chart_contains_frame_series_and_labels() {
        let spec = ChartSpec {
            title: "MSE vs SNR".into(),
            x_label: "SNR (dB)".into(),
            y_label: "MSE".into(),
            log_y: true,
        };
        let doc = render_chart(&spec, &demo_series()).unwrap();
        assert!(doc.starts_with("<svg"));
        assert!(doc.ends_with("</svg>\n"));
        assert_eq!(doc.matches("<polyline").count(), 2);
        assert!(doc.contains("MSE vs SNR"));
        assert!(doc.contains("gmusic") && doc.contains("music"));
        // Log axis labels carry the exponent form.
        assert!(doc.contains("1e"), "log ticks missing: {doc:.0?}");
    }

    #[test]
    fn log_axis_drops_nonpositive_points() {
        let spec = ChartSpec {
            title: "t".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            log_y: true,
        };
        let series = vec![Series {
            label: "s".into(),
            points: vec![(0.0, 0.0), (1.0, -1.0), (2.0, 1.0), (3.0, 10.0)],
        }];
        let doc = render_chart(&spec, &series).unwrap();
        // Only two points survive; the polyline has exactly two pairs.
        let poly = doc
            .lines()
            .find(|l| l.contains("<polyline"))
            .expect("polyline");
        let pairs = poly.split('"').nth(1).unwrap().split(' ').count();
        assert_eq!(pairs, 2, "surviving points in {poly}");
        // All-dropped series is an error.
        let empty = vec![Series {
            label: "none".into(),
            points: vec![(0.0, -1.0)],
        }];
        assert!(render_chart(&spec, &empty).is_err());
    }

    #[test]
    fn ticks_cover_the_span_with_round_steps() {
        let t = nice_ticks(-10.0, 20.0, 8);
        assert!(t.len() >= 4 && t.len() <= 10, "{t:?}");
        assert!(t.first().unwrap() >= &-10.0 && t.last().unwrap() <= &20.0);
        let step = t[1] - t[0];
        for w in t.windows(2) {
            assert!((w[1] - w[0] - step).abs() < 1e-9, "uneven steps {t:?}");
        }
    }
}
