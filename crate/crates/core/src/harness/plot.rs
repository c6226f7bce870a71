use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::trace::EpisodeTrace;
use crate::error::{Error, Result};

/// `sum_rate` plus every numeric per-UE CSV column.
pub const KNOWN_METRICS: &[&str] = &[
    "sum_rate",
    "num_cc",
    "rb_cc1",
    "rb_cc2",
    "rb_total",
    "p_total_w",
    "p_cc1_w",
    "p_cc2_w",
    "p_si_w",
    "rate_bps",
    "state_bit",
    "reward",
];

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
const COLORS: &[&str] = &[
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

/// A labelled line: `(episode, value)` points.
pub type Series = (String, Vec<(usize, f64)>);

/// Labelled per-episode series of `metric`: one per trace for `sum_rate`,
/// one per (trace, UE) otherwise.
pub fn plot_series(series: &[(&str, &EpisodeTrace)], metric: &str) -> Result<Vec<Series>> {
    if !KNOWN_METRICS.contains(&metric) {
        return Err(Error::UnknownMetric(metric.to_string()));
    }
    let mut out = Vec::new();
    for (label, trace) in series {
        if metric == "sum_rate" {
            out.push((label.to_string(), trace.sum_rate_by_episode()));
        } else {
            for ue in trace.ues() {
                out.push((format!("{label} UE{}", ue + 1), trace.ue_metric_by_episode(ue, metric)?));
            }
        }
    }
    Ok(out)
}

/// SVG line chart of the per-episode mean of `metric`.
pub fn render_svg(series: &[(&str, &EpisodeTrace)], metric: &str) -> Result<String> {
    let lines = plot_series(series, metric)?;
    let points = lines.iter().flat_map(|(_, s)| s.iter());
    let (mut x_max, mut y_min, mut y_max) = (1usize, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in points {
        x_max = x_max.max(x);
        if y.is_finite() {
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
    }
    if !y_min.is_finite() {
        (y_min, y_max) = (0.0, 1.0);
    }
    if y_max - y_min < 1e-12 * y_max.abs().max(1.0) {
        let pad = y_max.abs().max(1.0) * 0.05;
        y_min -= pad;
        y_max += pad;
    }
    let sx = |x: usize| {
        if x_max <= 1 {
            MARGIN
        } else {
            MARGIN + (x - 1) as f64 / (x_max - 1) as f64 * (WIDTH - 2.0 * MARGIN)
        }
    };
    let sy = |y: f64| HEIGHT - MARGIN - (y - y_min) / (y_max - y_min) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<path d="M{m} {m} V{b} H{r}" fill="none" stroke="black"/>"#,
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">episode (1..{x_max})</text>"#,
        WIDTH / 2.0,
        HEIGHT - 20.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="15" y="{}" font-size="12" transform="rotate(-90 15 {})" text-anchor="middle">{metric}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    for (y, anchor) in [(y_min, HEIGHT - MARGIN), (y_max, MARGIN)] {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{anchor:.2}" font-size="10" text-anchor="end">{y:.4e}</text>"#,
            MARGIN - 4.0
        );
    }
    for (i, (label, s)) in lines.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = s
            .iter()
            .filter(|(_, y)| y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = MARGIN + 14.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{ly:.2}" font-size="11" fill="{color}">{}</text>"#,
            WIDTH - MARGIN - 150.0,
            escape(label)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn emit_plot(series: &[(&str, &EpisodeTrace)], metric: &str, path: &Path) -> Result<()> {
    let svg = render_svg(series, metric)?;
    fs::write(path, svg).map_err(|e| Error::io(path, e))
}
