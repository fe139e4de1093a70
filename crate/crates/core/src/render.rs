//! SVG error-bar charts with fixed geometry.
//!
//! Layout: 640x360 canvas, 64 px left margin, 40 px top, 48 px bottom, 24 px
//! right. Groups are evenly spaced in the order given (the callers pass
//! Low/Medium/High, or continents alphabetically). Each group gets a vertical
//! whisker from `ci_low` to `ci_high`, 16 px caps and a 4 px mean marker.
//! Groups without a defined interval show the marker only. The y range spans
//! all drawn values plus 5% padding; five evenly spaced tick labels.

use std::fmt::Write;

use crate::stats::GroupStats;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 360.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 48.0;
const CAP: f64 = 16.0;
const MARKER: f64 = 4.0;
const TICKS: usize = 5;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn y_range(groups: &[GroupStats]) -> (f64, f64) {
    let values: Vec<f64> =
        groups.iter().flat_map(|g| [g.mean, g.ci_low, g.ci_high]).flatten().filter(|v| v.is_finite()).collect();
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let span = if hi > lo { hi - lo } else { lo.abs().max(1.0) };
    (lo - 0.05 * span, hi + 0.05 * span)
}

/// Renders one error-bar chart.
pub fn errorbar_svg(title: &str, y_label: &str, groups: &[GroupStats]) -> String {
    let (y_min, y_max) = y_range(groups);
    let plot_h = HEIGHT - TOP - BOTTOM;
    let plot_w = WIDTH - LEFT - RIGHT;
    let y = |v: f64| TOP + (y_max - v) / (y_max - y_min) * plot_h;
    let slot = plot_w / groups.len().max(1) as f64;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let _ = writeln!(s, r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{:.2}" stroke="black"/>"#, TOP + plot_h);
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black"/>"#,
        TOP + plot_h,
        LEFT + plot_w,
        TOP + plot_h
    );
    for i in 0..TICKS {
        let v = y_min + (y_max - y_min) * i as f64 / (TICKS - 1) as f64;
        let ty = y(v);
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{ty:.2}" x2="{LEFT}" y2="{ty:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 4.0,
            LEFT - 6.0,
            ty + 4.0,
            format_tick(v)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0,
        escape(y_label)
    );

    for (i, g) in groups.iter().enumerate() {
        let cx = LEFT + slot * (i as f64 + 0.5);
        let _ = writeln!(
            s,
            r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle">{}</text><text x="{cx:.2}" y="{:.2}" text-anchor="middle" font-size="10">n={}</text>"#,
            TOP + plot_h + 18.0,
            escape(&g.group_label),
            TOP + plot_h + 32.0,
            g.n
        );
        if let (Some(lo), Some(hi)) = (g.ci_low, g.ci_high) {
            let (y_lo, y_hi) = (y(lo), y(hi));
            let _ = writeln!(
                s,
                r#"<g stroke="black"><line x1="{cx:.2}" y1="{y_hi:.2}" x2="{cx:.2}" y2="{y_lo:.2}"/><line x1="{:.2}" y1="{y_hi:.2}" x2="{:.2}" y2="{y_hi:.2}"/><line x1="{:.2}" y1="{y_lo:.2}" x2="{:.2}" y2="{y_lo:.2}"/></g>"#,
                cx - CAP / 2.0,
                cx + CAP / 2.0,
                cx - CAP / 2.0,
                cx + CAP / 2.0
            );
        }
        if let Some(m) = g.mean {
            let _ = writeln!(s, r#"<circle cx="{cx:.2}" cy="{:.2}" r="{MARKER}" fill="black"/>"#, y(m));
        }
    }
    s.push_str("</svg>\n");
    s
}

fn format_tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e6).contains(&a) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn group(label: &str, n: usize, mean: f64, hw: Option<f64>) -> GroupStats {
        GroupStats {
            group_label: label.into(),
            n,
            mean: Some(mean),
            sd: hw.map(|_| 1.0),
            ci_low: hw.map(|h| mean - h),
            ci_high: hw.map(|h| mean + h),
            level: 0.95,
        }
    }

    #[test]
    fn geometry_is_stable() {
        let groups = [group("Low", 5, 0.0, Some(1.0)), group("High", 1, 2.0, None)];
        let svg = errorbar_svg("i_r by class", "i_r", &groups);
        assert_eq!(svg, errorbar_svg("i_r by class", "i_r", &groups));
        // one whisker group, two markers
        assert_eq!(svg.matches("<g stroke").count(), 1);
        assert_eq!(svg.matches("<circle").count(), 2);
        // first slot centre: 64 + 552/2/2
        assert!(svg.contains(r#"cx="202.00""#));
        assert!(svg.contains("n=1"));
    }

    #[test]
    fn escapes_labels() {
        let svg = errorbar_svg("a<b", "y", &[]);
        assert!(svg.contains("a&lt;b"));
    }
}
