//! Minimal SVG line plots of correlation sweeps.

use std::fmt::Write;

use super::{ShiftSweepReport, SweepMetric};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_TOP: f64 = 36.0;
const MARGIN_BOTTOM: f64 = 52.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, v: f64) -> f64 {
        MARGIN_LEFT + (v - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn py(&self, v: f64) -> f64 {
        HEIGHT - MARGIN_BOTTOM - (v - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

fn y_range(series: &[ShiftSweepReport]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in series {
        for p in &s.points {
            for v in [p.ci_low, p.ci_high, p.mean] {
                if v.is_finite() {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
        }
        if let Some(r) = s.reference {
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = ((hi - lo) * 0.08).max(0.01);
    let (mut lo, mut hi) = (lo - pad, hi + pad);
    if series.iter().all(|s| s.metric == SweepMetric::Accuracy) {
        lo = lo.max(0.0);
        hi = hi.min(1.0);
    }
    (lo, hi)
}

/// Mean curve with a shaded interval per series, a dashed vertical marker
/// at the training correlation, a dotted horizontal reference line when a
/// series carries one, and a legend.
pub fn sweep_svg(series: &[ShiftSweepReport], title: &str) -> String {
    let mut xs: Vec<f64> = series.iter().flat_map(|s| s.points.iter().map(|p| p.rho)).collect();
    xs.sort_by(f64::total_cmp);
    let (x0, x1) = match (xs.first(), xs.last()) {
        (Some(&a), Some(&b)) if b > a => (a, b),
        (Some(&a), _) => (a - 0.5, a + 0.5),
        _ => (-1.0, 1.0),
    };
    let frame = Frame {
        x: (x0, x1),
        y: y_range(series),
    };
    let ylabel = match series.first().map(|s| s.metric) {
        Some(SweepMetric::VarianceExplained) => "variance explained",
        _ => "accuracy",
    };
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        (MARGIN_LEFT + WIDTH - MARGIN_RIGHT) / 2.0,
        escape(title)
    );
    let (left, right) = (frame.px(x0), frame.px(x1));
    let (top, bottom) = (frame.py(frame.y.1), frame.py(frame.y.0));
    let _ = writeln!(
        svg,
        r#"<rect x="{left:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        right - left,
        bottom - top
    );
    for i in 0..=4 {
        let xv = x0 + (x1 - x0) * i as f64 / 4.0;
        let yv = frame.y.0 + (frame.y.1 - frame.y.0) * i as f64 / 4.0;
        let (px, py) = (frame.px(xv), frame.py(yv));
        let _ = writeln!(svg, r#"<line x1="{px:.2}" y1="{bottom:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/>"#, bottom + 5.0);
        let _ = writeln!(svg, r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{xv:.2}</text>"#, bottom + 18.0);
        let _ = writeln!(svg, r#"<line x1="{:.2}" y1="{py:.2}" x2="{left:.2}" y2="{py:.2}" stroke="black"/>"#, left - 5.0);
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{yv:.3}</text>"#, left - 8.0, py + 4.0);
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">test correlation</text>"#,
        (left + right) / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        svg,
        r#"<text transform="translate(16 {:.2}) rotate(-90)" text-anchor="middle">{ylabel}</text>"#,
        (top + bottom) / 2.0
    );
    if let Some(s) = series.first() {
        if (x0..=x1).contains(&s.train_rho) {
            let px = frame.px(s.train_rho);
            let _ = writeln!(
                svg,
                r#"<line x1="{px:.2}" y1="{top:.2}" x2="{px:.2}" y2="{bottom:.2}" stroke="gray" stroke-dasharray="6 4"/>"#
            );
            let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" fill="gray">train</text>"#, px + 4.0, top + 14.0);
        }
    }
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<_> = s.points.iter().filter(|p| p.mean.is_finite()).collect();
        if pts.is_empty() {
            continue;
        }
        let mut band = String::new();
        for p in &pts {
            let _ = write!(band, "{:.2},{:.2} ", frame.px(p.rho), frame.py(p.ci_high));
        }
        for p in pts.iter().rev() {
            let _ = write!(band, "{:.2},{:.2} ", frame.px(p.rho), frame.py(p.ci_low));
        }
        let _ = writeln!(svg, r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, band.trim_end());
        let line: Vec<String> = pts.iter().map(|p| format!("{:.2},{:.2}", frame.px(p.rho), frame.py(p.mean))).collect();
        let _ = writeln!(svg, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, line.join(" "));
        for p in &pts {
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                frame.px(p.rho),
                frame.py(p.mean)
            );
        }
        if let Some(r) = s.reference {
            let py = frame.py(r);
            let _ = writeln!(
                svg,
                r#"<line x1="{left:.2}" y1="{py:.2}" x2="{right:.2}" y2="{py:.2}" stroke="black" stroke-dasharray="2 3"/>"#
            );
        }
        let ly = top + 16.0 + 18.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
            right + 12.0,
            right + 32.0
        );
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, right + 38.0, ly + 4.0, escape(&s.label));
    }
    svg.push_str("</svg>\n");
    svg
}
