//! Minimal SVG line charts for trajectories.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Plots each series against its 1-based index. With `log_y`, values are
/// shown as `log10` and non-positive entries are dropped.
pub fn line_chart(title: &str, series: &[(&str, &[f64])], log_y: bool) -> String {
    let tf = |v: f64| if log_y { v.log10() } else { v };
    let points: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|(_, ys)| {
            ys.iter()
                .enumerate()
                .filter(|(_, v)| v.is_finite() && (!log_y || **v > 0.0))
                .map(|(i, v)| ((i + 1) as f64, tf(*v)))
                .collect()
        })
        .collect();
    let all = points.iter().flatten();
    let (mut x1, mut y0, mut y1) = (1.0f64, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !y0.is_finite() {
        (y0, y1) = (0.0, 1.0);
    }
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let sx = |x: f64| PAD + (x - 1.0) / (x1 - 1.0).max(1.0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<polyline fill="none" stroke="black" points="{PAD},{PAD} {PAD},{} {},{}"/>"#,
        H - PAD,
        W - PAD,
        H - PAD
    );
    let label = |v: f64| if log_y { format!("1e{v:.1}") } else { format!("{v:.3e}") };
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, PAD - 4.0, sy(y1) + 4.0, label(y1));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, PAD - 4.0, sy(y0) + 4.0, label(y0));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W - PAD, H - PAD + 16.0, x1);
    for (k, ((name, _), pts)) in series.iter().zip(&points).enumerate() {
        let color = COLORS[k % COLORS.len()];
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, coords.join(" "));
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            W - PAD - 120.0,
            PAD + 16.0 * k as f64,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_has_one_polyline_per_series() {
        let a = [1.0, 2.0, 4.0];
        let b = [0.5, 0.5, 0.5];
        let svg = line_chart("r & beta", &[("r", &a), ("beta", &b)], false);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("stroke-width=\"1.5\"").count(), 2);
        assert!(svg.contains("r &amp; beta"));
    }

    #[test]
    fn log_scale_drops_non_positive() {
        let a = [0.0, 10.0, 100.0];
        let svg = line_chart("g", &[("g", &a)], true);
        let line = svg.lines().find(|l| l.contains("stroke-width")).unwrap();
        assert_eq!(line.matches(',').count(), 2);
    }
}
