//! Minimal SVG line plots on log-log axes. Plots are a convenience; the CSV
//! tables are the record.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const PAD: f64 = 60.0;
const COLORS: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct Series<'a> {
    pub label: &'a str,
    pub y: Vec<f64>,
}

/// Renders every series against `x` on log-log axes. Non-positive or
/// non-finite points are skipped; returns `None` when nothing is plottable.
pub fn log_log_plot(title: &str, x_label: &str, x: &[f64], series: &[Series]) -> Option<String> {
    let pts: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            x.iter()
                .zip(&s.y)
                .filter(|(a, b)| a.is_finite() && b.is_finite() && **a > 0.0 && **b > 0.0)
                .map(|(a, b)| (a.log10(), b.log10()))
                .collect()
        })
        .collect();
    let all: Vec<&(f64, f64)> = pts.iter().flatten().collect();
    if pts.iter().all(|p| p.len() < 2) {
        return None;
    }
    let (mut x0, mut x1, mut y0, mut y1) = all.iter().fold(
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
        |(a, b, c, d), (x, y)| (a.min(*x), b.max(*x), c.min(*y), d.max(*y)),
    );
    // Whole decades so tick labels are powers of ten.
    x0 = x0.floor();
    x1 = x1.ceil().max(x0 + 1.0);
    y0 = y0.floor();
    y1 = y1.ceil().max(y0 + 1.0);
    let sx = |v: f64| PAD + (v - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |v: f64| H - PAD - (v - y0) / (y1 - y0) * (H - 2.0 * PAD);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    for k in (x0 as i64)..=(x1 as i64) {
        let px = sx(k as f64);
        let _ = writeln!(s, r##"<line x1="{px:.2}" y1="{}" x2="{px:.2}" y2="{PAD}" stroke="#ddd"/>"##, H - PAD);
        let _ = writeln!(s, r#"<text x="{px:.2}" y="{}" text-anchor="middle">1e{k}</text>"#, H - PAD + 16.0);
    }
    for k in (y0 as i64)..=(y1 as i64) {
        let py = sy(k as f64);
        let _ = writeln!(s, r##"<line x1="{PAD}" y1="{py:.2}" x2="{}" y2="{py:.2}" stroke="#ddd"/>"##, W - PAD);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">1e{k}</text>"#, PAD - 6.0, py + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 16.0, escape(x_label));
    for (i, (ser, p)) in series.iter().zip(&pts).enumerate() {
        if p.len() < 2 {
            continue;
        }
        let color = COLORS[i % COLORS.len()];
        let coords: Vec<String> = p.iter().map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, coords.join(" "));
        let ly = PAD + 16.0 + 16.0 * i as f64;
        let _ = writeln!(s, r#"<text x="{}" y="{ly}" fill="{color}">{}</text>"#, PAD + 8.0, escape(ser.label));
    }
    s.push_str("</svg>\n");
    Some(s)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plot_has_one_polyline_per_usable_series() {
        let x = [0.01, 0.1, 1.0];
        let svg = log_log_plot(
            "t <-> sup",
            "t",
            &x,
            &[Series { label: "a", y: vec![1.0, 2.0, 3.0] }, Series { label: "b", y: vec![0.0, -1.0, 1.0] }],
        )
        .unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.contains("t &lt;-&gt; sup"));
        assert!(log_log_plot("x", "t", &x, &[Series { label: "z", y: vec![0.0; 3] }]).is_none());
    }
}
