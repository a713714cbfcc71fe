//! Minimal CDF plots. Presentation only: one `<path>` per series, axes drawn
//! with `<line>` and `<text>` elements.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 50.0;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Renders empirical CDFs of already sorted samples, one curve per series.
pub fn cdf_svg(title: &str, unit: &str, series: &[(String, Vec<f64>)]) -> String {
    let (lo, hi) = series
        .iter()
        .flat_map(|(_, v)| v.iter().copied())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
            (lo.min(x), hi.max(x))
        });
    let (lo, hi) = if lo.is_finite() {
        (lo.min(0.0), hi)
    } else {
        (0.0, 1.0)
    };
    let span = if hi > lo { hi - lo } else { 1.0 };
    let x = |v: f64| PAD + (v - lo) / span * (W - 2.0 * PAD);
    let y = |f: f64| H - PAD - f * (H - 2.0 * PAD);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<line x1="{PAD}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        H - PAD,
        W - PAD,
        H - PAD
    );
    let _ = writeln!(
        s,
        r#"<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{}" stroke="black"/>"#,
        H - PAD
    );
    let _ = writeln!(
        s,
        r#"<text x="{PAD}" y="{}" font-size="11">{lo:.4}</text>"#,
        H - PAD + 16.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{hi:.4} {}</text>"#,
        W - PAD,
        H - PAD + 16.0,
        escape(unit)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="11" text-anchor="end">1.0</text>"#,
        PAD - 4.0,
        PAD + 4.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="11" text-anchor="end">0.0</text>"#,
        PAD - 4.0,
        H - PAD
    );
    for (i, (name, values)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let n = values.len().max(1) as f64;
        let mut d = String::new();
        if let Some(&first) = values.first() {
            let _ = write!(d, "M{:.2},{:.2}", x(first), y(0.0));
        }
        for (k, &v) in values.iter().enumerate() {
            let _ = write!(
                d,
                " L{:.2},{:.2} L{:.2},{:.2}",
                x(v),
                y(k as f64 / n),
                x(v),
                y((k + 1) as f64 / n)
            );
        }
        let _ = writeln!(
            s,
            r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="1.5"/>"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="12" fill="{color}">{}</text>"#,
            W - PAD - 150.0,
            PAD + 16.0 * (i as f64 + 1.0),
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}
