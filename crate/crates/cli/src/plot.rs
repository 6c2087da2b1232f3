//! Minimal SVG rendering of correlation curves.

use std::fmt::Write;

use zerocrit_core::estimator::CorrelationCurve;

const W: f64 = 720.0;
const H: f64 = 480.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 28.0;
const BOTTOM: f64 = 52.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn nice_step(span: f64) -> f64 {
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Curves as points with error bars at bin centres, an optional exact line
/// and the horizontal reference `5/3`.
pub fn render(curves: &[(String, CorrelationCurve)], exact: Option<&[(f64, f64)]>) -> String {
    let x_max = curves
        .iter()
        .filter_map(|(_, c)| c.bin_edges.last().copied())
        .chain(exact.and_then(|e| e.last().map(|p| p.0)))
        .fold(0.0f64, f64::max)
        .max(1e-9);
    let y_max = curves
        .iter()
        .flat_map(|(_, c)| c.values.iter().zip(&c.stderr).map(|(v, s)| v + s))
        .chain(exact.into_iter().flatten().map(|p| p.1))
        .fold(5.0 / 3.0, f64::max)
        * 1.08;
    let sx = |x: f64| LEFT + x / x_max * (W - LEFT - RIGHT);
    let sy = |y: f64| H - BOTTOM - y / y_max * (H - TOP - BOTTOM);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let (x0, y0, x1, y1) = (sx(0.0), sy(0.0), sx(x_max), sy(y_max));
    let _ = writeln!(s, r#"<path d="M{x0:.1},{y1:.1} V{y0:.1} H{x1:.1}" stroke="black" fill="none"/>"#);
    let step = nice_step(x_max);
    let mut t = 0.0;
    while t <= x_max + 1e-9 {
        let _ = writeln!(
            s,
            r#"<line x1="{0:.1}" y1="{y0:.1}" x2="{0:.1}" y2="{1:.1}" stroke="black"/><text x="{0:.1}" y="{2:.1}" text-anchor="middle">{3}</text>"#,
            sx(t),
            y0 + 5.0,
            y0 + 19.0,
            (t * 1e6).round() / 1e6
        );
        t += step;
    }
    let step = nice_step(y_max);
    let mut t = 0.0;
    while t <= y_max + 1e-9 {
        let _ = writeln!(
            s,
            r#"<line x1="{0:.1}" y1="{1:.1}" x2="{x0:.1}" y2="{1:.1}" stroke="black"/><text x="{2:.1}" y="{3:.1}" text-anchor="end">{4}</text>"#,
            x0 - 5.0,
            sy(t),
            x0 - 8.0,
            sy(t) + 4.0,
            (t * 1e6).round() / 1e6
        );
        t += step;
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">r</text><text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">K(r)</text>"#,
        0.5 * (x0 + x1),
        H - 12.0,
        0.5 * (y0 + y1),
        0.5 * (y0 + y1)
    );
    let yr = sy(5.0 / 3.0);
    let _ = writeln!(
        s,
        r##"<line x1="{x0:.1}" y1="{yr:.1}" x2="{x1:.1}" y2="{yr:.1}" stroke="#777" stroke-dasharray="6,4"/><text x="{:.1}" y="{:.1}" text-anchor="end" fill="#777">5/3</text>"##,
        x1 - 4.0,
        yr - 5.0
    );
    if let Some(points) = exact {
        let mut d = String::new();
        for (k, (x, y)) in points.iter().enumerate() {
            let _ = write!(d, "{}{:.2},{:.2} ", if k == 0 { "M" } else { "L" }, sx(*x), sy(*y));
        }
        let _ = writeln!(s, r#"<path d="{}" stroke="black" stroke-width="1.5" fill="none"/>"#, d.trim_end());
    }
    for (i, (label, c)) in curves.iter().enumerate() {
        let col = COLORS[i % COLORS.len()];
        for k in 0..c.bins() {
            let xm = sx(0.5 * (c.bin_edges[k] + c.bin_edges[k + 1]));
            let (v, e) = (c.values[k], c.stderr[k]);
            let _ = writeln!(
                s,
                r#"<line x1="{xm:.2}" y1="{:.2}" x2="{xm:.2}" y2="{:.2}" stroke="{col}"/><circle cx="{xm:.2}" cy="{:.2}" r="3" fill="{col}"/>"#,
                sy(v - e),
                sy(v + e),
                sy(v)
            );
        }
        let ly = TOP + 16.0 * i as f64 + 8.0;
        let _ = writeln!(
            s,
            r#"<circle cx="{:.1}" cy="{ly:.1}" r="3" fill="{col}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            x1 - 160.0,
            x1 - 150.0,
            ly + 4.0,
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn steps_are_round() {
        assert_eq!(nice_step(4.0), 1.0);
        assert_eq!(nice_step(6.0), 1.0);
        assert_eq!(nice_step(2.0), 0.5);
    }
}
