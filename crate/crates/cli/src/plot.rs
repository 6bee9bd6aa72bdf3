//! Static SVG line charts built from already-written CSV text: first column on
//! the horizontal axis, one polyline per remaining column.

use std::fmt::Write as _;

use fockmarket::timeseries::format_g12;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 56.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#7f7f7f",
];

/// `None` when the text has no header, fewer than two columns or no rows.
pub fn svg_from_csv(csv: &str, title: &str) -> Option<String> {
    let mut lines = csv.lines();
    let headers: Vec<&str> = lines.next()?.split(',').collect();
    if headers.len() < 2 {
        return None;
    }
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap_or(f64::NAN)).collect())
        .filter(|r: &Vec<f64>| r.len() == headers.len())
        .collect();
    if rows.is_empty() {
        return None;
    }
    let finite = |v: &f64| v.is_finite();
    let xs: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let ys = rows.iter().flat_map(|r| r[1..].iter().copied()).filter(finite);
    let (x0, x1) = span(xs.iter().copied().filter(finite));
    let (y0, y1) = span(ys);
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        s,
        r#"<path d="M{left} {top} L{left} {bottom} L{right} {bottom}" stroke="black" fill="none"/>"#
    );
    if y0 < 0.0 && y1 > 0.0 {
        let z = sy(0.0);
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{z:.2}" x2="{right}" y2="{z:.2}" stroke="#bbbbbb" stroke-dasharray="4 3"/>"##
        );
    }
    for (x, y, anchor, v) in [
        (left, bottom + 16.0, "start", x0),
        (right, bottom + 16.0, "end", x1),
        (left - 6.0, bottom, "end", y0),
        (left - 6.0, top + 4.0, "end", y1),
    ] {
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{y}" text-anchor="{anchor}">{}</text>"#,
            format_g12(v)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0,
        escape(headers[0])
    );
    for (c, name) in headers.iter().enumerate().skip(1) {
        let color = COLORS[(c - 1) % COLORS.len()];
        let points: Vec<String> = rows
            .iter()
            .filter(|r| r[0].is_finite() && r[c].is_finite())
            .map(|r| format!("{:.2},{:.2}", sx(r[0]), sy(r[c])))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" stroke="{color}" stroke-width="1.5" fill="none"/>"#,
            points.join(" ")
        );
        let ly = top + 14.0 * c as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{ly}" fill="{color}">{}</text>"#,
            right + 4.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    Some(s)
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
        (a.min(v), b.max(v))
    });
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 * lo.abs().max(1.0) {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_one_polyline_per_series() {
        let svg = svg_from_csv("t,a,b\n0,1,-1\n1,2,0\n2,3,1\n", "x<y").unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("x&lt;y"));
        assert!(svg.contains("stroke-dasharray"));
        assert!(svg.ends_with("</svg>\n"));
    }

    #[test]
    fn degenerate_inputs() {
        assert!(svg_from_csv("", "t").is_none());
        assert!(svg_from_csv("t\n0\n", "t").is_none());
        assert!(svg_from_csv("t,a\n", "t").is_none());
        let flat = svg_from_csv("t,a\n0,1\n1,1\n", "flat").unwrap();
        assert!(!flat.contains("NaN"));
    }
}
