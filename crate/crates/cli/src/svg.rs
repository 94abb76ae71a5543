//! Minimal static SVG charts: bars, scatter and line, no styling options.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 48.0;

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn open(title: &str, x_label: &str, y_label: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<line x1="{MARGIN}" y1="{y}" x2="{x}" y2="{y}" stroke="black"/><line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{y}" stroke="black"/>"#,
        x = WIDTH - MARGIN,
        y = HEIGHT - MARGIN
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 8.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
    s
}

/// Vertical bars, one per labelled value.
pub fn bars(title: &str, y_label: &str, items: &[(String, f64)]) -> String {
    let (_, hi) = extent(items.iter().map(|(_, v)| *v));
    let frame = Frame {
        x: (0.0, items.len().max(1) as f64),
        y: (0.0, hi.max(1e-12)),
    };
    let mut s = open(title, "", y_label);
    let slot = (WIDTH - 2.0 * MARGIN) / items.len().max(1) as f64;
    for (i, (label, v)) in items.iter().enumerate() {
        let x = frame.px(i as f64) + slot * 0.1;
        let y = frame.py(v.max(0.0));
        let _ = writeln!(
            s,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="steelblue"><title>{}</title></rect>"#,
            slot * 0.8,
            (HEIGHT - MARGIN - y).max(0.0),
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Labelled points.
pub fn scatter(title: &str, x_label: &str, y_label: &str, points: &[(String, f64, f64)]) -> String {
    let frame = Frame {
        x: extent(points.iter().map(|p| p.1)),
        y: extent(points.iter().map(|p| p.2)),
    };
    let mut s = open(title, x_label, y_label);
    for (label, x, y) in points.iter().filter(|p| p.1.is_finite() && p.2.is_finite()) {
        let (cx, cy) = (frame.px(*x), frame.py(*y));
        let _ = writeln!(s, r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="3"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="9">{}</text>"#,
            cx + 4.0,
            cy - 4.0,
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// A single polyline through `(x, y)` points in order.
pub fn line(title: &str, x_label: &str, y_label: &str, points: &[(f64, f64)]) -> String {
    let frame = Frame {
        x: extent(points.iter().map(|p| p.0)),
        y: extent(points.iter().map(|p| p.1).chain(std::iter::once(0.0))),
    };
    let mut s = open(title, x_label, y_label);
    let path: Vec<String> = points
        .iter()
        .map(|&(x, y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y)))
        .collect();
    let _ = writeln!(
        s,
        r#"<polyline fill="none" stroke="black" points="{}"/>"#,
        path.join(" ")
    );
    s.push_str("</svg>\n");
    s
}
