//! Minimal SVG rendering of contours. The x axis is mirrored so the tongue
//! tip is drawn on the left.

use std::fmt::Write;

use crate::geometry::Point2;
use crate::scalar::Scalar;

const PANEL: f64 = 240.0;
const TITLE: f64 = 18.0;
const PAD: f64 = 10.0;

pub struct Curve<'a, T> {
    pub points: &'a [Point2<T>],
    pub class: &'a str,
    pub stroke: &'a str,
}

pub struct Panel<'a, T> {
    pub title: String,
    pub curves: Vec<Curve<'a, T>>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Lays panels out on a grid with `cols` columns. All panels share one
/// mm-to-pixel scale so shapes are comparable across panels.
pub fn render<T: Scalar>(panels: &[Panel<'_, T>], cols: usize) -> String {
    let cols = cols.max(1);
    let rows = panels.len().div_ceil(cols).max(1);
    let (mut lo, mut hi) = (Point2::new(f64::MAX, f64::MAX), Point2::new(f64::MIN, f64::MIN));
    for p in panels.iter().flat_map(|p| p.curves.iter()).flat_map(|c| c.points.iter()) {
        let (x, y) = (p.x.as_f64(), p.y.as_f64());
        lo = Point2::new(lo.x.min(x), lo.y.min(y));
        hi = Point2::new(hi.x.max(x), hi.y.max(y));
    }
    if lo.x > hi.x {
        lo = Point2::new(0.0, 0.0);
        hi = Point2::new(1.0, 1.0);
    }
    let span = (hi.x - lo.x).max(hi.y - lo.y).max(1e-9);
    let scale = (PANEL - 2.0 * PAD) / span;

    let width = cols as f64 * PANEL;
    let height = rows as f64 * (PANEL + TITLE);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(s, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    for (k, panel) in panels.iter().enumerate() {
        let ox = (k % cols) as f64 * PANEL;
        let oy = (k / cols) as f64 * (PANEL + TITLE);
        let _ = writeln!(s, r#"<g class="panel" transform="translate({ox},{oy})">"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="13" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#,
            PANEL / 2.0,
            escape(&panel.title)
        );
        let _ = writeln!(
            s,
            r##"<rect x="0.5" y="{}" width="{}" height="{}" fill="none" stroke="#ccc"/>"##,
            TITLE + 0.5,
            PANEL - 1.0,
            PANEL - 1.0
        );
        for c in &panel.curves {
            let pts: Vec<String> = c
                .points
                .iter()
                .map(|p| {
                    let x = PAD + (hi.x - p.x.as_f64()) * scale;
                    let y = TITLE + PAD + (hi.y - p.y.as_f64()) * scale;
                    format!("{x:.3},{y:.3}")
                })
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline class="{}" fill="none" stroke="{}" stroke-width="2" points="{}"/>"#,
                escape(c.class),
                escape(c.stroke),
                pts.join(" ")
            );
        }
        s.push_str("</g>\n");
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tip_is_drawn_left() {
        let pts = [Point2::new(-30.0, 0.0), Point2::new(30.0, 0.0)];
        let svg = render(
            &[Panel {
                title: "a<b".into(),
                curves: vec![Curve {
                    points: &pts,
                    class: "contour",
                    stroke: "black",
                }],
            }],
            1,
        );
        let poly = svg.split("points=\"").nth(1).unwrap();
        let coords: Vec<f64> = poly
            .split('"')
            .next()
            .unwrap()
            .split([' ', ','])
            .map(|v| v.parse().unwrap())
            .collect();
        // The second point (larger x, towards the tip) is further left.
        assert!(coords[2] < coords[0]);
        assert!(svg.contains("a&lt;b"));
        assert_eq!(svg.matches("<polyline").count(), 1);
    }
}
