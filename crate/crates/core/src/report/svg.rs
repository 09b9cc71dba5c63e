//! Standalone SVG scatter plot of a 2-D projection.

use std::fmt::Write as _;

use super::{Origin, Projection2D};

const SIZE: f64 = 800.0;
const MARGIN: f64 = 60.0;

fn color(o: Origin) -> &'static str {
    match o {
        Origin::AOnly => "#1f9fbf",
        Origin::BOnly => "#8a4fbf",
        Origin::Shared => "#d98c1f",
        Origin::Target => "#d62728",
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c if (c as u32) < 0x20 && c != '\t' => out.push('\u{fffd}'),
            c => out.push(c),
        }
    }
    out
}

/// Renders the projection. Output depends only on the projection, so equal
/// projections give byte-identical documents.
pub fn render_svg(p: &Projection2D, title: &str) -> String {
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for pt in &p.points {
        xmin = xmin.min(pt.x);
        xmax = xmax.max(pt.x);
        ymin = ymin.min(pt.y);
        ymax = ymax.max(pt.y);
    }
    let span = (xmax - xmin).max(ymax - ymin);
    let scale = if span > 0.0 { (SIZE - 2.0 * MARGIN) / span } else { 0.0 };
    let cx = (xmin + xmax) / 2.0;
    let cy = (ymin + ymax) / 2.0;
    let map = |x: f64, y: f64| {
        if scale == 0.0 {
            (SIZE / 2.0, SIZE / 2.0)
        } else {
            (SIZE / 2.0 + (x - cx) * scale, SIZE / 2.0 - (y - cy) * scale)
        }
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    s.push_str("<style>.label{font:11px sans-serif;fill:#222}.title{font:bold 14px sans-serif}</style>\n");
    let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    let _ = writeln!(s, r#"<text class="title" x="10" y="20">{}</text>"#, escape(title));
    // target drawn last so it stays on top
    let mut order: Vec<usize> = (0..p.points.len()).collect();
    order.sort_by_key(|&i| p.points[i].origin == Origin::Target);
    for &i in &order {
        let pt = &p.points[i];
        let (x, y) = map(pt.x, pt.y);
        let (r, stroke) = if pt.origin == Origin::Target { (7.0, "#000000") } else { (4.0, "none") };
        let _ = writeln!(
            s,
            r#"<circle class="point {}" cx="{x:.2}" cy="{y:.2}" r="{r}" fill="{}" stroke="{stroke}"/>"#,
            pt.origin.name(),
            color(pt.origin)
        );
        let _ = writeln!(
            s,
            r#"<text class="label" x="{:.2}" y="{:.2}">{}</text>"#,
            x + r + 2.0,
            y + 4.0,
            escape(&pt.word)
        );
    }
    let legend = [Origin::AOnly, Origin::BOnly, Origin::Shared, Origin::Target];
    for (i, o) in legend.iter().enumerate() {
        let y = SIZE - 20.0 - 16.0 * (legend.len() - 1 - i) as f64;
        let _ = writeln!(s, r#"<circle cx="16" cy="{y}" r="5" fill="{}"/>"#, color(*o));
        let _ = writeln!(s, r#"<text class="legend" x="26" y="{}">{}</text>"#, y + 4.0, o.name());
    }
    s.push_str("</svg>\n");
    s
}
