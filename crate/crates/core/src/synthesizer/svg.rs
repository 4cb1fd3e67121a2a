use std::fmt::Write;

use crate::geometry::OrientedBox;

use super::layout::{DiagramLayout, NodeShape, Stroke};

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// Boxes that are axis-aligned up to the long-side swap render without a
/// transform.
fn is_axis_aligned(b: &OrientedBox) -> bool {
    let t = b.theta();
    t == 0.0 || (t - std::f64::consts::FRAC_PI_2).abs() < 1e-12
}

fn write_rect(out: &mut String, b: &OrientedBox, extra: &str) {
    if is_axis_aligned(b) {
        let (x0, y0, x1, y1) = b.aabb();
        let _ = writeln!(
            out,
            r#"<rect x="{x0}" y="{y0}" width="{}" height="{}"{extra}/>"#,
            x1 - x0,
            y1 - y0
        );
    } else {
        let (cx, cy) = (b.cx(), b.cy());
        let _ = writeln!(
            out,
            r#"<rect x="{}" y="{}" width="{}" height="{}" transform="rotate({} {cx} {cy})"{extra}/>"#,
            cx - b.w() / 2.0,
            cy - b.h() / 2.0,
            b.w(),
            b.h(),
            b.theta().to_degrees()
        );
    }
}

/// Renders a layout as a standalone SVG 1.1 document. Coordinates are
/// written with shortest round-trip formatting, so parsing them back yields
/// the layout values.
pub fn render_svg(layout: &DiagramLayout) -> String {
    let s = &layout.style;
    let (w, h) = (layout.width, layout.height);
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(
        out,
        r#"<defs><marker id="arrow" viewBox="0 0 10 10" refX="10" refY="5" markerWidth="6" markerHeight="6" orient="auto"><polygon points="0,0 10,5 0,10" fill="{}"/></marker></defs>"#,
        s.palette.line
    );
    let rx = match s.node_shape {
        NodeShape::Rectangle => String::new(),
        NodeShape::Rounded => format!(r#" rx="{}""#, (s.font_size * 0.5).round()),
    };
    for n in &layout.nodes {
        let extra = format!(
            r#"{rx} fill="{}" stroke="{}" stroke-width="{}" data-entity="{}""#,
            s.palette.node_fill, s.palette.node_stroke, s.line_width, n.entity
        );
        write_rect(&mut out, &n.bbox, &extra);
    }
    for (i, p) in layout.primitives.iter().enumerate() {
        let marker = if p.arrow { r#" marker-end="url(#arrow)""# } else { "" };
        let edges = p.edges.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(" ");
        let common = format!(
            r#" fill="none" stroke="{}" stroke-width="{}" data-primitive="{i}" data-edges="{edges}"{marker}"#,
            s.palette.line, s.line_width
        );
        match p.stroke {
            Stroke::Straight { from, to } => {
                let _ = writeln!(
                    out,
                    r#"<line x1="{}" y1="{}" x2="{}" y2="{}"{common}/>"#,
                    from.x, from.y, to.x, to.y
                );
            }
            Stroke::Quadratic { from, control, to } => {
                let _ = writeln!(
                    out,
                    r#"<path d="M {} {} Q {} {} {} {}"{common}/>"#,
                    from.x, from.y, control.x, control.y, to.x, to.y
                );
            }
        }
    }
    for b in &layout.buses {
        let _ = writeln!(
            out,
            r#"<polyline class="bus" points="{},{} {},{}" fill="none" stroke="{}" stroke-width="{}"/>"#,
            b.from.x,
            b.from.y,
            b.to.x,
            b.to.y,
            s.palette.line,
            s.line_width * 1.5
        );
    }
    let texts = layout
        .nodes
        .iter()
        .map(|n| &n.name)
        .chain(layout.labels.iter().map(|l| &l.text));
    for t in texts {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="{}" font-family="sans-serif" text-anchor="middle" dominant-baseline="central">{}</text>"#,
            t.bbox.cx(),
            t.bbox.cy(),
            t.font_size,
            escape(&t.content)
        );
    }
    out.push_str("</svg>\n");
    out
}
