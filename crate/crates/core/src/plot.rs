//! Self-contained SVG renderings of sweep grids and bull's-eye plots.
//!
//! In bull's-eye plots the `<line>` element is reserved for run segments, so
//! a document holds exactly one per run.

use std::fmt::Write;

const SIZE: f64 = 480.0;
const MARGIN: f64 = 48.0;

const PALETTE: [(f64, f64, f64); 5] = [
    (68.0, 1.0, 84.0),
    (59.0, 82.0, 139.0),
    (33.0, 145.0, 140.0),
    (94.0, 201.0, 98.0),
    (253.0, 231.0, 37.0),
];

fn color(t: f64) -> String {
    let t = if t.is_finite() {
        t.clamp(0.0, 1.0)
    } else {
        0.0
    };
    let x = t * (PALETTE.len() - 1) as f64;
    let i = (x.floor() as usize).min(PALETTE.len() - 2);
    let f = x - i as f64;
    let (a, b) = (PALETTE[i], PALETTE[i + 1]);
    let mix = |p: f64, q: f64| (p + (q - p) * f).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        mix(a.0, b.0),
        mix(a.1, b.1),
        mix(a.2, b.2)
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn open(out: &mut String) {
    let total = SIZE + 2.0 * MARGIN;
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{total}" viewBox="0 0 {total} {total}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        out,
        r#"<rect width="{total}" height="{total}" fill="white"/>"#
    );
}

fn axis_labels(out: &mut String, x: &str, y: &str, lo: f64, hi: f64) {
    let bottom = MARGIN + SIZE;
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        MARGIN + SIZE / 2.0,
        bottom + 32.0,
        escape(x)
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        MARGIN + SIZE / 2.0,
        MARGIN + SIZE / 2.0,
        escape(y)
    );
    let _ = writeln!(
        out,
        r#"<text x="{MARGIN}" y="{}" text-anchor="middle">{lo}</text>"#,
        bottom + 16.0
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{hi}</text>"#,
        MARGIN + SIZE,
        bottom + 16.0
    );
}

/// Row-major `steps x steps` grid; row index runs along x, column along y.
pub fn heatmap_svg(values: &[f64], steps: usize, range: (f64, f64), names: (&str, &str)) -> String {
    let finite = values.iter().copied().filter(|v| v.is_finite());
    let lo = finite.clone().fold(f64::INFINITY, f64::min);
    let hi = finite.fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let cell = SIZE / steps.max(1) as f64;
    let mut out = String::new();
    open(&mut out);
    for i in 0..steps {
        for j in 0..steps {
            let v = values[i * steps + j];
            let _ = writeln!(
                out,
                r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="{}"><title>{v}</title></rect>"#,
                MARGIN + i as f64 * cell,
                MARGIN + (steps - 1 - j) as f64 * cell,
                cell,
                cell,
                color((v - lo) / span)
            );
        }
    }
    axis_labels(&mut out, names.0, names.1, range.0, range.1);
    out.push_str("</svg>\n");
    out
}

/// Segments from initial residual (cross) to optimized residual (dot), ground
/// truth at the center; hits in green, misses in red.
pub fn bullseye_svg(segments: &[((f64, f64), (f64, f64), bool)], names: (&str, &str)) -> String {
    let extent = segments
        .iter()
        .flat_map(|(a, b, _)| [a.0.abs(), a.1.abs(), b.0.abs(), b.1.abs()])
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max)
        .max(1e-9)
        * 1.1;
    let center = MARGIN + SIZE / 2.0;
    let scale = SIZE / 2.0 / extent;
    let map = |p: (f64, f64)| (center + p.0 * scale, center - p.1 * scale);

    let mut out = String::new();
    open(&mut out);
    for k in 1..=4 {
        let _ = writeln!(
            out,
            r##"<circle cx="{center}" cy="{center}" r="{:.3}" fill="none" stroke="#cccccc"/>"##,
            SIZE / 2.0 * k as f64 / 4.0
        );
    }
    let _ = writeln!(
        out,
        r##"<path d="M {MARGIN} {center} H {} M {center} {MARGIN} V {}" stroke="#999999"/>"##,
        MARGIN + SIZE,
        MARGIN + SIZE
    );
    for (a, b, hit) in segments {
        let (x0, y0) = map(*a);
        let (x1, y1) = map(*b);
        let stroke = if *hit { "#2a9d4b" } else { "#d62728" };
        let _ = writeln!(
            out,
            r#"<line x1="{x0:.3}" y1="{y0:.3}" x2="{x1:.3}" y2="{y1:.3}" stroke="{stroke}" stroke-opacity="0.6"/>"#
        );
        let _ = writeln!(
            out,
            r#"<path d="M {:.3} {:.3} l 6 6 m 0 -6 l -6 6" stroke="{stroke}"/>"#,
            x0 - 3.0,
            y0 - 3.0
        );
        let _ = writeln!(
            out,
            r#"<circle cx="{x1:.3}" cy="{y1:.3}" r="2.5" fill="{stroke}"/>"#
        );
    }
    axis_labels(&mut out, names.0, names.1, -extent, extent);
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn palette_endpoints() {
        assert_eq!(color(0.0), "#440154");
        assert_eq!(color(1.0), "#fde725");
        assert_eq!(color(f64::NAN), "#440154");
    }

    #[test]
    fn heatmap_has_one_cell_per_value() {
        let svg = heatmap_svg(&[0.0, 1.0, 2.0, 3.0], 2, (-1.0, 1.0), ("a", "b<c"));
        assert_eq!(svg.matches("<title>").count(), 4);
        assert!(svg.contains("b&lt;c"));
    }

    #[test]
    fn bullseye_uses_lines_only_for_segments() {
        let segs = vec![((1.0, 0.0), (0.0, 0.0), true); 3];
        assert_eq!(bullseye_svg(&segs, ("x", "y")).matches("<line").count(), 3);
        assert_eq!(bullseye_svg(&[], ("x", "y")).matches("<line").count(), 0);
    }
}
