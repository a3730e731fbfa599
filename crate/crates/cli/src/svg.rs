//! Minimal SVG plots of 2D contours and point sets.

use std::fmt::Write as _;

pub enum Layer<'a> {
    /// Closed polygon outline.
    Contour { points: &'a [[f64; 2]], color: &'a str },
    /// Dots at flattened `x, y` pairs.
    Points { coords: &'a [f64], color: &'a str },
}

/// Renders the layers in order into a square canvas fitted to their union.
pub fn render(layers: &[Layer], size: f64) -> String {
    let all = layers.iter().flat_map(|l| -> Vec<[f64; 2]> {
        match l {
            Layer::Contour { points, .. } => points.to_vec(),
            Layer::Points { coords, .. } => coords.chunks_exact(2).map(|c| [c[0], c[1]]).collect(),
        }
    });
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in all {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12);
    let margin = 0.05 * size;
    let scale = (size - 2.0 * margin) / span;
    // SVG y grows downwards.
    let map = |p: [f64; 2]| (margin + (p[0] - lo[0]) * scale, size - margin - (p[1] - lo[1]) * scale);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for layer in layers {
        match layer {
            Layer::Contour { points, color } => {
                let mut d = String::new();
                for (i, p) in points.iter().enumerate() {
                    let (x, y) = map(*p);
                    let _ = write!(d, "{}{x:.2},{y:.2} ", if i == 0 { "M" } else { "L" });
                }
                d.push('Z');
                let _ = writeln!(s, r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="1.5"/>"#);
            }
            Layer::Points { coords, color } => {
                for c in coords.chunks_exact(2) {
                    let (x, y) = map([c[0], c[1]]);
                    let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="1.6" fill="{color}"/>"#);
                }
            }
        }
    }
    s.push_str("</svg>\n");
    s
}
