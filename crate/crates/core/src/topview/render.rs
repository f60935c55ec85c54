use std::fmt::Write as _;

use super::{FootprintBox, TopView, ViewWindow};
use crate::scene::SceneMatrix;

/// World-unit SVG with the y axis flipped so +y points up on screen.
pub fn render_svg(scene: &SceneMatrix, window: &ViewWindow) -> Vec<u8> {
    let h = window.half_extent;
    let [cx, cy] = window.center;
    let n_c = scene.config.num_categories().max(1);
    let cats = scene.config.column_categories();
    let stroke = 2.0 * h / 400.0;
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" viewBox="{} {} {} {}" width="512" height="512">"#,
        cx - h,
        -(cy + h),
        2.0 * h,
        2.0 * h
    );
    let _ = writeln!(
        s,
        r#"<rect class="frame" x="{}" y="{}" width="{}" height="{}" fill="white" stroke="black" stroke-width="{}"/>"#,
        cx - h,
        -(cy + h),
        2.0 * h,
        2.0 * h,
        stroke
    );
    for (j, col) in scene.columns.iter().enumerate() {
        if !col.exists() {
            continue;
        }
        let b = FootprintBox::of(col);
        let k = cats[j];
        let hue = 360.0 * k as f64 / n_c as f64;
        let name = &scene.config.categories[k].name;
        let pts: Vec<String> = corners(&b)
            .iter()
            .map(|p| format!("{},{}", p[0], -p[1]))
            .collect();
        let _ = writeln!(
            s,
            r#"<polygon class="object" data-category="{}" points="{}" fill="hsl({:.1},70%,60%)" fill-opacity="0.7" stroke="black" stroke-width="{}"/>"#,
            escape(name),
            pts.join(" "),
            hue,
            stroke
        );
        let c = b.center2d;
        let tip = [
            c[0] + b.front[0] * b.half_sizes[0],
            c[1] + b.front[1] * b.half_sizes[0],
        ];
        let _ = writeln!(
            s,
            r#"<line class="front" x1="{}" y1="{}" x2="{}" y2="{}" stroke="black" stroke-width="{}"/>"#,
            c[0],
            -c[1],
            tip[0],
            -tip[1],
            2.0 * stroke
        );
    }
    s.push_str("</svg>\n");
    s.into_bytes()
}

fn corners(b: &FootprintBox) -> [[f64; 2]; 4] {
    let f = b.front;
    let side = [-f[1], f[0]];
    let [a, w] = b.half_sizes;
    let at = |u: f64, v: f64| {
        [
            b.center2d[0] + u * a * f[0] + v * w * side[0],
            b.center2d[1] + u * a * f[1] + v * w * side[1],
        ]
    };
    [at(1.0, 1.0), at(-1.0, 1.0), at(-1.0, -1.0), at(1.0, -1.0)]
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// 16-bit binary PGM of the image, affinely rescaled to `[0, 65535]`.
pub fn write_pgm(img: &TopView) -> Vec<u8> {
    let r = img.window.resolution;
    write_pgm_values(&img.values, r, r)
}

/// 16-bit binary PGM of a row-major grid. A constant grid maps to 0.
pub fn write_pgm_values(values: &[f64], width: usize, height: usize) -> Vec<u8> {
    assert_eq!(values.len(), width * height, "grid size mismatch");
    let (lo, hi) = values
        .iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    let mut out = format!("P5\n{width} {height}\n65535\n").into_bytes();
    out.reserve(2 * values.len());
    for &v in values {
        let level = if range > 0.0 && v.is_finite() {
            (((v - lo) / range) * 65535.0).round() as u16
        } else {
            0
        };
        out.extend_from_slice(&level.to_be_bytes());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_header_and_scaling() {
        let bytes = write_pgm_values(&[0.0, 1.0, 0.5, 1.0], 2, 2);
        let header = b"P5\n2 2\n65535\n";
        assert_eq!(&bytes[..header.len()], header);
        let px: Vec<u16> = bytes[header.len()..]
            .chunks(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect();
        assert_eq!(px, vec![0, 65535, 32768, 65535]);
    }

    #[test]
    fn constant_pgm_is_zero() {
        let bytes = write_pgm_values(&[3.0; 9], 3, 3);
        assert!(bytes[b"P5\n3 3\n65535\n".len()..].iter().all(|&b| b == 0));
    }
}
