//! PNG overlays: likelihood-weighted heatmap blended on the scene, a gaze
//! arrow from the face center, and the likelihood in the top-left corner.

use image::{Rgb, RgbImage};

use crate::data::quantize;
use crate::geometry::{angles_to_vector, project_gaze, ImagePoint};
use crate::model::AttentionEstimate;

/// Length of a unit projected gaze vector, as a fraction of the image side.
pub const ARROW_SCALE: f64 = 0.35;

const HEAT: [u8; 3] = [255, 40, 0];
const ARROW: [u8; 3] = [0, 200, 255];

/// 3×5 glyphs for `0-9` and `.`; each row is 3 bits, MSB on the left.
fn glyph(c: char) -> Option<[u8; 5]> {
    Some(match c {
        '0' => [7, 5, 5, 5, 7],
        '1' => [2, 6, 2, 2, 7],
        '2' => [7, 1, 7, 4, 7],
        '3' => [7, 1, 7, 1, 7],
        '4' => [5, 5, 7, 1, 1],
        '5' => [7, 4, 7, 1, 7],
        '6' => [7, 4, 7, 5, 7],
        '7' => [7, 1, 1, 1, 1],
        '8' => [7, 5, 7, 5, 7],
        '9' => [7, 5, 7, 1, 7],
        '.' => [0, 0, 0, 0, 2],
        _ => return None,
    })
}

fn put(img: &mut RgbImage, x: i64, y: i64, c: [u8; 3]) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, Rgb(c));
    }
}

fn draw_text(img: &mut RgbImage, text: &str, x0: i64, y0: i64, scale: i64) {
    let w = text.chars().count() as i64 * 4 * scale + scale;
    for y in y0 - scale..y0 + 6 * scale {
        for x in x0 - scale..x0 + w {
            put(img, x, y, [0, 0, 0]);
        }
    }
    for (i, ch) in text.chars().enumerate() {
        let Some(rows) = glyph(ch) else { continue };
        for (r, bits) in rows.iter().enumerate() {
            for col in 0..3 {
                if bits & (4 >> col) != 0 {
                    for dy in 0..scale {
                        for dx in 0..scale {
                            let x = x0 + (i as i64 * 4 + col) * scale + dx;
                            put(img, x, y0 + r as i64 * scale + dy, [255, 255, 255]);
                        }
                    }
                }
            }
        }
    }
}

fn draw_line(img: &mut RgbImage, a: (f64, f64), b: (f64, f64), c: [u8; 3], thick: i64) {
    let steps = ((b.0 - a.0).abs().max((b.1 - a.1).abs()).ceil() as usize).max(1);
    for s in 0..=steps {
        let t = s as f64 / steps as f64;
        let (x, y) = (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1));
        for dy in -thick..=thick {
            for dx in -thick..=thick {
                put(img, x.round() as i64 + dx, y.round() as i64 + dy, c);
            }
        }
    }
}

/// Arrow vector in normalized image units for an estimate.
pub fn arrow_vector(est: &AttentionEstimate) -> [f64; 2] {
    let u = project_gaze(angles_to_vector(est.angle));
    [u[0] * ARROW_SCALE, u[1] * ARROW_SCALE]
}

/// Renders one overlay. Heatmap opacity follows the likelihood-weighted map,
/// so frames judged to look outside stay close to the plain scene.
pub fn render_overlay(scene: &RgbImage, est: &AttentionEstimate, head: ImagePoint) -> RgbImage {
    let mut img = scene.clone();
    let (w, h) = (img.width() as f64, img.height() as f64);
    let grid = est.heatmap.grid;
    let peak = est.heatmap.probs.iter().cloned().fold(0.0, f64::max).max(1e-12);
    let weighted: Vec<f64> = est.heatmap.probs.iter().map(|p| p * est.fixation_likelihood).collect();
    for (x, y, px) in img.enumerate_pixels_mut() {
        let p = ImagePoint::new((x as f64 + 0.5) / w, (y as f64 + 0.5) / h);
        let cell = quantize(p, grid).expect("pixel centers lie in the frame");
        let a = 0.65 * (weighted[cell] / peak).clamp(0.0, 1.0);
        for c in 0..3 {
            px[c] = ((1.0 - a) * px[c] as f64 + a * HEAT[c] as f64).round() as u8;
        }
    }
    let v = arrow_vector(est);
    let start = (head.x * w, head.y * h);
    let end = ((head.x + v[0]) * w, (head.y + v[1]) * h);
    let thick = (w.min(h) / 160.0).round().max(1.0) as i64;
    draw_line(&mut img, start, end, ARROW, thick);
    let len = ((end.0 - start.0).powi(2) + (end.1 - start.1).powi(2)).sqrt();
    if len > 1.0 {
        let (ux, uy) = ((end.0 - start.0) / len, (end.1 - start.1) / len);
        let tip = 0.25 * len.min(w.min(h) * 0.2);
        for side in [-1.0, 1.0] {
            let back = (end.0 - tip * (ux - side * 0.5 * uy), end.1 - tip * (uy + side * 0.5 * ux));
            draw_line(&mut img, end, back, ARROW, thick);
        }
    }
    let scale = (w.min(h) / 96.0).round().max(1.0) as i64;
    draw_text(&mut img, &format!("{:.2}", est.fixation_likelihood), 2 * scale, 2 * scale, scale);
    img
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GazeAngle;
    use crate::model::{combine, CombineMode, Heatmap};

    fn estimate(likelihood: f64) -> AttentionEstimate {
        let mut heatmap = Heatmap::uniform(10);
        heatmap.probs = vec![0.0; 100];
        heatmap.probs[99] = 1.0;
        let fixation_map = combine(&heatmap, likelihood, CombineMode::Weighting, 0.5);
        AttentionEstimate {
            angle: GazeAngle::new(0.5, 0.0),
            heatmap,
            fixation_likelihood: likelihood,
            fixation_map,
        }
    }

    #[test]
    fn low_likelihood_leaves_scene_nearly_untouched() {
        let scene = RgbImage::from_pixel(100, 100, Rgb([128, 128, 128]));
        let hi = render_overlay(&scene, &estimate(0.99), ImagePoint::new(0.2, 0.2));
        let lo = render_overlay(&scene, &estimate(0.01), ImagePoint::new(0.2, 0.2));
        let corner = |img: &RgbImage| img.get_pixel(95, 95).0;
        assert_ne!(corner(&hi), [128, 128, 128]);
        let d = corner(&lo).iter().map(|&c| (c as i32 - 128).abs()).max().unwrap();
        assert!(d <= 2, "{d}");
    }

    #[test]
    fn arrow_follows_projected_gaze() {
        let est = estimate(0.5);
        let v = arrow_vector(&est);
        assert!(v[0] > 0.0 && v[1].abs() < 1e-12);
        let scene = RgbImage::from_pixel(100, 100, Rgb([128, 128, 128]));
        let img = render_overlay(&scene, &est, ImagePoint::new(0.3, 0.5));
        let x = ((0.3 + v[0] * 0.5) * 100.0) as u32;
        assert_eq!(img.get_pixel(x, 50).0, ARROW);
    }
}
