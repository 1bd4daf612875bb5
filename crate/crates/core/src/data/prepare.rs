//! Conversion from labelled samples to fixed-size network inputs.

use image::{Rgb, RgbImage};

use super::{quantize_position, quantize_target, AttentionSample, Domain, FaceBox};
use crate::error::Result;
use crate::geometry::{GazeAngle, ImagePoint};
use crate::model::{ModelBatch, ModelConfig};
use crate::nn::Tensor;

/// Bilinear resample of the normalized box `bbox` of `img` to `side × side`.
/// Samples outside the image clamp to the border.
pub fn crop_resize(img: &RgbImage, bbox: &FaceBox, side: u32) -> RgbImage {
    let (w, h) = (img.width() as f64, img.height() as f64);
    let (wi, hi) = (img.width() as i64 - 1, img.height() as i64 - 1);
    let mut out = RgbImage::new(side, side);
    for oy in 0..side {
        let sy = (bbox.y + (oy as f64 + 0.5) / side as f64 * bbox.h) * h - 0.5;
        let y0 = sy.floor();
        let fy = sy - y0;
        let (ya, yb) = ((y0 as i64).clamp(0, hi) as u32, (y0 as i64 + 1).clamp(0, hi) as u32);
        for ox in 0..side {
            let sx = (bbox.x + (ox as f64 + 0.5) / side as f64 * bbox.w) * w - 0.5;
            let x0 = sx.floor();
            let fx = sx - x0;
            let (xa, xb) = ((x0 as i64).clamp(0, wi) as u32, (x0 as i64 + 1).clamp(0, wi) as u32);
            let mut px = [0u8; 3];
            for (c, v) in px.iter_mut().enumerate() {
                let top = img.get_pixel(xa, ya)[c] as f64 * (1.0 - fx) + img.get_pixel(xb, ya)[c] as f64 * fx;
                let bot = img.get_pixel(xa, yb)[c] as f64 * (1.0 - fx) + img.get_pixel(xb, yb)[c] as f64 * fx;
                *v = (top * (1.0 - fy) + bot * fy).round().clamp(0.0, 255.0) as u8;
            }
            out.put_pixel(ox, oy, Rgb(px));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleLabels {
    pub gaze: Option<GazeAngle>,
    pub target: Option<ImagePoint>,
    /// Heatmap class of `target`.
    pub target_cell: Option<usize>,
    pub inside: Option<bool>,
    pub head: ImagePoint,
}

/// Network-ready sample: CHW bytes for scene and face at the model's input
/// side, the face position index, and the labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedSample {
    pub id: String,
    pub domain: Domain,
    pub side: usize,
    pub scene: Vec<u8>,
    pub face: Vec<u8>,
    pub position: usize,
    pub labels: SampleLabels,
}

fn chw(img: &RgbImage) -> Vec<u8> {
    let plane = (img.width() * img.height()) as usize;
    let mut out = vec![0u8; 3 * plane];
    for (i, p) in img.pixels().enumerate() {
        for c in 0..3 {
            out[c * plane + i] = p[c];
        }
    }
    out
}

impl PreparedSample {
    pub fn new(sample: &AttentionSample, cfg: &ModelConfig) -> Result<Self> {
        sample.validate()?;
        let side = cfg.input_side;
        let scene = crop_resize(&sample.scene, &FaceBox::new(0.0, 0.0, 1.0, 1.0), side as u32);
        let face = sample.face_crop(side as u32);
        let head = sample.head();
        let target_cell = sample
            .target
            .map(|t| quantize_target(t, cfg.heatmap_grid))
            .transpose()?;
        Ok(Self {
            id: sample.id.clone(),
            domain: sample.domain,
            side,
            scene: chw(&scene),
            face: chw(&face),
            position: quantize_position(head, cfg.position_grid)?,
            labels: SampleLabels {
                gaze: sample.gaze,
                target: sample.target,
                target_cell,
                inside: sample.inside,
                head,
            },
        })
    }

    pub fn prepare_all(samples: &[AttentionSample], cfg: &ModelConfig) -> Result<Vec<Self>> {
        use rayon::prelude::*;
        samples.par_iter().map(|s| Self::new(s, cfg)).collect()
    }

    /// Stacks samples into one batch with pixels scaled to `[0,1]`.
    pub fn batch(samples: &[&PreparedSample]) -> ModelBatch {
        let side = samples.first().map_or(0, |s| s.side);
        let item = 3 * side * side;
        let mut scene = Vec::with_capacity(samples.len() * item);
        let mut face = Vec::with_capacity(samples.len() * item);
        for s in samples {
            debug_assert_eq!(s.side, side);
            scene.extend(s.scene.iter().map(|&v| v as f64 / 255.0));
            face.extend(s.face.iter().map(|&v| v as f64 / 255.0));
        }
        let shape = [samples.len(), 3, side, side];
        ModelBatch {
            scene: Tensor::from_vec(shape, scene).expect("scene length"),
            face: Tensor::from_vec(shape, face).expect("face length"),
            position: samples.iter().map(|s| s.position).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_corpus, GeneratorConfig};

    #[test]
    fn identity_resize_is_exact() {
        let mut img = RgbImage::new(8, 8);
        for (x, y, p) in img.enumerate_pixels_mut() {
            *p = Rgb([(x * 30) as u8, (y * 30) as u8, 7]);
        }
        let out = crop_resize(&img, &FaceBox::new(0.0, 0.0, 1.0, 1.0), 8);
        assert_eq!(out, img);
    }

    #[test]
    fn crop_of_uniform_region_is_uniform() {
        let mut img = RgbImage::from_pixel(20, 20, Rgb([0, 0, 0]));
        for y in 5..15 {
            for x in 5..15 {
                img.put_pixel(x, y, Rgb([200, 10, 10]));
            }
        }
        let out = crop_resize(&img, &FaceBox::new(0.3, 0.3, 0.4, 0.4), 6);
        assert!(out.pixels().all(|p| p.0 == [200, 10, 10]));
    }

    #[test]
    fn prepared_batch_layout() {
        let mut g = GeneratorConfig::for_domain(Domain::GazeFollowLike, 1, 4);
        g.canvas_side = 64;
        let samples = generate_corpus(&g).unwrap();
        let cfg = ModelConfig { input_side: 32, ..ModelConfig::toy() };
        let prepared = PreparedSample::prepare_all(&samples, &cfg).unwrap();
        let refs: Vec<&PreparedSample> = prepared.iter().collect();
        let b = PreparedSample::batch(&refs);
        assert_eq!(b.scene.shape, [4, 3, 32, 32]);
        assert_eq!(b.face.shape, [4, 3, 32, 32]);
        assert!(b.scene.data.iter().all(|v| (0.0..=1.0).contains(v)));
        for (p, s) in prepared.iter().zip(&samples) {
            assert_eq!(p.position, quantize_position(s.head(), 13).unwrap());
            assert_eq!(p.labels.target_cell.is_some(), s.inside == Some(true));
        }
    }
}
