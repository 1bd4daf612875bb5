//! Tiny analytic rasterizer working in normalized coordinates.

use image::{Rgb, RgbImage};

pub(crate) type Color = [f64; 3];

pub(crate) struct Canvas {
    side: usize,
    px: Vec<Color>,
}

impl Canvas {
    pub fn new(side: usize, fill: Color) -> Self {
        Self {
            side,
            px: vec![fill; side * side],
        }
    }

    fn center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) / self.side as f64
    }

    /// Pixel range covering `[lo, hi]` in normalized units.
    fn span(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let s = self.side as f64;
        let a = (lo * s).floor().max(0.0) as usize;
        let b = ((hi * s).ceil().max(0.0) as usize).min(self.side);
        a.min(b)..b
    }

    fn paint_where(&mut self, bounds: [f64; 4], color: Color, alpha: f64, inside: impl Fn(f64, f64) -> bool) {
        let [x0, y0, x1, y1] = bounds;
        for py in self.span(y0, y1) {
            let y = self.center(py);
            for px in self.span(x0, x1) {
                let x = self.center(px);
                if inside(x, y) {
                    let p = &mut self.px[py * self.side + px];
                    for c in 0..3 {
                        p[c] = p[c] * (1.0 - alpha) + color[c] * alpha;
                    }
                }
            }
        }
    }

    pub fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, color: Color, alpha: f64) {
        self.paint_where([x, y, x + w, y + h], color, alpha, |_, _| true);
    }

    pub fn disc(&mut self, cx: f64, cy: f64, r: f64, color: Color) {
        let r2 = r * r;
        self.paint_where([cx - r, cy - r, cx + r, cy + r], color, 1.0, |x, y| {
            (x - cx).powi(2) + (y - cy).powi(2) <= r2
        });
    }

    pub fn triangle(&mut self, p: [[f64; 2]; 3], color: Color) {
        let xs = [p[0][0], p[1][0], p[2][0]];
        let ys = [p[0][1], p[1][1], p[2][1]];
        let bounds = [
            xs.iter().cloned().fold(f64::INFINITY, f64::min),
            ys.iter().cloned().fold(f64::INFINITY, f64::min),
            xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        ];
        let edge = |a: [f64; 2], b: [f64; 2], x: f64, y: f64| (b[0] - a[0]) * (y - a[1]) - (b[1] - a[1]) * (x - a[0]);
        self.paint_where(bounds, color, 1.0, |x, y| {
            let e0 = edge(p[0], p[1], x, y);
            let e1 = edge(p[1], p[2], x, y);
            let e2 = edge(p[2], p[0], x, y);
            (e0 >= 0.0 && e1 >= 0.0 && e2 >= 0.0) || (e0 <= 0.0 && e1 <= 0.0 && e2 <= 0.0)
        });
    }

    /// Horizontal/vertical sinusoidal texture blended over the whole canvas.
    pub fn stripes(&mut self, freq: [f64; 2], phase: f64, color: Color, alpha: f64) {
        for py in 0..self.side {
            let y = self.center(py);
            for px in 0..self.side {
                let x = self.center(px);
                let t = 0.5 + 0.5 * (std::f64::consts::TAU * (freq[0] * x + freq[1] * y) + phase).sin();
                let a = alpha * t;
                let p = &mut self.px[py * self.side + px];
                for c in 0..3 {
                    p[c] = p[c] * (1.0 - a) + color[c] * a;
                }
            }
        }
    }

    pub fn into_image(self) -> RgbImage {
        let side = self.side as u32;
        let mut img = RgbImage::new(side, side);
        for (i, p) in self.px.iter().enumerate() {
            let q = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
            img.put_pixel(i as u32 % side, i as u32 / side, Rgb([q(p[0]), q(p[1]), q(p[2])]));
        }
        img
    }
}
