//! Training losses and their weighted combination.
//!
//! Every loss comes in two flavours: a value-only function and a `*_grad`
//! variant that also returns the gradient of the batch mean with respect to
//! the network outputs it consumes.

use serde::{Deserialize, Serialize};

use crate::config::KvConfig;
use crate::error::{Error, Result};
use crate::geometry::{angles_to_vector, norm2, project_gaze, GazeAngle, ImagePoint};
use crate::model::{log_softmax, sigmoid, softmax};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub w_angle: f64,
    pub w_heatmap: f64,
    pub w_fixation: f64,
    pub w_pnc: f64,
    pub pnc_epsilon: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            w_angle: 1.0,
            w_heatmap: 1.0,
            w_fixation: 1.0,
            w_pnc: 1.0,
            pnc_epsilon: 1e-6,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        for (k, v) in self.weights() {
            if !(v >= 0.0 && v.is_finite()) {
                bad.push(format!("loss.{k} must be a finite nonnegative real, got {v}"));
            }
        }
        if !(self.pnc_epsilon >= 0.0) {
            bad.push(format!("loss.pnc_epsilon must be >= 0, got {}", self.pnc_epsilon));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad.join("; ")))
        }
    }

    fn weights(&self) -> [(&'static str, f64); 4] {
        [
            ("w_angle", self.w_angle),
            ("w_heatmap", self.w_heatmap),
            ("w_fixation", self.w_fixation),
            ("w_pnc", self.w_pnc),
        ]
    }

    /// Reads `w_angle`, `w_heatmap`, `w_fixation`, `w_pnc`, `pnc_epsilon`
    /// from an already-sectioned config, keeping defaults for missing keys.
    pub fn from_kv(kv: &KvConfig) -> Result<Self> {
        let d = Self::default();
        Ok(Self {
            w_angle: kv.get_or("w_angle", d.w_angle)?,
            w_heatmap: kv.get_or("w_heatmap", d.w_heatmap)?,
            w_fixation: kv.get_or("w_fixation", d.w_fixation)?,
            w_pnc: kv.get_or("w_pnc", d.w_pnc)?,
            pnc_epsilon: kv.get_or("pnc_epsilon", d.pnc_epsilon)?,
        })
    }

    pub fn write_kv(&self, kv: &mut KvConfig, prefix: &str) {
        for (k, v) in self.weights() {
            kv.set(format!("{prefix}{k}"), v.to_string());
        }
        kv.set(format!("{prefix}pnc_epsilon"), self.pnc_epsilon.to_string());
    }
}

/// Mean loss of one term over the samples that contributed to it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub loss: f64,
    pub count: usize,
}

/// The four terms of one step; `None` marks a term with no eligible sample.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossParts {
    pub angle: Option<Term>,
    pub heatmap: Option<Term>,
    pub fixation: Option<Term>,
    pub pnc: Option<Term>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub angle_loss: f64,
    pub heatmap_loss: f64,
    pub fixation_loss: f64,
    pub pnc_loss: f64,
    pub total: f64,
    pub angle_count: usize,
    pub heatmap_count: usize,
    pub fixation_count: usize,
    pub pnc_count: usize,
}

pub fn combine(parts: &LossParts, cfg: &LossConfig) -> LossReport {
    let val = |t: Option<Term>| t.map_or((0.0, 0), |t| (t.loss, t.count));
    let (a, na) = val(parts.angle);
    let (h, nh) = val(parts.heatmap);
    let (f, nf) = val(parts.fixation);
    let (p, np) = val(parts.pnc);
    let mut total = 0.0;
    for (w, l, n) in [
        (cfg.w_angle, a, na),
        (cfg.w_heatmap, h, nh),
        (cfg.w_fixation, f, nf),
        (cfg.w_pnc, p, np),
    ] {
        if n > 0 {
            total += w * l;
        }
    }
    LossReport {
        angle_loss: a,
        heatmap_loss: h,
        fixation_loss: f,
        pnc_loss: p,
        total,
        angle_count: na,
        heatmap_count: nh,
        fixation_count: nf,
        pnc_count: np,
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Mean of `|Δyaw| + |Δpitch|` in radians; `None` on an empty batch.
pub fn angle_loss(pred: &[GazeAngle], truth: &[GazeAngle]) -> Option<f64> {
    angle_loss_grad(pred, truth).map(|(l, _)| l)
}

/// Also returns `∂loss/∂(yaw, pitch)` per sample.
pub fn angle_loss_grad(pred: &[GazeAngle], truth: &[GazeAngle]) -> Option<(f64, Vec<[f64; 2]>)> {
    assert_eq!(pred.len(), truth.len(), "angle batches must be aligned");
    if pred.is_empty() {
        return None;
    }
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let grads = pred
        .iter()
        .zip(truth)
        .map(|(p, t)| {
            let (dy, dp) = (p.yaw - t.yaw, p.pitch - t.pitch);
            loss += dy.abs() + dp.abs();
            [sign(dy) / n, sign(dp) / n]
        })
        .collect();
    Some((loss / n, grads))
}

fn check_cells(cells: &[usize], classes: usize) -> Result<()> {
    match cells.iter().find(|&&c| c >= classes) {
        Some(c) => Err(Error::Input(format!("target cell {c} outside 0..{classes}"))),
        None => Ok(()),
    }
}

/// Mean cross-entropy of row-major `[n, classes]` logits against target cells.
pub fn heatmap_loss(logits: &[f64], classes: usize, cells: &[usize]) -> Result<Option<f64>> {
    check_cells(cells, classes)?;
    assert_eq!(logits.len(), cells.len() * classes, "heatmap logits must be [n, classes]");
    if cells.is_empty() {
        return Ok(None);
    }
    let sum: f64 = logits
        .chunks(classes)
        .zip(cells)
        .map(|(row, &c)| -log_softmax(row)[c])
        .sum();
    Ok(Some(sum / cells.len() as f64))
}

/// Also returns `∂loss/∂logits`, laid out like `logits`.
pub fn heatmap_loss_grad(logits: &[f64], classes: usize, cells: &[usize]) -> Result<Option<(f64, Vec<f64>)>> {
    let Some(loss) = heatmap_loss(logits, classes, cells)? else {
        return Ok(None);
    };
    let n = cells.len() as f64;
    let mut grad = Vec::with_capacity(logits.len());
    for (row, &c) in logits.chunks(classes).zip(cells) {
        let start = grad.len();
        grad.extend(softmax(row).into_iter().map(|p| p / n));
        grad[start + c] -= 1.0 / n;
    }
    Ok(Some((loss, grad)))
}

/// `-log σ(z)` computed without overflow.
fn softplus_neg(z: f64) -> f64 {
    if z > 0.0 {
        (-z).exp().ln_1p()
    } else {
        -z + z.exp().ln_1p()
    }
}

/// Mean binary cross-entropy of `sigmoid(logit)` against the labels.
pub fn fixation_loss(logits: &[f64], inside: &[bool]) -> Option<f64> {
    fixation_loss_grad(logits, inside).map(|(l, _)| l)
}

pub fn fixation_loss_grad(logits: &[f64], inside: &[bool]) -> Option<(f64, Vec<f64>)> {
    assert_eq!(logits.len(), inside.len(), "fixation batches must be aligned");
    if logits.is_empty() {
        return None;
    }
    let n = logits.len() as f64;
    let mut loss = 0.0;
    let grads = logits
        .iter()
        .zip(inside)
        .map(|(&z, &y)| {
            loss += if y { softplus_neg(z) } else { softplus_neg(-z) };
            (sigmoid(z) - f64::from(u8::from(y))) / n
        })
        .collect();
    Some((loss / n, grads))
}

/// Cosine distance between the projected predicted gaze and head→target;
/// `None` when either direction has norm `<= eps`.
pub fn project_and_compare_loss(pred: GazeAngle, head: ImagePoint, target: ImagePoint, eps: f64) -> Option<f64> {
    pnc_grad(pred, head, target, eps).map(|(l, _)| l)
}

/// Also returns `∂loss/∂(yaw, pitch)`.
pub fn pnc_grad(pred: GazeAngle, head: ImagePoint, target: ImagePoint, eps: f64) -> Option<(f64, [f64; 2])> {
    let u = project_gaze(angles_to_vector(pred));
    let d = target.minus(&head);
    let (nu, nd) = (norm2(u), norm2(d));
    if !(nu > eps && nd > eps) {
        return None;
    }
    let dot = u[0] * d[0] + u[1] * d[1];
    let cos = dot / (nu * nd);
    let loss = (1.0 - cos).clamp(0.0, 2.0);
    // ∂(1 - cos)/∂u = -(d / (|u||d|) - cos · u / |u|²)
    let gu = [
        -(d[0] / (nu * nd) - cos * u[0] / (nu * nu)),
        -(d[1] / (nu * nd) - cos * u[1] / (nu * nu)),
    ];
    let (sy, cy) = pred.yaw.sin_cos();
    let (sp, cp) = pred.pitch.sin_cos();
    // u = (cos p · sin y, sin p)
    let g_yaw = gu[0] * cp * cy;
    let g_pitch = gu[0] * (-sp * sy) + gu[1] * cp;
    Some((loss, [g_yaw, g_pitch]))
}

/// Batch pnc: mean over non-degenerate samples, gradients of that mean
/// (zero for skipped samples). `None` when every sample is degenerate.
pub fn pnc_batch_grad(
    pred: &[GazeAngle],
    heads: &[ImagePoint],
    targets: &[ImagePoint],
    eps: f64,
) -> Option<(Term, Vec<[f64; 2]>)> {
    assert!(pred.len() == heads.len() && pred.len() == targets.len(), "pnc batches must be aligned");
    let per: Vec<Option<(f64, [f64; 2])>> = pred
        .iter()
        .zip(heads.iter().zip(targets))
        .map(|(&p, (&h, &t))| pnc_grad(p, h, t, eps))
        .collect();
    let count = per.iter().flatten().count();
    if count == 0 {
        return None;
    }
    let n = count as f64;
    let loss = per.iter().flatten().map(|(l, _)| l).sum::<f64>() / n;
    let grads = per
        .iter()
        .map(|o| o.map_or([0.0, 0.0], |(_, g)| [g[0] / n, g[1] / n]))
        .collect();
    Some((Term { loss, count }, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_4, LN_2};

    const EPS: f64 = 1e-6;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn angle_examples() {
        let z = GazeAngle::new(0.0, 0.0);
        assert_eq!(angle_loss(&[z], &[z]), Some(0.0));
        assert!(close(angle_loss(&[GazeAngle::new(0.1, 0.0)], &[z]).unwrap(), 0.1, 1e-15));
        let pred = [GazeAngle::new(0.1, 0.1), GazeAngle::new(-0.2, 0.2)];
        assert!(close(angle_loss(&pred, &[z, z]).unwrap(), 0.3, 1e-15));
        assert_eq!(angle_loss(&[], &[]), None);
    }

    #[test]
    fn heatmap_examples() {
        let l = heatmap_loss(&[0.0; 100], 100, &[37]).unwrap().unwrap();
        assert!(close(l, 100f64.ln(), 1e-12));
        assert!(close(4.6052, l, 1e-4));
        let mut spike = vec![0.0; 100];
        spike[5] = 800.0;
        assert!(heatmap_loss(&spike, 100, &[5]).unwrap().unwrap() < 1e-12);
        assert!(matches!(heatmap_loss(&[0.0; 4], 4, &[4]), Err(Error::Input(_))));
    }

    #[test]
    fn heatmap_matches_scalar_oracle_on_four_cells() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let logits: Vec<f64> = (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let c = rng.gen_range(0..4);
            let z: f64 = logits.iter().map(|v| v.exp()).sum();
            let oracle = -(logits[c].exp() / z).ln();
            assert!(close(heatmap_loss(&logits, 4, &[c]).unwrap().unwrap(), oracle, 1e-12));
        }
    }

    #[test]
    fn fixation_examples() {
        assert!(close(fixation_loss(&[0.0], &[true]).unwrap(), LN_2, 1e-15));
        assert!(fixation_loss(&[40.0], &[true]).unwrap() < 1e-15);
        assert!(close(fixation_loss(&[0.0, 0.0], &[false, true]).unwrap(), LN_2, 1e-15));
        assert!(fixation_loss(&[-800.0], &[true]).unwrap().is_finite());
    }

    #[test]
    fn pnc_examples() {
        let p = GazeAngle::new(FRAC_PI_4, 0.0);
        let h = ImagePoint::new(0.5, 0.5);
        let l = |t| project_and_compare_loss(p, h, t, EPS).unwrap();
        assert!(close(l(ImagePoint::new(0.9, 0.5)), 0.0, 1e-12));
        assert!(close(l(ImagePoint::new(0.5, 0.9)), 1.0, 1e-12));
        assert!(close(l(ImagePoint::new(0.1, 0.5)), 2.0, 1e-12));
        assert_eq!(project_and_compare_loss(p, h, h, EPS), None);
        assert_eq!(project_and_compare_loss(GazeAngle::new(0.0, 0.0), h, ImagePoint::new(0.9, 0.5), EPS), None);
    }

    #[test]
    fn combine_examples() {
        let t = |loss| Some(Term { loss, count: 1 });
        let parts = LossParts { angle: t(0.1), heatmap: t(0.2), fixation: t(0.3), pnc: t(0.4) };
        assert!(close(combine(&parts, &LossConfig::default()).total, 1.0, 1e-15));
        let no_pnc = LossConfig { w_pnc: 0.0, ..LossConfig::default() };
        assert!(close(combine(&parts, &no_pnc).total, 0.6, 1e-15));
        let only = LossParts { angle: t(0.7), ..LossParts::default() };
        let cfg = LossConfig { w_angle: 2.0, ..LossConfig::default() };
        let r = combine(&only, &cfg);
        assert!(close(r.total, 1.4, 1e-15));
        assert_eq!((r.heatmap_count, r.pnc_count), (0, 0));
    }

    fn fd<F: Fn(f64) -> f64>(f: F, x: f64) -> f64 {
        let h = 1e-6;
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn output_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let logits: Vec<f64> = (0..12).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let cells = [1, 3, 2];
            let (_, g) = heatmap_loss_grad(&logits, 4, &cells).unwrap().unwrap();
            for i in 0..logits.len() {
                let num = fd(
                    |v| {
                        let mut l = logits.clone();
                        l[i] = v;
                        heatmap_loss(&l, 4, &cells).unwrap().unwrap()
                    },
                    logits[i],
                );
                assert!(close(g[i], num, 1e-7));
            }

            let z: Vec<f64> = (0..3).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let y = [true, false, true];
            let (_, g) = fixation_loss_grad(&z, &y).unwrap();
            for i in 0..3 {
                let num = fd(
                    |v| {
                        let mut l = z.clone();
                        l[i] = v;
                        fixation_loss(&l, &y).unwrap()
                    },
                    z[i],
                );
                assert!(close(g[i], num, 1e-7));
            }

            let p = GazeAngle::new(rng.gen_range(-1.2..1.2), rng.gen_range(-0.9..0.9));
            let h = ImagePoint::new(rng.gen(), rng.gen());
            let t = ImagePoint::new(rng.gen(), rng.gen());
            let (_, g) = pnc_grad(p, h, t, EPS).unwrap();
            let gy = fd(|v| project_and_compare_loss(GazeAngle::new(v, p.pitch), h, t, EPS).unwrap(), p.yaw);
            let gp = fd(|v| project_and_compare_loss(GazeAngle::new(p.yaw, v), h, t, EPS).unwrap(), p.pitch);
            assert!(close(g[0], gy, 1e-6) && close(g[1], gp, 1e-6), "{g:?} vs {gy} {gp}");
        }
    }

    #[test]
    fn pnc_batch_skips_degenerate_samples() {
        let h = ImagePoint::new(0.5, 0.5);
        let preds = [GazeAngle::new(FRAC_PI_4, 0.0), GazeAngle::new(FRAC_PI_4, 0.0)];
        let (term, g) = pnc_batch_grad(&preds, &[h, h], &[ImagePoint::new(0.5, 0.9), h], EPS).unwrap();
        assert_eq!(term.count, 1);
        assert!(close(term.loss, 1.0, 1e-12));
        assert_eq!(g[1], [0.0, 0.0]);
    }

    #[test]
    fn validation_rejects_negative_weights() {
        assert!(LossConfig { w_pnc: -1.0, ..LossConfig::default() }.validate().is_err());
        assert!(LossConfig::default().validate().is_ok());
    }

    proptest! {
        #[test]
        fn pnc_is_scale_invariant(
            yaw in -1.5f64..1.5, pitch in -1.0f64..1.0,
            hx in 0.0f64..1.0, hy in 0.0f64..1.0,
            dx in -0.5f64..0.5, dy in -0.5f64..0.5,
            s in 0.01f64..100.0,
        ) {
            let p = GazeAngle::new(yaw, pitch);
            let h = ImagePoint::new(hx, hy);
            prop_assume!(dx.hypot(dy) > 1e-3);
            let a = project_and_compare_loss(p, h, ImagePoint::new(hx + dx, hy + dy), EPS);
            let b = project_and_compare_loss(p, h, ImagePoint::new(hx + s * dx, hy + s * dy), EPS);
            match (a, b) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() <= 1e-9),
                (None, None) => {}
                other => prop_assert!(false, "{other:?}"),
            }
        }

        #[test]
        fn losses_are_nonnegative(z in -50f64..50.0, y: bool, l in proptest::collection::vec(-20f64..20.0, 9)) {
            prop_assert!(fixation_loss(&[z], &[y]).unwrap() >= 0.0);
            prop_assert!(heatmap_loss(&l, 9, &[3]).unwrap().unwrap() >= 0.0);
        }
    }
}
