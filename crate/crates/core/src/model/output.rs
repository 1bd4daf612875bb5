use serde::{Deserialize, Serialize};

use super::{CombineMode, ModelConfig};
use crate::geometry::{GazeAngle, ImagePoint};

/// Raw network outputs for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct RawOutput {
    pub angle: GazeAngle,
    pub heatmap_logits: Vec<f64>,
    pub fixation_logit: f64,
}

/// Probability grid over image cells, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub grid: usize,
    pub probs: Vec<f64>,
}

impl Heatmap {
    pub fn from_logits(grid: usize, logits: &[f64]) -> Self {
        assert_eq!(logits.len(), grid * grid);
        Self {
            grid,
            probs: softmax(logits),
        }
    }

    pub fn uniform(grid: usize) -> Self {
        let n = grid * grid;
        Self {
            grid,
            probs: vec![1.0 / n as f64; n],
        }
    }

    /// Index of the largest entry; ties resolve to the lowest index.
    pub fn argmax(&self) -> usize {
        argmax(&self.probs)
    }

    pub fn sum(&self) -> f64 {
        self.probs.iter().sum()
    }
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - lse).collect()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Post-processed estimate: where (angle), what (heatmap) and whether
/// (fixation likelihood) plus the likelihood-combined map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionEstimate {
    pub angle: GazeAngle,
    pub heatmap: Heatmap,
    pub fixation_likelihood: f64,
    pub fixation_map: Vec<f64>,
}

impl AttentionEstimate {
    pub fn argmax_cell(&self) -> usize {
        self.heatmap.argmax()
    }

    pub fn argmax_point(&self) -> ImagePoint {
        crate::data::cell_center(self.heatmap.argmax(), self.heatmap.grid)
    }
}

pub fn combine(heatmap: &Heatmap, likelihood: f64, mode: CombineMode, threshold: f64) -> Vec<f64> {
    match mode {
        CombineMode::Weighting => heatmap.probs.iter().map(|p| p * likelihood).collect(),
        CombineMode::Gating => {
            let gate = if likelihood >= threshold { 1.0 } else { 0.0 };
            heatmap.probs.iter().map(|p| p * gate).collect()
        }
    }
}

pub fn postprocess(raw: &RawOutput, cfg: &ModelConfig) -> AttentionEstimate {
    postprocess_with(raw, cfg.heatmap_grid, cfg.combine_mode, cfg.gating_threshold)
}

pub fn postprocess_with(
    raw: &RawOutput,
    grid: usize,
    mode: CombineMode,
    threshold: f64,
) -> AttentionEstimate {
    let heatmap = Heatmap::from_logits(grid, &raw.heatmap_logits);
    let fixation_likelihood = sigmoid(raw.fixation_logit);
    let fixation_map = combine(&heatmap, fixation_likelihood, mode, threshold);
    AttentionEstimate {
        angle: raw.angle,
        heatmap,
        fixation_likelihood,
        fixation_map,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn raw(logits: Vec<f64>, fix: f64) -> RawOutput {
        RawOutput {
            angle: GazeAngle::default(),
            heatmap_logits: logits,
            fixation_logit: fix,
        }
    }

    #[test]
    fn postprocess_examples() {
        let cfg = ModelConfig::default();
        let est = postprocess(&raw(vec![0.0; 100], 0.0), &cfg);
        assert_eq!(est.fixation_likelihood, 0.5);
        for p in &est.heatmap.probs {
            assert!((p - 0.01).abs() < 1e-15);
        }

        // sigmoid(ln(0.4/0.6)) = 0.4
        let est = postprocess_with(&raw(vec![0.3; 100], (0.4f64 / 0.6).ln()), 10, CombineMode::Gating, 0.5);
        assert!((est.fixation_likelihood - 0.4).abs() < 1e-12);
        assert!(est.fixation_map.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn argmax_tie_takes_lowest_index() {
        assert_eq!(argmax(&[0.1, 0.4, 0.4, 0.1]), 1);
        assert_eq!(Heatmap::uniform(3).argmax(), 0);
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
        assert!((log_softmax(&[1000.0, 0.0])[0]).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn heatmap_normalized_and_combination_bounded(
            logits in proptest::collection::vec(-30.0f64..30.0, 16),
            fix in -20.0f64..20.0,
            thr in 0.0f64..1.0,
        ) {
            let w = postprocess_with(&raw(logits.clone(), fix), 4, CombineMode::Weighting, thr);
            prop_assert!((w.heatmap.sum() - 1.0).abs() < 1e-6);
            prop_assert!(w.heatmap.probs.iter().all(|p| *p >= 0.0));
            prop_assert!((0.0..=1.0).contains(&w.fixation_likelihood));
            for (f, h) in w.fixation_map.iter().zip(&w.heatmap.probs) {
                prop_assert!(f <= h);
            }
            let g = postprocess_with(&raw(logits, fix), 4, CombineMode::Gating, thr);
            let max = g.fixation_map.iter().cloned().fold(0.0, f64::max);
            prop_assert_eq!(max > 0.0, g.fixation_likelihood >= thr);
        }
    }
}
