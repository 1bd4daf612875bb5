//! Evaluation metrics, baselines and whole-corpus reports.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{cell_center, quantize, PreparedSample};
use crate::error::{Error, Result};
use crate::geometry::{angular_error, GazeAngle, ImagePoint};
use crate::model::{argmax, combine, postprocess_with, softmax, AttentionEstimate, CombineMode, Heatmap, Model};

/// ROC AUC over cells pooled across images. A cell is positive when it
/// contains at least one annotation point; tied scores share a threshold
/// and contribute trapezoids.
pub fn heatmap_auc(heatmaps: &[Vec<f64>], annotations: &[Vec<ImagePoint>], grid: usize) -> Result<f64> {
    if heatmaps.len() != annotations.len() {
        return Err(Error::Input(format!(
            "{} heatmaps but {} annotation sets",
            heatmaps.len(),
            annotations.len()
        )));
    }
    let mut scored = Vec::with_capacity(heatmaps.len() * grid * grid);
    for (h, pts) in heatmaps.iter().zip(annotations) {
        if h.len() != grid * grid {
            return Err(Error::Input(format!("heatmap has {} cells, expected {}", h.len(), grid * grid)));
        }
        if pts.is_empty() {
            return Err(Error::Input("sample without annotation points".into()));
        }
        let mut pos = vec![false; h.len()];
        for p in pts {
            pos[quantize(*p, grid)?] = true;
        }
        scored.extend(h.iter().copied().zip(pos));
    }
    roc_auc(&scored)
}

/// ROC AUC of `(score, is_positive)` pairs with trapezoidal tie handling.
pub fn roc_auc(scored: &[(f64, bool)]) -> Result<f64> {
    if scored.iter().any(|(s, _)| s.is_nan()) {
        return Err(Error::Input("NaN score".into()));
    }
    let p = scored.iter().filter(|(_, y)| *y).count();
    let n = scored.len() - p;
    if p == 0 || n == 0 {
        return Err(Error::Undefined(format!("AUC needs both classes ({p} positive, {n} negative)")));
    }
    let mut sorted = scored.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut area = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let (tp0, fp0) = (tp, fp);
        let s = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == s {
            if sorted[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area += (fp - fp0) as f64 * (tp + tp0) as f64 / 2.0;
    }
    Ok(area / (p as f64 * n as f64))
}

/// Distance from the argmax cell center to the annotation mean, and to the
/// nearest annotation point.
pub fn l2_and_min_distance(heatmap: &Heatmap, annotations: &[ImagePoint]) -> Result<(f64, f64)> {
    if annotations.is_empty() {
        return Err(Error::Input("empty annotation set".into()));
    }
    let pred = cell_center(heatmap.argmax(), heatmap.grid);
    let k = annotations.len() as f64;
    let mean = ImagePoint::new(
        annotations.iter().map(|p| p.x).sum::<f64>() / k,
        annotations.iter().map(|p| p.y).sum::<f64>() / k,
    );
    let min = annotations.iter().map(|p| pred.distance(p)).fold(f64::INFINITY, f64::min);
    Ok((pred.distance(&mean), min))
}

/// Area-weighted sum of a `fine × fine` map onto `coarse × coarse` cells.
pub fn aggregate(map: &[f64], fine: usize, coarse: usize) -> Result<Vec<f64>> {
    if coarse == 0 || coarse > fine {
        return Err(Error::Config(format!("grid {coarse} must lie in 1..={fine} (heatmap grid)")));
    }
    if map.len() != fine * fine {
        return Err(Error::Input(format!("map has {} cells, expected {}", map.len(), fine * fine)));
    }
    // overlap[i][j]: fraction of fine interval i inside coarse interval j
    let overlap: Vec<Vec<(usize, f64)>> = (0..fine)
        .map(|i| {
            let (a, b) = (i as f64 / fine as f64, (i + 1) as f64 / fine as f64);
            (0..coarse)
                .filter_map(|j| {
                    let (c, d) = (j as f64 / coarse as f64, (j + 1) as f64 / coarse as f64);
                    let w = (b.min(d) - a.max(c)) * fine as f64;
                    (w > 1e-12).then_some((j, w))
                })
                .collect()
        })
        .collect();
    let mut out = vec![0.0; coarse * coarse];
    for r in 0..fine {
        for c in 0..fine {
            let v = map[r * fine + c];
            for &(rj, rw) in &overlap[r] {
                for &(cj, cw) in &overlap[c] {
                    out[rj * coarse + cj] += v * rw * cw;
                }
            }
        }
    }
    Ok(out)
}

/// One image for grid classification.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCase {
    pub fixation_map: Vec<f64>,
    pub likelihood: f64,
    /// Target when the subject looks inside the frame.
    pub target: Option<ImagePoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub precision: f64,
    pub recall: f64,
    pub predicted: usize,
    pub positives: usize,
    pub correct: usize,
}

/// Precision/recall of "predict the positive grid square" on an `n × n` grid.
/// An image predicts its argmax cell iff its likelihood reaches `threshold`.
/// Precision is 0 when nothing is predicted; recall is 0 without positives.
pub fn grid_classification(cases: &[GridCase], heatmap_grid: usize, n: usize, threshold: f64) -> Result<GridResult> {
    let (mut predicted, mut positives, mut correct) = (0, 0, 0);
    for case in cases {
        let coarse = aggregate(&case.fixation_map, heatmap_grid, n)?;
        let pred = (case.likelihood >= threshold).then(|| argmax(&coarse));
        let truth = case.target.map(|t| quantize(t, n)).transpose()?;
        predicted += usize::from(pred.is_some());
        positives += usize::from(truth.is_some());
        correct += usize::from(pred.is_some() && pred == truth);
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    Ok(GridResult {
        precision: ratio(correct, predicted),
        recall: ratio(correct, positives),
        predicted,
        positives,
        correct,
    })
}

/// Average precision, `Σ P(k)·ΔR(k)` over the score-sorted ranking. Equal
/// scores form a single threshold.
pub fn fixation_ap(likelihoods: &[f64], inside: &[bool]) -> Result<f64> {
    if likelihoods.len() != inside.len() {
        return Err(Error::Input("likelihoods and labels differ in length".into()));
    }
    if likelihoods.iter().any(|s| s.is_nan()) {
        return Err(Error::Input("NaN likelihood".into()));
    }
    let positives = inside.iter().filter(|&&y| y).count();
    if positives == 0 {
        return Err(Error::Undefined("average precision needs at least one positive".into()));
    }
    let mut order: Vec<usize> = (0..likelihoods.len()).collect();
    order.sort_by(|&a, &b| likelihoods[b].total_cmp(&likelihoods[a]));
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut ap = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = likelihoods[order[i]];
        let tp0 = tp;
        while i < order.len() && likelihoods[order[i]] == s {
            tp += usize::from(inside[order[i]]);
            seen += 1;
            i += 1;
        }
        ap += (tp - tp0) as f64 / positives as f64 * (tp as f64 / seen as f64);
    }
    Ok(ap)
}

/// Mean angular error in degrees.
pub fn mean_angular_error(pred: &[GazeAngle], truth: &[GazeAngle]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::Input("prediction and truth counts differ".into()));
    }
    if pred.is_empty() {
        return Err(Error::Undefined("angular error of an empty set".into()));
    }
    Ok(pred.iter().zip(truth).map(|(a, b)| angular_error(*a, *b)).sum::<f64>() / pred.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    None,
    Random,
    Center,
}

impl FromStr for Baseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(Baseline::None),
            "random" => Ok(Baseline::Random),
            "center" => Ok(Baseline::Center),
            other => Err(Error::Config(format!("unknown baseline `{other}` (none, random, center)"))),
        }
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Baseline::None => "none",
            Baseline::Random => "random",
            Baseline::Center => "center",
        })
    }
}

pub const CENTER_SIGMA: f64 = 0.15;

/// Random: softmax of i.i.d. standard normals. Center: isotropic Gaussian
/// bump at the image center sampled at cell centers, normalized.
pub fn baseline_heatmap<R: rand::Rng>(kind: Baseline, grid: usize, rng: &mut R) -> Option<Heatmap> {
    let n = grid * grid;
    let probs = match kind {
        Baseline::None => return None,
        Baseline::Random => softmax(&(0..n).map(|_| StandardNormal.sample(rng)).collect::<Vec<f64>>()),
        Baseline::Center => {
            let w: Vec<f64> = (0..n)
                .map(|i| {
                    let c = cell_center(i, grid);
                    let d2 = (c.x - 0.5).powi(2) + (c.y - 0.5).powi(2);
                    (-d2 / (2.0 * CENTER_SIGMA * CENTER_SIGMA)).exp()
                })
                .collect();
            let s: f64 = w.iter().sum();
            w.into_iter().map(|v| v / s).collect()
        }
    };
    Some(Heatmap { grid, probs })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub grid_sizes: Vec<usize>,
    pub gating_threshold: f64,
    pub heatmap_combine: CombineMode,
    pub baseline: Baseline,
    /// Seeds the random baseline.
    pub seed: u64,
    pub batch_size: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            grid_sizes: vec![2, 5],
            gating_threshold: 0.5,
            heatmap_combine: CombineMode::Weighting,
            baseline: Baseline::None,
            seed: 0,
            batch_size: 36,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_sizes.iter().any(|&g| g == 0) {
            return Err(Error::Config("grid sizes must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("eval batch size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Metrics present only when the corpus carries the labels they need.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub baseline: Option<Baseline>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l2_distance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_distance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_angular_error_deg: Option<f64>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub grid_results: BTreeMap<usize, GridResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixation_ap: Option<f64>,
    pub n_samples: usize,
    pub n_heatmap: usize,
    pub n_angle: usize,
    pub n_fixation: usize,
}

impl MetricReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Per-sample output for optional detail logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleDetail {
    pub id: String,
    pub yaw_deg: f64,
    pub pitch_deg: f64,
    pub likelihood: f64,
    pub argmax_cell: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub angular_error_deg: Option<f64>,
}

/// Runs the model over `samples` in inference mode.
pub fn predict_all(model: &Model, samples: &[PreparedSample], cfg: &EvalConfig) -> Result<Vec<AttentionEstimate>> {
    let mc = model.config();
    let mut out = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(cfg.batch_size.max(1)) {
        let refs: Vec<&PreparedSample> = chunk.iter().collect();
        let raw = model.predict(&PreparedSample::batch(&refs))?;
        out.extend(raw.iter().map(|r| postprocess_with(r, mc.heatmap_grid, cfg.heatmap_combine, cfg.gating_threshold)));
    }
    Ok(out)
}

/// Scores estimates against labels. A baseline replaces each heatmap (and
/// the map scored by AUC) while the model's angle and likelihood are kept.
pub fn evaluate_estimates(
    estimates: &[AttentionEstimate],
    samples: &[PreparedSample],
    cfg: &EvalConfig,
) -> Result<(MetricReport, Vec<SampleDetail>)> {
    cfg.validate()?;
    if estimates.len() != samples.len() {
        return Err(Error::Input("estimate and sample counts differ".into()));
    }
    let grid = estimates.first().map_or(1, |e| e.heatmap.grid);
    let mut report = MetricReport {
        baseline: (cfg.baseline != Baseline::None).then_some(cfg.baseline),
        n_samples: samples.len(),
        ..MetricReport::default()
    };

    let mut auc_maps = Vec::new();
    let mut auc_points = Vec::new();
    let (mut l2, mut min) = (0.0, 0.0);
    let (mut pred_angles, mut true_angles) = (Vec::new(), Vec::new());
    let mut grid_cases = Vec::new();
    let (mut likelihoods, mut labels) = (Vec::new(), Vec::new());
    let mut details = Vec::with_capacity(samples.len());

    for (i, (est, s)) in estimates.iter().zip(samples).enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(i as u64);
        let heatmap = baseline_heatmap(cfg.baseline, grid, &mut rng).unwrap_or_else(|| est.heatmap.clone());
        let scored_map = if cfg.baseline == Baseline::None {
            est.fixation_map.clone()
        } else {
            heatmap.probs.clone()
        };
        let l = &s.labels;
        if let (Some(true), Some(t)) = (l.inside, l.target) {
            let (a, b) = l2_and_min_distance(&heatmap, &[t])?;
            l2 += a;
            min += b;
            auc_maps.push(scored_map);
            auc_points.push(vec![t]);
        }
        let err = l.gaze.map(|g| {
            pred_angles.push(est.angle);
            true_angles.push(g);
            angular_error(est.angle, g)
        });
        if let (Some(inside), true) = (l.inside, s.domain.has_inout_sidecar()) {
            grid_cases.push(GridCase {
                fixation_map: combine(&heatmap, est.fixation_likelihood, CombineMode::Gating, cfg.gating_threshold),
                likelihood: est.fixation_likelihood,
                target: if inside { l.target } else { None },
            });
            likelihoods.push(est.fixation_likelihood);
            labels.push(inside);
        }
        details.push(SampleDetail {
            id: s.id.clone(),
            yaw_deg: est.angle.yaw_deg(),
            pitch_deg: est.angle.pitch_deg(),
            likelihood: est.fixation_likelihood,
            argmax_cell: heatmap.argmax(),
            angular_error_deg: err,
        });
    }

    report.n_heatmap = auc_maps.len();
    if !auc_maps.is_empty() {
        report.auc = match heatmap_auc(&auc_maps, &auc_points, grid) {
            Ok(v) => Some(v),
            Err(Error::Undefined(_)) => None,
            Err(e) => return Err(e),
        };
        report.l2_distance = Some(l2 / auc_maps.len() as f64);
        report.min_distance = Some(min / auc_maps.len() as f64);
    }
    report.n_angle = pred_angles.len();
    if !pred_angles.is_empty() {
        report.mean_angular_error_deg = Some(mean_angular_error(&pred_angles, &true_angles)?);
    }
    report.n_fixation = grid_cases.len();
    if !grid_cases.is_empty() {
        for &n in &cfg.grid_sizes {
            report
                .grid_results
                .insert(n, grid_classification(&grid_cases, grid, n, cfg.gating_threshold)?);
        }
        report.fixation_ap = fixation_ap(&likelihoods, &labels).ok();
    }
    Ok((report, details))
}

pub fn evaluate(model: &Model, samples: &[PreparedSample], cfg: &EvalConfig) -> Result<MetricReport> {
    let est = predict_all(model, samples, cfg)?;
    Ok(evaluate_estimates(&est, samples, cfg)?.0)
}

/// Pairwise-counting AUC: concordant pairs plus half the ties over all
/// positive × negative pairs.
pub fn auc_pairwise_oracle(scored: &[(f64, bool)]) -> f64 {
    let pos: Vec<f64> = scored.iter().filter(|s| s.1).map(|s| s.0).collect();
    let neg: Vec<f64> = scored.iter().filter(|s| !s.1).map(|s| s.0).collect();
    let mut acc = 0.0;
    for p in &pos {
        for n in &neg {
            acc += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    acc / (pos.len() * neg.len()) as f64
}

/// Staircase AP evaluated threshold by threshold from scratch: for each
/// distinct score `s`, precision and recall of `score >= s`.
pub fn ap_staircase_oracle(scores: &[f64], labels: &[bool]) -> f64 {
    let total = labels.iter().filter(|&&y| y).count() as f64;
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    for t in thresholds {
        let sel: Vec<bool> = scores.iter().zip(labels).filter(|(s, _)| **s >= t).map(|(_, y)| *y).collect();
        let tp = sel.iter().filter(|&&y| y).count() as f64;
        let recall = tp / total;
        ap += (recall - prev_recall) * tp / sel.len() as f64;
        prev_recall = recall;
    }
    ap
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-9
    }

    #[test]
    fn auc_examples() {
        let mut h = vec![0.0; 100];
        h[55] = 1.0;
        let t = cell_center(55, 10);
        assert!(close(heatmap_auc(&[h], &[vec![t]], 10).unwrap(), 1.0));
        let u = vec![0.01; 100];
        assert!(close(heatmap_auc(&[u], &[vec![t]], 10).unwrap(), 0.5));
        assert!(matches!(heatmap_auc(&[vec![0.01; 100]], &[vec![]], 10), Err(Error::Input(_))));
    }

    #[test]
    fn auc_matches_pairwise_oracle_on_heatmaps() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let maps: Vec<Vec<f64>> = (0..100)
            .map(|_| {
                let raw: Vec<f64> = (0..25).map(|_| rng.gen_range(0..6) as f64).collect();
                softmax(&raw)
            })
            .collect();
        let pts: Vec<Vec<ImagePoint>> = (0..100)
            .map(|_| (0..rng.gen_range(1..4)).map(|_| ImagePoint::new(rng.gen(), rng.gen())).collect())
            .collect();
        let mut scored = Vec::new();
        for (m, p) in maps.iter().zip(&pts) {
            let cells: Vec<usize> = p.iter().map(|q| quantize(*q, 5).unwrap()).collect();
            scored.extend(m.iter().enumerate().map(|(i, v)| (*v, cells.contains(&i))));
        }
        assert!(close(heatmap_auc(&maps, &pts, 5).unwrap(), auc_pairwise_oracle(&scored)));
    }

    #[test]
    fn distance_examples() {
        let mut h = Heatmap::uniform(10);
        h.probs[0] = 0.5;
        let c = cell_center(0, 10);
        assert_eq!(l2_and_min_distance(&h, &[c]).unwrap(), (0.0, 0.0));
        let (l2, min) =
            l2_and_min_distance(&h, &[c, ImagePoint::new(1.0, 1.0)]).unwrap();
        assert!(min == 0.0 && l2 > 0.0);
        let mut g = Heatmap::uniform(2);
        g.probs = vec![1.0, 0.0, 0.0, 0.0];
        let (l2, min) = l2_and_min_distance(&g, &[ImagePoint::new(0.25, 0.25), ImagePoint::new(1.25, 1.25)]).unwrap();
        assert!((l2 - std::f64::consts::SQRT_2 / 2.0).abs() < 1e-12 && min == 0.0);
        assert_eq!(Heatmap::uniform(4).argmax(), 0);
        assert!(l2_and_min_distance(&h, &[]).is_err());
    }

    #[test]
    fn ap_examples() {
        assert!(close(fixation_ap(&[0.9, 0.8, 0.7], &[true, false, true]).unwrap(), (1.0 + 2.0 / 3.0) / 2.0));
        assert!(close(fixation_ap(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false]).unwrap(), 1.0));
        let labels: Vec<bool> = (0..40).map(|i| i % 4 == 0).collect();
        assert!(close(fixation_ap(&[0.3; 40], &labels).unwrap(), 0.25));
        assert!(matches!(fixation_ap(&[0.1], &[false]), Err(Error::Undefined(_))));
    }

    #[test]
    fn metric_oracles_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let n = rng.gen_range(2..60);
            let coarse = rng.gen_bool(0.5);
            let mut scored: Vec<(f64, bool)> = (0..n)
                .map(|_| {
                    let s = if coarse { rng.gen_range(0..5) as f64 / 4.0 } else { rng.gen() };
                    (s, rng.gen_bool(0.4))
                })
                .collect();
            scored[0].1 = true;
            scored[1].1 = false;
            assert!(close(roc_auc(&scored).unwrap(), auc_pairwise_oracle(&scored)));
            let (s, y): (Vec<f64>, Vec<bool>) = scored.into_iter().unzip();
            assert!(close(fixation_ap(&s, &y).unwrap(), ap_staircase_oracle(&s, &y)));
        }
    }

    #[test]
    fn grid_examples() {
        let map_at = |cell: usize| {
            let mut m = vec![0.0; 100];
            m[cell] = 1.0;
            m
        };
        let t = ImagePoint::new(0.8, 0.2);
        let cell = quantize(t, 10).unwrap();
        let hit = GridCase { fixation_map: map_at(cell), likelihood: 0.9, target: Some(t) };
        let r = grid_classification(&[hit.clone(), hit.clone()], 10, 2, 0.5).unwrap();
        assert_eq!((r.precision, r.recall), (1.0, 1.0));
        let false_alarm = GridCase { fixation_map: map_at(cell), likelihood: 0.9, target: None };
        let r = grid_classification(&[hit.clone(), false_alarm.clone(), hit, false_alarm], 10, 5, 0.5).unwrap();
        assert_eq!((r.precision, r.recall), (0.5, 1.0));
        assert!(matches!(grid_classification(&[], 10, 11, 0.5), Ok(_)));
        let one = GridCase { fixation_map: map_at(0), likelihood: 1.0, target: None };
        assert!(matches!(grid_classification(&[one], 10, 11, 0.5), Err(Error::Config(_))));
    }

    #[test]
    fn aggregation_conserves_mass() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m: Vec<f64> = (0..100).map(|_| rng.gen()).collect();
        for n in 1..=10 {
            let a = aggregate(&m, 10, n).unwrap();
            assert!((a.iter().sum::<f64>() - m.iter().sum::<f64>()).abs() < 1e-9);
        }
        let a = aggregate(&m, 10, 5).unwrap();
        assert!((a[0] - (m[0] + m[1] + m[10] + m[11])).abs() < 1e-12);
    }

    #[test]
    fn angular_error_examples() {
        let a = [GazeAngle::new(0.1, 0.2), GazeAngle::new(-0.3, 0.0)];
        assert_eq!(mean_angular_error(&a, &a).unwrap(), 0.0);
        let b: Vec<GazeAngle> = a.iter().map(|g| GazeAngle::new(g.yaw + std::f64::consts::FRAC_PI_2, 0.0)).collect();
        let z: Vec<GazeAngle> = a.iter().map(|g| GazeAngle::new(g.yaw, 0.0)).collect();
        assert!((mean_angular_error(&b, &z).unwrap() - 90.0).abs() < 1e-9);
        let oracle = a.iter().zip(&b).map(|(x, y)| angular_error(*x, *y)).sum::<f64>() / 2.0;
        assert!((mean_angular_error(&a, &b).unwrap() - oracle).abs() < 1e-12);
        assert!(matches!(mean_angular_error(&[], &[]), Err(Error::Undefined(_))));
    }

    #[test]
    fn baselines() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c = baseline_heatmap(Baseline::Center, 9, &mut rng).unwrap();
        assert_eq!(c.argmax(), 40);
        assert!((c.sum() - 1.0).abs() < 1e-12);
        let r = baseline_heatmap(Baseline::Random, 10, &mut rng).unwrap();
        assert!((r.sum() - 1.0).abs() < 1e-12);
        assert!(baseline_heatmap(Baseline::None, 10, &mut rng).is_none());
    }

    proptest! {
        #[test]
        fn raising_a_positive_never_lowers_auc(
            scores in proptest::collection::vec(0.0f64..1.0, 4..40),
            bump in 0.0f64..1.0,
            seed: u64,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut scored: Vec<(f64, bool)> = scores.iter().map(|&s| (s, rng.gen_bool(0.5))).collect();
            scored[0].1 = true;
            scored[1].1 = false;
            let before = roc_auc(&scored).unwrap();
            scored[0].0 += bump;
            prop_assert!(roc_auc(&scored).unwrap() >= before - 1e-12);
            let (s, y): (Vec<f64>, Vec<bool>) = scored.iter().cloned().unzip();
            let ap0 = fixation_ap(&s, &y).unwrap();
            let mut s2 = s.clone();
            s2[0] += bump;
            prop_assert!(fixation_ap(&s2, &y).unwrap() >= ap0 - 1e-12);
        }

        #[test]
        fn grid_metrics_ignore_order(seed: u64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut cases: Vec<GridCase> = (0..30)
                .map(|_| GridCase {
                    fixation_map: (0..100).map(|_| rng.gen()).collect(),
                    likelihood: rng.gen(),
                    target: rng.gen_bool(0.6).then(|| ImagePoint::new(rng.gen(), rng.gen())),
                })
                .collect();
            let a = grid_classification(&cases, 10, 3, 0.5).unwrap();
            cases.reverse();
            prop_assert_eq!(a, grid_classification(&cases, 10, 3, 0.5).unwrap());
        }
    }
}
