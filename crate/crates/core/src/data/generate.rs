//! Procedural scenes with exact geometric ground truth.
//!
//! Every sample shows a head glyph: a disc with a dark wedge pointing along
//! the image-plane projection of the true gaze, with wedge length
//! proportional to the projection length, so the face crop alone determines
//! the angle. Inside samples carry a red-on-white target marker on the
//! projected gaze ray; distractor blobs never sit on the ray.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::render::{Canvas, Color};
use super::{AttentionSample, Domain, FaceBox};
use crate::error::{Error, Result};
use crate::geometry::{angles_to_vector, norm2, project_gaze, GazeAngle, ImagePoint};

const MARKER_OUTER: f64 = 0.04;
const MARKER_INNER: f64 = 0.024;
/// Face box side relative to the head radius.
const FACE_BOX_SCALE: f64 = 2.4;
const MAX_PLACEMENT_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub domain: Domain,
    pub seed: u64,
    pub count: usize,
    pub p_inside: f64,
    pub canvas_side: u32,
    /// Inclusive range of distractor blobs per scene.
    pub distractors: (usize, usize),
    /// Head-to-target distance range, normalized units.
    pub target_distance: (f64, f64),
    pub yaw_range_deg: f64,
    pub pitch_range_deg: f64,
    pub head_radius: (f64, f64),
    /// Minimum projected gaze length for inside samples.
    pub min_projection: f64,
}

impl GeneratorConfig {
    pub fn for_domain(domain: Domain, seed: u64, count: usize) -> Self {
        let gf = Self {
            domain,
            seed,
            count,
            p_inside: 0.884,
            canvas_side: 192,
            distractors: (2, 4),
            target_distance: (0.2, 0.6),
            yaw_range_deg: 90.0,
            pitch_range_deg: 60.0,
            head_radius: (0.05, 0.075),
            min_projection: 0.3,
        };
        match domain {
            Domain::GazeFollowLike => gf,
            Domain::MmdbLike => Self { p_inside: 0.414, ..gf },
            Domain::EyediapLike => Self {
                p_inside: 0.0,
                distractors: (0, 1),
                yaw_range_deg: 40.0,
                pitch_range_deg: 40.0,
                head_radius: (0.1, 0.16),
                ..gf
            },
            Domain::SynHeadLike => Self {
                p_inside: 0.0,
                distractors: (0, 2),
                yaw_range_deg: 90.0,
                pitch_range_deg: 60.0,
                head_radius: (0.07, 0.13),
                ..gf
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(0.0..=1.0).contains(&self.p_inside) {
            bad.push(format!("p_inside {} not in [0,1]", self.p_inside));
        }
        if matches!(self.domain, Domain::EyediapLike | Domain::SynHeadLike) && self.p_inside != 0.0 {
            bad.push(format!("{} samples always look outside; p_inside must be 0", self.domain));
        }
        if self.distractors.0 > self.distractors.1 {
            bad.push("distractor range is empty".into());
        }
        let (d0, d1) = self.target_distance;
        if !(0.0 < d0 && d0 <= d1 && d1 < 1.5) {
            bad.push(format!("target distance range ({d0}, {d1}) invalid"));
        }
        let (r0, r1) = self.head_radius;
        if !(0.0 < r0 && r0 <= r1 && FACE_BOX_SCALE * r1 < 0.9) {
            bad.push(format!("head radius range ({r0}, {r1}) invalid"));
        }
        if !(self.yaw_range_deg > 0.0 && self.yaw_range_deg <= 90.0) {
            bad.push(format!("yaw range {} must be in (0, 90]", self.yaw_range_deg));
        }
        if !(self.pitch_range_deg > 0.0 && self.pitch_range_deg < 90.0) {
            bad.push(format!("pitch range {} must be in (0, 90)", self.pitch_range_deg));
        }
        if !(0.0..1.0).contains(&self.min_projection) {
            bad.push("min_projection must be in [0,1)".into());
        }
        if self.canvas_side < 16 {
            bad.push("canvas_side must be >= 16".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad.join("; ")))
        }
    }
}

/// Generator-side truth for one scene.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneGeometry {
    pub head: ImagePoint,
    pub head_radius: f64,
    pub gaze: GazeAngle,
    pub target: Option<ImagePoint>,
}

/// Independent stream per sample index.
pub fn sample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn sample_angle<R: Rng>(cfg: &GeneratorConfig, rng: &mut R) -> GazeAngle {
    let y = cfg.yaw_range_deg;
    let p = cfg.pitch_range_deg;
    GazeAngle::from_degrees(rng.gen_range(-y..=y), rng.gen_range(-p..=p))
}

fn sample_head<R: Rng>(cfg: &GeneratorConfig, rng: &mut R) -> (ImagePoint, f64) {
    let r = rng.gen_range(cfg.head_radius.0..=cfg.head_radius.1);
    let m = FACE_BOX_SCALE * r / 2.0 + 0.01;
    (ImagePoint::new(rng.gen_range(m..1.0 - m), rng.gen_range(m..1.0 - m)), r)
}

fn place_inside<R: Rng>(cfg: &GeneratorConfig, rng: &mut R) -> (ImagePoint, f64, GazeAngle, ImagePoint) {
    let lo = MARKER_OUTER + 0.01;
    loop {
        let gaze = sample_angle(cfg, rng);
        let u = project_gaze(angles_to_vector(gaze));
        let n = norm2(u);
        if n < cfg.min_projection.max(1e-3) {
            continue;
        }
        let (head, r) = sample_head(cfg, rng);
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            let t = rng.gen_range(cfg.target_distance.0..=cfg.target_distance.1).max(r + MARKER_OUTER);
            let target = ImagePoint::new(head.x + t * u[0] / n, head.y + t * u[1] / n);
            if (lo..=1.0 - lo).contains(&target.x) && (lo..=1.0 - lo).contains(&target.y) {
                return (head, r, gaze, target);
            }
        }
    }
}

/// Distance from `origin` along unit `dir` to the frame border.
fn exit_distance(origin: ImagePoint, dir: [f64; 2]) -> f64 {
    let axis = |p: f64, d: f64| {
        if d > 0.0 {
            (1.0 - p) / d
        } else if d < 0.0 {
            -p / d
        } else {
            f64::INFINITY
        }
    };
    axis(origin.x, dir[0]).min(axis(origin.y, dir[1]))
}

/// Head and gaze whose projected ray leaves the frame before the nearest
/// distance a target marker could sit at.
fn place_outside<R: Rng>(cfg: &GeneratorConfig, rng: &mut R) -> (ImagePoint, f64, GazeAngle) {
    loop {
        let gaze = sample_angle(cfg, rng);
        let u = project_gaze(angles_to_vector(gaze));
        let n = norm2(u);
        let (head, r) = sample_head(cfg, rng);
        if n < 1e-3 {
            continue;
        }
        let nearest = cfg.target_distance.0.max(r + MARKER_OUTER);
        if exit_distance(head, [u[0] / n, u[1] / n]) < nearest {
            return (head, r, gaze);
        }
    }
}

fn distance_to_ray(q: ImagePoint, origin: ImagePoint, dir: [f64; 2]) -> f64 {
    let d = q.minus(&origin);
    let s = (d[0] * dir[0] + d[1] * dir[1]).max(0.0);
    (d[0] - s * dir[0]).hypot(d[1] - s * dir[1])
}

fn palette<R: Rng>(rng: &mut R) -> Color {
    const COLORS: [Color; 5] = [
        [0.15, 0.35, 0.85],
        [0.1, 0.65, 0.2],
        [0.9, 0.8, 0.1],
        [0.55, 0.2, 0.7],
        [0.1, 0.7, 0.75],
    ];
    COLORS[rng.gen_range(0..COLORS.len())]
}

fn background<R: Rng>(domain: Domain, side: usize, rng: &mut R) -> Canvas {
    match domain {
        Domain::EyediapLike => {
            let g = rng.gen_range(0.85..0.95);
            let mut c = Canvas::new(side, [g, g, g * rng.gen_range(0.97..1.0)]);
            c.rect(0.0, rng.gen_range(0.7..0.9), 1.0, 0.3, [0.7, 0.7, 0.72], 0.5);
            c
        }
        Domain::SynHeadLike => {
            let base = [rng.gen_range(0.2..0.6), rng.gen_range(0.2..0.6), rng.gen_range(0.2..0.6)];
            let mut c = Canvas::new(side, base);
            for _ in 0..2 {
                let f = [rng.gen_range(-6.0..6.0), rng.gen_range(-6.0..6.0)];
                let col = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
                c.stripes(f, rng.gen_range(0.0..6.3), col, 0.35);
            }
            c
        }
        Domain::GazeFollowLike | Domain::MmdbLike => {
            let base = [rng.gen_range(0.3..0.7), rng.gen_range(0.3..0.7), rng.gen_range(0.3..0.7)];
            let mut c = Canvas::new(side, base);
            for _ in 0..rng.gen_range(6..14) {
                let (w, h) = (rng.gen_range(0.05..0.4), rng.gen_range(0.05..0.4));
                let col = [rng.gen_range(0.2..0.8), rng.gen_range(0.2..0.8), rng.gen_range(0.2..0.8)];
                c.rect(rng.gen_range(-0.1..1.0), rng.gen_range(-0.1..1.0), w, h, col, 0.35);
            }
            c
        }
    }
}

fn draw_head<R: Rng>(c: &mut Canvas, head: ImagePoint, r: f64, u: [f64; 2], rng: &mut R) {
    let skin = [rng.gen_range(0.75..0.95), rng.gen_range(0.6..0.75), rng.gen_range(0.45..0.6)];
    c.disc(head.x, head.y, r, [0.2, 0.12, 0.08]);
    c.disc(head.x, head.y, r * 0.88, skin);
    let n = norm2(u);
    if n > 1e-3 {
        let dir = [u[0] / n, u[1] / n];
        let perp = [-dir[1], dir[0]];
        let len = 0.85 * r * n;
        let half = 0.38 * r;
        let apex = [head.x + len * dir[0], head.y + len * dir[1]];
        let back = 0.15 * r;
        let b0 = [head.x - back * dir[0] + half * perp[0], head.y - back * dir[1] + half * perp[1]];
        let b1 = [head.x - back * dir[0] - half * perp[0], head.y - back * dir[1] - half * perp[1]];
        c.triangle([apex, b0, b1], [0.08, 0.08, 0.12]);
    }
}

/// Renders one sample. Labels follow the domain's availability rules.
pub fn generate_sample<R: Rng>(cfg: &GeneratorConfig, index: usize, rng: &mut R) -> AttentionSample {
    let side = cfg.canvas_side as usize;
    let inside = rng.gen_bool(cfg.p_inside);
    let (head, r, gaze, target) = if inside {
        let (h, r, g, t) = place_inside(cfg, rng);
        (h, r, g, Some(t))
    } else if cfg.domain.has_inout_sidecar() {
        let (h, r, g) = place_outside(cfg, rng);
        (h, r, g, None)
    } else {
        let g = sample_angle(cfg, rng);
        let (h, r) = sample_head(cfg, rng);
        (h, r, g, None)
    };
    let u = project_gaze(angles_to_vector(gaze));
    let nu = norm2(u);
    let ray_dir = (nu > 1e-3).then(|| [u[0] / nu, u[1] / nu]);

    let mut canvas = background(cfg.domain, side, rng);
    let n_distractors = rng.gen_range(cfg.distractors.0..=cfg.distractors.1);
    for _ in 0..n_distractors {
        for _ in 0..50 {
            let size = rng.gen_range(0.025..0.05);
            let q = ImagePoint::new(rng.gen_range(size..1.0 - size), rng.gen_range(size..1.0 - size));
            let clear_head = q.distance(&head) > r + size + 0.04;
            let clear_ray = ray_dir.map_or(true, |d| distance_to_ray(q, head, d) > size + 0.08);
            let clear_target = target.map_or(true, |t| q.distance(&t) > MARKER_OUTER + size + 0.05);
            if clear_head && clear_ray && clear_target {
                let col = palette(rng);
                if rng.gen_bool(0.5) {
                    canvas.disc(q.x, q.y, size, col);
                } else {
                    canvas.rect(q.x - size, q.y - size, 2.0 * size, 2.0 * size, col, 1.0);
                }
                break;
            }
        }
    }
    if let Some(t) = target {
        canvas.disc(t.x, t.y, MARKER_OUTER, [1.0, 1.0, 1.0]);
        canvas.disc(t.x, t.y, MARKER_INNER, [0.9, 0.05, 0.05]);
    }
    draw_head(&mut canvas, head, r, u, rng);

    let labelled_gaze = match cfg.domain {
        Domain::GazeFollowLike => None,
        _ => Some(gaze),
    };
    AttentionSample {
        id: format!("{}_{index:06}", cfg.domain.tag().to_ascii_lowercase()),
        scene: canvas.into_image(),
        face_bbox: FaceBox::centered(head, FACE_BOX_SCALE * r),
        gaze: labelled_gaze,
        target,
        inside: Some(inside),
        domain: cfg.domain,
        geometry: Some(SceneGeometry {
            head,
            head_radius: r,
            gaze,
            target,
        }),
    }
}

/// Generates `cfg.count` samples; sample `i` depends only on `(seed, i)`.
pub fn generate_corpus(cfg: &GeneratorConfig) -> Result<Vec<AttentionSample>> {
    cfg.validate()?;
    Ok((0..cfg.count)
        .into_par_iter()
        .map(|i| generate_sample(cfg, i, &mut sample_rng(cfg.seed, i)))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub count: usize,
    pub inside_fraction: Option<f64>,
    pub domains: BTreeMap<String, usize>,
    /// 10° bins keyed by lower edge.
    pub yaw_histogram: BTreeMap<i32, usize>,
    pub pitch_histogram: BTreeMap<i32, usize>,
}

pub fn corpus_stats(samples: &[AttentionSample]) -> CorpusStats {
    let mut domains = BTreeMap::new();
    let mut yaw = BTreeMap::new();
    let mut pitch = BTreeMap::new();
    let (mut labelled, mut inside) = (0usize, 0usize);
    let bin = |deg: f64| ((deg / 10.0).floor() as i32) * 10;
    for s in samples {
        *domains.entry(s.domain.tag().to_string()).or_insert(0) += 1;
        if let Some(i) = s.inside {
            labelled += 1;
            inside += i as usize;
        }
        if let Some(g) = s.gaze {
            *yaw.entry(bin(g.yaw_deg())).or_insert(0) += 1;
            *pitch.entry(bin(g.pitch_deg())).or_insert(0) += 1;
        }
    }
    CorpusStats {
        count: samples.len(),
        inside_fraction: (labelled > 0).then(|| inside as f64 / labelled as f64),
        domains,
        yaw_histogram: yaw,
        pitch_histogram: pitch,
    }
}
