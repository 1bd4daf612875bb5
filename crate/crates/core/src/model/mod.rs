//! The dual-pathway attention network.
//!
//! ```text
//! scene ─(a) backbone──(c) scene head──┐
//!                                      ├─ concat ─(c) heatmap FC──────────────▶ heatmap logits
//! face ──(b) backbone─┬(c) saliency hd─┤                 │
//!                     │        position one-hot ─────────┤
//!                     └(d) angle head ── (d) angle FC ───┼────────────────────▶ yaw, pitch
//!                                                        └─(e) fixation FC ───▶ fixation logit
//! ```
//!
//! The fixation layer consumes the concatenated inputs of the heatmap and
//! angle output layers.

mod blocks;
mod output;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::KvConfig;
use crate::error::{Error, Result};
use crate::geometry::GazeAngle;
use crate::nn::{Grads, Group, GroupSet, Linear, ParamId, ParamStore, StatUpdate, Tensor};

use blocks::{backward_chain, run_chain, Backbone, BackboneCache, Builder, CbrCache, ConvBnRelu};
pub use output::{
    argmax, combine, log_softmax, postprocess, postprocess_with, sigmoid, softmax,
    AttentionEstimate, Heatmap, RawOutput,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackboneKind {
    Toy,
    Resnet50Like,
}

impl fmt::Display for BackboneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackboneKind::Toy => "toy",
            BackboneKind::Resnet50Like => "resnet50-like",
        })
    }
}

impl FromStr for BackboneKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "toy" => Ok(BackboneKind::Toy),
            "resnet50-like" | "resnet50" => Ok(BackboneKind::Resnet50Like),
            _ => Err(Error::Config(format!("unknown backbone `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CombineMode {
    Weighting,
    Gating,
}

impl fmt::Display for CombineMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CombineMode::Weighting => "weighting",
            CombineMode::Gating => "gating",
        })
    }
}

impl FromStr for CombineMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weighting" => Ok(CombineMode::Weighting),
            "gating" => Ok(CombineMode::Gating),
            _ => Err(Error::Config(format!("unknown combine mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub backbone: BackboneKind,
    pub input_side: usize,
    pub position_grid: usize,
    pub heatmap_grid: usize,
    pub scene_head_depths: [usize; 3],
    pub face_head_depths: [usize; 3],
    pub combine_mode: CombineMode,
    pub gating_threshold: f64,
}

/// Desk-scale input resolution of the toy preset.
pub const TOY_INPUT_SIDE: usize = 128;

impl Default for ModelConfig {
    fn default() -> Self {
        Self::toy()
    }
}

impl ModelConfig {
    pub fn toy() -> Self {
        Self {
            backbone: BackboneKind::Toy,
            input_side: TOY_INPUT_SIDE,
            position_grid: 13,
            heatmap_grid: 10,
            scene_head_depths: [64, 16, 1],
            face_head_depths: [64, 16, 4],
            combine_mode: CombineMode::Weighting,
            gating_threshold: 0.5,
        }
    }

    pub fn full_scale() -> Self {
        Self {
            backbone: BackboneKind::Resnet50Like,
            input_side: 227,
            scene_head_depths: [512, 128, 1],
            face_head_depths: [512, 128, 16],
            ..Self::toy()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.position_grid < 1 {
            problems.push("position_grid must be >= 1".to_string());
        }
        if self.heatmap_grid < 2 {
            problems.push("heatmap_grid must be >= 2".to_string());
        }
        if self.scene_head_depths[2] != 1 {
            problems.push(format!(
                "last scene head depth must be 1, got {}",
                self.scene_head_depths[2]
            ));
        }
        for (name, d) in [("scene", self.scene_head_depths), ("face", self.face_head_depths)] {
            if !(d[0] > d[1] && d[1] > d[2] && d[2] >= 1) {
                problems.push(format!("{name} head depths {d:?} must be strictly decreasing"));
            }
        }
        if !(0.0..=1.0).contains(&self.gating_threshold) {
            problems.push(format!("gating_threshold {} not in [0,1]", self.gating_threshold));
        }
        if problems.is_empty() {
            if let Err(e) = self.feature_side() {
                problems.push(e.to_string());
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    /// Spatial side of the head outputs.
    pub fn feature_side(&self) -> Result<usize> {
        let backbone_side = match self.backbone {
            BackboneKind::Toy => (0..4).try_fold(self.input_side, |s, _| {
                (s >= 2).then_some((s + 1) / 2)
            }),
            BackboneKind::Resnet50Like => {
                let s = (self.input_side + 6).checked_sub(7).map(|v| v / 2 + 1);
                let s = s.map(|s| (s + 2 - 3) / 2 + 1);
                s.map(|s| (0..3).fold(s, |s, _| (s + 1) / 2))
            }
        };
        match backbone_side {
            Some(s) if s >= 3 => Ok(s - 2),
            other => Err(Error::Config(format!(
                "input_side {} gives backbone output side {:?}; the 3x3 head convolution needs >= 3",
                self.input_side, other
            ))),
        }
    }

    pub fn to_kv(&self) -> KvConfig {
        let mut kv = KvConfig::new();
        kv.set("backbone", self.backbone);
        kv.set("input_side", self.input_side);
        kv.set("position_grid", self.position_grid);
        kv.set("heatmap_grid", self.heatmap_grid);
        kv.set("scene_head_depths", join(&self.scene_head_depths));
        kv.set("face_head_depths", join(&self.face_head_depths));
        kv.set("combine_mode", self.combine_mode);
        kv.set("gating_threshold", self.gating_threshold);
        kv
    }

    /// Reads keys (without the `model.` prefix); absent keys keep the preset
    /// for the chosen backbone.
    pub fn from_kv(kv: &KvConfig) -> Result<Self> {
        let backbone: BackboneKind = kv.get_or("backbone", BackboneKind::Toy)?;
        let base = match backbone {
            BackboneKind::Toy => Self::toy(),
            BackboneKind::Resnet50Like => Self::full_scale(),
        };
        let cfg = Self {
            backbone,
            input_side: kv.get_or("input_side", base.input_side)?,
            position_grid: kv.get_or("position_grid", base.position_grid)?,
            heatmap_grid: kv.get_or("heatmap_grid", base.heatmap_grid)?,
            scene_head_depths: triple(kv, "scene_head_depths", base.scene_head_depths)?,
            face_head_depths: triple(kv, "face_head_depths", base.face_head_depths)?,
            combine_mode: kv.get_or("combine_mode", base.combine_mode)?,
            gating_threshold: kv.get_or("gating_threshold", base.gating_threshold)?,
        };
        Ok(cfg)
    }
}

fn join(d: &[usize; 3]) -> String {
    format!("{},{},{}", d[0], d[1], d[2])
}

fn triple(kv: &KvConfig, key: &str, default: [usize; 3]) -> Result<[usize; 3]> {
    match kv.get_list(key) {
        None => Ok(default),
        Some(items) => {
            let parsed: Vec<usize> = items
                .iter()
                .map(|s| s.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Config(format!("`{key}` must be three integers")))?;
            <[usize; 3]>::try_from(parsed)
                .map_err(|_| Error::Config(format!("`{key}` must be three integers")))
        }
    }
}

/// One batch of network inputs. Pixels in `[0,1]`, `position` holds the
/// one-hot index of the face position on the position grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBatch {
    pub scene: Tensor,
    pub face: Tensor,
    pub position: Vec<usize>,
}

impl ModelBatch {
    pub fn len(&self) -> usize {
        self.position.len()
    }

    pub fn is_empty(&self) -> bool {
        self.position.is_empty()
    }

    pub fn select(&self, rows: &[usize]) -> Self {
        Self {
            scene: self.scene.select(rows),
            face: self.face.select(rows),
            position: rows.iter().map(|&r| self.position[r]).collect(),
        }
    }
}

/// Which outputs a forward pass must produce and which groups run with
/// training-mode batch normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Plan {
    pub heatmap: bool,
    pub angle: bool,
    pub fixation: bool,
    pub train: GroupSet,
}

impl Plan {
    pub fn inference() -> Self {
        Self {
            heatmap: true,
            angle: true,
            fixation: true,
            train: GroupSet::EMPTY,
        }
    }

    pub fn training_all() -> Self {
        Self {
            train: GroupSet::ALL,
            ..Self::inference()
        }
    }

    fn needs_scene(&self) -> bool {
        self.heatmap || self.fixation
    }

    fn needs_angle_features(&self) -> bool {
        self.angle || self.fixation
    }
}

#[derive(Debug, Clone, Default)]
pub struct BatchOutput {
    /// `[n, grid²]`
    pub heatmap_logits: Option<Tensor>,
    /// `[n, 2]` (yaw, pitch) in radians
    pub angle: Option<Tensor>,
    /// `[n, 1]`
    pub fixation_logit: Option<Tensor>,
}

impl BatchOutput {
    /// Per-sample outputs; requires all three heads.
    pub fn into_raw(self) -> Vec<RawOutput> {
        let h = self.heatmap_logits.expect("heatmap output");
        let a = self.angle.expect("angle output");
        let f = self.fixation_logit.expect("fixation output");
        (0..h.n())
            .map(|i| RawOutput {
                angle: GazeAngle::new(a.item(i)[0], a.item(i)[1]),
                heatmap_logits: h.item(i).to_vec(),
                fixation_logit: f.item(i)[0],
            })
            .collect()
    }
}

/// Upstream gradients of a scalar loss with respect to the outputs.
#[derive(Debug, Clone, Default)]
pub struct OutputGrads {
    pub heatmap_logits: Option<Tensor>,
    pub angle: Option<Tensor>,
    pub fixation_logit: Option<Tensor>,
}

pub struct ForwardCache {
    scene_backbone: Option<BackboneCache>,
    face_backbone: Option<BackboneCache>,
    scene_head: Option<(Vec<CbrCache>, [usize; 4])>,
    saliency_head: Option<(Vec<CbrCache>, [usize; 4])>,
    angle_head: Option<(Vec<CbrCache>, [usize; 4])>,
    heatmap_fc: Option<crate::nn::LinearCache>,
    angle_fc: Option<crate::nn::LinearCache>,
    fixation_fc: Option<crate::nn::LinearCache>,
    /// Batch-norm running-statistic updates from training-mode layers.
    pub stats: Vec<StatUpdate>,
}

#[derive(Debug, Clone)]
pub struct Model {
    config: ModelConfig,
    pub store: ParamStore,
    scene_backbone: Backbone,
    face_backbone: Backbone,
    scene_head: Vec<ConvBnRelu>,
    saliency_head: Vec<ConvBnRelu>,
    angle_head: Vec<ConvBnRelu>,
    heatmap_fc: Linear,
    angle_fc: Linear,
    fixation_fc: Linear,
    widths: Widths,
}

#[derive(Debug, Clone, Copy)]
struct Widths {
    scene: usize,
    saliency: usize,
    position: usize,
    angle: usize,
}

impl Widths {
    fn heatmap_in(&self) -> usize {
        self.scene + self.saliency + self.position
    }
}

fn head<R: rand::Rng>(b: &mut Builder<'_, R>, prefix: &str, cin: usize, d: [usize; 3]) -> Vec<ConvBnRelu> {
    vec![
        b.conv_bn(&format!("{prefix}.conv1"), cin, d[0], 1, 1, 0, true),
        b.conv_bn(&format!("{prefix}.conv2"), d[0], d[1], 3, 1, 0, true),
        b.conv_bn(&format!("{prefix}.conv3"), d[1], d[2], 1, 1, 0, true),
    ]
}

impl Model {
    /// Builds the network with seeded fan-in random initialization.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let side = config.feature_side()?;
        let cells = side * side;

        let mut b = Builder {
            store: &mut store,
            rng: &mut rng,
            group: Group::SceneBackbone,
        };
        let scene_backbone = match config.backbone {
            BackboneKind::Toy => Backbone::toy(&mut b, "scene_backbone"),
            BackboneKind::Resnet50Like => Backbone::resnet50(&mut b, "scene_backbone"),
        };
        b.group = Group::FaceBackbone;
        let face_backbone = match config.backbone {
            BackboneKind::Toy => Backbone::toy(&mut b, "face_backbone"),
            BackboneKind::Resnet50Like => Backbone::resnet50(&mut b, "face_backbone"),
        };
        let feat = scene_backbone.out_channels();
        b.group = Group::HeatmapHead;
        let scene_head = head(&mut b, "heatmap_head.scene", feat, config.scene_head_depths);
        let saliency_head = head(&mut b, "heatmap_head.face", feat, config.face_head_depths);
        b.group = Group::AngleHead;
        let angle_head = head(&mut b, "angle_head.face", feat, config.face_head_depths);

        let widths = Widths {
            scene: config.scene_head_depths[2] * cells,
            saliency: config.face_head_depths[2] * cells,
            position: config.position_grid * config.position_grid,
            angle: config.face_head_depths[2] * cells,
        };
        let grid2 = config.heatmap_grid * config.heatmap_grid;
        let heatmap_fc = linear(&mut store, &mut rng, "heatmap_head.fc", Group::HeatmapHead, widths.heatmap_in(), grid2);
        let angle_fc = linear(&mut store, &mut rng, "angle_head.fc", Group::AngleHead, widths.angle, 2);
        let fixation_fc = linear(
            &mut store,
            &mut rng,
            "fixation_head.fc",
            Group::FixationHead,
            widths.heatmap_in() + widths.angle,
            1,
        );
        Ok(Self {
            config,
            store,
            scene_backbone,
            face_backbone,
            scene_head,
            saliency_head,
            angle_head,
            heatmap_fc,
            angle_fc,
            fixation_fc,
            widths,
        })
    }

    /// Rebuilds a model around a stored parameter set, checking names and shapes.
    pub fn from_store(config: ModelConfig, store: ParamStore) -> Result<Self> {
        let mut model = Self::new(config, 0)?;
        let expect = &model.store;
        let describe = |p: &crate::nn::Param| format!("{} {:?}", p.name, p.shape);
        for (kind, want, got) in [
            ("parameter", &expect.params, &store.params),
            ("buffer", &expect.buffers, &store.buffers),
        ] {
            if want.len() != got.len() {
                return Err(Error::Checkpoint(format!(
                    "{kind} count {} does not match the configured model ({})",
                    got.len(),
                    want.len()
                )));
            }
            for (w, g) in want.iter().zip(got) {
                if w.name != g.name || w.shape != g.shape || w.group != g.group {
                    return Err(Error::Checkpoint(format!(
                        "{kind} mismatch: checkpoint has {}, model expects {}",
                        describe(g),
                        describe(w)
                    )));
                }
            }
        }
        model.store = store;
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn num_parameters(&self) -> usize {
        self.store.num_parameters()
    }

    /// Parameter ids per group. The groups partition the parameter set.
    pub fn parameter_groups(&self) -> BTreeMap<Group, Vec<ParamId>> {
        let mut out: BTreeMap<Group, Vec<ParamId>> = Group::ALL.iter().map(|g| (*g, Vec::new())).collect();
        for (i, p) in self.store.params.iter().enumerate() {
            out.get_mut(&p.group).expect("group").push(ParamId(i));
        }
        out
    }

    pub fn fixation_layer(&self) -> (ParamId, ParamId) {
        (self.fixation_fc.weight, self.fixation_fc.bias)
    }

    pub fn heatmap_layer(&self) -> (ParamId, ParamId) {
        (self.heatmap_fc.weight, self.heatmap_fc.bias)
    }

    pub fn check_batch(&self, batch: &ModelBatch) -> Result<()> {
        let s = self.config.input_side;
        let n = batch.position.len();
        for (name, t) in [("scene", &batch.scene), ("face", &batch.face)] {
            if t.shape != [n, 3, s, s] {
                return Err(Error::Input(format!(
                    "{name} tensor has shape {:?}, model expects [{n}, 3, {s}, {s}]",
                    t.shape
                )));
            }
        }
        let cells = self.widths.position;
        if let Some(bad) = batch.position.iter().find(|&&p| p >= cells) {
            return Err(Error::Input(format!("position index {bad} outside grid of {cells} cells")));
        }
        Ok(())
    }

    fn one_hot(&self, position: &[usize]) -> Tensor {
        let w = self.widths.position;
        let mut t = Tensor::zeros([position.len(), w, 1, 1]);
        for (i, &p) in position.iter().enumerate() {
            t.data[i * w + p] = 1.0;
        }
        t
    }

    pub fn forward(&self, batch: &ModelBatch, plan: Plan) -> Result<(BatchOutput, ForwardCache)> {
        self.check_batch(batch)?;
        let store = &self.store;
        let mut stats = Vec::new();
        let mut out = BatchOutput::default();
        let mut cache = ForwardCache {
            scene_backbone: None,
            face_backbone: None,
            scene_head: None,
            saliency_head: None,
            angle_head: None,
            heatmap_fc: None,
            angle_fc: None,
            fixation_fc: None,
            stats: Vec::new(),
        };
        let train = |g: Group| plan.train.contains(g);

        let (face_feat, fb) = self
            .face_backbone
            .forward(store, &batch.face, train(Group::FaceBackbone), &mut stats);
        cache.face_backbone = Some(fb);

        let heatmap_in = if plan.needs_scene() {
            let (scene_feat, sb) =
                self.scene_backbone
                    .forward(store, &batch.scene, train(Group::SceneBackbone), &mut stats);
            cache.scene_backbone = Some(sb);
            let t = train(Group::HeatmapHead);
            let (s, sc) = run_chain(&self.scene_head, store, &scene_feat, t, &mut stats);
            let (f, fc) = run_chain(&self.saliency_head, store, &face_feat, t, &mut stats);
            cache.scene_head = Some((sc, s.shape));
            cache.saliency_head = Some((fc, f.shape));
            let pos = self.one_hot(&batch.position);
            Some(Tensor::concat_features(&[&s.flatten(), &f.flatten(), &pos]))
        } else {
            None
        };

        let angle_in = if plan.needs_angle_features() {
            let (a, ac) = run_chain(&self.angle_head, store, &face_feat, train(Group::AngleHead), &mut stats);
            cache.angle_head = Some((ac, a.shape));
            Some(a.flatten())
        } else {
            None
        };

        if plan.heatmap {
            let hin = heatmap_in.as_ref().expect("heatmap input");
            let (y, c) = self.heatmap_fc.forward(store, hin);
            out.heatmap_logits = Some(y);
            cache.heatmap_fc = Some(c);
        }
        if plan.angle {
            let ain = angle_in.as_ref().expect("angle input");
            let (y, c) = self.angle_fc.forward(store, ain);
            out.angle = Some(y);
            cache.angle_fc = Some(c);
        }
        if plan.fixation {
            let joint = Tensor::concat_features(&[
                heatmap_in.as_ref().expect("heatmap input"),
                angle_in.as_ref().expect("angle input"),
            ]);
            let (y, c) = self.fixation_fc.forward(store, &joint);
            out.fixation_logit = Some(y);
            cache.fixation_fc = Some(c);
        }
        cache.stats = stats;
        Ok((out, cache))
    }

    /// Inference-mode forward producing post-processable raw outputs.
    pub fn predict(&self, batch: &ModelBatch) -> Result<Vec<RawOutput>> {
        let (out, _) = self.forward(batch, Plan::inference())?;
        Ok(out.into_raw())
    }

    /// Gradients of the parameters in `update` only; other groups get no
    /// gradient slot at all.
    pub fn backward(&self, cache: &ForwardCache, og: &OutputGrads, update: GroupSet) -> Grads {
        let store = &self.store;
        let mut grads = Grads::for_store(store);
        let has = |g: Group| update.contains(g);
        let below_heatmap_in = has(Group::SceneBackbone) || has(Group::FaceBackbone) || has(Group::HeatmapHead);
        let below_angle_in = has(Group::FaceBackbone) || has(Group::AngleHead);
        let w = self.widths;

        let mut d_hin: Option<Tensor> = None;
        let mut d_ain: Option<Tensor> = None;
        let add = |slot: &mut Option<Tensor>, t: Tensor| match slot {
            Some(s) => s.add_assign(&t),
            None => *slot = Some(t),
        };

        if let (Some(dy), Some(c)) = (&og.fixation_logit, &cache.fixation_fc) {
            let g = has(Group::FixationHead).then_some(&mut grads);
            if let Some(dj) = self.fixation_fc.backward(store, c, dy, g, below_heatmap_in || below_angle_in) {
                let mut parts = dj.split_features(&[w.heatmap_in(), w.angle]).into_iter();
                let dh = parts.next().expect("split");
                let da = parts.next().expect("split");
                if below_heatmap_in {
                    add(&mut d_hin, dh);
                }
                if below_angle_in {
                    add(&mut d_ain, da);
                }
            }
        }
        if let (Some(dy), Some(c)) = (&og.heatmap_logits, &cache.heatmap_fc) {
            let g = has(Group::HeatmapHead).then_some(&mut grads);
            if let Some(d) = self.heatmap_fc.backward(store, c, dy, g, below_heatmap_in) {
                add(&mut d_hin, d);
            }
        }
        if let (Some(dy), Some(c)) = (&og.angle, &cache.angle_fc) {
            let g = has(Group::AngleHead).then_some(&mut grads);
            if let Some(d) = self.angle_fc.backward(store, c, dy, g, below_angle_in) {
                add(&mut d_ain, d);
            }
        }

        let mut d_face: Option<Tensor> = None;
        let want_face = has(Group::FaceBackbone);
        if let Some(dh) = d_hin {
            let mut parts = dh.split_features(&[w.scene, w.saliency, w.position]).into_iter();
            let ds = parts.next().expect("split");
            let df = parts.next().expect("split");
            let head_grads = has(Group::HeatmapHead);
            if let Some((sc, shape)) = &cache.scene_head {
                let g = head_grads.then_some(&mut grads);
                let need = has(Group::SceneBackbone);
                if let Some(d_scene) = backward_chain(&self.scene_head, store, sc, ds.reshape(*shape), g, need) {
                    let bc = cache.scene_backbone.as_ref().expect("scene backbone cache");
                    self.scene_backbone.backward(store, bc, d_scene, &mut grads);
                }
            }
            if let Some((fc, shape)) = &cache.saliency_head {
                let g = head_grads.then_some(&mut grads);
                if let Some(d) = backward_chain(&self.saliency_head, store, fc, df.reshape(*shape), g, want_face) {
                    add(&mut d_face, d);
                }
            }
        }
        if let (Some(da), Some((ac, shape))) = (d_ain, &cache.angle_head) {
            let g = has(Group::AngleHead).then_some(&mut grads);
            if let Some(d) = backward_chain(&self.angle_head, store, ac, da.reshape(*shape), g, want_face) {
                add(&mut d_face, d);
            }
        }
        if let (Some(d), true) = (d_face, want_face) {
            let bc = cache.face_backbone.as_ref().expect("face backbone cache");
            self.face_backbone.backward(store, bc, d, &mut grads);
        }
        grads
    }

    pub fn apply_stats(&mut self, stats: &[StatUpdate]) {
        self.store.apply(stats);
    }
}

fn linear<R: rand::Rng>(
    store: &mut ParamStore,
    rng: &mut R,
    name: &str,
    group: Group,
    fan_in: usize,
    fan_out: usize,
) -> Linear {
    let weight = store.add_kaiming(format!("{name}.weight"), group, vec![fan_out, fan_in], fan_in, rng);
    let bias = store.add_const(format!("{name}.bias"), group, vec![fan_out], 0.0);
    Linear {
        weight,
        bias,
        fan_in,
        fan_out,
    }
}
