//! Cross-domain training: shuffled mixed batches, per-task masked updates,
//! logging and checkpointing.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::config::KvConfig;
use crate::data::{load_corpus, AttentionSample, Domain, PreparedSample};
use crate::error::{Error, Result};
use crate::geometry::GazeAngle;
use crate::losses::{
    angle_loss_grad, combine, fixation_loss_grad, heatmap_loss_grad, pnc_batch_grad, LossConfig, LossParts,
    LossReport, Term,
};
use crate::model::{Model, ModelBatch, ModelConfig, OutputGrads, Plan};
use crate::nn::{Group, GroupSet, Tensor};
use crate::optim::{Adam, AdamConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Angle,
    Heatmap,
    Fixation,
    Pnc,
}

impl Task {
    /// Execution order within a training step.
    pub const ORDER: [Task; 4] = [Task::Angle, Task::Heatmap, Task::Fixation, Task::Pnc];

    pub fn name(self) -> &'static str {
        match self {
            Task::Angle => "angle",
            Task::Heatmap => "heatmap",
            Task::Fixation => "fixation",
            Task::Pnc => "pnc",
        }
    }

    pub fn mask(self) -> UpdateMask {
        use Group::*;
        let groups = match self {
            Task::Angle | Task::Pnc => GroupSet::of(&[FaceBackbone, AngleHead]),
            Task::Heatmap => GroupSet::of(&[SceneBackbone, FaceBackbone, HeatmapHead]),
            Task::Fixation => GroupSet::of(&[FixationHead]),
        };
        UpdateMask { task: self, groups }
    }

    /// Whether a sample carries the labels this task consumes. The fixation
    /// task only reads inside/outside labels from annotated domains; the
    /// constant `inside = 0` of angle-only domains is not used.
    pub fn eligible(self, s: &PreparedSample) -> bool {
        let l = &s.labels;
        match self {
            Task::Angle => l.gaze.is_some(),
            Task::Heatmap => l.inside == Some(true) && l.target_cell.is_some(),
            Task::Fixation => l.inside.is_some() && s.domain.has_inout_sidecar(),
            Task::Pnc => l.inside == Some(true) && l.target.is_some(),
        }
    }

    fn plan(self) -> Plan {
        Plan {
            angle: matches!(self, Task::Angle | Task::Pnc),
            heatmap: self == Task::Heatmap,
            fixation: self == Task::Fixation,
            train: self.mask().groups,
        }
    }

    fn weight(self, cfg: &LossConfig) -> f64 {
        match self {
            Task::Angle => cfg.w_angle,
            Task::Heatmap => cfg.w_heatmap,
            Task::Fixation => cfg.w_fixation,
            Task::Pnc => cfg.w_pnc,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UpdateMask {
    pub task: Task,
    pub groups: GroupSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Adam,
}

impl FromStr for Optimizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "adam" => Ok(Optimizer::Adam),
            other => Err(Error::Config(format!("unknown optimizer `{other}` (only `adam` is supported)"))),
        }
    }
}

impl fmt::Display for Optimizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("adam")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureEntry {
    pub manifest: PathBuf,
    pub domain: Domain,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub optimizer: Optimizer,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub loss: LossConfig,
    pub seed: u64,
    pub mixture: Vec<MixtureEntry>,
    pub log_every: usize,
    /// Steps between periodic checkpoints; 0 disables them.
    pub checkpoint_every: usize,
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        Self {
            learning_rate: adam.learning_rate,
            batch_size: 36,
            epochs: 12,
            optimizer: Optimizer::Adam,
            beta1: adam.beta1,
            beta2: adam.beta2,
            eps: adam.eps,
            loss: LossConfig::default(),
            seed: 0,
            mixture: Vec::new(),
            log_every: 1,
            checkpoint_every: 0,
            model: ModelConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }

    /// Reads `train.*`, `loss.*` and `model.*` keys. Every problem found is
    /// reported in one error. Relative manifest paths resolve against the
    /// config file's directory.
    pub fn from_kv(kv: &KvConfig) -> Result<Self> {
        let mut problems = Vec::new();
        let d = Self::default();
        let t = kv.section("train");
        macro_rules! field {
            ($key:literal, $default:expr) => {
                match t.get_or($key, $default) {
                    Ok(v) => v,
                    Err(e) => {
                        problems.push(e.to_string());
                        $default
                    }
                }
            };
        }
        let mut cfg = Self {
            learning_rate: field!("learning_rate", d.learning_rate),
            batch_size: field!("batch_size", d.batch_size),
            epochs: field!("epochs", d.epochs),
            optimizer: field!("optimizer", d.optimizer),
            beta1: field!("beta1", d.beta1),
            beta2: field!("beta2", d.beta2),
            eps: field!("eps", d.eps),
            seed: field!("seed", d.seed),
            log_every: field!("log_every", d.log_every),
            checkpoint_every: field!("checkpoint_every", d.checkpoint_every),
            ..d
        };
        match LossConfig::from_kv(&kv.section("loss")) {
            Ok(l) => cfg.loss = l,
            Err(e) => problems.push(e.to_string()),
        }
        match ModelConfig::from_kv(&kv.section("model")) {
            Ok(m) => cfg.model = m,
            Err(e) => problems.push(e.to_string()),
        }
        let base = kv.source().and_then(Path::parent).map(Path::to_path_buf);
        for item in t.get_list("mixture").unwrap_or_default() {
            match parse_mixture_entry(&item) {
                Ok(mut e) => {
                    if let (Some(b), true) = (&base, e.manifest.is_relative()) {
                        e.manifest = b.join(&e.manifest);
                    }
                    cfg.mixture.push(e);
                }
                Err(e) => problems.push(e.to_string()),
            }
        }
        if let Err(e) = cfg.validate() {
            problems.push(e.to_string());
        }
        if problems.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Config(problems.join("\n")))
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            bad.push(format!("train.learning_rate must be > 0, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            bad.push("train.batch_size must be >= 1".to_string());
        }
        if self.log_every == 0 {
            bad.push("train.log_every must be >= 1".to_string());
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            bad.push("train.beta1 and train.beta2 must lie in [0, 1)".to_string());
        }
        if !(self.eps > 0.0) {
            bad.push("train.eps must be > 0".to_string());
        }
        if let Err(e) = self.loss.validate() {
            bad.push(e.to_string());
        }
        if let Err(e) = self.model.validate() {
            bad.push(e.to_string());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad.join("\n")))
        }
    }

    /// Fully resolved snapshot with every key spelled out.
    pub fn to_kv(&self) -> KvConfig {
        let mut kv = KvConfig::new();
        kv.set("train.learning_rate", self.learning_rate);
        kv.set("train.batch_size", self.batch_size);
        kv.set("train.epochs", self.epochs);
        kv.set("train.optimizer", self.optimizer);
        kv.set("train.beta1", self.beta1);
        kv.set("train.beta2", self.beta2);
        kv.set("train.eps", self.eps);
        kv.set("train.seed", self.seed);
        kv.set("train.log_every", self.log_every);
        kv.set("train.checkpoint_every", self.checkpoint_every);
        let mix: Vec<String> = self
            .mixture
            .iter()
            .map(|e| format!("{}:{}", e.manifest.display(), e.domain))
            .collect();
        kv.set("train.mixture", mix.join(", "));
        self.loss.write_kv(&mut kv, "loss.");
        for (k, v) in self.model.to_kv().iter() {
            kv.set(format!("model.{k}"), v);
        }
        kv
    }
}

fn parse_mixture_entry(s: &str) -> Result<MixtureEntry> {
    let (path, domain) = s
        .rsplit_once(':')
        .ok_or_else(|| Error::Config(format!("mixture entry `{s}` must look like `path:DOMAIN`")))?;
    Ok(MixtureEntry {
        manifest: PathBuf::from(path.trim()),
        domain: domain.parse().map_err(|e: Error| Error::Config(e.to_string()))?,
    })
}

/// Reads every manifest of the mixture, checking each record's domain
/// against the declared one.
pub fn load_mixture(mixture: &[MixtureEntry]) -> Result<Vec<AttentionSample>> {
    if mixture.is_empty() {
        return Err(Error::Config("train.mixture lists no manifests".into()));
    }
    let mut all = Vec::new();
    for entry in mixture {
        let samples = load_corpus(&entry.manifest)?;
        if let Some(s) = samples.iter().find(|s| s.domain != entry.domain) {
            return Err(Error::Config(format!(
                "{}: sample {} has domain {} but the mixture declares {}",
                entry.manifest.display(),
                s.id,
                s.domain,
                entry.domain
            )));
        }
        all.extend(samples);
    }
    Ok(all)
}

/// One epoch: every sample index exactly once, uniformly shuffled, cut into
/// batches of `batch_size` with the last partial batch kept.
pub fn make_epoch_schedule<R: Rng>(samples: usize, batch_size: usize, rng: &mut R) -> Result<Vec<Vec<usize>>> {
    if samples == 0 {
        return Err(Error::Config("training corpus is empty".into()));
    }
    if batch_size == 0 {
        return Err(Error::Config("batch size must be >= 1".into()));
    }
    let mut order: Vec<usize> = (0..samples).collect();
    order.shuffle(rng);
    Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

/// Model plus optimizer state.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub model: Model,
    pub optimizer: Adam,
    pub loss: LossConfig,
    pub step: u64,
}

fn check_finite(task: Task, batch: usize, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite {
            task: task.name(),
            batch,
        })
    }
}

impl Trainer {
    pub fn new(model: Model, adam: AdamConfig, loss: LossConfig) -> Self {
        let optimizer = Adam::new(adam, &model.store);
        Self {
            model,
            optimizer,
            loss,
            step: 0,
        }
    }

    pub fn from_config(cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self::new(Model::new(cfg.model.clone(), cfg.seed)?, cfg.adam(), cfg.loss))
    }

    /// Loss and output gradients of `task` on the eligible rows of `batch`.
    /// `None` when no row is eligible.
    pub fn task_gradients(
        &self,
        task: Task,
        samples: &[&PreparedSample],
        batch: &ModelBatch,
        plan: Plan,
    ) -> Result<Option<(Term, OutputGrads, crate::model::ForwardCache)>> {
        let rows: Vec<usize> = (0..samples.len()).filter(|&i| task.eligible(samples[i])).collect();
        if rows.is_empty() {
            return Ok(None);
        }
        let sub = batch.select(&rows);
        let picked: Vec<&PreparedSample> = rows.iter().map(|&i| samples[i]).collect();
        let (out, cache) = self.model.forward(&sub, plan)?;
        let n = rows.len();
        let mut og = OutputGrads::default();
        let term = match task {
            Task::Angle => {
                let pred = angles(out.angle.as_ref().expect("angle output"));
                let truth: Vec<GazeAngle> = picked.iter().map(|s| s.labels.gaze.expect("eligible")).collect();
                let (loss, g) = angle_loss_grad(&pred, &truth).expect("nonempty");
                og.angle = Some(grad_tensor(&g));
                Term { loss, count: n }
            }
            Task::Heatmap => {
                let logits = out.heatmap_logits.expect("heatmap output");
                let classes = logits.item_len();
                let cells: Vec<usize> = picked.iter().map(|s| s.labels.target_cell.expect("eligible")).collect();
                let (loss, g) = heatmap_loss_grad(&logits.data, classes, &cells)?.expect("nonempty");
                og.heatmap_logits = Some(Tensor::from_vec(logits.shape, g)?);
                Term { loss, count: n }
            }
            Task::Fixation => {
                let logits = out.fixation_logit.expect("fixation output");
                let labels: Vec<bool> = picked.iter().map(|s| s.labels.inside.expect("eligible")).collect();
                let (loss, g) = fixation_loss_grad(&logits.data, &labels).expect("nonempty");
                og.fixation_logit = Some(Tensor::from_vec(logits.shape, g)?);
                Term { loss, count: n }
            }
            Task::Pnc => {
                let pred = angles(out.angle.as_ref().expect("angle output"));
                let heads: Vec<_> = picked.iter().map(|s| s.labels.head).collect();
                let targets: Vec<_> = picked.iter().map(|s| s.labels.target.expect("eligible")).collect();
                let Some((term, g)) = pnc_batch_grad(&pred, &heads, &targets, self.loss.pnc_epsilon) else {
                    return Ok(None);
                };
                og.angle = Some(grad_tensor(&g));
                term
            }
        };
        Ok(Some((term, og, cache)))
    }

    /// One masked sub-update. Parameters and batch-norm statistics outside
    /// the task's mask are left untouched.
    pub fn sub_update(&mut self, task: Task, samples: &[&PreparedSample], batch: &ModelBatch, batch_index: usize) -> Result<Option<Term>> {
        let w = task.weight(&self.loss);
        if w == 0.0 {
            return Ok(None);
        }
        let mask = task.mask().groups;
        let Some((term, mut og, cache)) = self.task_gradients(task, samples, batch, task.plan())? else {
            return Ok(None);
        };
        check_finite(task, batch_index, term.loss)?;
        for t in [&mut og.angle, &mut og.heatmap_logits, &mut og.fixation_logit].into_iter().flatten() {
            t.data.iter_mut().for_each(|v| *v *= w);
        }
        let grads = self.model.backward(&cache, &og, mask);
        for (_, g) in grads.iter() {
            if let Some(v) = g.iter().find(|v| !v.is_finite()) {
                check_finite(task, batch_index, *v)?;
            }
        }
        self.optimizer.step(&mut self.model.store, &grads, mask);
        self.model.apply_stats(&cache.stats);
        Ok(Some(term))
    }

    /// The four ordered sub-updates on one batch.
    pub fn training_step(&mut self, samples: &[&PreparedSample], batch_index: usize) -> Result<LossReport> {
        self.step_tasks(samples, batch_index, &Task::ORDER)
    }

    /// Runs only the listed tasks, in the given order.
    pub fn step_tasks(&mut self, samples: &[&PreparedSample], batch_index: usize, tasks: &[Task]) -> Result<LossReport> {
        let batch = PreparedSample::batch(samples);
        let mut parts = LossParts::default();
        for &task in tasks {
            let term = self.sub_update(task, samples, &batch, batch_index)?;
            match task {
                Task::Angle => parts.angle = term,
                Task::Heatmap => parts.heatmap = term,
                Task::Fixation => parts.fixation = term,
                Task::Pnc => parts.pnc = term,
            }
        }
        self.step += 1;
        Ok(combine(&parts, &self.loss))
    }
}

fn angles(t: &Tensor) -> Vec<GazeAngle> {
    (0..t.n()).map(|i| GazeAngle::new(t.item(i)[0], t.item(i)[1])).collect()
}

fn grad_tensor(g: &[[f64; 2]]) -> Tensor {
    Tensor::from_vec([g.len(), 2, 1, 1], g.iter().flatten().copied().collect()).expect("angle gradient shape")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub epoch: usize,
    pub batch: usize,
    #[serde(flatten)]
    pub report: LossReport,
}

#[derive(Debug, Clone, Default)]
pub struct FitOutcome {
    pub history: Vec<StepRecord>,
    /// Periodic checkpoints followed by the final one.
    pub checkpoints: Vec<PathBuf>,
    pub log: Option<PathBuf>,
}

/// Schedule RNG, kept on a different stream from model initialization.
pub fn schedule_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

/// Trains for `cfg.epochs` over `corpus`. With an output directory, writes
/// `train_log.jsonl`, periodic `checkpoints/step_XXXXXXXX.ckpt` and the final
/// `model.ckpt` (the untouched initial model when `epochs = 0`).
pub fn fit(trainer: &mut Trainer, corpus: &[PreparedSample], cfg: &TrainConfig, out: Option<&Path>) -> Result<FitOutcome> {
    cfg.validate()?;
    let mut rng = schedule_rng(cfg.seed);
    let mut outcome = FitOutcome::default();
    let snapshot = cfg.to_kv();
    let mut log = match out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let p = dir.join("train_log.jsonl");
            let f = File::create(&p).map_err(|e| Error::io(&p, e))?;
            outcome.log = Some(p);
            Some(BufWriter::new(f))
        }
        None => None,
    };
    let schedules = (0..cfg.epochs)
        .map(|_| make_epoch_schedule(corpus.len(), cfg.batch_size, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let total: usize = schedules.iter().map(Vec::len).sum();
    let mut done = 0;
    for (epoch, schedule) in schedules.iter().enumerate() {
        for (bi, rows) in schedule.iter().enumerate() {
            let samples: Vec<&PreparedSample> = rows.iter().map(|&i| &corpus[i]).collect();
            let report = trainer.training_step(&samples, done)?;
            done += 1;
            let rec = StepRecord {
                step: trainer.step,
                epoch,
                batch: bi,
                report,
            };
            if done % cfg.log_every == 0 || done == total {
                log::info!(
                    "step {} epoch {epoch}: angle {:.4} heatmap {:.4} fixation {:.4} pnc {:.4}",
                    rec.step,
                    report.angle_loss,
                    report.heatmap_loss,
                    report.fixation_loss,
                    report.pnc_loss
                );
                if let (Some(w), Some(p)) = (log.as_mut(), outcome.log.as_ref()) {
                    let line = serde_json::to_string(&rec).expect("record serializes");
                    writeln!(w, "{line}").map_err(|e| Error::io(p, e))?;
                }
            }
            outcome.history.push(rec);
            if let (Some(dir), true) = (out, cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0) {
                let ckdir = dir.join("checkpoints");
                std::fs::create_dir_all(&ckdir).map_err(|e| Error::io(&ckdir, e))?;
                let p = ckdir.join(format!("step_{:08}.ckpt", trainer.step));
                Checkpoint::from_model(&trainer.model, trainer.step, Some(&snapshot)).save(&p)?;
                outcome.checkpoints.push(p);
            }
        }
    }
    if let (Some(w), Some(p)) = (log.as_mut(), outcome.log.as_ref()) {
        w.flush().map_err(|e| Error::io(p, e))?;
    }
    if let Some(dir) = out {
        let p = dir.join("model.ckpt");
        Checkpoint::from_model(&trainer.model, trainer.step, Some(&snapshot)).save(&p)?;
        outcome.checkpoints.push(p);
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_corpus, GeneratorConfig};

    fn small_model() -> ModelConfig {
        ModelConfig {
            input_side: 48,
            ..ModelConfig::toy()
        }
    }

    fn corpus(domain: Domain, n: usize, seed: u64) -> Vec<PreparedSample> {
        let mut g = GeneratorConfig::for_domain(domain, seed, n);
        g.canvas_side = 64;
        PreparedSample::prepare_all(&generate_corpus(&g).unwrap(), &small_model()).unwrap()
    }

    fn trainer() -> Trainer {
        Trainer::new(Model::new(small_model(), 1).unwrap(), AdamConfig::default(), LossConfig::default())
    }

    fn group_snapshot(m: &Model, g: Group) -> Vec<Vec<u64>> {
        m.store
            .params
            .iter()
            .chain(&m.store.buffers)
            .filter(|p| p.group == g)
            .map(|p| p.data.iter().map(|v| v.to_bits()).collect())
            .collect()
    }

    #[test]
    fn schedule_sizes_and_determinism() {
        let mut a = ChaCha8Rng::seed_from_u64(3);
        let s = make_epoch_schedule(100, 36, &mut a).unwrap();
        assert_eq!(s.iter().map(Vec::len).collect::<Vec<_>>(), vec![36, 36, 28]);
        let mut flat: Vec<usize> = s.concat();
        flat.sort_unstable();
        assert_eq!(flat, (0..100).collect::<Vec<_>>());
        let mut b = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(make_epoch_schedule(100, 36, &mut b).unwrap(), s);
        assert!(matches!(make_epoch_schedule(0, 36, &mut b), Err(Error::Config(_))));
    }

    #[test]
    fn domain_mix_follows_corpus_proportions() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        // 500 GF, 300 ED, 200 SH; 36-sample batches over many epochs.
        let domains: Vec<usize> = [(0, 500), (1, 300), (2, 200)]
            .iter()
            .flat_map(|&(d, n)| std::iter::repeat(d).take(n))
            .collect();
        let p: [f64; 3] = [0.5, 0.3, 0.2];
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut stat = 0.0;
        let mut batches = 0;
        while batches < 1000 {
            for b in make_epoch_schedule(domains.len(), 36, &mut rng).unwrap() {
                if batches == 1000 || b.len() != 36 {
                    continue;
                }
                let mut counts = [0.0f64; 3];
                b.iter().for_each(|&i| counts[domains[i]] += 1.0);
                for k in 0..3 {
                    let e = 36.0 * p[k];
                    stat += (counts[k] - e).powi(2) / e;
                }
                batches += 1;
            }
        }
        let dist = ChiSquared::new(2.0 * 1000.0).unwrap();
        let pval = 1.0 - dist.cdf(stat);
        assert!(pval > 0.01, "chi2 {stat}, p {pval}");
    }

    #[test]
    fn config_defaults_and_parsing() {
        let d = TrainConfig::default();
        assert_eq!((d.learning_rate, d.batch_size, d.epochs), (2.5e-4, 36, 12));
        let kv = KvConfig::parse(
            "train.learning_rate = 1e-3\ntrain.mixture = a/m.jsonl:GF, b/m.jsonl:ED-like\nloss.w_pnc = 0\n",
            Path::new("x"),
        )
        .unwrap();
        let cfg = TrainConfig::from_kv(&kv).unwrap();
        assert_eq!(cfg.learning_rate, 1e-3);
        assert_eq!(cfg.loss.w_pnc, 0.0);
        assert_eq!(cfg.mixture[1].domain, Domain::EyediapLike);
        let back = TrainConfig::from_kv(&cfg.to_kv()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn config_errors_are_listed_together() {
        let kv = KvConfig::parse(
            "train.learning_rate = -1\ntrain.batch_size = 0\ntrain.mixture = nodomain\n",
            Path::new("x"),
        )
        .unwrap();
        let msg = TrainConfig::from_kv(&kv).unwrap_err().to_string();
        assert!(msg.contains("learning_rate") && msg.contains("batch_size") && msg.contains("nodomain"), "{msg}");
    }

    #[test]
    fn angle_only_batch_freezes_other_groups() {
        let data = corpus(Domain::EyediapLike, 6, 1);
        let mut t = trainer();
        let before: Vec<_> = Group::ALL.iter().map(|&g| group_snapshot(&t.model, g)).collect();
        let refs: Vec<&PreparedSample> = data.iter().collect();
        let r = t.training_step(&refs, 0).unwrap();
        assert_eq!((r.angle_count, r.heatmap_count, r.fixation_count, r.pnc_count), (6, 0, 0, 0));
        for (g, b) in Group::ALL.iter().zip(&before) {
            let same = group_snapshot(&t.model, *g) == *b;
            match g {
                Group::SceneBackbone | Group::HeatmapHead | Group::FixationHead => assert!(same, "{g}"),
                Group::FaceBackbone | Group::AngleHead => assert!(!same, "{g}"),
            }
        }
    }

    #[test]
    fn outside_only_batch_changes_only_fixation_head() {
        let data: Vec<PreparedSample> = corpus(Domain::GazeFollowLike, 60, 2)
            .into_iter()
            .filter(|s| s.labels.inside == Some(false))
            .collect();
        assert!(!data.is_empty());
        let mut t = trainer();
        let before: Vec<_> = Group::ALL.iter().map(|&g| group_snapshot(&t.model, g)).collect();
        let refs: Vec<&PreparedSample> = data.iter().collect();
        t.training_step(&refs, 0).unwrap();
        for (g, b) in Group::ALL.iter().zip(&before) {
            assert_eq!(group_snapshot(&t.model, *g) == *b, *g != Group::FixationHead, "{g}");
        }
    }

    #[test]
    fn counts_match_eligibility() {
        let mut data = corpus(Domain::GazeFollowLike, 20, 3);
        data.extend(corpus(Domain::SynHeadLike, 7, 4));
        let refs: Vec<&PreparedSample> = data.iter().collect();
        let inside = data.iter().filter(|s| s.labels.inside == Some(true)).count();
        let r = trainer().training_step(&refs, 0).unwrap();
        assert_eq!(r.angle_count, 7);
        assert_eq!(r.heatmap_count, inside);
        assert_eq!(r.pnc_count, inside);
        assert_eq!(r.fixation_count, 20);
    }

    #[test]
    fn zero_epochs_writes_initial_checkpoint() {
        let dir = tempfile::tempdir().unwrap();
        let data = corpus(Domain::GazeFollowLike, 4, 5);
        let cfg = TrainConfig {
            epochs: 0,
            model: small_model(),
            ..TrainConfig::default()
        };
        let mut t = Trainer::from_config(&cfg).unwrap();
        let before = t.model.store.clone();
        let out = fit(&mut t, &data, &cfg, Some(dir.path())).unwrap();
        assert_eq!(out.checkpoints.len(), 1);
        let back = Checkpoint::load(&out.checkpoints[0]).unwrap().into_model().unwrap();
        assert_eq!(back.store, before);
    }

    #[test]
    fn short_run_logs_checkpoints_and_reloads_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let data = corpus(Domain::GazeFollowLike, 20, 6);
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 8,
            checkpoint_every: 2,
            model: small_model(),
            ..TrainConfig::default()
        };
        let mut t = Trainer::from_config(&cfg).unwrap();
        let out = fit(&mut t, &data, &cfg, Some(dir.path())).unwrap();
        assert_eq!(out.history.len(), 6);
        assert_eq!(out.checkpoints.len(), 4);
        let lines = std::fs::read_to_string(out.log.unwrap()).unwrap();
        let first: StepRecord = serde_json::from_str(lines.lines().next().unwrap()).unwrap();
        assert_eq!(first.step, 1);
        let ck = Checkpoint::load(out.checkpoints.last().unwrap()).unwrap();
        assert_eq!(ck.step, 6);
        let reloaded = ck.into_model().unwrap();
        let refs: Vec<&PreparedSample> = data.iter().collect();
        let b = PreparedSample::batch(&refs);
        let a = t.model.predict(&b).unwrap();
        let c = reloaded.predict(&b).unwrap();
        assert_eq!(a, c);
    }
}
