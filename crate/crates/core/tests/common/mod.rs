#![allow(dead_code)]

use gazeatt::data::{generate_corpus, Domain, GeneratorConfig, PreparedSample};
use gazeatt::losses::LossConfig;
use gazeatt::model::{Model, ModelConfig, Plan};
use gazeatt::nn::{Group, GroupSet};
use gazeatt::optim::AdamConfig;
use gazeatt::train::{Task, Trainer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn model_config(side: usize) -> ModelConfig {
    ModelConfig {
        input_side: side,
        ..ModelConfig::toy()
    }
}

pub fn corpus(domain: Domain, n: usize, seed: u64, p_inside: Option<f64>, cfg: &ModelConfig) -> Vec<PreparedSample> {
    let mut g = GeneratorConfig::for_domain(domain, seed, n);
    g.canvas_side = 96;
    if let Some(p) = p_inside {
        g.p_inside = p;
    }
    PreparedSample::prepare_all(&generate_corpus(&g).unwrap(), cfg).unwrap()
}

/// Batch with every label flavour: inside and outside GF samples plus
/// angle-labelled ED and SH samples.
pub fn mixed_batch(seed: u64, cfg: &ModelConfig) -> Vec<PreparedSample> {
    let mut v = corpus(Domain::GazeFollowLike, 6, seed, Some(1.0), cfg);
    v.extend(corpus(Domain::GazeFollowLike, 2, seed + 1000, Some(0.0), cfg));
    v.extend(corpus(Domain::EyediapLike, 2, seed + 2000, None, cfg));
    v.extend(corpus(Domain::SynHeadLike, 2, seed + 3000, None, cfg));
    v
}

pub fn trainer(cfg: &ModelConfig, seed: u64) -> Trainer {
    Trainer::new(Model::new(cfg.clone(), seed).unwrap(), AdamConfig::default(), LossConfig::default())
}

fn plan(task: Task, bn_train: bool) -> Plan {
    Plan {
        angle: matches!(task, Task::Angle | Task::Pnc),
        heatmap: task == Task::Heatmap,
        fixation: task == Task::Fixation,
        train: if bn_train { task.mask().groups } else { GroupSet::EMPTY },
    }
}

pub fn task_loss(t: &Trainer, task: Task, samples: &[&PreparedSample], bn_train: bool) -> f64 {
    let batch = PreparedSample::batch(samples);
    t.task_gradients(task, samples, &batch, plan(task, bn_train)).unwrap().unwrap().0.loss
}

/// Equally spaced loss samples across the stencil. On a smooth piece the
/// slopes between neighbours change linearly; any ReLU or pooling switch
/// inside the stencil breaks that.
fn has_kink(f: &[f64], step: f64) -> bool {
    let slopes: Vec<f64> = f.windows(2).map(|w| (w[1] - w[0]) / step).collect();
    let jumps: Vec<f64> = slopes.windows(2).map(|w| w[1] - w[0]).collect();
    let peak = slopes.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    jumps.windows(2).any(|w| (w[1] - w[0]).abs() > 1e-6 * peak + 1e-9)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct GradCheck {
    /// Vector relative error over the checked coordinates.
    pub rel_error: f64,
    pub checked: usize,
    /// Coordinates whose stencil crossed a ReLU kink.
    pub skipped: usize,
}

/// Compares the analytic gradient of `task`'s loss, taken through the whole
/// network, with central differences of step `h` on sampled coordinates of
/// every parameter group the loss reaches. With `bn_train` off, batch norm
/// uses running statistics.
pub fn grad_check(task: Task, seed: u64, h: f64, per_group: usize, bn_train: bool) -> GradCheck {
    let cfg = model_config(64);
    let data = mixed_batch(seed, &cfg);
    let samples: Vec<&PreparedSample> = data.iter().collect();
    let mut t = trainer(&cfg, seed);
    let batch = PreparedSample::batch(&samples);
    let (_, og, cache) = t.task_gradients(task, &samples, &batch, plan(task, bn_train)).unwrap().unwrap();
    let grads = t.model.backward(&cache, &og, GroupSet::ALL);

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut coords = Vec::new();
    for g in Group::ALL {
        let ids: Vec<usize> = t
            .model
            .store
            .params
            .iter()
            .enumerate()
            .filter(|(i, p)| p.group == g && grads.get(gazeatt::nn::ParamId(*i)).is_some())
            .map(|(i, _)| i)
            .collect();
        if ids.is_empty() {
            continue;
        }
        for k in 0..per_group {
            let id = ids[rng.gen_range(0..ids.len())];
            let gv = grads.get(gazeatt::nn::ParamId(id)).unwrap();
            let j = if k % 2 == 0 {
                (0..gv.len()).max_by(|&a, &b| gv[a].abs().total_cmp(&gv[b].abs())).unwrap()
            } else {
                rng.gen_range(0..gv.len())
            };
            coords.push((id, j, gv[j]));
        }
    }

    let mut eval_at = |id: usize, j: usize, delta: f64| {
        let orig = t.model.store.params[id].data[j];
        t.model.store.params[id].data[j] = orig + delta;
        let v = task_loss(&t, task, &samples, bn_train);
        t.model.store.params[id].data[j] = orig;
        v
    };
    let (mut diff2, mut norm_a, mut norm_n) = (0.0, 0.0, 0.0);
    let mut out = GradCheck::default();
    for (id, j, analytic) in coords {
        let f: Vec<f64> = (-4..=4).map(|k| eval_at(id, j, k as f64 * h / 4.0)).collect();
        let fd = (f[8] - f[0]) / (2.0 * h);
        if h >= 1e-4 && has_kink(&f, h / 4.0) {
            out.skipped += 1;
            continue;
        }
        out.checked += 1;
        diff2 += (analytic - fd).powi(2);
        norm_a += analytic * analytic;
        norm_n += fd * fd;
    }
    let denom = norm_a.sqrt().max(norm_n.sqrt()).max(1e-12);
    out.rel_error = diff2.sqrt() / denom;
    out
}

fn snapshot(m: &Model, g: Group) -> Vec<Vec<u64>> {
    m.store
        .params
        .iter()
        .chain(&m.store.buffers)
        .filter(|p| p.group == g)
        .map(|p| p.data.iter().map(|v| v.to_bits()).collect())
        .collect()
}

/// Runs `task` alone for `steps` optimizer steps on one batch. Returns the
/// groups outside the mask that changed (must be empty) and the groups inside
/// it that changed.
pub fn freeze_check(task: Task, steps: usize, seed: u64) -> (Vec<Group>, Vec<Group>) {
    let cfg = model_config(48);
    let data = mixed_batch(seed, &cfg);
    let samples: Vec<&PreparedSample> = data.iter().collect();
    let mut t = trainer(&cfg, seed);
    let before: Vec<_> = Group::ALL.iter().map(|&g| snapshot(&t.model, g)).collect();
    for i in 0..steps {
        t.step_tasks(&samples, i, &[task]).unwrap();
    }
    let mask = task.mask().groups;
    let (mut leaked, mut moved) = (Vec::new(), Vec::new());
    for (g, b) in Group::ALL.iter().zip(&before) {
        let changed = snapshot(&t.model, *g) != *b;
        if changed && !mask.contains(*g) {
            leaked.push(*g);
        }
        if changed && mask.contains(*g) {
            moved.push(*g);
        }
    }
    (leaked, moved)
}
