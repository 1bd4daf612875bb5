//! Command-line front end: data generation, training, evaluation,
//! single-image inference and overlay plots.

mod plot;
mod run_manifest;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use image::RgbImage;

pub use plot::{arrow_vector, render_overlay, ARROW_SCALE};
pub use run_manifest::{sha256_file, RunManifest};

use crate::checkpoint::Checkpoint;
use crate::config::KvConfig;
use crate::data::{
    corpus_stats, generate_corpus, load_corpus, write_corpus, AttentionSample, Domain, FaceBox, GeneratorConfig,
    PreparedSample,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate_estimates, predict_all, Baseline, EvalConfig};
use crate::model::{postprocess_with, AttentionEstimate, Model, ModelBatch};
use crate::train::{fit, load_mixture, TrainConfig, Trainer};

pub const RUN_MANIFEST: &str = "run_manifest.json";

#[derive(Debug, Parser)]
#[command(name = "gazeatt", version, about = "Gaze angle, saliency and fixation-likelihood estimation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus: images, manifest and in/out sidecar.
    GenData(GenDataArgs),
    /// Train a model from a config file.
    Train(TrainArgs),
    /// Score a checkpoint on a manifest.
    Eval(EvalArgs),
    /// Run one image through a checkpoint and print the estimate as JSON.
    Infer(InferArgs),
    /// Write overlay PNGs for the first samples of a manifest.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Optional `generator.*` overrides.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// GF, ED, SH or MMDB (a `-like` suffix is accepted).
    #[arg(long)]
    pub domain: String,
    #[arg(long, default_value_t = 1000)]
    pub count: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "2,5")]
    pub grids: Vec<usize>,
    #[arg(long, default_value = "none")]
    pub baseline: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write per-image results as JSON lines.
    #[arg(long)]
    pub details: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.5)]
    pub gating_threshold: f64,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub image: PathBuf,
    /// Normalized `x,y,w,h`.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub face_bbox: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = 8)]
    pub n: usize,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData(a) => cmd_gen_data(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Infer(a) => {
            let v = cmd_infer(&a)?;
            println!("{}", serde_json::to_string(&v).expect("json"));
            Ok(())
        }
        Command::Plot(a) => cmd_plot(&a),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn kv_map(kv: &KvConfig) -> BTreeMap<String, String> {
    kv.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

fn pair<T: std::str::FromStr>(kv: &KvConfig, key: &str, default: (T, T)) -> Result<(T, T)> {
    match kv.get_list(key) {
        None => Ok(default),
        Some(items) if items.len() == 2 => {
            let p = |s: &str| {
                s.parse::<T>()
                    .map_err(|_| Error::Config(format!("`generator.{key}` has an invalid value `{s}`")))
            };
            Ok((p(&items[0])?, p(&items[1])?))
        }
        Some(_) => Err(Error::Config(format!("`generator.{key}` must be two values `lo, hi`"))),
    }
}

/// Generator settings for a domain with `generator.*` overrides applied.
pub fn generator_config(domain: Domain, seed: u64, count: usize, kv: &KvConfig) -> Result<GeneratorConfig> {
    let g = kv.section("generator");
    let d = GeneratorConfig::for_domain(domain, seed, count);
    let cfg = GeneratorConfig {
        p_inside: g.get_or("p_inside", d.p_inside)?,
        canvas_side: g.get_or("canvas_side", d.canvas_side)?,
        distractors: pair(&g, "distractors", d.distractors)?,
        target_distance: pair(&g, "target_distance", d.target_distance)?,
        yaw_range_deg: g.get_or("yaw_range_deg", d.yaw_range_deg)?,
        pitch_range_deg: g.get_or("pitch_range_deg", d.pitch_range_deg)?,
        head_radius: pair(&g, "head_radius", d.head_radius)?,
        min_projection: g.get_or("min_projection", d.min_projection)?,
        ..d
    };
    cfg.validate()?;
    Ok(cfg)
}

fn generator_kv(g: &GeneratorConfig) -> KvConfig {
    let mut kv = KvConfig::new();
    kv.set("generator.domain", g.domain);
    kv.set("generator.seed", g.seed);
    kv.set("generator.count", g.count);
    kv.set("generator.p_inside", g.p_inside);
    kv.set("generator.canvas_side", g.canvas_side);
    kv.set("generator.distractors", format!("{},{}", g.distractors.0, g.distractors.1));
    kv.set("generator.target_distance", format!("{},{}", g.target_distance.0, g.target_distance.1));
    kv.set("generator.yaw_range_deg", g.yaw_range_deg);
    kv.set("generator.pitch_range_deg", g.pitch_range_deg);
    kv.set("generator.head_radius", format!("{},{}", g.head_radius.0, g.head_radius.1));
    kv.set("generator.min_projection", g.min_projection);
    kv
}

pub fn cmd_gen_data(a: &GenDataArgs) -> Result<()> {
    let domain: Domain = a.domain.parse()?;
    let kv = match &a.config {
        Some(p) => KvConfig::load(p)?,
        None => KvConfig::new(),
    };
    let cfg = generator_config(domain, a.seed, a.count, &kv)?;
    create_dir(&a.out)?;
    let samples = generate_corpus(&cfg)?;
    let files = write_corpus(&a.out, &samples)?;
    let stats = corpus_stats(&samples);
    println!("{}", serde_json::to_string_pretty(&stats).expect("json"));
    let mut m = RunManifest::new("gen-data", &a.out);
    m.config_path = a.config.clone();
    m.config = kv_map(&generator_kv(&cfg));
    m.seed = Some(a.seed);
    m.add_artifacts(&a.out, &files)?;
    m.write_and_verify(&a.out.join(RUN_MANIFEST))
}

pub fn cmd_train(a: &TrainArgs) -> Result<()> {
    let kv = KvConfig::load(&a.config)?;
    let cfg = TrainConfig::from_kv(&kv)?;
    let missing: Vec<String> = cfg
        .mixture
        .iter()
        .filter(|e| !e.manifest.is_file())
        .map(|e| format!("manifest not found: {}", e.manifest.display()))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Config(missing.join("\n")));
    }
    create_dir(&a.out)?;
    let snapshot = cfg.to_kv();
    let resolved = a.out.join("config.resolved.txt");
    std::fs::write(&resolved, snapshot.to_text()).map_err(|e| Error::io(&resolved, e))?;
    let samples = if cfg.epochs == 0 && cfg.mixture.is_empty() {
        Vec::new()
    } else {
        load_mixture(&cfg.mixture)?
    };
    let prepared = PreparedSample::prepare_all(&samples, &cfg.model)?;
    let mut trainer = Trainer::from_config(&cfg)?;
    log::info!(
        "training {} parameters on {} samples for {} epochs",
        trainer.model.num_parameters(),
        prepared.len(),
        cfg.epochs
    );
    let outcome = fit(&mut trainer, &prepared, &cfg, Some(&a.out))?;
    let mut files = vec![resolved];
    files.extend(outcome.log);
    files.extend(outcome.checkpoints);
    let mut m = RunManifest::new("train", &a.out);
    m.config_path = Some(a.config.clone());
    m.config = kv_map(&snapshot);
    m.seed = Some(cfg.seed);
    m.add_artifacts(&a.out, &files)?;
    m.write_and_verify(&a.out.join(RUN_MANIFEST))
}

fn load_prepared(checkpoint: &Path, manifest: &Path) -> Result<(crate::model::Model, Vec<AttentionSample>, Vec<PreparedSample>)> {
    let model = Checkpoint::load(checkpoint)?.into_model()?;
    let samples = load_corpus(manifest)?;
    let prepared = PreparedSample::prepare_all(&samples, model.config())?;
    Ok((model, samples, prepared))
}

pub fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let cfg = EvalConfig {
        grid_sizes: a.grids.clone(),
        baseline: a.baseline.parse::<Baseline>()?,
        seed: a.seed,
        gating_threshold: a.gating_threshold,
        ..EvalConfig::default()
    };
    cfg.validate()?;
    let (model, _, prepared) = load_prepared(&a.checkpoint, &a.manifest)?;
    if let Some(&n) = cfg.grid_sizes.iter().find(|&&n| n > model.config().heatmap_grid) {
        return Err(Error::Config(format!(
            "grid {n} exceeds the model's {0}x{0} heatmap",
            model.config().heatmap_grid
        )));
    }
    let est = predict_all(&model, &prepared, &cfg)?;
    let (report, details) = evaluate_estimates(&est, &prepared, &cfg)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    std::fs::write(&a.out, report.to_json()).map_err(|e| Error::io(&a.out, e))?;
    let mut files = vec![a.out.clone()];
    if let Some(p) = &a.details {
        let text: String = details
            .iter()
            .map(|d| serde_json::to_string(d).expect("json") + "\n")
            .collect();
        std::fs::write(p, text).map_err(|e| Error::io(p, e))?;
        files.push(p.clone());
    }
    let base = a.out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut m = RunManifest::new("eval", &a.out);
    let mut kv = KvConfig::new();
    kv.set("eval.checkpoint", a.checkpoint.display());
    kv.set("eval.manifest", a.manifest.display());
    kv.set("eval.grids", a.grids.iter().map(|g| g.to_string()).collect::<Vec<_>>().join(","));
    kv.set("eval.baseline", cfg.baseline);
    kv.set("eval.gating_threshold", cfg.gating_threshold);
    m.config = kv_map(&kv);
    m.seed = Some(a.seed);
    m.add_artifacts(base, &files)?;
    let stem = a.out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    m.write_and_verify(&base.join(format!("{stem}.run.json")))
}

/// Runs the model on one scene with a normalized face box.
pub fn infer_image(model: &Model, scene: &RgbImage, bbox: &FaceBox) -> Result<AttentionEstimate> {
    bbox.validate()?;
    let mc = model.config();
    let raw = model.predict(&chw_batch(scene, bbox, mc)?)?;
    Ok(postprocess_with(&raw[0], mc.heatmap_grid, mc.combine_mode, mc.gating_threshold))
}

fn chw_batch(scene: &RgbImage, bbox: &FaceBox, cfg: &crate::model::ModelConfig) -> Result<ModelBatch> {
    let sample = AttentionSample {
        id: "input".into(),
        scene: scene.clone(),
        face_bbox: *bbox,
        gaze: None,
        target: None,
        inside: Some(false),
        domain: Domain::MmdbLike,
        geometry: None,
    };
    let p = PreparedSample::new(&sample, cfg)?;
    Ok(PreparedSample::batch(&[&p]))
}

pub fn cmd_infer(a: &InferArgs) -> Result<serde_json::Value> {
    let [x, y, w, h] = <[f64; 4]>::try_from(a.face_bbox.as_slice())
        .map_err(|_| Error::Input("--face-bbox needs four values x,y,w,h".into()))?;
    let bbox = FaceBox::new(x, y, w, h);
    bbox.validate()?;
    let model = Checkpoint::load(&a.checkpoint)?.into_model()?;
    let scene = image::open(&a.image)
        .map_err(|e| Error::Image {
            path: a.image.clone(),
            source: e,
        })?
        .to_rgb8();
    let est = infer_image(&model, &scene, &bbox)?;
    Ok(serde_json::json!({
        "yaw_deg": est.angle.yaw_deg(),
        "pitch_deg": est.angle.pitch_deg(),
        "likelihood": est.fixation_likelihood,
        "heatmap": est.heatmap.probs,
        "fixation_map": est.fixation_map,
        "argmax_cell": est.argmax_cell(),
        "grid": model.config().heatmap_grid,
    }))
}

pub fn cmd_plot(a: &PlotArgs) -> Result<()> {
    let (model, samples, prepared) = load_prepared(&a.checkpoint, &a.manifest)?;
    let n = a.n.min(samples.len());
    let cfg = EvalConfig {
        heatmap_combine: crate::model::CombineMode::Weighting,
        ..EvalConfig::default()
    };
    let est = predict_all(&model, &prepared[..n], &cfg)?;
    create_dir(&a.out)?;
    let mut files = Vec::new();
    let mut index = String::new();
    for (s, e) in samples.iter().zip(&est) {
        let img = render_overlay(&s.scene, e, s.head());
        let p = a.out.join(format!("{}.png", s.id));
        img.save(&p).map_err(|err| Error::Image {
            path: p.clone(),
            source: err,
        })?;
        let rec = serde_json::json!({
            "file": format!("{}.png", s.id),
            "yaw_deg": e.angle.yaw_deg(),
            "pitch_deg": e.angle.pitch_deg(),
            "likelihood": e.fixation_likelihood,
            "head": [s.head().x, s.head().y],
            "arrow": arrow_vector(e),
        });
        index.push_str(&serde_json::to_string(&rec).expect("json"));
        index.push('\n');
        files.push(p);
    }
    let ip = a.out.join("overlays.jsonl");
    std::fs::write(&ip, index).map_err(|e| Error::io(&ip, e))?;
    files.push(ip);
    let mut m = RunManifest::new("plot", &a.out);
    let mut kv = KvConfig::new();
    kv.set("plot.checkpoint", a.checkpoint.display());
    kv.set("plot.manifest", a.manifest.display());
    kv.set("plot.n", a.n);
    m.config = kv_map(&kv);
    m.add_artifacts(&a.out, &files)?;
    m.write_and_verify(&a.out.join(RUN_MANIFEST))
}

/// Sizes the global worker pool from `GAZEATT_THREADS` (default 1).
pub fn init_threads() -> Result<usize> {
    let n = match std::env::var("GAZEATT_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| Error::Config(format!("GAZEATT_THREADS must be a positive integer, got `{v}`")))?,
        Err(_) => 1,
    };
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(n)
}
