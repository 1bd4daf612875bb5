use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gazeatt::geometry::{angles_to_vector, project_gaze, GazeAngle};
use serde_json::Value;

fn gazeatt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gazeatt"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("run gazeatt")
}

fn ok(args: &[&str]) -> Output {
    let out = gazeatt(args);
    assert!(
        out.status.success(),
        "gazeatt {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen(dir: &Path, domain: &str, seed: u64, count: usize) -> PathBuf {
    let out = dir.join(format!("{domain}_{seed}"));
    ok(&[
        "gen-data",
        "--out",
        s(&out),
        "--domain",
        domain,
        "--seed",
        &seed.to_string(),
        "--count",
        &count.to_string(),
    ]);
    out
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn write_config(dir: &Path, mixture: &str, epochs: usize) -> PathBuf {
    let p = dir.join("train.cfg");
    std::fs::write(
        &p,
        format!(
            "train.epochs = {epochs}\ntrain.batch_size = 8\ntrain.learning_rate = 2.5e-4\ntrain.seed = 4\n\
             train.mixture = {mixture}\nmodel.input_side = 48\n"
        ),
    )
    .unwrap();
    p
}

#[test]
fn gen_data_writes_images_manifest_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let gf = gen(dir.path(), "GF", 1, 6);
    let manifest = std::fs::read_to_string(gf.join("manifest.jsonl")).unwrap();
    assert_eq!(manifest.lines().count(), 6);
    assert_eq!(std::fs::read_dir(gf.join("images")).unwrap().count(), 6);
    let inout = std::fs::read_to_string(gf.join("inout.txt")).unwrap();
    assert_eq!(inout.lines().count(), 6);
    assert!(inout.lines().all(|l| l.ends_with(" 0") || l.ends_with(" 1")));

    let ed = gen(dir.path(), "ED-like", 1, 4);
    assert!(ed.join("manifest.jsonl").is_file());
    assert!(!ed.join("inout.txt").exists());

    let again = dir.path().join("again");
    ok(&["gen-data", "--out", s(&again), "--domain", "GF", "--seed", "1", "--count", "6"]);
    let a = read_json(&gf.join("run_manifest.json"));
    let b = read_json(&again.join("run_manifest.json"));
    assert_eq!(a["artifacts"], b["artifacts"]);
    assert_eq!(a["artifacts"].as_object().unwrap().len(), 8);
}

#[test]
fn unknown_domain_and_missing_manifest_fail() {
    let dir = tempfile::tempdir().unwrap();
    let out = gazeatt(&["gen-data", "--out", s(dir.path()), "--domain", "XX"]);
    assert!(!out.status.success());

    let cfg = write_config(dir.path(), "nowhere/manifest.jsonl:GF", 1);
    let out = gazeatt(&["train", "--config", s(&cfg), "--out", s(&dir.path().join("run"))]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("manifest not found"), "{err}");
    assert!(err.contains("nowhere"), "{err}");
}

#[test]
fn train_eval_infer_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let gf = gen(dir.path(), "GF", 2, 10);
    let ed = gen(dir.path(), "ED", 3, 6);
    let mixture = format!("{}:GF, {}:ED", s(&gf.join("manifest.jsonl")), s(&ed.join("manifest.jsonl")));
    let cfg = write_config(dir.path(), &mixture, 1);
    let run = dir.path().join("run");
    ok(&["train", "--config", s(&cfg), "--out", s(&run)]);
    let ckpt = run.join("model.ckpt");
    assert!(ckpt.is_file());
    let log = std::fs::read_to_string(run.join("train_log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 2);
    let rm = read_json(&run.join("run_manifest.json"));
    assert!(rm["artifacts"].as_object().unwrap().contains_key("model.ckpt"));

    let report = dir.path().join("reports/ed.json");
    ok(&["eval", "--checkpoint", s(&ckpt), "--manifest", s(&ed.join("manifest.jsonl")), "--out", s(&report)]);
    let r = read_json(&report);
    assert!(r.get("auc").is_none());
    assert!(r["mean_angular_error_deg"].as_f64().unwrap() >= 0.0);
    assert!(dir.path().join("reports/ed.run.json").is_file());

    let report = dir.path().join("reports/gf.json");
    ok(&[
        "eval",
        "--checkpoint",
        s(&ckpt),
        "--manifest",
        s(&gf.join("manifest.jsonl")),
        "--out",
        s(&report),
        "--baseline",
        "center",
    ]);
    let r = read_json(&report);
    assert_eq!(r["baseline"], "center");
    assert!(r["auc"].as_f64().is_some());
    assert!(r.get("mean_angular_error_deg").is_none());

    let too_fine = gazeatt(&[
        "eval",
        "--checkpoint",
        s(&ckpt),
        "--manifest",
        s(&gf.join("manifest.jsonl")),
        "--out",
        s(&dir.path().join("x.json")),
        "--grids",
        "11",
    ]);
    assert!(!too_fine.status.success());

    let first = std::fs::read_to_string(gf.join("manifest.jsonl")).unwrap();
    let rec: Value = serde_json::from_str(first.lines().next().unwrap()).unwrap();
    let image = gf.join(rec["scene"].as_str().unwrap());
    let bbox: Vec<String> = rec["face_bbox"].as_array().unwrap().iter().map(|v| v.to_string()).collect();
    let out = ok(&["infer", "--checkpoint", s(&ckpt), "--image", s(&image), "--face-bbox", &bbox.join(",")]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    for key in ["yaw_deg", "pitch_deg", "likelihood", "heatmap", "fixation_map", "argmax_cell"] {
        assert!(v.get(key).is_some(), "infer output lacks {key}");
    }
    assert_eq!(v["heatmap"].as_array().unwrap().len(), 100);
    let bad = gazeatt(&["infer", "--checkpoint", s(&ckpt), "--image", s(&image), "--face-bbox", "0.9,0.9,0.5,0.5"]);
    assert!(!bad.status.success());

    let plots = dir.path().join("plots");
    ok(&["plot", "--checkpoint", s(&ckpt), "--manifest", s(&gf.join("manifest.jsonl")), "--n", "3", "--out", s(&plots)]);
    let pngs = std::fs::read_dir(&plots)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "png"))
        .count();
    assert_eq!(pngs, 3);
    let index = std::fs::read_to_string(plots.join("overlays.jsonl")).unwrap();
    assert_eq!(index.lines().count(), 3);
    for line in index.lines() {
        let o: Value = serde_json::from_str(line).unwrap();
        let g = GazeAngle::from_degrees(o["yaw_deg"].as_f64().unwrap(), o["pitch_deg"].as_f64().unwrap());
        let u = project_gaze(angles_to_vector(g));
        let arrow = o["arrow"].as_array().unwrap();
        for (k, a) in arrow.iter().enumerate() {
            assert!((a.as_f64().unwrap() - gazeatt::cli::ARROW_SCALE * u[k]).abs() < 1e-9);
        }
    }
}

#[test]
fn zero_epochs_saves_the_initial_model() {
    let dir = tempfile::tempdir().unwrap();
    let gf = gen(dir.path(), "GF", 5, 3);
    let cfg = write_config(dir.path(), &format!("{}:GF", s(&gf.join("manifest.jsonl"))), 0);
    let run = dir.path().join("run");
    ok(&["train", "--config", s(&cfg), "--out", s(&run)]);
    let a = gazeatt::checkpoint::Checkpoint::load(&run.join("model.ckpt")).unwrap();
    assert_eq!(a.step, 0);
    let fresh = gazeatt::model::Model::new(a.model_config().unwrap(), 4).unwrap();
    assert_eq!(a.into_model().unwrap().store.params, fresh.store.params);
}
