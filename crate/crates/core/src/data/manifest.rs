//! JSON-lines manifests: one object per sample, image paths relative to the
//! manifest's directory.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{validate_labels, write_inout_annotations, AttentionSample, Domain, FaceBox};
use crate::error::{Error, Result};
use crate::geometry::{GazeAngle, ImagePoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub scene: String,
    pub face_bbox: [f64; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub yaw_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pitch_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inside: Option<u8>,
    pub domain: Domain,
}

impl ManifestRecord {
    pub fn from_sample(s: &AttentionSample, scene_path: String) -> Self {
        Self {
            scene: scene_path,
            face_bbox: s.face_bbox.as_array(),
            yaw_deg: s.gaze.map(|g| g.yaw_deg()),
            pitch_deg: s.gaze.map(|g| g.pitch_deg()),
            target: s.target.map(|t| [t.x, t.y]),
            inside: s.inside.map(u8::from),
            domain: s.domain,
        }
    }

    pub fn gaze(&self) -> Option<GazeAngle> {
        match (self.yaw_deg, self.pitch_deg) {
            (Some(y), Some(p)) => Some(GazeAngle::from_degrees(y, p)),
            _ => None,
        }
    }

    pub fn target_point(&self) -> Option<ImagePoint> {
        self.target.map(|[x, y]| ImagePoint::new(x, y))
    }

    pub fn inside_flag(&self) -> Option<bool> {
        self.inside.map(|v| v == 1)
    }

    pub fn face_box(&self) -> FaceBox {
        let [x, y, w, h] = self.face_bbox;
        FaceBox::new(x, y, w, h)
    }

    /// Id used by the in/out sidecar: the image file stem.
    pub fn id(&self) -> String {
        Path::new(&self.scene)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| self.scene.clone())
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.yaw_deg.is_some() != self.pitch_deg.is_some() {
            return Err("yaw_deg and pitch_deg must appear together".into());
        }
        if let Some(v) = self.inside {
            if v > 1 {
                return Err(format!("inside must be 0 or 1, got {v}"));
            }
        }
        validate_labels(self.domain, self.gaze(), self.target_point(), self.inside_flag()).map_err(|e| e.to_string())?;
        self.face_box().validate().map_err(|e| e.to_string())
    }
}

pub fn write_manifest(path: &Path, records: &[ManifestRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).expect("record serializes");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Parses and validates every line; errors name the offending line.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ManifestRecord =
            serde_json::from_str(&line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        rec.validate().map_err(|m| Error::parse(path, i + 1, m))?;
        out.push(rec);
    }
    Ok(out)
}

/// Writes `images/<id>.png`, `manifest.jsonl` and, for domains that carry
/// inside/outside labels, `inout.txt` under `dir`. Returns emitted paths.
pub fn write_corpus(dir: &Path, samples: &[AttentionSample]) -> Result<Vec<PathBuf>> {
    let images = dir.join("images");
    std::fs::create_dir_all(&images).map_err(|e| Error::io(&images, e))?;
    let records: Vec<ManifestRecord> = samples
        .par_iter()
        .map(|s| {
            let rel = format!("images/{}.png", s.id);
            let p = dir.join(&rel);
            s.scene.save(&p).map_err(|e| Error::Image { path: p.clone(), source: e })?;
            Ok(ManifestRecord::from_sample(s, rel))
        })
        .collect::<Result<_>>()?;
    let mut written: Vec<PathBuf> = records.iter().map(|r| dir.join(&r.scene)).collect();
    let manifest = dir.join("manifest.jsonl");
    write_manifest(&manifest, &records)?;
    written.push(manifest);
    if samples.iter().any(|s| s.domain.has_inout_sidecar()) {
        let sidecar = dir.join("inout.txt");
        write_inout_annotations(samples, &sidecar)?;
        written.push(sidecar);
    }
    Ok(written)
}

/// Reads a manifest and the images it references.
pub fn load_corpus(manifest: &Path) -> Result<Vec<AttentionSample>> {
    let records = read_manifest(manifest)?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    records
        .into_par_iter()
        .map(|r| {
            let p = base.join(&r.scene);
            let scene = image::open(&p)
                .map_err(|e| Error::Image { path: p.clone(), source: e })?
                .to_rgb8();
            Ok(AttentionSample {
                id: r.id(),
                scene,
                face_bbox: r.face_box(),
                gaze: r.gaze(),
                target: r.target_point(),
                inside: r.inside_flag(),
                domain: r.domain,
                geometry: None,
            })
        })
        .collect()
}
