//! Synthetic attention corpora, their on-disk manifests, and conversion into
//! network inputs.

mod generate;
mod inout;
mod manifest;
mod prepare;
mod quantize;
mod render;

use std::fmt;
use std::str::FromStr;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{GazeAngle, ImagePoint};

pub use generate::{corpus_stats, generate_corpus, generate_sample, CorpusStats, GeneratorConfig, SceneGeometry};
pub use inout::{read_inout_annotations, write_inout_annotations};
pub use manifest::{load_corpus, read_manifest, write_corpus, write_manifest, ManifestRecord};
pub use prepare::{crop_resize, PreparedSample, SampleLabels};
pub use quantize::{cell_center, quantize, quantize_position, quantize_target};

/// Source flavour of a sample, mirroring the label availability of the
/// corpora the model is trained and evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Domain {
    /// In-the-wild scenes with annotated targets and inside/outside labels.
    #[serde(rename = "GF")]
    GazeFollowLike,
    /// Lab captures with angle labels, always looking outside the frame.
    #[serde(rename = "ED")]
    EyediapLike,
    /// Rendered heads with wide angle ranges, always looking outside.
    #[serde(rename = "SH")]
    SynHeadLike,
    /// Evaluation-only mixed inside/outside split.
    #[serde(rename = "MMDB")]
    MmdbLike,
}

impl Domain {
    pub const ALL: [Domain; 4] = [
        Domain::GazeFollowLike,
        Domain::EyediapLike,
        Domain::SynHeadLike,
        Domain::MmdbLike,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Domain::GazeFollowLike => "GF",
            Domain::EyediapLike => "ED",
            Domain::SynHeadLike => "SH",
            Domain::MmdbLike => "MMDB",
        }
    }

    pub fn has_inout_sidecar(self) -> bool {
        matches!(self, Domain::GazeFollowLike | Domain::MmdbLike)
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_uppercase();
        let t = t.strip_suffix("-LIKE").unwrap_or(&t);
        Domain::ALL
            .into_iter()
            .find(|d| d.tag() == t)
            .ok_or_else(|| Error::Input(format!("unknown domain `{s}` (expected GF, ED, SH or MMDB)")))
    }
}

/// Normalized face box `(x, y, w, h)`, top-left corner plus size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaceBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl FaceBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn centered(c: ImagePoint, side: f64) -> Self {
        Self::new(c.x - side / 2.0, c.y - side / 2.0, side, side)
    }

    pub fn center(&self) -> ImagePoint {
        ImagePoint::new(self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.x, self.y, self.w, self.h]
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.x, self.y, self.w, self.h].iter().all(|v| v.is_finite())
            && self.w > 0.0
            && self.h > 0.0
            && self.x >= 0.0
            && self.y >= 0.0
            && self.x + self.w <= 1.0 + 1e-9
            && self.y + self.h <= 1.0 + 1e-9;
        if ok {
            Ok(())
        } else {
            Err(Error::Input(format!(
                "face box [{}, {}, {}, {}] is not a non-empty box inside [0,1]²",
                self.x, self.y, self.w, self.h
            )))
        }
    }
}

/// One record: scene image plus whatever labels its domain provides.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionSample {
    pub id: String,
    pub scene: RgbImage,
    pub face_bbox: FaceBox,
    pub gaze: Option<GazeAngle>,
    pub target: Option<ImagePoint>,
    pub inside: Option<bool>,
    pub domain: Domain,
    /// Generator ground truth, including the gaze of samples whose domain
    /// does not label it. Never serialized.
    pub geometry: Option<SceneGeometry>,
}

impl AttentionSample {
    pub fn head(&self) -> ImagePoint {
        self.face_bbox.center()
    }

    pub fn face_crop(&self, side: u32) -> RgbImage {
        crop_resize(&self.scene, &self.face_bbox, side)
    }

    pub fn validate(&self) -> Result<()> {
        validate_labels(self.domain, self.gaze, self.target, self.inside)?;
        self.face_bbox.validate()
    }
}

/// Domain-conditional label availability.
pub fn validate_labels(
    domain: Domain,
    gaze: Option<GazeAngle>,
    target: Option<ImagePoint>,
    inside: Option<bool>,
) -> Result<()> {
    let fail = |msg: &str| Err(Error::Input(format!("{domain} sample: {msg}")));
    match domain {
        Domain::GazeFollowLike | Domain::MmdbLike => {
            let Some(inside) = inside else {
                return fail("missing `inside`");
            };
            if domain == Domain::GazeFollowLike && gaze.is_some() {
                return fail("gaze angle must be absent");
            }
            if inside != target.is_some() {
                return fail("target must be present exactly when inside = 1");
            }
        }
        Domain::EyediapLike | Domain::SynHeadLike => {
            if gaze.is_none() {
                return fail("missing gaze angle");
            }
            if inside != Some(false) {
                return fail("inside must be 0");
            }
            if target.is_some() {
                return fail("target must be absent");
            }
        }
    }
    if let Some(g) = gaze {
        if !g.is_valid() {
            return fail("gaze angle out of range");
        }
    }
    if let Some(t) = target {
        if !t.in_frame() {
            return fail("target outside [0,1]²");
        }
    }
    Ok(())
}
