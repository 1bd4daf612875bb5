//! Gaze angle conventions and the small amount of vector math shared by the
//! generator, the losses and the metrics.
//!
//! Frame: camera-centred, `x` to image-right, `y` to image-down, `z` into the
//! scene. Positive yaw turns the gaze toward image-right, positive pitch toward
//! image-down, so a unit gaze vector is
//! `(cos(pitch)·sin(yaw), sin(pitch), cos(pitch)·cos(yaw))` and its image-plane
//! projection is the bare `(x, y)` pair.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Norm below which a 2D direction is treated as undefined.
pub const DEGENERATE_EPS: f64 = 1e-6;

/// Yaw/pitch pair in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GazeAngle {
    pub yaw: f64,
    pub pitch: f64,
}

impl GazeAngle {
    pub fn new(yaw: f64, pitch: f64) -> Self {
        Self { yaw, pitch }
    }

    pub fn from_degrees(yaw_deg: f64, pitch_deg: f64) -> Self {
        Self::new(yaw_deg.to_radians(), pitch_deg.to_radians())
    }

    pub fn yaw_deg(&self) -> f64 {
        self.yaw.to_degrees()
    }

    pub fn pitch_deg(&self) -> f64 {
        self.pitch.to_degrees()
    }

    pub fn is_valid(&self) -> bool {
        self.yaw.is_finite()
            && self.pitch.is_finite()
            && self.yaw.abs() <= PI
            && self.pitch.abs() <= FRAC_PI_2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(&self, other: &Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
}

/// Normalized image coordinates, origin top-left, `y` growing downward.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ImagePoint {
    pub x: f64,
    pub y: f64,
}

impl ImagePoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn in_frame(&self) -> bool {
        (0.0..=1.0).contains(&self.x) && (0.0..=1.0).contains(&self.y)
    }

    pub fn distance(&self, other: &ImagePoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Displacement `self - origin`.
    pub fn minus(&self, origin: &ImagePoint) -> [f64; 2] {
        [self.x - origin.x, self.y - origin.y]
    }
}

pub fn angles_to_vector(a: GazeAngle) -> Vec3 {
    let (sy, cy) = a.yaw.sin_cos();
    let (sp, cp) = a.pitch.sin_cos();
    Vec3::new(cp * sy, sp, cp * cy)
}

pub fn vector_to_angles(v: Vec3) -> Result<GazeAngle> {
    let n = v.norm();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::Domain(format!(
            "cannot take the direction of vector ({}, {}, {})",
            v.x, v.y, v.z
        )));
    }
    let pitch = (v.y / n).clamp(-1.0, 1.0).asin();
    let yaw = v.x.atan2(v.z);
    Ok(GazeAngle { yaw, pitch })
}

/// Image-plane projection of a gaze vector: drops the depth component.
pub fn project_gaze(v: Vec3) -> [f64; 2] {
    [v.x, v.y]
}

/// Angle between two gaze directions, in degrees.
pub fn angular_error(a: GazeAngle, b: GazeAngle) -> f64 {
    let cos = angles_to_vector(a)
        .dot(&angles_to_vector(b))
        .clamp(-1.0, 1.0);
    cos.acos().to_degrees()
}

pub fn norm2(u: [f64; 2]) -> f64 {
    u[0].hypot(u[1])
}

/// `1 - cos(u, w)`; `None` when either direction is degenerate.
pub fn cosine_distance_2d(u: [f64; 2], w: [f64; 2]) -> Option<f64> {
    let nu = norm2(u);
    let nw = norm2(w);
    if !(nu > DEGENERATE_EPS && nw > DEGENERATE_EPS) {
        return None;
    }
    let cos = ((u[0] * w[0] + u[1] * w[1]) / (nu * nw)).clamp(-1.0, 1.0);
    Some(1.0 - cos)
}
