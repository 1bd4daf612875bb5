//! Joint estimation of gaze angle, person-dependent saliency heatmap and
//! in-frame fixation likelihood from a scene image and a face crop.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod losses;
pub mod model;
pub mod nn;
pub mod optim;
pub mod train;

pub use error::{Error, Result};
