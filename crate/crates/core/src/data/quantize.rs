use crate::error::{Error, Result};
use crate::geometry::ImagePoint;

/// Row-major cell index of `p` on a `grid × grid` partition of the unit square.
/// The right and bottom borders fall into the last cell.
pub fn quantize(p: ImagePoint, grid: usize) -> Result<usize> {
    if grid == 0 {
        return Err(Error::Input("grid must be >= 1".into()));
    }
    if !p.in_frame() {
        return Err(Error::Input(format!("point ({}, {}) outside [0,1]²", p.x, p.y)));
    }
    let cell = |v: f64| ((v * grid as f64).floor() as usize).min(grid - 1);
    Ok(cell(p.y) * grid + cell(p.x))
}

/// Face position → index of the one-hot position vector.
pub fn quantize_position(p: ImagePoint, grid: usize) -> Result<usize> {
    quantize(p, grid)
}

/// Gaze target → heatmap class index.
pub fn quantize_target(p: ImagePoint, grid: usize) -> Result<usize> {
    quantize(p, grid)
}

pub fn cell_center(index: usize, grid: usize) -> ImagePoint {
    let row = index / grid;
    let col = index % grid;
    ImagePoint::new((col as f64 + 0.5) / grid as f64, (row as f64 + 0.5) / grid as f64)
}
