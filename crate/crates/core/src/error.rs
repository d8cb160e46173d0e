use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("curve needs at least 8 markers, got {0}")]
    TooFewMarkers(usize),
    #[error("degenerate segment starting at marker {index} (length {length:e})")]
    DegenerateSegment { index: usize, length: f64 },
    #[error("curve is not counterclockwise (signed area {0})")]
    Orientation(f64),
    #[error("channel `{name}` has length {got}, expected {expected}")]
    ChannelLength {
        name: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("required channel `{0}` is missing")]
    MissingChannel(&'static str),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("region `{0}` is empty")]
    EmptyRegion(&'static str),
    #[error("grid dimensions {width}x{height} are invalid: {reason}")]
    GridShape {
        width: usize,
        height: usize,
        reason: &'static str,
    },
    #[error("marker {index} at ({x}, {y}) lies outside the grid")]
    OutsideGrid { index: usize, x: f64, y: f64 },
    #[error("shape does not fit inside the {width}x{height} grid")]
    ShapeOutsideGrid { width: usize, height: usize },
    #[error("time step underflow (dt = {dt:e} at t = {t}); the flow is blowing up")]
    DtUnderflow { dt: f64, t: f64 },
    #[error("density is no longer positive at marker {index} (rho = {rho:e})")]
    DensityBreach { index: usize, rho: f64 },
    #[error("shock detected at t = {t}: {reason}")]
    Shock { t: f64, reason: String },
    #[error("level set has no zero crossing")]
    NoZeroCrossing,
    #[error("singular linear system")]
    Singular,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: truncated payload at byte offset {offset}")]
    Truncated { path: PathBuf, offset: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
