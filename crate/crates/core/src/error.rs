use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the simulator, mapper, planner and harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid world: {0}")]
    InvalidWorld(String),

    #[error("world generation failed after {attempts} attempts: {reason}")]
    GenerationFailed { attempts: usize, reason: String },

    #[error("unsupported world file version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error("pose ({x:.3}, {y:.3}) lies outside the world")]
    PoseOutOfBounds { x: f64, y: f64 },

    #[error("local map footprint falls outside the global map (map too small for trajectory)")]
    FootprintOutOfBounds,

    #[error("no path between {start:?} and {goal:?}")]
    NoPath { start: (usize, usize), goal: (usize, usize) },

    #[error("map dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("{path}: {message}")]
    Log { path: PathBuf, message: String },

    #[error("captioner: {0}")]
    Captioner(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
