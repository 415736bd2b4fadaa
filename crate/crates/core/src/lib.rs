//! Deterministic explore-and-describe simulator.
//!
//! An agent explores a procedural indoor world with a hierarchical
//! navigator driven by intrinsic rewards, a speaker policy decides when the
//! current view is worth describing, and a captioner produces the
//! description. The crate also implements the evaluation suite for such
//! episodes: map quality, description coverage/diversity/loquacity, and the
//! episode description score.

pub mod error;
pub mod harness;
pub mod mapping;
pub mod metrics;
pub mod planning;
pub mod raster;
pub mod rewards;
pub mod rng;
pub mod speaker;
pub mod world;

pub use error::{Error, Result};
