//! Versioned JSON world files.
//!
//! Occupancy is stored as a run-length encoding of the row-major bitmap:
//! alternating run lengths starting with a free run (which may be zero).

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{GridWorld, Pose, SceneObject};
use crate::error::{Error, Result};
use crate::rng::sha256_hex;

pub const WORLD_FILE_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct WorldFile {
    version: u32,
    name: String,
    resolution: f64,
    width: usize,
    height: usize,
    occupancy: Vec<usize>,
    objects: Vec<ObjectRecord>,
    spawn_poses: Vec<Pose>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ObjectRecord {
    id: u32,
    category: String,
    cells: Vec<[usize; 2]>,
    salience: f64,
}

fn encode_runs(bits: &[bool]) -> Vec<usize> {
    let mut runs = Vec::new();
    let mut current = false;
    let mut len = 0;
    for &b in bits {
        if b == current {
            len += 1;
        } else {
            runs.push(len);
            current = b;
            len = 1;
        }
    }
    runs.push(len);
    runs
}

fn decode_runs(runs: &[usize], expected: usize) -> Result<Vec<bool>> {
    let total: usize = runs.iter().sum();
    if total != expected {
        return Err(Error::InvalidWorld(format!("occupancy runs cover {total} cells, expected {expected}")));
    }
    let mut bits = Vec::with_capacity(expected);
    for (i, &len) in runs.iter().enumerate() {
        bits.extend(std::iter::repeat_n(i % 2 == 1, len));
    }
    Ok(bits)
}

impl GridWorld {
    pub fn to_json_string(&self) -> Result<String> {
        let file = WorldFile {
            version: WORLD_FILE_VERSION,
            name: self.name.clone(),
            resolution: self.resolution,
            width: self.width,
            height: self.height,
            occupancy: encode_runs(&self.occupancy),
            objects: self
                .objects
                .iter()
                .map(|o| ObjectRecord {
                    id: o.id,
                    category: o.category.clone(),
                    cells: o.cells.iter().map(|&(r, c)| [r, c]).collect(),
                    salience: o.salience,
                })
                .collect(),
            spawn_poses: self.spawn_poses.clone(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    /// Parses a world file, rejecting unknown versions and invalid content.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let probe: serde_json::Value = serde_json::from_str(text)?;
        let version = probe.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if version != WORLD_FILE_VERSION {
            return Err(Error::UnsupportedVersion { found: version, expected: WORLD_FILE_VERSION });
        }
        let file: WorldFile = serde_json::from_value(probe)?;
        let occupancy = decode_runs(&file.occupancy, file.width * file.height)?;
        let objects = file
            .objects
            .into_iter()
            .map(|o| SceneObject {
                id: o.id,
                category: o.category,
                cells: o.cells.into_iter().map(|[r, c]| (r, c)).collect(),
                salience: o.salience,
            })
            .collect();
        let spawn_poses = file.spawn_poses.into_iter().map(|p| Pose::new(p.x, p.y, p.theta)).collect();
        GridWorld::new(file.name, file.width, file.height, file.resolution, occupancy, objects, spawn_poses)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// SHA-256 of the canonical serialized form.
    pub fn content_hash(&self) -> Result<String> {
        Ok(sha256_hex(self.to_json_string()?.as_bytes()))
    }
}
