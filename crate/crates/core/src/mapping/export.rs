//! Map snapshots: binary PGM per channel plus a JSON sidecar.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::GlobalMap;
use crate::error::Result;
use crate::world::Pose;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSnapshotMeta {
    #[serde(rename = "M")]
    pub size: usize,
    pub resolution: f64,
    /// World pose of the map center (the episode's starting pose).
    pub origin_pose: Pose,
}

/// Writes an 8-bit binary PGM with values in `[0, 1]` scaled linearly to
/// `0..=255`.
pub fn write_pgm(path: impl AsRef<Path>, width: usize, height: usize, values: &[f32]) -> Result<()> {
    assert_eq!(values.len(), width * height);
    let mut out = Vec::with_capacity(values.len() + 32);
    write!(out, "P5\n{width} {height}\n255\n")?;
    out.extend(values.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    std::fs::write(path, out)?;
    Ok(())
}

impl GlobalMap {
    /// Writes `{stem}_occupied.pgm`, `{stem}_explored.pgm` and `{stem}.json`
    /// into `dir`.
    pub fn write_snapshot(&self, dir: impl AsRef<Path>, stem: &str, origin_pose: Pose) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        write_pgm(dir.join(format!("{stem}_occupied.pgm")), self.size(), self.size(), &self.occupied)?;
        write_pgm(dir.join(format!("{stem}_explored.pgm")), self.size(), self.size(), &self.explored)?;
        let meta = MapSnapshotMeta { size: self.size(), resolution: self.resolution(), origin_pose };
        std::fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&meta)?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_layout_and_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let mut map = GlobalMap::new(3, 0.05);
        map.set(0, 1, 1.0, 0.5);
        map.write_snapshot(dir.path(), "t0", Pose::new(1.0, 2.0, 0.0)).unwrap();
        let occ = std::fs::read(dir.path().join("t0_occupied.pgm")).unwrap();
        assert_eq!(&occ[..11], b"P5\n3 3\n255\n");
        assert_eq!(&occ[11..], &[0, 255, 0, 0, 0, 0, 0, 0, 0]);
        let exp = std::fs::read(dir.path().join("t0_explored.pgm")).unwrap();
        assert_eq!(exp[12], 128);
        let meta: MapSnapshotMeta = serde_json::from_str(&std::fs::read_to_string(dir.path().join("t0.json")).unwrap()).unwrap();
        assert_eq!(meta.size, 3);
        assert!(std::fs::read_to_string(dir.path().join("t0.json")).unwrap().contains("\"M\": 3"));
    }
}
