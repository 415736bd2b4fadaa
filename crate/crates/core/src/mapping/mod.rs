//! Belief state: egocentric local maps, the allocentric global map, and
//! odometry correction.
//!
//! Both map kinds carry two channels in `[0, 1]`: occupied and explored.
//!
//! Local map layout: `L x L` cells, the agent sits at the center of the
//! bottom row facing up. Cell `(i, j)` has its center at `forward = (L - 1 -
//! i) * res`, `left = ((L - 1) / 2 - j) * res` in the agent frame.
//!
//! Global map layout: `M x M` cells in the episode frame, whose origin is
//! the agent's starting pose at the center cell `((M - 1) / 2, (M - 1) / 2)`.
//! Column grows with `x`, row grows with `y`.

mod export;
mod ground_truth;
mod local;
mod register;
mod scan_match;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::world::Pose;

pub use export::{write_pgm, MapSnapshotMeta};
pub use ground_truth::GroundTruthMap;
pub use local::{local_map_from_depth, LocalMapper};
pub use register::{register_local_map, registration_footprint, CellRect, MOVING_AVERAGE_BETA};
pub use scan_match::{correct_pose, correct_pose_in, PoseTracker, SearchWindow};

pub const DEFAULT_LOCAL_SIZE: usize = 101;
pub const DEFAULT_GLOBAL_SIZE: usize = 961;

/// Egocentric two-channel map.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalMap {
    size: usize,
    resolution: f64,
    pub(crate) occupied: Vec<f32>,
    pub(crate) explored: Vec<f32>,
}

impl LocalMap {
    pub fn empty(size: usize, resolution: f64) -> Self {
        Self { size, resolution, occupied: vec![0.0; size * size], explored: vec![0.0; size * size] }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn occupied(&self, i: usize, j: usize) -> f32 {
        self.occupied[i * self.size + j]
    }

    pub fn explored(&self, i: usize, j: usize) -> f32 {
        self.explored[i * self.size + j]
    }

    pub fn set(&mut self, i: usize, j: usize, occupied: f32, explored: f32) {
        let k = i * self.size + j;
        self.occupied[k] = occupied;
        self.explored[k] = explored;
    }

    pub fn occupied_channel(&self) -> &[f32] {
        &self.occupied
    }

    pub fn explored_channel(&self) -> &[f32] {
        &self.explored
    }

    /// Column of the agent.
    pub fn center_col(&self) -> usize {
        (self.size - 1) / 2
    }

    /// Agent-frame `(forward, left)` of a cell center.
    pub fn cell_to_agent(&self, i: usize, j: usize) -> (f64, f64) {
        (
            (self.size - 1 - i) as f64 * self.resolution,
            (self.center_col() as f64 - j as f64) * self.resolution,
        )
    }

    /// Continuous cell coordinates `(i, j)` of an agent-frame point.
    pub fn agent_to_index(&self, forward: f64, left: f64) -> (f64, f64) {
        ((self.size - 1) as f64 - forward / self.resolution, self.center_col() as f64 - left / self.resolution)
    }

    pub fn explored_cells(&self) -> usize {
        self.explored.iter().filter(|&&e| e > 0.0).count()
    }

    /// Bounding box `(i0, j0, i1, j1)` (inclusive) of cells with explored > 0.
    pub fn explored_bounds(&self) -> Option<(usize, usize, usize, usize)> {
        let mut b: Option<(usize, usize, usize, usize)> = None;
        for i in 0..self.size {
            for j in 0..self.size {
                if self.explored[i * self.size + j] > 0.0 {
                    b = Some(match b {
                        None => (i, j, i, j),
                        Some((i0, j0, i1, j1)) => (i0.min(i), j0.min(j), i1.max(i), j1.max(j)),
                    });
                }
            }
        }
        b
    }

    /// Bilinear sample of both channels at continuous cell coordinates;
    /// samples outside the grid contribute zeros.
    pub fn sample(&self, i: f64, j: f64) -> (f32, f32) {
        let i0 = i.floor();
        let j0 = j.floor();
        let fi = (i - i0) as f32;
        let fj = (j - j0) as f32;
        let (i0, j0) = (i0 as i64, j0 as i64);
        let n = self.size as i64;
        let mut occ = 0.0f32;
        let mut exp = 0.0f32;
        for (di, wi) in [(0, 1.0 - fi), (1, fi)] {
            let ii = i0 + di;
            if wi == 0.0 || ii < 0 || ii >= n {
                continue;
            }
            for (dj, wj) in [(0, 1.0 - fj), (1, fj)] {
                let jj = j0 + dj;
                if wj == 0.0 || jj < 0 || jj >= n {
                    continue;
                }
                let k = (ii * n + jj) as usize;
                let w = wi * wj;
                occ += w * self.occupied[k];
                exp += w * self.explored[k];
            }
        }
        (occ, exp)
    }
}

/// Allocentric two-channel map in the episode frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalMap {
    size: usize,
    resolution: f64,
    pub(crate) occupied: Vec<f32>,
    pub(crate) explored: Vec<f32>,
    /// Bounding box of every cell ever written; all cells outside it are
    /// unknown and free.
    written: Option<CellRect>,
}

impl GlobalMap {
    pub fn new(size: usize, resolution: f64) -> Self {
        Self { size, resolution, occupied: vec![0.0; size * size], explored: vec![0.0; size * size], written: None }
    }

    pub fn written_bounds(&self) -> Option<CellRect> {
        self.written
    }

    pub(crate) fn mark_written(&mut self, rect: CellRect) {
        self.written = Some(self.written.map_or(rect, |w| w.union(rect)));
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn center(&self) -> usize {
        (self.size - 1) / 2
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.size + col
    }

    pub fn occupied(&self, row: usize, col: usize) -> f32 {
        self.occupied[self.index(row, col)]
    }

    pub fn explored(&self, row: usize, col: usize) -> f32 {
        self.explored[self.index(row, col)]
    }

    pub fn set(&mut self, row: usize, col: usize, occupied: f32, explored: f32) {
        let k = self.index(row, col);
        self.occupied[k] = occupied;
        self.explored[k] = explored;
        self.mark_written(CellRect { row0: row, col0: col, row1: row, col1: col });
    }

    pub fn occupied_channel(&self) -> &[f32] {
        &self.occupied
    }

    pub fn explored_channel(&self) -> &[f32] {
        &self.explored
    }

    /// Binarized obstacle test (occupied >= 0.5).
    #[inline]
    pub fn is_obstacle_at(&self, k: usize) -> bool {
        self.occupied[k] >= 0.5
    }

    #[inline]
    pub fn is_explored_at(&self, k: usize) -> bool {
        self.explored[k] >= 0.5
    }

    pub fn is_obstacle(&self, row: usize, col: usize) -> bool {
        self.is_obstacle_at(self.index(row, col))
    }

    pub fn is_explored(&self, row: usize, col: usize) -> bool {
        self.is_explored_at(self.index(row, col))
    }

    pub fn in_bounds(&self, row: i64, col: i64) -> bool {
        row >= 0 && col >= 0 && (row as usize) < self.size && (col as usize) < self.size
    }

    /// Nearest cell to an episode-frame point.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let c = self.center() as f64;
        let col = (c + x / self.resolution).round();
        let row = (c + y / self.resolution).round();
        if self.in_bounds(row as i64, col as i64) && row.is_finite() && col.is_finite() {
            Some((row as usize, col as usize))
        } else {
            None
        }
    }

    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        let c = self.center() as f64;
        ((col as f64 - c) * self.resolution, (row as f64 - c) * self.resolution)
    }

    pub fn explored_count(&self) -> usize {
        self.explored.iter().filter(|&&e| e >= 0.5).count()
    }
}

/// Estimated pose plus a diagnostic drift score (accumulated magnitude of
/// scan-match corrections).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseEstimate {
    pub pose: Pose,
    pub drift: f64,
}

impl PoseEstimate {
    pub fn new(pose: Pose) -> Self {
        Self { pose, drift: 0.0 }
    }
}

/// Agent-frame displacement `(forward, left, dtheta)`.
pub type Displacement = (f64, f64, f64);

/// Adds an agent-frame displacement to a pose: the translation is rotated
/// into the parent frame by `prev.theta`, theta is re-wrapped.
pub fn compose_pose(prev: &Pose, delta: Displacement) -> Pose {
    prev.compose(&Pose { x: delta.0, y: delta.1, theta: delta.2 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OdometryNoiseModel {
    /// Meters per step, applied independently to forward and lateral motion.
    pub sigma_translation: f64,
    /// Radians per step.
    pub sigma_rotation: f64,
    pub bias_translation: f64,
    pub bias_rotation: f64,
}

impl Default for OdometryNoiseModel {
    fn default() -> Self {
        Self { sigma_translation: 0.0, sigma_rotation: 0.0, bias_translation: 0.0, bias_rotation: 0.0 }
    }
}

impl OdometryNoiseModel {
    pub fn is_noiseless(&self) -> bool {
        self.sigma_translation == 0.0 && self.sigma_rotation == 0.0 && self.bias_translation == 0.0 && self.bias_rotation == 0.0
    }

    pub fn validate(&self) -> crate::Result<()> {
        if !(self.sigma_translation >= 0.0 && self.sigma_rotation >= 0.0) {
            return Err(crate::Error::InvalidParameter("odometry sigmas must be >= 0".into()));
        }
        Ok(())
    }

    /// Noisy reading of a true agent-frame displacement.
    pub fn corrupt<R: Rng + ?Sized>(&self, truth: Displacement, rng: &mut R) -> Displacement {
        let draw = |sigma: f64, rng: &mut R| {
            if sigma > 0.0 {
                Normal::new(0.0, sigma).map(|n| n.sample(rng)).unwrap_or(0.0)
            } else {
                0.0
            }
        };
        let dx = truth.0 + self.bias_translation + draw(self.sigma_translation, rng);
        let dy = truth.1 + draw(self.sigma_translation, rng);
        let dt = truth.2 + self.bias_rotation + draw(self.sigma_rotation, rng);
        (dx, dy, dt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn compose_examples() {
        let p = compose_pose(&Pose::origin(), (0.25, 0.0, 0.0));
        assert_eq!((p.x, p.y, p.theta), (0.25, 0.0, 0.0));
        let q = compose_pose(&Pose::new(0.0, 0.0, FRAC_PI_2), (0.25, 0.0, 0.0));
        assert!(q.x.abs() < 1e-15 && (q.y - 0.25).abs() < 1e-15 && q.theta == FRAC_PI_2);
        let r = Pose::new(1.5, -2.0, 2.0);
        assert_eq!(compose_pose(&r, (0.0, 0.0, 0.0)), r);
    }

    #[test]
    fn global_cell_round_trip() {
        let map = GlobalMap::new(961, 0.05);
        assert_eq!(map.cell_of(0.0, 0.0), Some((480, 480)));
        assert_eq!(map.cell_of(0.25, -0.1), Some((478, 485)));
        let (x, y) = map.cell_center(478, 485);
        assert!((x - 0.25).abs() < 1e-12 && (y + 0.1).abs() < 1e-12);
        assert_eq!(map.cell_of(100.0, 0.0), None);
    }

    #[test]
    fn local_cell_geometry() {
        let map = LocalMap::empty(101, 0.05);
        assert_eq!(map.cell_to_agent(100, 50), (0.0, 0.0));
        let (f, l) = map.cell_to_agent(80, 40);
        assert!((f - 1.0).abs() < 1e-12 && (l - 0.5).abs() < 1e-12);
        assert_eq!(map.agent_to_index(f, l), (80.0, 40.0));
    }

    #[test]
    fn noiseless_odometry_is_exact() {
        let mut rng = crate::rng::substream(1, "odo");
        let model = OdometryNoiseModel::default();
        assert_eq!(model.corrupt((0.25, 0.0, 0.1), &mut rng), (0.25, 0.0, 0.1));
    }
}
