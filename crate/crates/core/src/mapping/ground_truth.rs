//! Ground-truth map `m*` expressed in the episode frame.

use super::GlobalMap;
use crate::world::{GridWorld, Pose};

/// Ground truth resampled onto the global map lattice through the spawn
/// pose (nearest world cell).
///
/// * `obstacle`: the world cell is an obstacle, or the point lies outside
///   the world.
/// * `observable`: free cells reachable from the spawn, plus obstacle cells
///   8-adjacent to one. This is the set an ideal explorer could mark as
///   explored.
/// * `reachable`: reachable free cells only.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthMap {
    size: usize,
    resolution: f64,
    obstacle: Vec<bool>,
    observable: Vec<bool>,
    reachable: Vec<bool>,
    reachable_area_m2: f64,
}

impl GroundTruthMap {
    pub fn new(world: &GridWorld, spawn: &Pose, size: usize, resolution: f64) -> Self {
        let (w, h) = (world.width(), world.height());
        let reach = world.reachable_free(spawn);
        let mut observable_world = reach.clone();
        for r in 0..h {
            for c in 0..w {
                if !world.occupancy()[r * w + c] {
                    continue;
                }
                'scan: for dr in -1i64..=1 {
                    for dc in -1i64..=1 {
                        let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                        if world.in_bounds(nr, nc) && reach[nr as usize * w + nc as usize] {
                            observable_world[r * w + c] = true;
                            break 'scan;
                        }
                    }
                }
            }
        }
        let reachable_area_m2 = reach.iter().filter(|&&b| b).count() as f64 * world.resolution().powi(2);

        let probe = GlobalMap::new(size, resolution);
        let n = size * size;
        let mut obstacle = vec![true; n];
        let mut observable = vec![false; n];
        let mut reachable = vec![false; n];
        for row in 0..size {
            for col in 0..size {
                let (x, y) = spawn.transform_point(probe.cell_center(row, col));
                if let Some((r, c)) = world.cell_of(x, y) {
                    let k = row * size + col;
                    let wk = r * w + c;
                    obstacle[k] = world.occupancy()[wk];
                    observable[k] = observable_world[wk];
                    reachable[k] = reach[wk];
                }
            }
        }
        Self { size, resolution, obstacle, observable, reachable, reachable_area_m2 }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn obstacle(&self) -> &[bool] {
        &self.obstacle
    }

    pub fn observable(&self) -> &[bool] {
        &self.observable
    }

    pub fn reachable(&self) -> &[bool] {
        &self.reachable
    }

    /// Reachable free area measured on the world grid, square meters.
    pub fn reachable_area_m2(&self) -> f64 {
        self.reachable_area_m2
    }

    pub fn cell_area_m2(&self) -> f64 {
        self.resolution * self.resolution
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn open_room_ground_truth() {
        // 40 x 40 cells with a one-cell border wall; spawn at a cell center.
        let occ = crate::world::fixtures::walled_room(40, 40, 0.05);
        let spawn = Pose::new(1.025, 1.025, 0.0);
        let world = GridWorld::new("t", 40, 40, 0.05, occ, vec![], vec![spawn]).unwrap();
        let gt = GroundTruthMap::new(&world, &spawn, 61, 0.05);
        assert_eq!(gt.reachable().iter().filter(|&&b| b).count(), 38 * 38);
        assert_eq!(gt.observable().iter().filter(|&&b| b).count(), 40 * 40);
        assert!((gt.reachable_area_m2() - 38.0 * 38.0 * 0.0025).abs() < 1e-12);
        // Outside the world counts as obstacle.
        assert!(gt.obstacle()[0]);
        assert!(!gt.obstacle()[30 * 61 + 30]);
    }

    #[test]
    fn rotation_through_spawn_heading() {
        // A single wall cell 0.5 m to the spawn's left must appear 10 rows
        // up from the center, whatever the spawn heading.
        let w = 40;
        let mut occ = crate::world::fixtures::walled_room(w, w, 0.05);
        occ[(20 + 10) * w + 20] = true;
        let spawn = Pose::new(1.025, 1.025, FRAC_PI_2);
        let world = GridWorld::new("t", w, w, 0.05, occ, vec![], vec![spawn]).unwrap();
        let gt = GroundTruthMap::new(&world, &spawn, 41, 0.05);
        // Heading +y: world +y is agent forward, which is +x (columns).
        assert!(gt.obstacle()[20 * 41 + 30]);
        assert!(!gt.obstacle()[30 * 41 + 20]);
    }
}
