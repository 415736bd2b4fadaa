//! Planar depth scan with per-ray object attribution.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{GridWorld, Pose};
use crate::error::{Error, Result};
use crate::raster::GridRay;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorConfig {
    /// Field of view, degrees.
    pub fov: f64,
    pub n_rays: usize,
    /// Meters.
    pub max_range: f64,
    /// Standard deviation of additive depth noise, meters.
    pub depth_noise_sigma: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self { fov: 90.0, n_rays: 128, max_range: 5.0, depth_noise_sigma: 0.0 }
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fov > 0.0 && self.fov <= 360.0) {
            return Err(Error::InvalidParameter(format!("fov must be in (0, 360], got {}", self.fov)));
        }
        if self.n_rays < 2 {
            return Err(Error::InvalidParameter(format!("n_rays must be >= 2, got {}", self.n_rays)));
        }
        if !(self.max_range > 0.0 && self.max_range.is_finite()) {
            return Err(Error::InvalidParameter(format!("max_range must be positive, got {}", self.max_range)));
        }
        if !(self.depth_noise_sigma >= 0.0) {
            return Err(Error::InvalidParameter("depth_noise_sigma must be >= 0".into()));
        }
        Ok(())
    }

    /// Bearing of ray `i` relative to the heading, radians. Positive is to
    /// the left (counter-clockwise).
    pub fn ray_offset(&self, i: usize) -> f64 {
        self.fov.to_radians() * (i as f64 / (self.n_rays - 1) as f64 - 0.5)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibleObject {
    pub object_id: u32,
    pub category: String,
    /// Fraction of rays whose first hit belongs to this object.
    pub apparent_area: f64,
    pub salience: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// Per-ray depth in meters, clamped to `[0, max_range]`.
    pub depth: Vec<f64>,
    pub max_range: f64,
    /// Sorted by object id.
    pub visible: Vec<VisibleObject>,
    pub activation: f64,
}

impl Observation {
    pub fn mean_depth(&self) -> f64 {
        if self.depth.is_empty() {
            return 0.0;
        }
        self.depth.iter().sum::<f64>() / self.depth.len() as f64
    }

    /// Whether ray `i` terminated on a surface rather than at max range.
    pub fn is_hit(&self, i: usize) -> bool {
        self.depth[i] < self.max_range
    }
}

/// Affine stand-in for the mean visual-encoder activation:
/// `base + gain * sum(area * salience)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivationModel {
    pub base: f64,
    pub gain: f64,
}

impl Default for ActivationModel {
    fn default() -> Self {
        Self { base: 4.0, gain: 4.0 }
    }
}

impl ActivationModel {
    pub fn activation(&self, visible: &[VisibleObject]) -> f64 {
        self.base + self.gain * visible.iter().map(|v| v.apparent_area * v.salience).sum::<f64>()
    }
}

pub fn compute_activation(visible: &[VisibleObject]) -> f64 {
    ActivationModel::default().activation(visible)
}

/// Casts `cfg.n_rays` rays from `pose` through the occupancy grid.
///
/// Depth is the distance to the boundary of the first obstacle cell (grid
/// edges count as walls), clamped to `max_range`. Gaussian noise, when
/// configured, is added after clamping and the result re-clamped.
pub fn raycast_observe<R: Rng + ?Sized>(world: &GridWorld, pose: &Pose, cfg: &SensorConfig, rng: &mut R) -> Result<Observation> {
    cfg.validate()?;
    if !world.contains_point(pose.x, pose.y) {
        return Err(Error::PoseOutOfBounds { x: pose.x, y: pose.y });
    }
    let res = world.resolution();
    let origin = (pose.x / res, pose.y / res);
    let max_cells = cfg.max_range / res;
    let mut depth = Vec::with_capacity(cfg.n_rays);
    let mut hits_per_object: Vec<(u32, usize)> = Vec::new();

    for i in 0..cfg.n_rays {
        let bearing = pose.theta + cfg.ray_offset(i);
        let (s, c) = bearing.sin_cos();
        let mut d = cfg.max_range;
        for (col, row, t_enter, _) in GridRay::new(origin, (c, s)) {
            if t_enter >= max_cells {
                break;
            }
            if world.is_obstacle(row, col) {
                d = t_enter * res;
                if world.in_bounds(row, col) {
                    if let Some(obj) = world.object_at(row as usize, col as usize) {
                        match hits_per_object.iter_mut().find(|(id, _)| *id == obj.id) {
                            Some((_, n)) => *n += 1,
                            None => hits_per_object.push((obj.id, 1)),
                        }
                    }
                }
                break;
            }
        }
        depth.push(d.min(cfg.max_range));
    }

    if cfg.depth_noise_sigma > 0.0 {
        let normal = Normal::new(0.0, cfg.depth_noise_sigma)
            .map_err(|e| Error::InvalidParameter(format!("depth noise: {e}")))?;
        for d in depth.iter_mut() {
            *d = (*d + normal.sample(rng)).clamp(0.0, cfg.max_range);
        }
    }

    hits_per_object.sort_unstable_by_key(|&(id, _)| id);
    let visible: Vec<VisibleObject> = hits_per_object
        .into_iter()
        .filter_map(|(id, n)| {
            world.object_by_id(id).map(|obj| VisibleObject {
                object_id: id,
                category: obj.category.clone(),
                apparent_area: n as f64 / cfg.n_rays as f64,
                salience: obj.salience,
            })
        })
        .collect();
    let activation = compute_activation(&visible);
    Ok(Observation { depth, max_range: cfg.max_range, visible, activation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use crate::world::fixtures::*;
    use crate::world::{SceneObject, DEFAULT_RESOLUTION};
    use proptest::prelude::*;

    fn visible(area: f64, salience: f64) -> VisibleObject {
        VisibleObject { object_id: 0, category: "couch".into(), apparent_area: area, salience }
    }

    #[test]
    fn activation_examples() {
        assert_eq!(compute_activation(&[]), 4.0);
        assert_eq!(compute_activation(&[visible(0.25, 1.0)]), 5.0);
        let two = [visible(0.3, 1.0), visible(0.2, 0.5)];
        assert!((compute_activation(&two) - 5.6).abs() < 1e-12);
    }

    #[test]
    fn empty_room_larger_than_range() {
        let world = open_world(400, 400);
        let pose = Pose::new(10.0, 10.0, 0.3);
        let obs = raycast_observe(&world, &pose, &SensorConfig::default(), &mut substream(0, "s")).unwrap();
        assert!(obs.depth.iter().all(|&d| d == 5.0));
        assert!(obs.visible.is_empty());
        assert_eq!(obs.activation, 4.0);
    }

    /// Flat wall whose face is exactly 1.0 m ahead of the agent.
    fn wall_world() -> (GridWorld, Pose) {
        let (w, h) = (300, 300);
        let mut occ = walled_room(w, h, DEFAULT_RESOLUTION);
        for r in 0..h {
            for c in 120..125 {
                occ[r * w + c] = true;
            }
        }
        let pose = Pose::new(5.0, 7.5, 0.0);
        let world = GridWorld::new("wall", w, h, DEFAULT_RESOLUTION, occ, vec![], vec![pose]).unwrap();
        (world, pose)
    }

    #[test]
    fn facing_flat_wall_matches_ray_plane_oracle() {
        let (world, pose) = wall_world();
        let cfg = SensorConfig { n_rays: 129, ..SensorConfig::default() };
        let obs = raycast_observe(&world, &pose, &cfg, &mut substream(0, "s")).unwrap();
        let center = obs.depth[64];
        assert!((center - 1.0).abs() <= DEFAULT_RESOLUTION / 2.0);
        for (i, &d) in obs.depth.iter().enumerate() {
            // Analytic oracle: distance to the plane x = 6.0 along the bearing.
            let expected = 1.0 / cfg.ray_offset(i).cos();
            assert!((d - expected).abs() < 1e-9, "ray {i}: {d} vs {expected}");
            assert!(d >= center);
        }
    }

    #[test]
    fn apparent_area_counts_first_hits() {
        // Object face spanning exactly rays 48..80 (32 of 128 rays).
        let (w, h) = (300, 300);
        let mut occ = walled_room(w, h, DEFAULT_RESOLUTION);
        let cfg = SensorConfig::default();
        let pose = Pose::new(5.0, 7.5, 0.0);
        let mut cells = Vec::new();
        // Wall at x in [6.0, 6.05); mark as object the rows struck by rays 48..=79.
        let lo = (7.5 + cfg.ray_offset(48).tan()) / DEFAULT_RESOLUTION;
        let hi = (7.5 + cfg.ray_offset(79).tan()) / DEFAULT_RESOLUTION;
        for r in 0..h {
            occ[r * w + 120] = true;
            if (r as f64) >= lo.floor() && (r as f64) <= hi.floor() {
                cells.push((r, 120));
            }
        }
        let obj = SceneObject { id: 3, category: "couch".into(), cells, salience: 1.0 };
        let world = GridWorld::new("obj", w, h, DEFAULT_RESOLUTION, occ, vec![obj], vec![pose]).unwrap();
        let obs = raycast_observe(&world, &pose, &cfg, &mut substream(0, "s")).unwrap();
        assert_eq!(obs.visible.len(), 1);
        assert_eq!(obs.visible[0].apparent_area, 0.25);
        assert_eq!(obs.activation, 5.0);
    }

    #[test]
    fn pose_outside_grid_is_rejected() {
        let world = open_world(50, 50);
        let err = raycast_observe(&world, &Pose::new(-1.0, 0.5, 0.0), &SensorConfig::default(), &mut substream(0, "s"));
        assert!(matches!(err, Err(Error::PoseOutOfBounds { .. })));
    }

    #[test]
    fn noise_is_clamped_and_deterministic() {
        let (world, pose) = wall_world();
        let cfg = SensorConfig { depth_noise_sigma: 3.0, ..SensorConfig::default() };
        let a = raycast_observe(&world, &pose, &cfg, &mut substream(4, "sensor")).unwrap();
        let b = raycast_observe(&world, &pose, &cfg, &mut substream(4, "sensor")).unwrap();
        assert_eq!(a, b);
        assert!(a.depth.iter().all(|&d| (0.0..=cfg.max_range).contains(&d)));
    }

    proptest! {
        #[test]
        fn adding_obstacles_never_increases_depth(
            seed in 0u64..50,
            extra in proptest::collection::vec((0usize..160, 0usize..160), 1..40),
            theta in -3.14f64..3.14,
        ) {
            let world = crate::world::generate_world(seed % 5, &crate::world::WorldParams::new(8.0, 2, 3)).unwrap();
            let pose = Pose::new(world.spawn_poses()[0].x, world.spawn_poses()[0].y, theta);
            let cfg = SensorConfig::default();
            let before = raycast_observe(&world, &pose, &cfg, &mut substream(0, "s")).unwrap();
            let mut occ = world.occupancy().to_vec();
            let spawn_cell = world.cell_of(pose.x, pose.y).unwrap();
            for (r, c) in extra {
                let near_spawn = r.abs_diff(spawn_cell.0) <= 3 && c.abs_diff(spawn_cell.1) <= 3;
                if !near_spawn && r < world.height() && c < world.width() {
                    occ[r * world.width() + c] = true;
                }
            }
            let denser = GridWorld::new("d", world.width(), world.height(), world.resolution(), occ,
                world.objects().to_vec(), vec![pose]).unwrap();
            {
                let after = raycast_observe(&denser, &pose, &cfg, &mut substream(0, "s")).unwrap();
                for (a, b) in after.depth.iter().zip(&before.depth) {
                    prop_assert!(a <= b);
                }
            }
            let area: f64 = before.visible.iter().map(|v| v.apparent_area).sum();
            prop_assert!(area <= 1.0 + 1e-12);
            prop_assert!(before.activation >= 4.0);
        }
    }
}
