//! Geometric depth-to-local-map projection.

use rand::Rng;

use super::LocalMap;
use crate::raster::GridRay;
use crate::world::{Observation, SensorConfig};

/// Nudge used to place a hit point strictly inside the struck cell.
const HIT_EPS: f64 = 1e-9;

/// Precomputed polar geometry for a fixed map size, resolution and sensor.
///
/// Cells inside the field of view are filled by comparing their range to
/// the depth of the nearest ray; each ray is then walked cell by cell so the
/// traversed cells are free even where the nearest-ray test disagrees, and
/// the struck cell is marked occupied.
#[derive(Debug, Clone)]
pub struct LocalMapper {
    size: usize,
    resolution: f64,
    n_rays: usize,
    max_range: f64,
    /// `(cell index, range in meters, nearest ray)` for cells in the wedge.
    wedge: Vec<(u32, f32, u16)>,
    /// Direction of each ray in continuous map coordinates `(col, row)`.
    ray_dirs: Vec<(f64, f64)>,
}

impl LocalMapper {
    pub fn new(size: usize, resolution: f64, cfg: &SensorConfig) -> Self {
        assert!(size >= 3 && size % 2 == 1, "local map size must be odd and >= 3");
        let probe = LocalMap::empty(size, resolution);
        let half_fov = cfg.fov.to_radians() / 2.0;
        let n = cfg.n_rays;
        let mut wedge = Vec::new();
        for i in 0..size {
            for j in 0..size {
                let (f, l) = probe.cell_to_agent(i, j);
                let range = f.hypot(l);
                if range > cfg.max_range {
                    continue;
                }
                let bearing = l.atan2(f);
                if range > 0.0 && bearing.abs() > half_fov + 1e-12 {
                    continue;
                }
                let ray = if n == 1 {
                    0
                } else {
                    (((bearing / (2.0 * half_fov)) + 0.5) * (n - 1) as f64).round().clamp(0.0, (n - 1) as f64) as usize
                };
                wedge.push(((i * size + j) as u32, range as f32, ray as u16));
            }
        }
        let ray_dirs = (0..n)
            .map(|k| {
                let b = if n == 1 { 0.0 } else { cfg.ray_offset(k) };
                (-b.sin(), -b.cos())
            })
            .collect();
        Self { size, resolution, n_rays: n, max_range: cfg.max_range, wedge, ray_dirs }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    fn origin(&self) -> (f64, f64) {
        ((self.size - 1) as f64 / 2.0 + 0.5, self.size as f64 - 0.5)
    }

    pub fn build(&self, obs: &Observation) -> LocalMap {
        assert_eq!(obs.depth.len(), self.n_rays, "observation ray count does not match the mapper");
        let mut map = LocalMap::empty(self.size, self.resolution);
        for &(k, range, ray) in &self.wedge {
            if (range as f64) < obs.depth[ray as usize] {
                map.explored[k as usize] = 1.0;
            }
        }
        let origin = self.origin();
        let n = self.size as i64;
        let mut hits = Vec::new();
        for (k, &dir) in self.ray_dirs.iter().enumerate() {
            let d = obs.depth[k];
            let hit = d < self.max_range;
            let d_cells = d / self.resolution;
            let hit_cell = if hit {
                let t = d_cells + HIT_EPS;
                let hx = (origin.0 + dir.0 * t).floor() as i64;
                let hy = (origin.1 + dir.1 * t).floor() as i64;
                Some((hx, hy))
            } else {
                None
            };
            for (ix, iy, t_enter, _) in GridRay::new(origin, dir) {
                if t_enter >= d_cells || Some((ix, iy)) == hit_cell {
                    break;
                }
                if ix < 0 || iy < 0 || ix >= n || iy >= n {
                    break;
                }
                map.explored[(iy * n + ix) as usize] = 1.0;
            }
            if let Some((hx, hy)) = hit_cell {
                if hx >= 0 && hy >= 0 && hx < n && hy < n {
                    hits.push((hy * n + hx) as usize);
                }
            }
        }
        for k in hits {
            map.occupied[k] = 1.0;
            map.explored[k] = 1.0;
        }
        map
    }

    /// Like [`LocalMapper::build`], then flips the occupancy of each explored
    /// cell with probability `p`.
    pub fn build_noisy<R: Rng + ?Sized>(&self, obs: &Observation, p: f64, rng: &mut R) -> LocalMap {
        let mut map = self.build(obs);
        if p > 0.0 {
            for k in 0..map.occupied.len() {
                if map.explored[k] > 0.0 && rng.random::<f64>() < p {
                    map.occupied[k] = 1.0 - map.occupied[k];
                }
            }
        }
        map
    }
}

/// One-shot projection with the default local map size. Callers that map
/// every step should keep a [`LocalMapper`] instead.
pub fn local_map_from_depth(obs: &Observation, cfg: &SensorConfig, resolution: f64) -> LocalMap {
    LocalMapper::new(super::DEFAULT_LOCAL_SIZE, resolution, cfg).build(obs)
}
