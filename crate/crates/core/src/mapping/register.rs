//! Moving-average registration of local maps into the global map.

use serde::{Deserialize, Serialize};

use super::{GlobalMap, LocalMap};
use crate::error::{Error, Result};
use crate::world::Pose;

/// Weight of the incoming local map in the occupancy moving average.
pub const MOVING_AVERAGE_BETA: f32 = 0.5;

/// Inclusive rectangle of global map cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellRect {
    pub row0: usize,
    pub col0: usize,
    pub row1: usize,
    pub col1: usize,
}

impl CellRect {
    pub fn union(self, other: CellRect) -> CellRect {
        CellRect {
            row0: self.row0.min(other.row0),
            col0: self.col0.min(other.col0),
            row1: self.row1.max(other.row1),
            col1: self.col1.max(other.col1),
        }
    }

    pub fn cells(&self) -> usize {
        (self.row1 + 1 - self.row0) * (self.col1 + 1 - self.col0)
    }
}

/// Global cells a registration of `local` at `est` may touch, or `None`
/// when the local map has no explored cells.
pub fn registration_footprint(global: &GlobalMap, local: &LocalMap, est: &Pose) -> Result<Option<CellRect>> {
    if (global.resolution() - local.resolution()).abs() > 1e-12 {
        return Err(Error::DimensionMismatch(format!(
            "global resolution {} vs local resolution {}",
            global.resolution(),
            local.resolution()
        )));
    }
    let Some((i0, j0, i1, j1)) = local.explored_bounds() else {
        return Ok(None);
    };
    let res = global.resolution();
    let center = global.center() as f64;
    let (mut xmin, mut ymin, mut xmax, mut ymax) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for (i, j) in [(i0 as f64 - 1.0, j0 as f64 - 1.0), (i0 as f64 - 1.0, j1 as f64 + 1.0), (i1 as f64 + 1.0, j0 as f64 - 1.0), (i1 as f64 + 1.0, j1 as f64 + 1.0)] {
        let f = ((local.size() - 1) as f64 - i) * res;
        let l = (local.center_col() as f64 - j) * res;
        let (x, y) = est.transform_point((f, l));
        xmin = xmin.min(x);
        xmax = xmax.max(x);
        ymin = ymin.min(y);
        ymax = ymax.max(y);
    }
    let col0 = (center + xmin / res).floor();
    let col1 = (center + xmax / res).ceil();
    let row0 = (center + ymin / res).floor();
    let row1 = (center + ymax / res).ceil();
    let m = global.size() as f64;
    if !(col0 >= 0.0 && row0 >= 0.0 && col1 < m && row1 < m) {
        return Err(Error::FootprintOutOfBounds);
    }
    Ok(Some(CellRect { row0: row0 as usize, col0: col0 as usize, row1: row1 as usize, col1: col1 as usize }))
}

/// Rototranslates `local` by the estimated pose (bilinear resampling) and
/// blends it into `global` on every cell where the resampled explored value
/// is positive. Returns the rectangle that may have changed, or `None` when
/// the local map has no explored cells.
pub fn register_local_map(global: &mut GlobalMap, local: &LocalMap, est: &Pose) -> Result<Option<CellRect>> {
    let Some(rect) = registration_footprint(global, local, est)? else {
        return Ok(None);
    };
    let res = global.resolution();
    let center = global.center() as f64;
    let (s, c) = est.theta.sin_cos();
    let li = (local.size() - 1) as f64;
    let lj = local.center_col() as f64;
    let beta = MOVING_AVERAGE_BETA;
    for row in rect.row0..=rect.row1 {
        let y = (row as f64 - center) * res - est.y;
        for col in rect.col0..=rect.col1 {
            let x = (col as f64 - center) * res - est.x;
            let f = c * x + s * y;
            let l = -s * x + c * y;
            let (occ, exp) = local.sample(li - f / res, lj - l / res);
            if exp > 0.0 {
                let k = global.index(row, col);
                global.occupied[k] = (1.0 - beta) * global.occupied[k] + beta * occ;
                global.explored[k] = global.explored[k].max(exp);
            }
        }
    }
    global.mark_written(rect);
    Ok(Some(rect))
}
