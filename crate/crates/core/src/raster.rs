//! Grid traversal shared by the sensor and the mapper.

/// Amanatides-Woo traversal of a unit grid.
///
/// Cell `(ix, iy)` spans `[ix, ix + 1) x [iy, iy + 1)` in grid units. The
/// iterator is unbounded; callers stop once `t_enter` passes their range.
/// Yields `(ix, iy, t_enter, t_exit)` with distances in grid units along the
/// (unit-length) direction.
#[derive(Debug, Clone)]
pub struct GridRay {
    ix: i64,
    iy: i64,
    step_x: i64,
    step_y: i64,
    t_max_x: f64,
    t_max_y: f64,
    t_delta_x: f64,
    t_delta_y: f64,
    t: f64,
}

impl GridRay {
    pub fn new(origin: (f64, f64), dir: (f64, f64)) -> Self {
        let (ox, oy) = origin;
        let (dx, dy) = dir;
        let ix = ox.floor() as i64;
        let iy = oy.floor() as i64;
        let (step_x, t_max_x, t_delta_x) = axis_setup(ox, dx);
        let (step_y, t_max_y, t_delta_y) = axis_setup(oy, dy);
        Self {
            ix,
            iy,
            step_x,
            step_y,
            t_max_x,
            t_max_y,
            t_delta_x,
            t_delta_y,
            t: 0.0,
        }
    }
}

fn axis_setup(o: f64, d: f64) -> (i64, f64, f64) {
    if d > 0.0 {
        (1, (o.floor() + 1.0 - o) / d, 1.0 / d)
    } else if d < 0.0 {
        (-1, (o - o.floor()) / -d, -1.0 / d)
    } else {
        (0, f64::INFINITY, f64::INFINITY)
    }
}

impl Iterator for GridRay {
    type Item = (i64, i64, f64, f64);

    fn next(&mut self) -> Option<Self::Item> {
        let enter = self.t;
        let cell = (self.ix, self.iy);
        let exit;
        if self.t_max_x < self.t_max_y {
            exit = self.t_max_x;
            self.ix += self.step_x;
            self.t_max_x += self.t_delta_x;
        } else {
            exit = self.t_max_y;
            self.iy += self.step_y;
            self.t_max_y += self.t_delta_y;
        }
        self.t = exit;
        Some((cell.0, cell.1, enter, exit))
    }
}
