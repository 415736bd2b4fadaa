//! Ground-truth environment: occupancy grid, annotated objects, sensing and
//! action kinematics.
//!
//! World coordinates are meters with the origin at the outer corner of cell
//! `(0, 0)`. Column index grows with `x`, row index grows with `y`, so cell
//! `(row, col)` covers `x in [col * res, (col + 1) * res)` and
//! `y in [row * res, (row + 1) * res)`.

mod generate;
mod io;
mod sensor;

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use generate::{generate_world, WorldParams, DEFAULT_VOCABULARY};
pub use io::WORLD_FILE_VERSION;
pub use sensor::{compute_activation, raycast_observe, ActivationModel, Observation, SensorConfig, VisibleObject};

/// Map scale: one cell is 5 x 5 cm.
pub const DEFAULT_RESOLUTION: f64 = 0.05;
/// Radius of the agent's collision disc, meters.
pub const AGENT_RADIUS: f64 = 0.10;
/// Translation of a single forward action, meters.
pub const FORWARD_STEP: f64 = 0.25;
/// Rotation of a single turn action, degrees.
pub const TURN_DEGREES: f64 = 10.0;

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// Continuous planar pose. `theta` is kept wrapped to `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta: wrap_angle(theta) }
    }

    pub const fn origin() -> Self {
        Self { x: 0.0, y: 0.0, theta: 0.0 }
    }

    /// Pose moved `distance` meters along its heading.
    pub fn advanced(&self, distance: f64) -> Self {
        let (s, c) = self.theta.sin_cos();
        Self { x: self.x + distance * c, y: self.y + distance * s, theta: self.theta }
    }

    pub fn rotated(&self, dtheta: f64) -> Self {
        Self::new(self.x, self.y, self.theta + dtheta)
    }

    /// Maps a point expressed in this pose's frame (x forward, y left) to the
    /// parent frame.
    pub fn transform_point(&self, p: (f64, f64)) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        (self.x + c * p.0 - s * p.1, self.y + s * p.0 + c * p.1)
    }

    /// Inverse of [`Pose::transform_point`].
    pub fn inverse_transform_point(&self, p: (f64, f64)) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        let (dx, dy) = (p.0 - self.x, p.1 - self.y);
        (c * dx + s * dy, -s * dx + c * dy)
    }

    /// Composition `self ⊕ other`, with `other` expressed in this pose's frame.
    pub fn compose(&self, other: &Pose) -> Pose {
        let (x, y) = self.transform_point((other.x, other.y));
        Pose::new(x, y, self.theta + other.theta)
    }

    /// Expresses `other` (given in the parent frame) in this pose's frame.
    pub fn relative(&self, other: &Pose) -> Pose {
        let (x, y) = self.inverse_transform_point((other.x, other.y));
        Pose::new(x, y, other.theta - self.theta)
    }

    pub fn distance_to(&self, other: &Pose) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Atomic actions: forward 0.25 m, turn left or right 10°.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Forward,
    TurnLeft,
    TurnRight,
}

impl Action {
    pub const ALL: [Action; 3] = [Action::Forward, Action::TurnLeft, Action::TurnRight];

    /// Ideal displacement in the agent frame `(forward, left, dtheta)`.
    pub fn nominal_delta(self) -> (f64, f64, f64) {
        match self {
            Action::Forward => (FORWARD_STEP, 0.0, 0.0),
            Action::TurnLeft => (0.0, 0.0, TURN_DEGREES.to_radians()),
            Action::TurnRight => (0.0, 0.0, -TURN_DEGREES.to_radians()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: u32,
    pub category: String,
    /// `(row, col)` cells, sorted.
    pub cells: Vec<(usize, usize)>,
    pub salience: f64,
}

const NO_OBJECT: u32 = u32::MAX;

/// Immutable ground-truth environment.
#[derive(Debug, Clone, PartialEq)]
pub struct GridWorld {
    name: String,
    width: usize,
    height: usize,
    resolution: f64,
    /// Row-major, `true` = obstacle.
    occupancy: Vec<bool>,
    objects: Vec<SceneObject>,
    spawn_poses: Vec<Pose>,
    object_at: Vec<u32>,
}

impl GridWorld {
    /// Builds and validates a world.
    pub fn new(
        name: impl Into<String>,
        width: usize,
        height: usize,
        resolution: f64,
        occupancy: Vec<bool>,
        mut objects: Vec<SceneObject>,
        spawn_poses: Vec<Pose>,
    ) -> Result<Self> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::InvalidWorld(format!("resolution must be positive, got {resolution}")));
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidWorld("empty grid".into()));
        }
        if occupancy.len() != width * height {
            return Err(Error::InvalidWorld(format!(
                "occupancy has {} cells, expected {}",
                occupancy.len(),
                width * height
            )));
        }
        let mut object_at = vec![NO_OBJECT; width * height];
        for (index, obj) in objects.iter_mut().enumerate() {
            if obj.cells.is_empty() {
                return Err(Error::InvalidWorld(format!("object {} has no cells", obj.id)));
            }
            if obj.category.trim().is_empty() {
                return Err(Error::InvalidWorld(format!("object {} has an empty category", obj.id)));
            }
            if !(0.0..=1.0).contains(&obj.salience) {
                return Err(Error::InvalidWorld(format!("object {} salience {} outside [0, 1]", obj.id, obj.salience)));
            }
            obj.cells.sort_unstable();
            obj.cells.dedup();
            for &(r, c) in &obj.cells {
                if r >= height || c >= width {
                    return Err(Error::InvalidWorld(format!("object {} cell ({r}, {c}) outside grid", obj.id)));
                }
                let i = r * width + c;
                if !occupancy[i] {
                    return Err(Error::InvalidWorld(format!("object {} cell ({r}, {c}) is not an obstacle", obj.id)));
                }
                if object_at[i] != NO_OBJECT {
                    return Err(Error::InvalidWorld(format!("cell ({r}, {c}) claimed by two objects")));
                }
                object_at[i] = index as u32;
            }
        }
        let world = Self {
            name: name.into(),
            width,
            height,
            resolution,
            occupancy,
            objects,
            spawn_poses,
            object_at,
        };
        let Some(spawn) = world.spawn_poses.first() else {
            return Err(Error::InvalidWorld("no spawn pose".into()));
        };
        if !world.disc_clear(spawn.x, spawn.y, AGENT_RADIUS) {
            return Err(Error::InvalidWorld("spawn pose lacks agent-radius clearance".into()));
        }
        Ok(world)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn objects(&self) -> &[SceneObject] {
        &self.objects
    }

    pub fn spawn_poses(&self) -> &[Pose] {
        &self.spawn_poses
    }

    pub fn occupancy(&self) -> &[bool] {
        &self.occupancy
    }

    pub fn in_bounds(&self, row: i64, col: i64) -> bool {
        row >= 0 && col >= 0 && (row as usize) < self.height && (col as usize) < self.width
    }

    /// Out-of-bounds cells count as obstacles.
    pub fn is_obstacle(&self, row: i64, col: i64) -> bool {
        !self.in_bounds(row, col) || self.occupancy[row as usize * self.width + col as usize]
    }

    pub fn object_at(&self, row: usize, col: usize) -> Option<&SceneObject> {
        match self.object_at[row * self.width + col] {
            NO_OBJECT => None,
            i => Some(&self.objects[i as usize]),
        }
    }

    pub fn object_by_id(&self, id: u32) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    /// Cell containing a world point, if inside the grid.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let col = (x / self.resolution).floor();
        let row = (y / self.resolution).floor();
        if row < 0.0 || col < 0.0 || row >= self.height as f64 || col >= self.width as f64 {
            return None;
        }
        Some((row as usize, col as usize))
    }

    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        ((col as f64 + 0.5) * self.resolution, (row as f64 + 0.5) * self.resolution)
    }

    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        self.cell_of(x, y).is_some()
    }

    /// True when a disc of `radius` meters centered at `(x, y)` overlaps no
    /// obstacle cell and stays inside the grid.
    pub fn disc_clear(&self, x: f64, y: f64, radius: f64) -> bool {
        let cx = x / self.resolution;
        let cy = y / self.resolution;
        let rr = radius / self.resolution;
        let c0 = (cx - rr).floor() as i64;
        let c1 = (cx + rr).floor() as i64;
        let r0 = (cy - rr).floor() as i64;
        let r1 = (cy + rr).floor() as i64;
        if !self.in_bounds(r0, c0) || !self.in_bounds(r1, c1) {
            return false;
        }
        for row in r0..=r1 {
            for col in c0..=c1 {
                if !self.occupancy[row as usize * self.width + col as usize] {
                    continue;
                }
                let nx = cx.clamp(col as f64, col as f64 + 1.0) - cx;
                let ny = cy.clamp(row as f64, row as f64 + 1.0) - cy;
                if nx * nx + ny * ny < rr * rr {
                    return false;
                }
            }
        }
        true
    }

    /// Free cells 4-connected to the cell containing `from`, row-major mask.
    pub fn reachable_free(&self, from: &Pose) -> Vec<bool> {
        let mut mask = vec![false; self.width * self.height];
        let Some((r, c)) = self.cell_of(from.x, from.y) else {
            return mask;
        };
        if self.occupancy[r * self.width + c] {
            return mask;
        }
        let mut stack = vec![(r, c)];
        mask[r * self.width + c] = true;
        while let Some((r, c)) = stack.pop() {
            let neighbors = [
                (r.wrapping_sub(1), c),
                (r + 1, c),
                (r, c.wrapping_sub(1)),
                (r, c + 1),
            ];
            for (nr, nc) in neighbors {
                if nr >= self.height || nc >= self.width {
                    continue;
                }
                let i = nr * self.width + nc;
                if !self.occupancy[i] && !mask[i] {
                    mask[i] = true;
                    stack.push((nr, nc));
                }
            }
        }
        mask
    }

    /// Number of reachable free cells from the first spawn pose.
    pub fn reachable_free_cells(&self) -> usize {
        self.reachable_free(&self.spawn_poses[0]).iter().filter(|&&b| b).count()
    }

    /// Distinct object categories, sorted.
    pub fn categories(&self) -> Vec<String> {
        let mut cats: Vec<String> = self.objects.iter().map(|o| o.category.clone()).collect();
        cats.sort();
        cats.dedup();
        cats
    }
}

/// Executes one atomic action.
///
/// Turns always succeed. A forward move is rejected (pose unchanged,
/// `collided = true`) when the agent disc would overlap an obstacle or leave
/// the grid at the target or anywhere along the 0.25 m sweep, sampled every
/// 5 cm.
pub fn apply_action(world: &GridWorld, pose: &Pose, action: Action) -> (Pose, bool) {
    match action {
        Action::TurnLeft => (pose.rotated(TURN_DEGREES.to_radians()), false),
        Action::TurnRight => (pose.rotated(-TURN_DEGREES.to_radians()), false),
        Action::Forward => {
            const SAMPLES: usize = 5;
            for k in 1..=SAMPLES {
                let p = pose.advanced(FORWARD_STEP * k as f64 / SAMPLES as f64);
                if !world.disc_clear(p.x, p.y, AGENT_RADIUS) {
                    return (*pose, true);
                }
            }
            (pose.advanced(FORWARD_STEP), false)
        }
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert_eq!(wrap_angle(0.0), 0.0);
    }

    #[test]
    fn advancing_from_origin() {
        let p = Pose::origin().advanced(FORWARD_STEP);
        assert_eq!((p.x, p.y, p.theta), (0.25, 0.0, 0.0));
    }

    #[test]
    fn forward_in_open_space() {
        let world = open_world(200, 200);
        let start = Pose::new(5.0, 5.0, 0.0);
        let (p, collided) = apply_action(&world, &start, Action::Forward);
        assert!(!collided);
        assert_eq!((p.x, p.y, p.theta), (5.25, 5.0, 0.0));
    }

    #[test]
    fn thirty_six_left_turns_close_the_circle() {
        let world = open_world(200, 200);
        let mut p = Pose::new(5.0, 5.0, 0.0);
        for _ in 0..36 {
            let (next, collided) = apply_action(&world, &p, Action::TurnLeft);
            assert!(!collided);
            p = next;
        }
        assert_eq!((p.x, p.y), (5.0, 5.0));
        assert!(p.theta.abs() < 1e-12, "theta = {}", p.theta);
    }

    #[test]
    fn wall_ahead_blocks_forward() {
        // Wall face at x = 5.2; the agent at x = 5.0 has 0.2 m of room.
        let (w, h) = (200, 200);
        let mut occ = walled_room(w, h, DEFAULT_RESOLUTION);
        for r in 0..h {
            occ[r * w + 104] = true;
        }
        let spawn = Pose::new(3.0, 5.0, 0.0);
        let world = GridWorld::new("wall", w, h, DEFAULT_RESOLUTION, occ, vec![], vec![spawn]).unwrap();
        let start = Pose::new(5.0, 5.0, 0.0);
        // Clearance oracle: target disc reaches x = 5.35 > 5.2.
        assert!(!world.disc_clear(5.25, 5.0, AGENT_RADIUS));
        let (p, collided) = apply_action(&world, &start, Action::Forward);
        assert!(collided);
        assert_eq!(p, start);
    }

    #[test]
    fn world_rejects_invalid_objects_and_spawns() {
        let occ = walled_room(20, 20, DEFAULT_RESOLUTION);
        let spawn = Pose::new(0.5, 0.5, 0.0);
        let bad_obj = SceneObject { id: 0, category: "chair".into(), cells: vec![(5, 5)], salience: 1.0 };
        assert!(GridWorld::new("w", 20, 20, 0.05, occ.clone(), vec![bad_obj], vec![spawn]).is_err());
        let wall_spawn = Pose::new(0.01, 0.01, 0.0);
        assert!(GridWorld::new("w", 20, 20, 0.05, occ.clone(), vec![], vec![wall_spawn]).is_err());
        assert!(GridWorld::new("w", 20, 20, 0.05, occ.clone(), vec![], vec![]).is_err());
        assert!(GridWorld::new("w", 20, 20, 0.0, occ, vec![], vec![spawn]).is_err());
    }

    proptest! {
        #[test]
        fn left_then_right_is_identity(x in 0.3f64..9.0, y in 0.3f64..9.0, theta in -PI..PI) {
            let world = open_world(200, 200);
            let p = Pose::new(x, y, theta);
            let (a, _) = apply_action(&world, &p, Action::TurnLeft);
            let (b, _) = apply_action(&world, &a, Action::TurnRight);
            prop_assert_eq!((b.x, b.y), (p.x, p.y));
            prop_assert!(wrap_angle(b.theta - p.theta).abs() < 1e-12);
        }

        #[test]
        fn agent_disc_never_overlaps_obstacles(actions in proptest::collection::vec(0usize..3, 1..200)) {
            let world = crate::world::generate_world(3, &WorldParams::new(8.0, 2, 4)).unwrap();
            let mut pose = world.spawn_poses()[0];
            for a in actions {
                let (next, _) = apply_action(&world, &pose, Action::ALL[a]);
                pose = next;
                prop_assert!(world.disc_clear(pose.x, pose.y, AGENT_RADIUS));
            }
        }

        #[test]
        fn compose_and_relative_are_inverse(
            ax in -5.0f64..5.0, ay in -5.0f64..5.0, at in -PI..PI,
            bx in -5.0f64..5.0, by in -5.0f64..5.0, bt in -PI..PI,
        ) {
            let a = Pose::new(ax, ay, at);
            let b = Pose::new(bx, by, bt);
            let back = a.compose(&a.relative(&b));
            prop_assert!((back.x - b.x).abs() < 1e-9 && (back.y - b.y).abs() < 1e-9);
            prop_assert!(wrap_angle(back.theta - b.theta).abs() < 1e-9);
        }
    }
}
