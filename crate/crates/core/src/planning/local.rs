//! Local-goal extraction and the reactive controller.

use super::{LocalGoal, Plan};
use crate::mapping::GlobalMap;
use crate::world::{wrap_angle, Action, Observation, Pose, SensorConfig};

/// Along-path horizon of the local goal, meters.
pub const LOCAL_GOAL_DISTANCE: f64 = 1.25;
/// Heading error above which the controller turns in place.
pub const HEADING_TOLERANCE_DEG: f64 = 10.0;
/// Rays within this bearing of the heading gate forward motion.
pub const CENTER_CONE_DEG: f64 = 15.0;
/// Minimum center-cone depth for a forward step, meters.
pub const FORWARD_CLEARANCE: f64 = 0.35;

/// Index of the plan cell nearest to `pose` (ties: earliest).
pub fn nearest_plan_index(plan: &Plan, map: &GlobalMap, pose: &Pose) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (i, &(r, c)) in plan.cells.iter().enumerate() {
        let (x, y) = map.cell_center(r, c);
        let d = (x - pose.x).hypot(y - pose.y);
        if d < best.0 {
            best = (d, i);
        }
    }
    best.1
}

/// Farthest plan cell whose along-path distance from the plan cell nearest
/// to the agent is at most 1.25 m.
pub fn extract_local_goal(plan: &Plan, map: &GlobalMap, est: &Pose) -> LocalGoal {
    assert!(!plan.cells.is_empty(), "empty plan");
    let start = nearest_plan_index(plan, map, est);
    let steps = ((LOCAL_GOAL_DISTANCE / map.resolution()) + 1e-9).floor() as usize;
    let idx = (start + steps).min(plan.cells.len() - 1);
    let cell = plan.cells[idx];
    LocalGoal { cell, world_point: map.cell_center(cell.0, cell.1) }
}

/// Pulls a local goal back along the plan until the straight segment from
/// the agent keeps `clearance` cells (Chebyshev) away from mapped
/// obstacles, so heading at it does not cut wall corners. Falls back to
/// the plan cell nearest the agent's next one.
pub fn visible_local_goal(plan: &Plan, map: &GlobalMap, est: &Pose, goal: LocalGoal, clearance: usize) -> LocalGoal {
    let start = nearest_plan_index(plan, map, est);
    let Some(end) = plan.cells.iter().position(|&c| c == goal.cell) else {
        return goal;
    };
    for idx in (start.min(end)..=end).rev() {
        let cell = plan.cells[idx];
        let point = map.cell_center(cell.0, cell.1);
        if segment_clear(map, (est.x, est.y), point, clearance) {
            return LocalGoal { cell, world_point: point };
        }
    }
    let cell = plan.cells[(start + 1).min(plan.cells.len() - 1)];
    LocalGoal { cell, world_point: map.cell_center(cell.0, cell.1) }
}

fn segment_clear(map: &GlobalMap, a: (f64, f64), b: (f64, f64), clearance: usize) -> bool {
    let res = map.resolution();
    let len = (b.0 - a.0).hypot(b.1 - a.1);
    let samples = (2.0 * len / res).ceil().max(1.0) as usize;
    let r = clearance as i64;
    (0..=samples).all(|k| {
        let f = k as f64 / samples as f64;
        let Some((row, col)) = map.cell_of(a.0 + f * (b.0 - a.0), a.1 + f * (b.1 - a.1)) else {
            return false;
        };
        (-r..=r).all(|dr| {
            (-r..=r).all(|dc| {
                let (rr, cc) = (row as i64 + dr, col as i64 + dc);
                !map.in_bounds(rr, cc) || !map.is_obstacle(rr as usize, cc as usize)
            })
        })
    })
}

/// Reactive policy: turn toward the local goal when the heading error
/// exceeds 10 degrees, otherwise step forward if the center cone is clear,
/// otherwise turn toward the deeper side.
pub fn local_controller(est: &Pose, goal: &LocalGoal, obs: &Observation, sensor: &SensorConfig) -> Action {
    let (dx, dy) = (goal.world_point.0 - est.x, goal.world_point.1 - est.y);
    let error = if dx == 0.0 && dy == 0.0 { 0.0 } else { wrap_angle(dy.atan2(dx) - est.theta) };
    if error.abs() > HEADING_TOLERANCE_DEG.to_radians() {
        return if error > 0.0 || error == std::f64::consts::PI { Action::TurnLeft } else { Action::TurnRight };
    }
    let cone = CENTER_CONE_DEG.to_radians();
    let mut clearance = f64::INFINITY;
    let (mut left, mut nl, mut right, mut nr) = (0.0, 0usize, 0.0, 0usize);
    for (i, &d) in obs.depth.iter().enumerate() {
        let b = sensor.ray_offset(i);
        if b.abs() <= cone + 1e-12 {
            clearance = clearance.min(d);
        }
        if b > 0.0 {
            left += d;
            nl += 1;
        } else if b < 0.0 {
            right += d;
            nr += 1;
        }
    }
    if clearance >= FORWARD_CLEARANCE {
        return Action::Forward;
    }
    let mean = |s: f64, k: usize| if k == 0 { 0.0 } else { s / k as f64 };
    if mean(right, nr) > mean(left, nl) {
        Action::TurnRight
    } else {
        Action::TurnLeft
    }
}
