//! Hierarchical navigation: global goals, A* plans, local goals and the
//! reactive controller.

mod astar;
mod goal;
mod local;

use serde::{Deserialize, Serialize};

use crate::mapping::GlobalMap;

pub use astar::{geodesic_distance, plan_path, Planner, PlannerConfig};
pub use goal::{lattice_coords, select_global_goal, GoalConfig, GoalPotential, GoalSelection};
pub use local::{
    extract_local_goal, local_controller, nearest_plan_index, visible_local_goal, CENTER_CONE_DEG, FORWARD_CLEARANCE, HEADING_TOLERANCE_DEG,
    LOCAL_GOAL_DISTANCE,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalGoal {
    pub cell: (usize, usize),
    pub selected_at: u64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub cells: Vec<(usize, usize)>,
    /// Meters: `(len - 1) * resolution`.
    pub cost: f64,
}

impl Plan {
    /// Checks 4-adjacency, obstacle-freedom and the cost identity.
    pub fn is_valid(&self, map: &GlobalMap) -> bool {
        !self.cells.is_empty()
            && self.cells.windows(2).all(|w| w[0].0.abs_diff(w[1].0) + w[0].1.abs_diff(w[1].1) == 1)
            && self.cells.iter().all(|&(r, c)| !map.is_obstacle(r, c))
            && self.cost == (self.cells.len() - 1) as f64 * map.resolution()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalGoal {
    pub cell: (usize, usize),
    /// Episode-frame point, meters.
    pub world_point: (f64, f64),
}
