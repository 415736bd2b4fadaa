//! 4-connected A* on the global map.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::Plan;
use crate::error::{Error, Result};
use crate::mapping::GlobalMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    /// Cells with an obstacle within this Chebyshev radius are blocked
    /// (except the start and goal cells).
    pub inflation: usize,
    /// Whether unexplored cells may be traversed.
    pub unknown_traversable: bool,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self { inflation: 0, unknown_traversable: true }
    }
}

/// Reusable search buffers. Entries are valid only when their stamp equals
/// the current generation, so nothing is cleared between searches.
#[derive(Debug, Clone, Default)]
pub struct Planner {
    size: usize,
    generation: u32,
    stamp: Vec<u32>,
    g: Vec<u32>,
    parent: Vec<u32>,
    closed: Vec<bool>,
    /// Inflation cache: 0 unknown, 1 free, 2 blocked (valid under `stamp`).
    blocked: Vec<u8>,
}

impl Planner {
    pub fn new() -> Self {
        Self::default()
    }

    fn reset(&mut self, size: usize) {
        if self.size != size {
            *self = Self {
                size,
                generation: 0,
                stamp: vec![0; size * size],
                g: vec![0; size * size],
                parent: vec![0; size * size],
                closed: vec![false; size * size],
                blocked: vec![0; size * size],
            };
        }
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.generation = 1;
        }
    }

    fn touch(&mut self, k: usize) {
        if self.stamp[k] != self.generation {
            self.stamp[k] = self.generation;
            self.g[k] = u32::MAX;
            self.closed[k] = false;
            self.blocked[k] = 0;
        }
    }

    fn is_blocked(&mut self, map: &GlobalMap, cfg: &PlannerConfig, k: usize) -> bool {
        self.touch(k);
        match self.blocked[k] {
            1 => return false,
            2 => return true,
            _ => {}
        }
        let blocked = cell_blocked(map, cfg, k);
        self.blocked[k] = if blocked { 2 } else { 1 };
        blocked
    }

    /// Cost-optimal path with ties broken by `(f, h, row-major index)`.
    pub fn plan(&mut self, map: &GlobalMap, start: (usize, usize), goal: (usize, usize), cfg: &PlannerConfig) -> Result<Plan> {
        let n = map.size();
        if start.0 >= n || start.1 >= n || goal.0 >= n || goal.1 >= n {
            return Err(Error::NoPath { start, goal });
        }
        self.reset(n);
        let s = start.0 * n + start.1;
        let t = goal.0 * n + goal.1;
        if map.is_obstacle_at(t) || (!cfg.unknown_traversable && !map.is_explored_at(t) && t != s) {
            return Err(Error::NoPath { start, goal });
        }
        let (lo_r, lo_c, hi_r, hi_c) = search_box(map, start, goal, cfg);
        let h = |k: usize| (k / n).abs_diff(goal.0) as u32 + (k % n).abs_diff(goal.1) as u32;
        let mut open = BinaryHeap::new();
        self.touch(s);
        self.g[s] = 0;
        self.parent[s] = s as u32;
        open.push(Reverse((h(s), h(s), s)));
        while let Some(Reverse((_, _, k))) = open.pop() {
            if self.closed[k] {
                continue;
            }
            self.closed[k] = true;
            if k == t {
                let mut cells = vec![(k / n, k % n)];
                let mut cur = k;
                while cur != s {
                    cur = self.parent[cur] as usize;
                    cells.push((cur / n, cur % n));
                }
                cells.reverse();
                let cost = (cells.len() - 1) as f64 * map.resolution();
                return Ok(Plan { cells, cost });
            }
            let (r, c) = (k / n, k % n);
            let gk = self.g[k];
            let neighbors = [
                (r > lo_r).then(|| k - n),
                (c > lo_c).then(|| k - 1),
                (c < hi_c).then(|| k + 1),
                (r < hi_r).then(|| k + n),
            ];
            for nk in neighbors.into_iter().flatten() {
                self.touch(nk);
                if self.closed[nk] || gk + 1 >= self.g[nk] {
                    continue;
                }
                if nk != t && self.is_blocked(map, cfg, nk) {
                    continue;
                }
                self.g[nk] = gk + 1;
                self.parent[nk] = k as u32;
                let hn = h(nk);
                open.push(Reverse((gk + 1 + hn, hn, nk)));
            }
        }
        Err(Error::NoPath { start, goal })
    }
}

/// Inclusive `(row0, col0, row1, col1)` window the search is confined to.
///
/// Outside the written part of the map every cell is unknown and free, so
/// clamping a path into the written box grown by `inflation + 1` never
/// lengthens it and never moves it onto a blocked cell: the window loses no
/// optimal path, and a failed search no longer floods the whole grid.
fn search_box(map: &GlobalMap, start: (usize, usize), goal: (usize, usize), cfg: &PlannerConfig) -> (usize, usize, usize, usize) {
    let n = map.size();
    let mut b = (start.0.min(goal.0), start.1.min(goal.1), start.0.max(goal.0), start.1.max(goal.1));
    if let Some(w) = map.written_bounds() {
        b = (b.0.min(w.row0), b.1.min(w.col0), b.2.max(w.row1), b.3.max(w.col1));
    }
    let m = cfg.inflation + 1;
    (b.0.saturating_sub(m), b.1.saturating_sub(m), (b.2 + m).min(n - 1), (b.3 + m).min(n - 1))
}

fn cell_blocked(map: &GlobalMap, cfg: &PlannerConfig, k: usize) -> bool {
    if map.is_obstacle_at(k) {
        return true;
    }
    if !cfg.unknown_traversable && !map.is_explored_at(k) {
        return true;
    }
    if cfg.inflation > 0 {
        let n = map.size();
        let (r, c) = (k / n, k % n);
        let rad = cfg.inflation;
        for rr in r.saturating_sub(rad)..=(r + rad).min(n - 1) {
            for cc in c.saturating_sub(rad)..=(c + rad).min(n - 1) {
                if map.is_obstacle_at(rr * n + cc) {
                    return true;
                }
            }
        }
    }
    false
}

/// A* with the default configuration: no inflation, unknown cells
/// traversable.
pub fn plan_path(map: &GlobalMap, start: (usize, usize), goal: (usize, usize)) -> Result<Plan> {
    Planner::new().plan(map, start, goal, &PlannerConfig::default())
}

/// Shortest 4-connected path length in meters over non-obstacle cells, or
/// `f64::INFINITY` when `b` cannot be reached from `a`.
pub fn geodesic_distance(map: &GlobalMap, a: (usize, usize), b: (usize, usize)) -> f64 {
    Planner::new().geodesic(map, a, b)
}

impl Planner {
    pub fn geodesic(&mut self, map: &GlobalMap, a: (usize, usize), b: (usize, usize)) -> f64 {
        match self.plan(map, a, b, &PlannerConfig::default()) {
            Ok(plan) => plan.cost,
            Err(_) => f64::INFINITY,
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use std::collections::VecDeque;

    pub fn grid_from_ascii(rows: &[&str], res: f64) -> GlobalMap {
        let n = rows.len();
        let mut map = GlobalMap::new(n, res);
        for (r, line) in rows.iter().enumerate() {
            for (c, ch) in line.chars().enumerate() {
                match ch {
                    '#' => map.set(r, c, 1.0, 1.0),
                    '.' => map.set(r, c, 0.0, 1.0),
                    _ => {}
                }
            }
        }
        map
    }

    /// Independent oracle: breadth-first search over non-obstacle cells.
    pub fn bfs_cells(map: &GlobalMap, a: (usize, usize), b: (usize, usize)) -> Option<usize> {
        let n = map.size();
        let mut dist = vec![usize::MAX; n * n];
        let mut queue = VecDeque::new();
        dist[a.0 * n + a.1] = 0;
        queue.push_back(a);
        while let Some((r, c)) = queue.pop_front() {
            if (r, c) == b {
                return Some(dist[r * n + c]);
            }
            let d = dist[r * n + c];
            for (dr, dc) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                if nr < 0 || nc < 0 || nr >= n as i64 || nc >= n as i64 {
                    continue;
                }
                let k = nr as usize * n + nc as usize;
                if dist[k] == usize::MAX && !map.is_obstacle_at(k) {
                    dist[k] = d + 1;
                    queue.push_back((nr as usize, nc as usize));
                }
            }
        }
        None
    }

    pub fn random_grid(seed: u64, n: usize, density: f64) -> GlobalMap {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut map = GlobalMap::new(n, 0.05);
        for r in 0..n {
            for c in 0..n {
                if rng.random::<f64>() < density {
                    map.set(r, c, 1.0, 1.0);
                }
            }
        }
        map
    }

    #[test]
    fn start_equals_goal() {
        let map = GlobalMap::new(5, 0.05);
        let plan = plan_path(&map, (2, 2), (2, 2)).unwrap();
        assert_eq!(plan.cells, vec![(2, 2)]);
        assert_eq!(plan.cost, 0.0);
    }

    #[test]
    fn empty_grid_corner_to_corner() {
        let map = GlobalMap::new(5, 0.05);
        let plan = plan_path(&map, (0, 0), (4, 4)).unwrap();
        assert_eq!(plan.cells.len(), 9);
        assert_eq!(plan.cost, 8.0 * 0.05);
        assert!(plan.is_valid(&map));
    }

    #[test]
    fn walled_off_goal_is_no_path() {
        let map = grid_from_ascii(&["..#..", "..#..", "..#..", "..#..", "..#.."], 0.05);
        assert!(matches!(plan_path(&map, (0, 0), (0, 4)), Err(Error::NoPath { .. })));
        assert_eq!(geodesic_distance(&map, (0, 0), (0, 4)), f64::INFINITY);
    }

    #[test]
    fn u_shaped_obstacle_geodesic() {
        let map = grid_from_ascii(
            &[
                ".........",
                ".#######.",
                ".......#.",
                ".......#.",
                ".......#.",
                ".......#.",
                ".......#.",
                ".#######.",
                ".........",
            ],
            0.05,
        );
        let (a, b) = ((4, 4), (4, 8));
        let geo = geodesic_distance(&map, a, b);
        let euclid = 4.0 * 0.05;
        assert!(geo > euclid);
        assert_eq!(geo, bfs_cells(&map, a, b).unwrap() as f64 * 0.05);
    }

    #[test]
    fn corridor_ten_cells() {
        let map = grid_from_ascii(&["###########", "...........", "###########", "           ", "           ", "           ", "           ", "           ", "           ", "           ", "           "], 0.05);
        assert_eq!(geodesic_distance(&map, (1, 0), (1, 10)), 10.0 * 0.05);
        assert_eq!(geodesic_distance(&map, (1, 3), (1, 3)), 0.0);
    }

    #[test]
    fn inflation_keeps_clear_of_walls() {
        let map = grid_from_ascii(
            &[
                "...........",
                "...........",
                "...........",
                "....###....",
                "...........",
                "...........",
                "...........",
                "...........",
                "...........",
                "...........",
                "...........",
            ],
            0.05,
        );
        let cfg = PlannerConfig { inflation: 2, unknown_traversable: true };
        let plan = Planner::new().plan(&map, (6, 5), (0, 5), &cfg).unwrap();
        for &(r, c) in &plan.cells[1..plan.cells.len() - 1] {
            let near = (r.saturating_sub(2)..=(r + 2).min(10)).any(|rr| (c.saturating_sub(2)..=(c + 2).min(10)).any(|cc| map.is_obstacle(rr, cc)));
            assert!(!near, "({r}, {c})");
        }
    }

    #[test]
    fn unknown_blocked_flag() {
        let mut map = GlobalMap::new(5, 0.05);
        for c in 0..5 {
            map.set(0, c, 0.0, 1.0);
        }
        let cfg = PlannerConfig { inflation: 0, unknown_traversable: false };
        assert!(Planner::new().plan(&map, (0, 0), (0, 4), &cfg).is_ok());
        assert!(Planner::new().plan(&map, (0, 0), (4, 4), &cfg).is_err());
    }

    #[test]
    fn buffers_are_reusable() {
        let mut planner = Planner::new();
        for seed in 0..20 {
            let map = random_grid(seed, 24, 0.25);
            if map.is_obstacle(0, 0) || map.is_obstacle(23, 23) {
                continue;
            }
            let fresh = plan_path(&map, (0, 0), (23, 23)).ok().map(|p| p.cells);
            let reused = planner.plan(&map, (0, 0), (23, 23), &PlannerConfig::default()).ok().map(|p| p.cells);
            assert_eq!(fresh, reused);
        }
    }

    /// Breadth-first search over the cells `cell_blocked` leaves open,
    /// without any search window.
    fn bfs_inflated(map: &GlobalMap, a: (usize, usize), b: (usize, usize), inflation: usize) -> Option<usize> {
        let n = map.size();
        let cfg = PlannerConfig { inflation, ..Default::default() };
        let mut dist = vec![usize::MAX; n * n];
        let mut queue = VecDeque::from([a]);
        dist[a.0 * n + a.1] = 0;
        while let Some((r, c)) = queue.pop_front() {
            if (r, c) == b {
                return Some(dist[r * n + c]);
            }
            for (nr, nc) in [(r.wrapping_sub(1), c), (r + 1, c), (r, c.wrapping_sub(1)), (r, c + 1)] {
                if nr >= n || nc >= n {
                    continue;
                }
                let k = nr * n + nc;
                if dist[k] == usize::MAX && ((nr, nc) == b || !cell_blocked(map, &cfg, k)) {
                    dist[k] = dist[r * n + c] + 1;
                    queue.push_back((nr, nc));
                }
            }
        }
        None
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn windowed_search_is_exact_around_a_small_written_patch(
            seed in 0u64..10_000,
            inflation in 0usize..3,
            a in (0usize..40, 0usize..40),
            b in (0usize..40, 0usize..40),
        ) {
            let patch = random_grid(seed, 10, 0.35);
            let mut map = GlobalMap::new(40, 0.05);
            for r in 0..10 {
                for c in 0..10 {
                    map.set(r + 15, c + 15, if patch.is_obstacle(r, c) { 1.0 } else { 0.0 }, 1.0);
                }
            }
            prop_assume!(!map.is_obstacle(a.0, a.1) && !map.is_obstacle(b.0, b.1));
            let cfg = PlannerConfig { inflation, ..Default::default() };
            let got = Planner::new().plan(&map, a, b, &cfg).ok().map(|p| p.cells.len() - 1);
            prop_assert_eq!(got, bfs_inflated(&map, a, b, inflation));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn astar_matches_bfs(seed in 0u64..10_000, n in 4usize..64) {
            let map = random_grid(seed, n, 0.3);
            let (a, b) = ((0, 0), (n - 1, n - 1));
            prop_assume!(!map.is_obstacle(a.0, a.1) && !map.is_obstacle(b.0, b.1));
            match (plan_path(&map, a, b), bfs_cells(&map, a, b)) {
                (Ok(plan), Some(d)) => {
                    prop_assert_eq!(plan.cost, d as f64 * 0.05);
                    prop_assert!(plan.is_valid(&map));
                }
                (Err(_), None) => {}
                (p, d) => prop_assert!(false, "planner {:?} vs oracle {:?}", p.map(|p| p.cost), d),
            }
        }
    }
}
