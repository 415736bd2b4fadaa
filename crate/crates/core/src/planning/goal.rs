//! Greedy global-goal selection over the candidate lattice.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::GlobalGoal;
use crate::mapping::GlobalMap;
use crate::rewards::{PseudoCountGrid, RewardKind};
use crate::world::Pose;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GoalConfig {
    /// Lattice side `G`; candidates are the centers of a `G x G` lattice.
    pub grid: usize,
    /// Radius of the unexplored-cell count, meters.
    pub radius: f64,
    /// A candidate must lie within this distance (box) of a frontier cell.
    pub frontier_radius: f64,
    /// A candidate must have no obstacle within this many cells (box).
    pub clearance_cells: usize,
    /// Distance scale of the curiosity discount, meters.
    pub discount_distance: f64,
    /// Blacklisted goals suppress candidates within this many cells.
    pub blacklist_cells: usize,
}

impl Default for GoalConfig {
    fn default() -> Self {
        Self { grid: 240, radius: 2.0, frontier_radius: 0.5, clearance_cells: 2, discount_distance: 10.0, blacklist_cells: 5 }
    }
}

/// Per-reward scoring rule for candidates.
#[derive(Debug, Clone, Copy)]
pub enum GoalPotential<'a> {
    /// Unexplored cells within the radius (coverage, anticipation).
    Unexplored,
    /// Unexplored count divided by the square root of the candidate's grid
    /// pseudo-count (floored at 1).
    Impact(&'a PseudoCountGrid),
    /// Unexplored count discounted by `exp(-geodesic / discount_distance)`.
    Curiosity,
}

impl<'a> GoalPotential<'a> {
    /// Both impact variants score goals with grid counts.
    pub fn for_reward(kind: RewardKind, counts: &'a PseudoCountGrid) -> Self {
        match kind {
            RewardKind::Coverage | RewardKind::Anticipation => GoalPotential::Unexplored,
            RewardKind::ImpactGrid | RewardKind::ImpactDme => GoalPotential::Impact(counts),
            RewardKind::Curiosity => GoalPotential::Curiosity,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoalSelection {
    pub goal: Option<GlobalGoal>,
    /// The nearest-frontier fallback was used.
    pub fallback: bool,
    /// No frontier is reachable: nothing left to explore.
    pub fully_explored: bool,
}

/// Lattice coordinates `floor((a + 0.5) * M / G)`, deduplicated.
pub fn lattice_coords(m: usize, g: usize) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::with_capacity(g);
    for a in 0..g {
        let v = ((a as f64 + 0.5) * m as f64 / g as f64).floor() as usize;
        if out.last() != Some(&v) {
            out.push(v.min(m - 1));
        }
    }
    out
}

/// Rectangle of the map that goal selection works in. Outside the written
/// part of the map every cell is unexplored and obstacle-free, so growing
/// that part by the widest query radius loses nothing.
#[derive(Debug, Clone, Copy)]
struct Window {
    r0: usize,
    c0: usize,
    h: usize,
    w: usize,
}

impl Window {
    #[cfg(test)]
    fn full(n: usize) -> Self {
        Self { r0: 0, c0: 0, h: n, w: n }
    }

    fn around_written(map: &GlobalMap, agent: (usize, usize), margin: usize) -> Self {
        let n = map.size();
        let (mut r0, mut c0, mut r1, mut c1) = (agent.0, agent.1, agent.0, agent.1);
        if let Some(b) = map.written_bounds() {
            (r0, c0, r1, c1) = (r0.min(b.row0), c0.min(b.col0), r1.max(b.row1), c1.max(b.col1));
        }
        let (r0, c0) = (r0.saturating_sub(margin), c0.saturating_sub(margin));
        let (r1, c1) = ((r1 + margin).min(n - 1), (c1 + margin).min(n - 1));
        Self { r0, c0, h: r1 - r0 + 1, w: c1 - c0 + 1 }
    }

    fn contains(&self, r: usize, c: usize) -> bool {
        r >= self.r0 && c >= self.c0 && r < self.r0 + self.h && c < self.c0 + self.w
    }

    /// Window-local index of a global cell inside the window.
    fn local(&self, r: usize, c: usize) -> usize {
        (r - self.r0) * self.w + (c - self.c0)
    }

    fn global(&self, l: usize) -> (usize, usize) {
        (self.r0 + l / self.w, self.c0 + l % self.w)
    }
}

/// Breadth-first distances (cells) over known-free cells from `start`,
/// indexed window-locally; `u32::MAX` marks unreached cells. The start cell
/// is always reached.
fn known_free_distances(map: &GlobalMap, start: (usize, usize), win: &Window) -> Vec<u32> {
    let n = map.size();
    let mut dist = vec![u32::MAX; win.h * win.w];
    dist[win.local(start.0, start.1)] = 0;
    let mut queue = VecDeque::from([start]);
    while let Some((r, c)) = queue.pop_front() {
        let d = dist[win.local(r, c)] + 1;
        for (nr, nc) in [(r.wrapping_sub(1), c), (r, c.wrapping_sub(1)), (r, c + 1), (r + 1, c)] {
            if !win.contains(nr, nc) {
                continue;
            }
            let l = win.local(nr, nc);
            let k = nr * n + nc;
            if dist[l] == u32::MAX && map.is_explored_at(k) && !map.is_obstacle_at(k) {
                dist[l] = d;
                queue.push_back((nr, nc));
            }
        }
    }
    dist
}

fn is_frontier(map: &GlobalMap, k: usize) -> bool {
    let n = map.size();
    let (r, c) = (k / n, k % n);
    let neighbors = [(r > 0).then(|| k - n), (c > 0).then(|| k - 1), (c + 1 < n).then(|| k + 1), (r + 1 < n).then(|| k + n)];
    neighbors.into_iter().flatten().any(|nk| !map.is_explored_at(nk))
}

/// Inclusive-box sums over a boolean raster restricted to a window; boxes
/// are clipped to the window.
struct BoxSum {
    win: Window,
    table: Vec<u32>,
}

impl BoxSum {
    /// `f` receives window-local indices.
    fn new(win: Window, f: impl Fn(usize) -> bool) -> Self {
        let w = win.w + 1;
        let mut table = vec![0u32; (win.h + 1) * w];
        for r in 0..win.h {
            let mut row = 0u32;
            for c in 0..win.w {
                row += f(r * win.w + c) as u32;
                table[(r + 1) * w + c + 1] = table[r * w + c + 1] + row;
            }
        }
        Self { win, table }
    }

    /// Count in the box of half-side `rad` around the global cell `(r, c)`.
    fn count(&self, r: usize, c: usize, rad: usize) -> u32 {
        let w = self.win.w + 1;
        let (r, c) = (r - self.win.r0, c - self.win.c0);
        let r0 = r.saturating_sub(rad);
        let c0 = c.saturating_sub(rad);
        let r1 = (r + rad + 1).min(self.win.h);
        let c1 = (c + rad + 1).min(self.win.w);
        self.table[r1 * w + c1] + self.table[r0 * w + c0] - self.table[r0 * w + c1] - self.table[r1 * w + c0]
    }
}

/// Counts unexplored cells inside a disc using per-row prefix sums.
pub(crate) struct DiscCounter {
    win: Window,
    rows: Vec<u32>,
    half_widths: Vec<usize>,
}

impl DiscCounter {
    #[cfg(test)]
    pub(crate) fn new(map: &GlobalMap, radius: f64) -> Self {
        Self::in_window(map, radius, Window::full(map.size()))
    }

    /// Discs are clipped to `win`; exact for discs that stay inside it or
    /// only leave it across the map border.
    fn in_window(map: &GlobalMap, radius: f64, win: Window) -> Self {
        let n = map.size();
        let w = win.w + 1;
        let mut rows = vec![0u32; win.h * w];
        for r in 0..win.h {
            for c in 0..win.w {
                let k = (win.r0 + r) * n + win.c0 + c;
                rows[r * w + c + 1] = rows[r * w + c] + (!map.is_explored_at(k)) as u32;
            }
        }
        Self { win, rows, half_widths: disc_half_widths(map, radius) }
    }

    pub(crate) fn count(&self, r: usize, c: usize) -> u32 {
        let w = self.win.w + 1;
        let (r, c) = (r - self.win.r0, c - self.win.c0);
        let rad = self.half_widths.len() - 1;
        let mut total = 0;
        for rr in r.saturating_sub(rad)..=(r + rad).min(self.win.h - 1) {
            let hw = self.half_widths[rr.abs_diff(r)];
            let c0 = c.saturating_sub(hw);
            let c1 = (c + hw + 1).min(self.win.w);
            total += self.rows[rr * w + c1] - self.rows[rr * w + c0];
        }
        total
    }
}

/// Half-width of every row of a disc of `radius` meters, in cells.
fn disc_half_widths(map: &GlobalMap, radius: f64) -> Vec<usize> {
    let rad = (radius / map.resolution() + 1e-9).floor() as usize;
    (0..=rad).map(|d| (((rad * rad - d * d) as f64).sqrt() + 1e-9).floor() as usize).collect()
}

/// Scores every feasible lattice candidate and returns the argmax (ties:
/// lowest row-major index).
///
/// A candidate is feasible when it is known free, reachable from the agent
/// through known-free cells, within `frontier_radius` of a frontier cell (a
/// known-free cell 4-adjacent to unexplored space), clear of obstacles by
/// `clearance_cells`, and away from blacklisted goals. With no feasible
/// candidate the nearest reachable frontier cell is returned; with none of
/// those either the map is reported fully explored.
pub fn select_global_goal(
    map: &GlobalMap,
    est: &Pose,
    potential: GoalPotential<'_>,
    blacklist: &[(usize, usize)],
    timestep: u64,
    cfg: &GoalConfig,
) -> GoalSelection {
    let none = GoalSelection { goal: None, fallback: false, fully_explored: false };
    let Some(agent) = map.cell_of(est.x, est.y) else {
        return none;
    };
    let n = map.size();
    let frontier_rad = (cfg.frontier_radius / map.resolution()).round() as usize;
    let disc_rad = disc_half_widths(map, cfg.radius).len() - 1;
    let win = Window::around_written(map, agent, disc_rad.max(frontier_rad).max(cfg.clearance_cells) + 1);
    let dist = known_free_distances(map, agent, &win);
    let to_global = |l: usize| {
        let (r, c) = win.global(l);
        r * n + c
    };
    let frontier = |l: usize| dist[l] != u32::MAX && is_frontier(map, to_global(l));
    let frontiers = BoxSum::new(win, frontier);
    let obstacles = BoxSum::new(win, |l| map.is_obstacle_at(to_global(l)));
    let disc = DiscCounter::in_window(map, cfg.radius, win);
    let banned = |r: usize, c: usize| blacklist.iter().any(|&(br, bc)| br.abs_diff(r) <= cfg.blacklist_cells && bc.abs_diff(c) <= cfg.blacklist_cells);

    let coords = lattice_coords(n, cfg.grid);
    let mut best: Option<(f64, (usize, usize))> = None;
    for &r in coords.iter().filter(|&&r| r >= win.r0 && r < win.r0 + win.h) {
        for &c in coords.iter().filter(|&&c| c >= win.c0 && c < win.c0 + win.w) {
            let k = r * n + c;
            if dist[win.local(r, c)] == u32::MAX
                || !map.is_explored_at(k)
                || map.is_obstacle_at(k)
                || frontiers.count(r, c, frontier_rad) == 0
                || obstacles.count(r, c, cfg.clearance_cells) > 0
                || banned(r, c)
            {
                continue;
            }
            let unexplored = disc.count(r, c) as f64;
            let score = match potential {
                GoalPotential::Unexplored => unexplored,
                GoalPotential::Impact(counts) => {
                    let (x, y) = map.cell_center(r, c);
                    unexplored / (counts.count_at(x, y).max(1) as f64).sqrt()
                }
                GoalPotential::Curiosity => {
                    let geo = dist[win.local(r, c)] as f64 * map.resolution();
                    unexplored * (-geo / cfg.discount_distance).exp()
                }
            };
            if best.is_none_or(|(s, _)| score > s) {
                best = Some((score, (r, c)));
            }
        }
    }
    if let Some((score, cell)) = best {
        return GoalSelection { goal: Some(GlobalGoal { cell, selected_at: timestep, score }), fallback: false, fully_explored: false };
    }
    // Nearest frontier by known-free distance, ties by row-major index.
    let mut nearest: Option<(u32, (usize, usize))> = None;
    for l in 0..win.h * win.w {
        let (r, c) = win.global(l);
        if frontier(l) && !banned(r, c) && nearest.is_none_or(|(d, _)| dist[l] < d) {
            nearest = Some((dist[l], (r, c)));
        }
    }
    match nearest {
        Some((_, cell)) => GoalSelection {
            goal: Some(GlobalGoal { cell, selected_at: timestep, score: 0.0 }),
            fallback: true,
            fully_explored: false,
        },
        None => GoalSelection { goal: None, fallback: true, fully_explored: true },
    }
}
