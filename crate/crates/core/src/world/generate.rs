//! Procedural floorplans: BSP rooms with door gaps and rectangular objects.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{GridWorld, Pose, SceneObject, AGENT_RADIUS, DEFAULT_RESOLUTION};
use crate::error::{Error, Result};
use crate::rng::{substream, SimRng};

pub const DEFAULT_VOCABULARY: &[&str] = &[
    "bed",
    "chair",
    "couch",
    "table",
    "tv",
    "potted plant",
    "toilet",
    "sink",
    "refrigerator",
    "oven",
    "bookshelf",
    "cabinet",
];

const MAX_ATTEMPTS: usize = 32;
const OBJECT_TRIES: usize = 400;
const SPAWN_COUNT: usize = 4;
const WALL_CELLS: usize = 2;
const DOOR_WIDTH_M: f64 = 0.9;
const DOOR_END_MARGIN_M: f64 = 0.3;
const MIN_ROOM_M: f64 = 2.0;
const OBJECT_SIDE_M: (f64, f64) = (0.3, 0.9);
const OBJECT_CLEARANCE_M: f64 = 0.4;
const SPAWN_CLEARANCE_M: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldParams {
    /// Side of the square world, meters.
    pub extent_m: f64,
    pub n_rooms: usize,
    pub n_objects: usize,
    pub vocabulary: Vec<String>,
    #[serde(default = "default_resolution")]
    pub resolution: f64,
}

fn default_resolution() -> f64 {
    DEFAULT_RESOLUTION
}

impl WorldParams {
    pub fn new(extent_m: f64, n_rooms: usize, n_objects: usize) -> Self {
        Self {
            extent_m,
            n_rooms,
            n_objects,
            vocabulary: DEFAULT_VOCABULARY.iter().map(|s| s.to_string()).collect(),
            resolution: DEFAULT_RESOLUTION,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.extent_m >= 5.0) {
            return Err(Error::InvalidParameter(format!("extent_m must be >= 5, got {}", self.extent_m)));
        }
        if self.n_rooms < 1 {
            return Err(Error::InvalidParameter("n_rooms must be >= 1".into()));
        }
        if self.vocabulary.is_empty() || self.vocabulary.iter().any(|v| v.trim().is_empty()) {
            return Err(Error::InvalidParameter("vocabulary must be non-empty".into()));
        }
        if !(self.resolution > 0.0 && self.resolution <= 0.25) {
            return Err(Error::InvalidParameter(format!("resolution {} out of range", self.resolution)));
        }
        Ok(())
    }
}

impl Default for WorldParams {
    fn default() -> Self {
        Self::new(20.0, 4, 12)
    }
}

/// Half-open cell rectangle.
#[derive(Debug, Clone, Copy)]
struct Rect {
    r0: usize,
    c0: usize,
    r1: usize,
    c1: usize,
}

impl Rect {
    fn height(&self) -> usize {
        self.r1 - self.r0
    }
    fn width(&self) -> usize {
        self.c1 - self.c0
    }
    fn area(&self) -> usize {
        self.height() * self.width()
    }
}

/// A BSP partition wall: `fixed` is the first row (horizontal) or column
/// (vertical) of the wall band, `span` the extent along the wall.
#[derive(Debug, Clone, Copy)]
struct Wall {
    vertical: bool,
    fixed: usize,
    span: (usize, usize),
}

struct Canvas {
    n: usize,
    occ: Vec<bool>,
}

impl Canvas {
    fn get(&self, r: usize, c: usize) -> bool {
        self.occ[r * self.n + c]
    }
    fn set(&mut self, r: usize, c: usize, v: bool) {
        self.occ[r * self.n + c] = v;
    }
}

/// Generates a connected procedural floorplan.
///
/// Identical `(seed, params)` produce identical worlds. Degenerate parameters
/// (rooms or objects that cannot fit) fail after bounded retries.
pub fn generate_world(seed: u64, params: &WorldParams) -> Result<GridWorld> {
    params.validate()?;
    let mut rng = substream(seed, "world");
    let mut last = String::new();
    for _ in 0..MAX_ATTEMPTS {
        match try_generate(&mut rng, seed, params) {
            Ok(world) => return Ok(world),
            Err(reason) => last = reason,
        }
    }
    Err(Error::GenerationFailed { attempts: MAX_ATTEMPTS, reason: last })
}

fn cells(meters: f64, res: f64) -> usize {
    (meters / res).round() as usize
}

fn try_generate(rng: &mut SimRng, seed: u64, params: &WorldParams) -> std::result::Result<GridWorld, String> {
    let res = params.resolution;
    let n = cells(params.extent_m, res);
    let mut canvas = Canvas { n, occ: vec![false; n * n] };
    for i in 0..n {
        for k in 0..WALL_CELLS {
            canvas.set(k, i, true);
            canvas.set(n - 1 - k, i, true);
            canvas.set(i, k, true);
            canvas.set(i, n - 1 - k, true);
        }
    }

    let min_room = cells(MIN_ROOM_M, res);
    let splittable = |len: usize| len >= 2 * min_room + WALL_CELLS;
    let mut leaves = vec![Rect { r0: WALL_CELLS, c0: WALL_CELLS, r1: n - WALL_CELLS, c1: n - WALL_CELLS }];
    let mut walls = Vec::new();
    while leaves.len() < params.n_rooms {
        let candidate = leaves
            .iter()
            .enumerate()
            .filter(|(_, r)| splittable(r.width()) || splittable(r.height()))
            .max_by_key(|(i, r)| (r.area(), usize::MAX - i))
            .map(|(i, _)| i);
        let Some(index) = candidate else {
            return Err(format!("cannot fit {} rooms of at least {MIN_ROOM_M} m", params.n_rooms));
        };
        let leaf = leaves.swap_remove(index);
        let vertical = match (splittable(leaf.width()), splittable(leaf.height())) {
            (true, false) => true,
            (false, true) => false,
            _ if leaf.width() != leaf.height() => leaf.width() > leaf.height(),
            _ => rng.random_bool(0.5),
        };
        let len = if vertical { leaf.width() } else { leaf.height() };
        let offset = rng.random_range(min_room..=len - min_room - WALL_CELLS);
        if vertical {
            let fixed = leaf.c0 + offset;
            walls.push(Wall { vertical, fixed, span: (leaf.r0, leaf.r1) });
            leaves.push(Rect { c1: fixed, ..leaf });
            leaves.push(Rect { c0: fixed + WALL_CELLS, ..leaf });
        } else {
            let fixed = leaf.r0 + offset;
            walls.push(Wall { vertical, fixed, span: (leaf.c0, leaf.c1) });
            leaves.push(Rect { r1: fixed, ..leaf });
            leaves.push(Rect { r0: fixed + WALL_CELLS, ..leaf });
        }
    }

    for wall in &walls {
        for along in wall.span.0..wall.span.1 {
            for k in 0..WALL_CELLS {
                let (r, c) = wall_cell(wall, along, k);
                canvas.set(r, c, true);
            }
        }
    }
    let door = cells(DOOR_WIDTH_M, res);
    let margin = cells(DOOR_END_MARGIN_M, res);
    for wall in &walls {
        let (s0, s1) = wall.span;
        if s1 - s0 < door + 2 * margin {
            return Err("wall too short for a door".into());
        }
        // A door is valid when the cells flanking it on both faces are free,
        // i.e. no perpendicular wall abuts the opening.
        let valid: Vec<usize> = (s0 + margin..=s1 - margin - door)
            .filter(|&start| {
                (start..start + door).all(|along| {
                    let (ra, ca) = flank(wall, along, false);
                    let (rb, cb) = flank(wall, along, true);
                    !canvas.get(ra, ca) && !canvas.get(rb, cb)
                })
            })
            .collect();
        let Some(&start) = valid.choose(rng) else {
            return Err("no valid door position".into());
        };
        for along in start..start + door {
            for k in 0..WALL_CELLS {
                let (r, c) = wall_cell(wall, along, k);
                canvas.set(r, c, false);
            }
        }
    }

    let side = (cells(OBJECT_SIDE_M.0, res).max(1), cells(OBJECT_SIDE_M.1, res).max(1));
    let clearance = cells(OBJECT_CLEARANCE_M, res);
    let mut objects = Vec::with_capacity(params.n_objects);
    for id in 0..params.n_objects {
        let mut placed = None;
        for _ in 0..OBJECT_TRIES {
            let room = leaves[rng.random_range(0..leaves.len())];
            let h = rng.random_range(side.0..=side.1);
            let w = rng.random_range(side.0..=side.1);
            if room.height() < h + 2 * clearance + 1 || room.width() < w + 2 * clearance + 1 {
                continue;
            }
            let r = rng.random_range(room.r0 + clearance..=room.r1 - clearance - h);
            let c = rng.random_range(room.c0 + clearance..=room.c1 - clearance - w);
            let clear = (r - clearance..r + h + clearance)
                .all(|rr| (c - clearance..c + w + clearance).all(|cc| !canvas.get(rr, cc)));
            if clear {
                placed = Some((r, c, h, w));
                break;
            }
        }
        let Some((r, c, h, w)) = placed else {
            return Err(format!("could not place object {id}"));
        };
        let mut obj_cells = Vec::with_capacity(h * w);
        for rr in r..r + h {
            for cc in c..c + w {
                canvas.set(rr, cc, true);
                obj_cells.push((rr, cc));
            }
        }
        let category = params.vocabulary.choose(rng).expect("vocabulary checked non-empty").clone();
        objects.push(SceneObject { id: id as u32, category, cells: obj_cells, salience: 1.0 });
    }

    let mut probe = GridWorld {
        name: String::new(),
        width: n,
        height: n,
        resolution: res,
        occupancy: canvas.occ,
        objects: Vec::new(),
        spawn_poses: Vec::new(),
        object_at: Vec::new(),
    };
    let headings = [0.0, FRAC_PI_2, PI, -FRAC_PI_2];
    let mut spawn_poses = Vec::with_capacity(SPAWN_COUNT);
    for _ in 0..20_000 {
        if spawn_poses.len() == SPAWN_COUNT {
            break;
        }
        let (r, c) = (rng.random_range(0..n), rng.random_range(0..n));
        let (x, y) = probe.cell_center(r, c);
        if probe.disc_clear(x, y, SPAWN_CLEARANCE_M.max(AGENT_RADIUS)) {
            spawn_poses.push(Pose::new(x, y, headings[rng.random_range(0..headings.len())]));
        }
    }
    if spawn_poses.len() < SPAWN_COUNT {
        return Err("no room for spawn poses".into());
    }

    let reachable = probe.reachable_free(&spawn_poses[0]).iter().filter(|&&b| b).count();
    let free = probe.occupancy.iter().filter(|&&o| !o).count();
    if reachable != free {
        return Err(format!("free space is disconnected ({reachable} of {free} cells reachable)"));
    }

    let occupancy = std::mem::take(&mut probe.occupancy);
    GridWorld::new(format!("procgen-{seed}"), n, n, res, occupancy, objects, spawn_poses).map_err(|e| e.to_string())
}

fn wall_cell(wall: &Wall, along: usize, k: usize) -> (usize, usize) {
    if wall.vertical {
        (along, wall.fixed + k)
    } else {
        (wall.fixed + k, along)
    }
}

fn flank(wall: &Wall, along: usize, far: bool) -> (usize, usize) {
    let across = if far { wall.fixed + WALL_CELLS } else { wall.fixed - 1 };
    if wall.vertical {
        (along, across)
    } else {
        (across, along)
    }
}
