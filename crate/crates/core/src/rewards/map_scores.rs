//! Area-seen and map-accuracy scores against ground truth, with an
//! incremental tracker for per-step rewards.

use crate::mapping::{CellRect, GlobalMap, GroundTruthMap};

fn check_dims(map: &GlobalMap, gt: &GroundTruthMap) {
    assert_eq!(map.size(), gt.size(), "map and ground truth differ in size");
}

#[inline]
fn cell_scores(map: &GlobalMap, gt: &GroundTruthMap, k: usize) -> (i64, i64) {
    let explored = map.is_explored_at(k);
    let seen = (explored && gt.observable()[k]) as i64;
    let acc = (map.is_obstacle_at(k) == gt.obstacle()[k]) as i64 + (explored == gt.observable()[k]) as i64;
    (seen, acc)
}

/// Explored cells that are observable in the ground truth, in pixels.
pub fn area_seen_pixels(map: &GlobalMap, gt: &GroundTruthMap) -> u64 {
    check_dims(map, gt);
    (0..map.size() * map.size()).filter(|&k| map.is_explored_at(k) && gt.observable()[k]).count() as u64
}

/// Number of agreeing cell-channel pairs after binarizing at 0.5.
pub fn map_accuracy(map: &GlobalMap, gt: &GroundTruthMap) -> u64 {
    check_dims(map, gt);
    let mut acc = 0u64;
    for k in 0..map.size() * map.size() {
        acc += (map.is_obstacle_at(k) == gt.obstacle()[k]) as u64;
        acc += (map.is_explored_at(k) == gt.observable()[k]) as u64;
    }
    acc
}

pub fn coverage_reward(as_t: u64, as_prev: u64) -> f64 {
    as_t as f64 - as_prev as f64
}

pub fn anticipation_reward(m_t: &GlobalMap, m_prev: &GlobalMap, gt: &GroundTruthMap) -> f64 {
    map_accuracy(m_t, gt) as f64 - map_accuracy(m_prev, gt) as f64
}

/// Running area-seen and accuracy totals, updated from the cells inside a
/// registration footprint only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MapScoreTracker {
    pub area_seen: u64,
    pub accuracy: u64,
}

/// Scores of a rectangle, to be taken before and after a registration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RectScores {
    seen: i64,
    acc: i64,
}

impl MapScoreTracker {
    pub fn new(map: &GlobalMap, gt: &GroundTruthMap) -> Self {
        Self { area_seen: area_seen_pixels(map, gt), accuracy: map_accuracy(map, gt) }
    }

    pub fn rect_scores(map: &GlobalMap, gt: &GroundTruthMap, rect: &CellRect) -> RectScores {
        check_dims(map, gt);
        let mut out = RectScores { seen: 0, acc: 0 };
        for r in rect.row0..=rect.row1 {
            for c in rect.col0..=rect.col1 {
                let (s, a) = cell_scores(map, gt, map.index(r, c));
                out.seen += s;
                out.acc += a;
            }
        }
        out
    }

    pub fn apply(&mut self, before: RectScores, after: RectScores) {
        self.area_seen = (self.area_seen as i64 + after.seen - before.seen) as u64;
        self.accuracy = (self.accuracy as i64 + after.acc - before.acc) as u64;
    }
}
