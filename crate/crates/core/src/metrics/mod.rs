//! Evaluation: map quality, caption quality and the episode description
//! score.

mod assignment;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::mapping::{GlobalMap, GroundTruthMap};
use crate::speaker::Caption;
use crate::world::{Observation, VisibleObject};

pub use assignment::{assignment_iou, assignment_matches, solve_assignment, SimilarityTable};

/// Apparent-area share above which a visible object is relevant for Cov.
pub const RELEVANT_AREA: f64 = 0.10;
/// Scene words that name no object; ignored by the default alignment
/// scorer.
pub const SCENE_NOUNS: [&str; 1] = ["room"];

/// Compact record of what the agent saw at one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct View {
    pub depth_mean: f64,
    pub visible: Vec<VisibleObject>,
    pub activation: f64,
}

impl View {
    pub fn from_observation(obs: &Observation) -> Self {
        Self { depth_mean: obs.mean_depth(), visible: obs.visible.clone(), activation: obs.activation }
    }

    /// Observation carrying this view's summary values (a single depth
    /// reading equal to the mean), enough for speaker policies and the
    /// template captioner.
    pub fn to_observation(&self) -> Observation {
        Observation { depth: vec![self.depth_mean], max_range: f64::INFINITY, visible: self.visible.clone(), activation: self.activation }
    }
}

fn unique(words: &[String]) -> BTreeSet<&str> {
    words.iter().map(String::as_str).collect()
}

/// Share of relevant categories mentioned; `None` when nothing is relevant.
pub fn soft_coverage(nouns: &[String], relevant: &[String]) -> Option<f64> {
    let rel = unique(relevant);
    if rel.is_empty() {
        return None;
    }
    let n = unique(nouns);
    Some(rel.intersection(&n).count() as f64 / rel.len() as f64)
}

/// Unique categories with apparent area at least 10%.
pub fn relevant_categories(visible: &[VisibleObject]) -> Vec<String> {
    let set: BTreeSet<&str> = visible.iter().filter(|v| v.apparent_area >= RELEVANT_AREA).map(|v| v.category.as_str()).collect();
    set.into_iter().map(str::to_string).collect()
}

/// IoU of the unique noun sets of two consecutive captions (0 when both
/// are empty). Lower means less repetition.
pub fn diversity(nouns_t: &[String], nouns_prev: &[String]) -> f64 {
    let (a, b) = (unique(nouns_t), unique(nouns_prev));
    let union = a.union(&b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

pub fn loquacity(n_activations: usize, episode_steps: usize) -> f64 {
    assert!(episode_steps > 0, "loquacity needs at least one step");
    100.0 * n_activations as f64 / episode_steps as f64
}

/// Caption/view alignment in `[0, 1]`.
pub trait AlignmentScorer: Send + Sync {
    fn score(&self, caption: &Caption, view: &View) -> f64;
}

/// F1 between the caption's object nouns and the visible categories, with
/// recall weighted by apparent area.
#[derive(Debug, Clone, Copy, Default)]
pub struct F1Alignment;

impl AlignmentScorer for F1Alignment {
    fn score(&self, caption: &Caption, view: &View) -> f64 {
        alignment_f1(&caption.nouns, &view.visible)
    }
}

pub fn alignment_f1(nouns: &[String], visible: &[VisibleObject]) -> f64 {
    let nouns: BTreeSet<&str> = nouns.iter().map(String::as_str).filter(|n| !SCENE_NOUNS.contains(n)).collect();
    let cats: BTreeSet<&str> = visible.iter().map(|v| v.category.as_str()).collect();
    match (nouns.is_empty(), cats.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let precision = nouns.intersection(&cats).count() as f64 / nouns.len() as f64;
    let total: f64 = visible.iter().map(|v| v.apparent_area).sum();
    let recall = if total > 0.0 {
        visible.iter().filter(|v| nouns.contains(v.category.as_str())).map(|v| v.apparent_area).sum::<f64>() / total
    } else {
        let hit = cats.iter().filter(|c| nouns.contains(*c)).count();
        hit as f64 / cats.len() as f64
    };
    if precision + recall == 0.0 {
        0.0
    } else {
        (2.0 * precision * recall / (precision + recall)).clamp(0.0, 1.0)
    }
}

pub fn ed_s(align_mean: f64, iou: f64, pct_area_seen: f64) -> f64 {
    (align_mean * iou * pct_area_seen).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NavigationMetrics {
    pub map_iou: f64,
    /// Square meters.
    pub map_acc: f64,
    /// Square meters.
    pub area_seen: f64,
    pub pct_area_seen: f64,
}

/// Map quality against ground truth, on the binarized agent map.
///
/// * `map_iou`: mean of the obstacle IoU over explored cells and the IoU
///   between the explored set and the observable set.
/// * `map_acc`: explored cells whose obstacle label is right, in m^2.
/// * `area_seen`: explored cells, in m^2.
/// * `pct_area_seen`: explored reachable free area over the world's
///   reachable free area, clamped to `[0, 1]`.
pub fn navigation_metrics(map: &GlobalMap, gt: &GroundTruthMap) -> NavigationMetrics {
    assert_eq!(map.size(), gt.size(), "map and ground truth differ in size");
    let (mut explored, mut correct, mut obs_inter, mut obs_union, mut seen_inter, mut seen_union, mut reach_seen) =
        (0usize, 0usize, 0usize, 0usize, 0usize, 0usize, 0usize);
    for k in 0..map.size() * map.size() {
        let e = map.is_explored_at(k);
        let observable = gt.observable()[k];
        seen_inter += (e && observable) as usize;
        seen_union += (e || observable) as usize;
        if !e {
            continue;
        }
        explored += 1;
        reach_seen += gt.reachable()[k] as usize;
        let (a, b) = (map.is_obstacle_at(k), gt.obstacle()[k]);
        correct += (a == b) as usize;
        obs_inter += (a && b) as usize;
        obs_union += (a || b) as usize;
    }
    if explored == 0 {
        return NavigationMetrics { map_iou: 0.0, map_acc: 0.0, area_seen: 0.0, pct_area_seen: 0.0 };
    }
    let obstacle_iou = if obs_union == 0 { 1.0 } else { obs_inter as f64 / obs_union as f64 };
    let explored_iou = seen_inter as f64 / seen_union as f64;
    let cell = gt.cell_area_m2();
    let pct = if gt.reachable_area_m2() > 0.0 { (reach_seen as f64 * cell / gt.reachable_area_m2()).clamp(0.0, 1.0) } else { 0.0 };
    NavigationMetrics {
        map_iou: (obstacle_iou + explored_iou) / 2.0,
        map_acc: correct as f64 * cell,
        area_seen: explored as f64 * cell,
        pct_area_seen: pct,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegenerateFlags {
    /// Captions whose view had no relevant object (excluded from Cov).
    pub cov_undefined: u64,
    /// The episode produced no caption (ED-S forced to 0).
    pub no_captions: bool,
    /// Density-model pseudo-count queries with no prediction gain.
    pub dme_degenerate: u64,
    /// External captioner failures replaced by template captions.
    pub captioner_warnings: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub map_iou: f64,
    pub map_acc: f64,
    pub area_seen: f64,
    pub pct_area_seen: f64,
    pub cov_mean: f64,
    pub div_mean: f64,
    pub loquacity: f64,
    pub align_mean: f64,
    pub assignment_iou: f64,
    pub ed_s: f64,
    pub n_captions: usize,
    pub degenerate_flags: DegenerateFlags,
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Description metrics of an episode combined with its navigation metrics.
/// `captions[i]` was produced for `views[i]`; `objects` lists the category
/// of every object in the world (a multiset).
#[allow(clippy::too_many_arguments)]
pub fn episode_report(
    nav: NavigationMetrics,
    captions: &[Caption],
    views: &[View],
    steps: usize,
    objects: &[String],
    scorer: &dyn AlignmentScorer,
    sim: &SimilarityTable,
    mut flags: DegenerateFlags,
) -> MetricReport {
    assert_eq!(captions.len(), views.len(), "one view per caption");
    let mut covs = Vec::new();
    let mut divs = Vec::new();
    let mut aligns = Vec::new();
    for (i, (c, v)) in captions.iter().zip(views).enumerate() {
        match soft_coverage(&c.nouns, &relevant_categories(&v.visible)) {
            Some(x) => covs.push(x),
            None => flags.cov_undefined += 1,
        }
        if i > 0 {
            divs.push(diversity(&c.nouns, &captions[i - 1].nouns));
        }
        aligns.push(scorer.score(c, v).clamp(0.0, 1.0));
    }
    let all_nouns: Vec<String> = captions.iter().flat_map(|c| c.nouns.iter().cloned()).collect();
    let iou = assignment_iou(&all_nouns, objects, sim);
    let align_mean = mean(&aligns);
    flags.no_captions = captions.is_empty();
    let score = if captions.is_empty() { 0.0 } else { ed_s(align_mean, iou, nav.pct_area_seen) };
    MetricReport {
        map_iou: nav.map_iou,
        map_acc: nav.map_acc,
        area_seen: nav.area_seen,
        pct_area_seen: nav.pct_area_seen,
        cov_mean: mean(&covs),
        div_mean: mean(&divs),
        loquacity: if steps == 0 { 0.0 } else { loquacity(captions.len(), steps) },
        align_mean,
        assignment_iou: iou,
        ed_s: score,
        n_captions: captions.len(),
        degenerate_flags: flags,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::speaker::{template_caption, SpeakerPolicy, Trigger};
    use crate::world::{GridWorld, Pose};

    fn w(ws: &[&str]) -> Vec<String> {
        ws.iter().map(|s| s.to_string()).collect()
    }

    fn vis(category: &str, area: f64) -> VisibleObject {
        VisibleObject { object_id: 0, category: category.into(), apparent_area: area, salience: 0.5 }
    }

    #[test]
    fn coverage_examples() {
        assert!((soft_coverage(&w(&["couch", "table"]), &w(&["couch", "table", "chair"])).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(soft_coverage(&w(&["couch", "table", "tv"]), &w(&["couch", "table"])), Some(1.0));
        assert_eq!(soft_coverage(&w(&["couch"]), &[]), None);
        assert_eq!(relevant_categories(&[vis("bed", 0.1), vis("tv", 0.099), vis("bed", 0.3)]), w(&["bed"]));
    }

    #[test]
    fn diversity_examples() {
        assert_eq!(diversity(&w(&["couch", "table"]), &w(&["table", "couch"])), 1.0);
        assert_eq!(diversity(&w(&["couch"]), &w(&["table"])), 0.0);
        assert!((diversity(&w(&["couch", "table"]), &w(&["table", "chair"])) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(diversity(&[], &[]), 0.0);
    }

    #[test]
    fn loquacity_examples() {
        assert_eq!(loquacity(500, 500), 100.0);
        assert_eq!(loquacity(0, 500), 0.0);
        assert_eq!(loquacity(250, 1000), 25.0);
    }

    #[test]
    fn alignment_examples() {
        let visible = [vis("couch", 0.3), vis("table", 0.1)];
        assert_eq!(alignment_f1(&w(&["couch", "table"]), &visible), 1.0);
        assert_eq!(alignment_f1(&w(&["bed"]), &visible), 0.0);
        // Precision 1, recall 0.3 / 0.4 = 0.75, F1 = 1.5 / 1.75.
        let f1 = alignment_f1(&w(&["couch"]), &visible);
        assert!((f1 - 2.0 * 0.75 / 1.75).abs() < 1e-12);
        assert_eq!(alignment_f1(&w(&["room"]), &[]), 1.0);
        assert_eq!(alignment_f1(&[], &visible), 0.0);
    }

    #[test]
    fn ed_s_examples() {
        assert_eq!(ed_s(1.0, 1.0, 1.0), 1.0);
        assert!((ed_s(0.5, 0.4, 0.8) - 0.16).abs() < 1e-15);
        let nav = NavigationMetrics { map_iou: 1.0, map_acc: 1.0, area_seen: 1.0, pct_area_seen: 1.0 };
        let r = episode_report(nav, &[], &[], 10, &w(&["bed"]), &F1Alignment, &SimilarityTable::default(), DegenerateFlags::default());
        assert_eq!(r.ed_s, 0.0);
        assert!(r.degenerate_flags.no_captions);
    }

    #[test]
    fn perfect_episode_scores_one() {
        let nav = NavigationMetrics { map_iou: 1.0, map_acc: 1.0, area_seen: 1.0, pct_area_seen: 1.0 };
        let view = View { depth_mean: 2.0, visible: vec![vis("bed", 0.4), vis("tv", 0.2)], activation: 6.4 };
        let trig = Trigger { policy: SpeakerPolicy::Always, value: 1.0 };
        let cap = template_caption(&view.to_observation(), 0, trig, Pose::origin());
        let r = episode_report(nav, &[cap], &[view], 1, &w(&["bed", "tv"]), &F1Alignment, &SimilarityTable::default(), DegenerateFlags::default());
        assert_eq!((r.align_mean, r.assignment_iou, r.ed_s, r.cov_mean, r.loquacity), (1.0, 1.0, 1.0, 1.0, 100.0));
    }

    fn room_fixture() -> (GridWorld, GroundTruthMap) {
        let occ = crate::world::fixtures::walled_room(20, 20, 0.05);
        let spawn = Pose::new(0.525, 0.525, 0.0);
        let world = GridWorld::new("t", 20, 20, 0.05, occ, vec![], vec![spawn]).unwrap();
        let gt = GroundTruthMap::new(&world, &spawn, 31, 0.05);
        (world, gt)
    }

    #[test]
    fn navigation_on_empty_and_perfect_maps() {
        let (_, gt) = room_fixture();
        let empty = GlobalMap::new(31, 0.05);
        assert_eq!(navigation_metrics(&empty, &gt), NavigationMetrics { map_iou: 0.0, map_acc: 0.0, area_seen: 0.0, pct_area_seen: 0.0 });
        let mut perfect = GlobalMap::new(31, 0.05);
        for k in 0..31 * 31 {
            if gt.observable()[k] {
                perfect.set(k / 31, k % 31, gt.obstacle()[k] as u8 as f32, 1.0);
            }
        }
        let m = navigation_metrics(&perfect, &gt);
        assert_eq!(m.map_iou, 1.0);
        assert_eq!(m.pct_area_seen, 1.0);
        assert!((m.area_seen - 400.0 * 0.0025).abs() < 1e-12);
        assert_eq!(m.map_acc, m.area_seen);
    }

    #[test]
    fn half_explored_room() {
        // Flood-fill oracle: the room interior is 18 x 18 reachable cells.
        let (world, gt) = room_fixture();
        let reachable: usize = world.reachable_free(&world.spawn_poses()[0]).iter().filter(|&&b| b).count();
        assert_eq!(reachable, 324);
        let mut map = GlobalMap::new(31, 0.05);
        let mut marked = 0;
        for k in 0..31 * 31 {
            if gt.reachable()[k] && (k / 31) < 15 {
                map.set(k / 31, k % 31, 0.0, 1.0);
                marked += 1;
            }
        }
        assert_eq!(marked, 162);
        let m = navigation_metrics(&map, &gt);
        assert!((m.area_seen - reachable as f64 * 0.0025 / 2.0).abs() < 1e-12);
        assert!((m.pct_area_seen - 0.5).abs() < 1e-12);
    }
}
