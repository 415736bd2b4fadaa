//! Odometry correction by exhaustive local-map alignment.
//!
//! A displacement `(dx, dy, dtheta)` is the current agent frame expressed in
//! the previous one, so a point `p` of the previous map appears in the
//! current map at `R(-dtheta) * (p - (dx, dy))`.
//!
//! Candidates form a lattice anchored at absolute multiples of the step
//! sizes (0.025 m, 1 degree) and clipped to the window around the odometry
//! reading. Commanded motions lie on this lattice, so a noisy reading can
//! be pulled back onto the true motion. Each candidate is scored in both
//! directions: obstacle cells of one map are moved into the other and read
//! against a likelihood field of its obstacles, `exp(-d^2 / 2 s^2)` with
//! `d` the distance in cells to the nearest obstacle. Only points landing on
//! explored cells count; the score is their mean field value, and candidates
//! with fewer than half the best number of such points are ignored.
//!
//! The result is the mean of the candidates weighted by
//! `exp(LIKELIHOOD_GAIN * n * score)` times a Gaussian odometry prior. An
//! argmax would snap every reading to the lattice even where the scan says
//! nothing (along a featureless corridor), which is worse than the raw
//! reading; the weighted mean falls back to the odometry there and locks
//! onto the lattice where the scan is decisive. Axes with a zero prior are
//! not searched.

use super::{compose_pose, Displacement, LocalMap, PoseEstimate};
use crate::world::Pose;

/// Likelihood field width and cut-off (Chebyshev), cells.
pub const FIELD_SIGMA: f64 = 1.5;
pub const FIELD_RADIUS: usize = 4;
/// Fewer matched obstacle points than this leaves the odometry unchanged.
pub const MIN_POINTS: usize = 20;
/// Log-likelihood per matched point per unit of score.
pub const LIKELIHOOD_GAIN: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchWindow {
    /// Half-width of the translation window, meters.
    pub translation: f64,
    pub translation_step: f64,
    /// Half-width of the rotation window, radians.
    pub rotation: f64,
    pub rotation_step: f64,
    /// Standard deviation of the odometry error per step, meters and
    /// radians. Zero pins that axis to the reading.
    pub prior_translation: f64,
    pub prior_rotation: f64,
}

impl Default for SearchWindow {
    fn default() -> Self {
        Self {
            translation: 0.10,
            translation_step: 0.025,
            rotation: 5f64.to_radians(),
            rotation_step: 1f64.to_radians(),
            prior_translation: 0.025,
            prior_rotation: 1f64.to_radians(),
        }
    }
}

impl SearchWindow {
    /// Window whose prior matches an odometry noise model.
    pub fn for_noise(noise: &super::OdometryNoiseModel) -> Self {
        Self {
            prior_translation: noise.sigma_translation.hypot(noise.bias_translation),
            prior_rotation: noise.sigma_rotation.hypot(noise.bias_rotation),
            ..Self::default()
        }
    }

    /// Candidate values along one axis: lattice points within `half` of
    /// `center`, or just `center` when the axis is pinned.
    fn axis(center: f64, half: f64, step: f64, prior: f64) -> Vec<f64> {
        if prior == 0.0 {
            return vec![center];
        }
        let lo = ((center - half) / step - 1e-9).ceil() as i64;
        let hi = ((center + half) / step + 1e-9).floor() as i64;
        (lo..=hi).map(|k| k as f64 * step).collect()
    }
}

/// Corrected displacement using the default search window.
pub fn correct_pose(prev: &LocalMap, cur: &LocalMap, odometry: Displacement) -> Displacement {
    correct_pose_in(prev, cur, odometry, &SearchWindow::default())
}

fn is_hit(map: &LocalMap, i: usize, j: usize) -> bool {
    map.explored(i, j) >= 0.5 && map.occupied(i, j) >= 0.5
}

/// `max exp(-d^2 / (2 s^2))` over obstacle cells within `FIELD_RADIUS`,
/// `d` and `s = FIELD_SIGMA` in cells.
pub(crate) fn likelihood_field(map: &LocalMap) -> Vec<f32> {
    let n = map.size();
    let r = FIELD_RADIUS as i64;
    let kernel: Vec<f32> =
        (0..=2 * r * r).map(|d2| (-(d2 as f64) / (2.0 * FIELD_SIGMA * FIELD_SIGMA)).exp() as f32).collect();
    let mut field = vec![0.0f32; n * n];
    for i in 0..n {
        for j in 0..n {
            if !is_hit(map, i, j) {
                continue;
            }
            for di in -r..=r {
                for dj in -r..=r {
                    let (a, b) = (i as i64 + di, j as i64 + dj);
                    if a < 0 || b < 0 || a >= n as i64 || b >= n as i64 {
                        continue;
                    }
                    let k = a as usize * n + b as usize;
                    field[k] = field[k].max(kernel[(di * di + dj * dj) as usize]);
                }
            }
        }
    }
    field
}

fn bilinear(field: &[f32], n: usize, i: f64, j: f64) -> f64 {
    let (i0, j0) = (i.floor(), j.floor());
    let (fi, fj) = (i - i0, j - j0);
    let mut v = 0.0;
    for (a, wa) in [(i0 as i64, 1.0 - fi), (i0 as i64 + 1, fi)] {
        for (b, wb) in [(j0 as i64, 1.0 - fj), (j0 as i64 + 1, fj)] {
            if wa * wb > 0.0 && a >= 0 && b >= 0 && (a as usize) < n && (b as usize) < n {
                v += wa * wb * field[a as usize * n + b as usize] as f64;
            }
        }
    }
    v
}

/// Obstacle cells of a map as agent-frame points.
fn hit_points(map: &LocalMap) -> Vec<(f64, f64)> {
    let n = map.size();
    let mut points = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if is_hit(map, i, j) {
                points.push(map.cell_to_agent(i, j));
            }
        }
    }
    points
}

/// One direction of the match: `points` (agent frame of the source map)
/// moved by the rigid map `(c, s, tf, tl)` into `target`, returning the
/// field sum and the number of points landing on explored target cells.
#[allow(clippy::too_many_arguments)]
fn score_points(points: &[(f64, f64)], c: f64, s: f64, tf: f64, tl: f64, target: &LocalMap, field: &[f32]) -> (f64, usize) {
    let n = target.size();
    let res = target.resolution();
    let base_i = (n - 1) as f64;
    let base_j = target.center_col() as f64;
    let (mut sum, mut count) = (0.0, 0usize);
    for &(f, l) in points {
        let (qf, ql) = (c * f + s * l + tf, -s * f + c * l + tl);
        let ci = base_i - qf / res;
        let cj = base_j - ql / res;
        let (ri, rj) = (ci.round(), cj.round());
        if ri < 0.0 || rj < 0.0 || ri >= n as f64 || rj >= n as f64 || target.explored(ri as usize, rj as usize) < 0.5 {
            continue;
        }
        sum += bilinear(field, n, ci, cj);
        count += 1;
    }
    (sum, count)
}

pub fn correct_pose_in(prev: &LocalMap, cur: &LocalMap, odometry: Displacement, window: &SearchWindow) -> Displacement {
    assert_eq!(prev.size(), cur.size(), "local maps differ in size");
    let (prev_points, cur_points) = (hit_points(prev), hit_points(cur));
    if prev_points.len() + cur_points.len() < 2 * MIN_POINTS {
        return odometry;
    }
    let (prev_field, cur_field) = (likelihood_field(prev), likelihood_field(cur));

    let xs = SearchWindow::axis(odometry.0, window.translation, window.translation_step, window.prior_translation);
    let ys = SearchWindow::axis(odometry.1, window.translation, window.translation_step, window.prior_translation);
    let ts = SearchWindow::axis(odometry.2, window.rotation, window.rotation_step, window.prior_rotation);
    if xs.len() * ys.len() * ts.len() == 1 {
        return odometry;
    }

    // (candidate, field sum, matched points)
    let mut scored = Vec::with_capacity(xs.len() * ys.len() * ts.len());
    for &t in &ts {
        let (s, c) = t.sin_cos();
        for &x in &xs {
            for &y in &ys {
                // prev -> cur: q = R(-t) (p - d); cur -> prev: p = R(t) q + d.
                let fwd = score_points(&prev_points, c, s, -(c * x + s * y), -(-s * x + c * y), cur, &cur_field);
                let back = score_points(&cur_points, c, -s, x, y, prev, &prev_field);
                scored.push(((x, y, t), fwd.0 + back.0, fwd.1 + back.1));
            }
        }
    }
    let max_count = scored.iter().map(|s| s.2).max().unwrap_or(0);
    if max_count < MIN_POINTS {
        return odometry;
    }
    let prior = |d: f64, sigma: f64| if sigma == 0.0 { 0.0 } else { d * d / (2.0 * sigma * sigma) };
    let log_weights: Vec<(Displacement, f64)> = scored
        .iter()
        .filter(|s| 2 * s.2 >= max_count)
        .map(|&(d, sum, count)| {
            let log_w = LIKELIHOOD_GAIN * max_count as f64 * sum / count as f64
                - prior(d.0 - odometry.0, window.prior_translation)
                - prior(d.1 - odometry.1, window.prior_translation)
                - prior(d.2 - odometry.2, window.prior_rotation);
            (d, log_w)
        })
        .collect();
    let top = log_weights.iter().map(|w| w.1).fold(f64::NEG_INFINITY, f64::max);
    let (mut total, mut mean) = (0.0, (0.0, 0.0, 0.0));
    for &(d, log_w) in &log_weights {
        let w = (log_w - top).exp();
        total += w;
        mean = (mean.0 + w * d.0, mean.1 + w * d.1, mean.2 + w * d.2);
    }
    let pin = |axis: &[f64], v: f64| if axis.len() == 1 { axis[0] } else { v / total };
    (pin(&xs, mean.0), pin(&ys, mean.1), pin(&ts, mean.2))
}

/// Dead-reckoning integrator with optional scan-match correction.
#[derive(Debug, Clone)]
pub struct PoseTracker {
    estimate: PoseEstimate,
    previous: Option<LocalMap>,
    scan_match: bool,
    window: SearchWindow,
}

impl PoseTracker {
    /// Tracker using the default window; see [`PoseTracker::with_window`].
    pub fn new(start: Pose, scan_match: bool) -> Self {
        Self { estimate: PoseEstimate::new(start), previous: None, scan_match, window: SearchWindow::default() }
    }

    pub fn with_window(mut self, window: SearchWindow) -> Self {
        self.window = window;
        self
    }

    pub fn estimate(&self) -> PoseEstimate {
        self.estimate
    }

    pub fn pose(&self) -> Pose {
        self.estimate.pose
    }

    /// Sets the reference map without moving (first observation).
    pub fn observe_initial(&mut self, local: &LocalMap) {
        self.previous = Some(local.clone());
    }

    /// Integrates one step given the map observed after the motion and the
    /// odometry reading for it. Returns the displacement applied.
    pub fn update(&mut self, current: &LocalMap, odometry: Displacement) -> Displacement {
        let delta = match (&self.previous, self.scan_match) {
            (Some(prev), true) => correct_pose_in(prev, current, odometry, &self.window),
            _ => odometry,
        };
        self.estimate.drift += ((delta.0 - odometry.0).powi(2) + (delta.1 - odometry.1).powi(2)).sqrt()
            + (delta.2 - odometry.2).abs();
        self.estimate.pose = compose_pose(&self.estimate.pose, delta);
        self.previous = Some(current.clone());
        delta
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::LocalMapper;
    use crate::world::{generate_world, raycast_observe, SensorConfig, WorldParams};
    use proptest::prelude::*;

    fn structured_map() -> LocalMap {
        let world = generate_world(5, &WorldParams::new(10.0, 2, 6)).unwrap();
        let cfg = SensorConfig::default();
        let pose = world.spawn_poses()[0];
        let mut rng = crate::rng::substream(0, "sensor");
        let obs = raycast_observe(&world, &pose, &cfg, &mut rng).unwrap();
        LocalMapper::new(101, 0.05, &cfg).build(&obs)
    }

    /// The scene seen after moving forward one cell: everything is one row
    /// closer to the agent.
    fn shifted_forward(prev: &LocalMap) -> LocalMap {
        let mut cur = LocalMap::empty(prev.size(), prev.resolution());
        for i in 1..prev.size() {
            for j in 0..prev.size() {
                cur.set(i, j, prev.occupied(i - 1, j), prev.explored(i - 1, j));
            }
        }
        cur
    }

    /// Independent oracle: candidates enumerated over a wide index range
    /// and filtered to the window, field values from the exact distance to
    /// every obstacle (no precomputed field), weights accumulated in the
    /// other direction.
    fn brute_force(prev: &LocalMap, cur: &LocalMap, odo: Displacement, win: &SearchWindow) -> Displacement {
        let n = prev.size();
        let hits = |m: &LocalMap| {
            let mut v = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    if m.explored(i, j) >= 0.5 && m.occupied(i, j) >= 0.5 {
                        v.push((i as i64, j as i64));
                    }
                }
            }
            v
        };
        let sample = |target: &[(i64, i64)], ci: f64, cj: f64| {
            let node = |a: i64, b: i64| -> f64 {
                target
                    .iter()
                    .filter(|&&(i, j)| (i - a).abs() <= 4 && (j - b).abs() <= 4)
                    .map(|&(i, j)| (-(((i - a).pow(2) + (j - b).pow(2)) as f64) / 4.5).exp())
                    .fold(0.0, f64::max)
            };
            let (i0, j0) = (ci.floor() as i64, cj.floor() as i64);
            let (fi, fj) = (ci - ci.floor(), cj - cj.floor());
            let mut v = 0.0;
            for (a, wa) in [(i0, 1.0 - fi), (i0 + 1, fi)] {
                for (b, wb) in [(j0, 1.0 - fj), (j0 + 1, fj)] {
                    if wa * wb > 0.0 && a >= 0 && b >= 0 && a < n as i64 && b < n as i64 {
                        v += wa * wb * (node(a, b) as f32) as f64;
                    }
                }
            }
            v
        };
        let (prev_hits, cur_hits) = (hits(prev), hits(cur));
        // Moves `from` points by the map `p -> R(-rot) (p - shift)` into `into`.
        let one_way = |from: &LocalMap, fh: &[(i64, i64)], into: &LocalMap, ih: &[(i64, i64)], shift: (f64, f64), rot: f64| {
            let (s, c) = rot.sin_cos();
            let (mut sum, mut count) = (0.0, 0usize);
            for &(i, j) in fh {
                let (f, l) = from.cell_to_agent(i as usize, j as usize);
                let (px, py) = (f - shift.0, l - shift.1);
                let (ci, cj) = into.agent_to_index(c * px + s * py, -s * px + c * py);
                let (ri, rj) = (ci.round(), cj.round());
                if ri < 0.0 || rj < 0.0 || ri >= n as f64 || rj >= n as f64 || into.explored(ri as usize, rj as usize) < 0.5 {
                    continue;
                }
                sum += sample(ih, ci, cj);
                count += 1;
            }
            (sum, count)
        };
        let mut results = Vec::new();
        for kx in -40i64..=40 {
            for ky in -40i64..=40 {
                for kt in -40i64..=40 {
                    let d = (kx as f64 * 0.025, ky as f64 * 0.025, (kt as f64).to_radians());
                    if (d.0 - odo.0).abs() > 0.1 + 1e-9 || (d.1 - odo.1).abs() > 0.1 + 1e-9 || (d.2 - odo.2).abs() > 5f64.to_radians() + 1e-9 {
                        continue;
                    }
                    let fwd = one_way(prev, &prev_hits, cur, &cur_hits, (d.0, d.1), d.2);
                    // The inverse motion: q -> R(t) q + d, i.e. shift -R(-t) d, rotation -t.
                    let (s, c) = d.2.sin_cos();
                    let back = one_way(cur, &cur_hits, prev, &prev_hits, (-(c * d.0 + s * d.1), -(-s * d.0 + c * d.1)), -d.2);
                    results.push((d, fwd.0 + back.0, fwd.1 + back.1));
                }
            }
        }
        let max_count = results.iter().map(|r| r.2).max().unwrap();
        let mut acc = Vec::new();
        for &(d, sum, count) in &results {
            if 2 * count >= max_count {
                let log_w = max_count as f64 * sum / count as f64
                    - ((d.0 - odo.0).powi(2) + (d.1 - odo.1).powi(2)) / (2.0 * win.prior_translation.powi(2))
                    - (d.2 - odo.2).powi(2) / (2.0 * win.prior_rotation.powi(2));
                acc.push((d, log_w));
            }
        }
        let top = acc.iter().map(|a| a.1).fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = acc.iter().map(|a| (a.1 - top).exp()).sum();
        let avg = |f: fn(&Displacement) -> f64| acc.iter().map(|a| f(&a.0) * (a.1 - top).exp()).sum::<f64>() / z;
        (avg(|d| d.0), avg(|d| d.1), avg(|d| d.2))
    }

    fn close(a: Displacement, b: Displacement, tol: f64) -> bool {
        (a.0 - b.0).abs() < tol && (a.1 - b.1).abs() < tol && (a.2 - b.2).abs() < tol
    }

    #[test]
    fn stationary_agent_keeps_zero() {
        let map = structured_map();
        let got = correct_pose(&map, &map, (0.0, 0.0, 0.0));
        assert!(close(got, (0.0, 0.0, 0.0), 1e-3), "{got:?}");
    }

    #[test]
    fn synthetic_forward_shift_is_recovered() {
        let prev = structured_map();
        let cur = shifted_forward(&prev);
        let got = correct_pose(&prev, &cur, (0.10, 0.0, 0.0));
        assert!(close(got, (0.05, 0.0, 0.0), 2e-3), "{got:?}");
        let oracle = brute_force(&prev, &cur, (0.10, 0.0, 0.0), &SearchWindow::default());
        assert!(close(got, oracle, 1e-6), "{got:?} vs {oracle:?}");
    }

    #[test]
    fn matches_the_oracle_off_lattice() {
        let prev = structured_map();
        let cur = shifted_forward(&prev);
        let win = SearchWindow { prior_translation: 0.01, prior_rotation: 0.5f64.to_radians(), ..SearchWindow::default() };
        let odo = (0.063, -0.011, 0.004);
        let got = correct_pose_in(&prev, &cur, odo, &win);
        assert!(close(got, brute_force(&prev, &cur, odo, &win), 1e-6), "{got:?}");
    }

    #[test]
    fn pinned_axes_keep_the_reading() {
        let prev = structured_map();
        let cur = shifted_forward(&prev);
        let odo = (0.063, -0.011, 0.004);
        let pinned = SearchWindow { prior_rotation: 0.0, ..SearchWindow::default() };
        assert_eq!(correct_pose_in(&prev, &cur, odo, &pinned).2, odo.2);
        let all = SearchWindow { prior_translation: 0.0, ..pinned };
        assert_eq!(correct_pose_in(&prev, &cur, odo, &all), odo);
    }

    #[test]
    fn empty_maps_pass_odometry_through() {
        let empty = LocalMap::empty(101, 0.05);
        let odo = (0.2371, -0.013, 0.01);
        assert_eq!(correct_pose(&empty, &empty, odo), odo);
        assert_eq!(correct_pose(&structured_map(), &empty, odo), odo);
    }

    #[test]
    fn tracker_without_scan_match_is_dead_reckoning() {
        let map = structured_map();
        let mut tracker = PoseTracker::new(Pose::origin(), false);
        tracker.observe_initial(&map);
        tracker.update(&map, (0.25, 0.0, 0.0));
        tracker.update(&map, (0.0, 0.0, std::f64::consts::FRAC_PI_2));
        tracker.update(&map, (0.25, 0.0, 0.0));
        let p = tracker.pose();
        assert!((p.x - 0.25).abs() < 1e-12 && (p.y - 0.25).abs() < 1e-12);
        assert_eq!(tracker.estimate().drift, 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn correction_stays_in_window(dx in -0.3f64..0.3, dy in -0.2f64..0.2, dt in -0.3f64..0.3) {
            let prev = structured_map();
            let cur = shifted_forward(&prev);
            let got = correct_pose(&prev, &cur, (dx, dy, dt));
            prop_assert!((got.0 - dx).abs() <= 0.10 + 1e-9);
            prop_assert!((got.1 - dy).abs() <= 0.10 + 1e-9);
            prop_assert!((got.2 - dt).abs() <= 5f64.to_radians() + 1e-9);
        }
    }
}
