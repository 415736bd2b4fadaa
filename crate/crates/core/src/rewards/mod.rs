//! Intrinsic exploration rewards: curiosity, coverage, anticipation and
//! impact, plus the pseudo-counts impact relies on.

mod counts;
mod features;
mod map_scores;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mapping::{GlobalMap, GroundTruthMap, LocalMap};
use crate::world::{Observation, Pose};

pub use counts::{DensityCount, DensityModel, PseudoCountGrid};
pub use features::{encode_features, pool_block, FeatureEncoding, POOLED_DIM, POOL_SIDE};
pub use map_scores::{anticipation_reward, area_seen_pixels, coverage_reward, map_accuracy, MapScoreTracker, RectScores};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardKind {
    Curiosity,
    Coverage,
    Anticipation,
    ImpactGrid,
    ImpactDme,
}

impl RewardKind {
    pub const ALL: [RewardKind; 5] =
        [RewardKind::Curiosity, RewardKind::Coverage, RewardKind::Anticipation, RewardKind::ImpactGrid, RewardKind::ImpactDme];

    pub fn as_str(self) -> &'static str {
        match self {
            RewardKind::Curiosity => "curiosity",
            RewardKind::Coverage => "coverage",
            RewardKind::Anticipation => "anticipation",
            RewardKind::ImpactGrid => "impact-grid",
            RewardKind::ImpactDme => "impact-dme",
        }
    }
}

impl fmt::Display for RewardKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RewardKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RewardKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown reward kind '{s}'")))
    }
}

/// Curiosity normalizer `eta`; the reward is `eta / 2 * |pred - phi|^2`.
pub const CURIOSITY_ETA: f64 = 0.01;
/// Default EMA rate of the forward-model surrogate.
pub const CURIOSITY_LAMBDA: f64 = 0.3;

/// Forward-model surrogate: an exponential moving average of past
/// encodings serves as the prediction of the next one.
#[derive(Debug, Clone, PartialEq)]
pub struct CuriosityModel {
    pub eta: f64,
    pub lambda: f64,
    prediction: FeatureEncoding,
}

impl CuriosityModel {
    pub fn new(dim: usize, lambda: f64) -> Self {
        Self { eta: CURIOSITY_ETA, lambda, prediction: FeatureEncoding(vec![0.0; dim]) }
    }

    pub fn prediction(&self) -> &FeatureEncoding {
        &self.prediction
    }

    /// Reward for observing `phi`, then folds `phi` into the prediction.
    pub fn observe(&mut self, phi: &FeatureEncoding) -> f64 {
        let r = curiosity_reward(self.eta, &self.prediction, phi);
        for (p, &v) in self.prediction.0.iter_mut().zip(&phi.0) {
            *p = (1.0 - self.lambda) * *p + self.lambda * v;
        }
        r
    }
}

pub fn curiosity_reward(eta: f64, predicted: &FeatureEncoding, phi_next: &FeatureEncoding) -> f64 {
    eta / 2.0 * predicted.distance_squared(phi_next)
}

/// `|phi_next - phi_t| / sqrt(max(n_hat, 1))`; an infinite count yields 0.
pub fn impact_reward(phi_t: &FeatureEncoding, phi_next: &FeatureEncoding, n_hat: f64) -> f64 {
    if n_hat.is_infinite() {
        return 0.0;
    }
    phi_t.distance(phi_next) / n_hat.max(1.0).sqrt()
}

/// All four reward signals of one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRewards {
    pub curiosity: f64,
    pub coverage: f64,
    pub anticipation: f64,
    pub impact: f64,
    /// Pseudo-count used by the impact reward (grid or density model).
    /// Infinite for a degenerate density query; serialized as `null`.
    #[serde(with = "infinite_as_null")]
    pub n_hat: f64,
}

pub(crate) mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl StepRewards {
    pub fn get(&self, kind: RewardKind) -> f64 {
        match kind {
            RewardKind::Curiosity => self.curiosity,
            RewardKind::Coverage => self.coverage,
            RewardKind::Anticipation => self.anticipation,
            RewardKind::ImpactGrid | RewardKind::ImpactDme => self.impact,
        }
    }
}

/// Per-episode reward bookkeeping, updated once per step after mapping.
#[derive(Debug, Clone)]
pub struct RewardState {
    pub kind: RewardKind,
    vocabulary: Vec<String>,
    scores: MapScoreTracker,
    previous_phi: FeatureEncoding,
    curiosity: CuriosityModel,
    grid: PseudoCountGrid,
    density: DensityModel,
    degenerate_counts: u64,
}

impl RewardState {
    /// Starts from the empty map: the previous encoding is all zeros and
    /// the score tracker reflects `map` (normally still empty).
    pub fn new(kind: RewardKind, vocabulary: Vec<String>, map: &GlobalMap, gt: &GroundTruthMap, lambda: f64) -> Self {
        let dim = POOLED_DIM + vocabulary.len();
        Self {
            kind,
            scores: MapScoreTracker::new(map, gt),
            previous_phi: FeatureEncoding::zeros(vocabulary.len()),
            curiosity: CuriosityModel::new(dim, lambda),
            grid: PseudoCountGrid::default(),
            density: DensityModel::new(dim),
            degenerate_counts: 0,
            vocabulary,
        }
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn area_seen(&self) -> u64 {
        self.scores.area_seen
    }

    pub fn accuracy(&self) -> u64 {
        self.scores.accuracy
    }

    pub fn grid_counts(&self) -> &PseudoCountGrid {
        &self.grid
    }

    pub fn degenerate_counts(&self) -> u64 {
        self.degenerate_counts
    }

    /// Computes the step's rewards. `before`/`after` are the scores of the
    /// registration footprint around the map update (`None` when nothing
    /// was registered); `est` is the estimated pose after the move.
    pub fn step(
        &mut self,
        local: &LocalMap,
        obs: &Observation,
        est: &Pose,
        footprint: Option<(RectScores, RectScores)>,
    ) -> StepRewards {
        let (as_prev, acc_prev) = (self.scores.area_seen, self.scores.accuracy);
        if let Some((before, after)) = footprint {
            self.scores.apply(before, after);
        }
        let phi = encode_features(local, obs, &self.vocabulary);
        let curiosity = self.curiosity.observe(&phi);
        let grid_n = self.grid.visit(est.x, est.y) as f64;
        let dme = self.density.query_and_update(&phi);
        if dme.degenerate {
            self.degenerate_counts += 1;
        }
        let n_hat = if self.kind == RewardKind::ImpactDme { dme.n_hat } else { grid_n };
        let impact = impact_reward(&self.previous_phi, &phi, n_hat);
        self.previous_phi = phi;
        StepRewards {
            curiosity,
            coverage: coverage_reward(self.scores.area_seen, as_prev),
            anticipation: self.scores.accuracy as f64 - acc_prev as f64,
            impact,
            n_hat,
        }
    }
}
