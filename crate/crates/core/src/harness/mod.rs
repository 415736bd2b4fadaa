//! Episode orchestration: configuration, the per-step loop, JSONL logs,
//! post-hoc speaker evaluation, sweeps and reports.

mod episode;
mod log;
mod report;
mod sweep;

use std::path::PathBuf;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mapping::{OdometryNoiseModel, DEFAULT_GLOBAL_SIZE, DEFAULT_LOCAL_SIZE};
use crate::planning::GoalConfig;
use crate::rewards::{RewardKind, CURIOSITY_LAMBDA};
use crate::rng::substream;
use crate::speaker::{CaptionerSpec, SpeakerPolicy};
use crate::world::{generate_world, GridWorld, SensorConfig, WorldParams, DEFAULT_RESOLUTION};

pub use episode::{local_reward, run_episode, run_episode_with, Episode, RunOptions, Termination};
pub use log::{EpisodeLog, Footer, Header, LogLine, StepRecord, SCHEMA_VERSION};
pub use report::{read_logs, report, write_report_csv, ReportRow, ReportSummary};
pub use sweep::{evaluate_speaker, replay, sweep, write_sweep_csv, ReplayOutcome, SweepRow};

/// Steps of an evaluation episode.
pub const DEFAULT_STEPS: usize = 1000;
/// Global goals are reselected at least this often.
pub const DEFAULT_GOAL_INTERVAL: usize = 25;

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WorldSource {
    File { path: PathBuf },
    Generated { seed: u64, params: WorldParams },
}

impl WorldSource {
    pub fn load(&self) -> Result<GridWorld> {
        match self {
            WorldSource::File { path } => GridWorld::load(path),
            WorldSource::Generated { seed, params } => generate_world(*seed, params),
        }
    }
}

/// Who picks the actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    /// Goal selection, A* and the reactive controller.
    Navigator,
    /// Uniformly random atomic actions (baseline).
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeConfig {
    pub world: WorldSource,
    pub seed: u64,
    /// Spawn pose index; `None` picks one from the seed.
    pub spawn: Option<usize>,
    pub steps: usize,
    pub agent: AgentKind,
    pub reward: RewardKind,
    pub speaker: SpeakerPolicy,
    pub captioner: CaptionerSpec,
    pub captioner_timeout_ms: u64,
    /// Global map side `M`.
    pub map_size: usize,
    /// Local map side `L`.
    pub local_size: usize,
    pub resolution: f64,
    /// `N_G`.
    pub goal_interval: usize,
    pub goal: GoalConfig,
    pub sensor: SensorConfig,
    pub odometry: OdometryNoiseModel,
    /// `None` enables scan matching exactly when odometry is noisy.
    pub scan_match: Option<bool>,
    /// Per-cell label flip probability of the local mapper.
    pub mapper_noise: f64,
    pub curiosity_lambda: f64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            world: WorldSource::Generated { seed: 0, params: WorldParams::new(12.0, 4, 8) },
            seed: 0,
            spawn: None,
            steps: DEFAULT_STEPS,
            agent: AgentKind::Navigator,
            reward: RewardKind::Coverage,
            speaker: SpeakerPolicy::Always,
            captioner: CaptionerSpec::Template,
            captioner_timeout_ms: 2000,
            map_size: DEFAULT_GLOBAL_SIZE,
            local_size: DEFAULT_LOCAL_SIZE,
            resolution: DEFAULT_RESOLUTION,
            goal_interval: DEFAULT_GOAL_INTERVAL,
            goal: GoalConfig::default(),
            sensor: SensorConfig::default(),
            odometry: OdometryNoiseModel::default(),
            scan_match: None,
            mapper_noise: 0.0,
            curiosity_lambda: CURIOSITY_LAMBDA,
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.steps == 0 {
            return bad("steps must be > 0".into());
        }
        if self.goal_interval == 0 {
            return bad("goal_interval must be >= 1".into());
        }
        if self.map_size < 3 || self.map_size % 2 == 0 {
            return bad(format!("map_size must be odd and >= 3, got {}", self.map_size));
        }
        if self.local_size < 3 || self.local_size % 2 == 0 {
            return bad(format!("local_size must be odd and >= 3, got {}", self.local_size));
        }
        if !(self.resolution > 0.0 && self.resolution.is_finite()) {
            return bad(format!("resolution must be positive, got {}", self.resolution));
        }
        if self.goal.grid == 0 || !(self.goal.radius > 0.0) {
            return bad("goal grid and radius must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.mapper_noise) {
            return bad(format!("mapper_noise must be in [0, 1], got {}", self.mapper_noise));
        }
        if !(self.curiosity_lambda > 0.0 && self.curiosity_lambda <= 1.0) {
            return bad(format!("curiosity_lambda must be in (0, 1], got {}", self.curiosity_lambda));
        }
        self.speaker.validate()?;
        self.sensor.validate()?;
        self.odometry.validate()
    }

    pub fn scan_match_enabled(&self) -> bool {
        self.scan_match.unwrap_or(!self.odometry.is_noiseless())
    }

    /// Spawn index in `0..n_spawns`.
    pub fn spawn_index(&self, n_spawns: usize) -> usize {
        match self.spawn {
            Some(i) => i,
            None => substream(self.seed, "spawn").random_range(0..n_spawns),
        }
    }
}
