//! The per-step loop.

use std::path::PathBuf;
use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::log::{EpisodeLog, Footer, Header, StepRecord, SCHEMA_VERSION};
use super::{AgentKind, EpisodeConfig, CODE_VERSION};
use crate::error::{Error, Result};
use crate::mapping::{register_local_map, registration_footprint, GlobalMap, GroundTruthMap, LocalMapper, PoseTracker, SearchWindow};
use crate::metrics::{episode_report, navigation_metrics, DegenerateFlags, F1Alignment, SimilarityTable, View};
use crate::planning::{
    extract_local_goal, local_controller, select_global_goal, GlobalGoal, GoalPotential, LocalGoal, Plan, Planner,
    PlannerConfig, visible_local_goal,
};
use crate::rewards::{MapScoreTracker, RewardState};
use crate::rng::{substream, SimRng};
use crate::speaker::{default_synonyms, noun_vocabulary, should_speak, Captioner, Trigger};
use crate::world::{apply_action, raycast_observe, Action, GridWorld, Observation, Pose, DEFAULT_VOCABULARY, FORWARD_STEP};

/// Inflation radii tried in order when planning toward the global goal.
const INFLATION_LADDER: [usize; 3] = [4, 2, 0];
/// Obstacle clearance, cells, of the straight line to the local goal.
const SIGHT_CLEARANCE: usize = 2;
/// Goals that cannot be planned to are blacklisted and replaced at most
/// this many times per step.
const MAX_REPLANS: usize = 4;
/// A goal counts as reached within one forward step.
const REACH_DISTANCE: f64 = FORWARD_STEP;
/// Consecutive collisions after which the current goal is abandoned.
const COLLISION_PATIENCE: usize = 3;
/// Consecutive turns after which the current goal is abandoned (more than
/// a full revolution means the controller is dithering).
const TURN_PATIENCE: usize = 40;
/// A goal held for a full interval with less progress than this is
/// abandoned, meters.
const MIN_PROGRESS: f64 = 0.5;

/// Why an episode stopped before its step budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// No reachable frontier is left.
    FullyExplored,
    /// The trajectory left the global map.
    MapSaturated,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    /// Write map snapshots every this many steps (and after the last).
    pub snapshot_every: Option<usize>,
    pub snapshot_dir: Option<PathBuf>,
    /// Keep every A* plan, retrievable with [`Episode::plans`].
    pub record_plans: bool,
}

/// A running episode. [`Episode::step`] advances one step; [`Episode::finish`]
/// scores it and produces the log.
pub struct Episode {
    cfg: EpisodeConfig,
    world: GridWorld,
    spawn: Pose,
    gt: GroundTruthMap,
    map: GlobalMap,
    mapper: LocalMapper,
    tracker: PoseTracker,
    rewards: RewardState,
    planner: Planner,
    captioner: Captioner,
    similarity: SimilarityTable,
    header: Header,
    rng_sensor: SimRng,
    rng_odometry: SimRng,
    rng_mapper: SimRng,
    rng_agent: SimRng,
    true_pose: Pose,
    prev_true: Pose,
    prev_est: Option<Pose>,
    goal: Option<GlobalGoal>,
    goal_origin: Pose,
    local_goal: Option<LocalGoal>,
    blacklist: Vec<(usize, usize)>,
    /// Inflation rungs that already failed for the current global goal.
    failed_rungs: ((usize, usize), usize),
    collisions: usize,
    turns: usize,
    record_plans: bool,
    plans: Vec<(u64, Vec<(usize, usize)>)>,
    records: Vec<StepRecord>,
    termination: Option<Termination>,
}

impl Episode {
    pub fn new(cfg: &EpisodeConfig) -> Result<Self> {
        cfg.validate()?;
        let world = cfg.world.load()?;
        let spawns = world.spawn_poses();
        let index = cfg.spawn_index(spawns.len());
        let spawn = *spawns
            .get(index)
            .ok_or_else(|| Error::InvalidParameter(format!("spawn index {index} out of range ({} spawns)", spawns.len())))?;
        let gt = GroundTruthMap::new(&world, &spawn, cfg.map_size, cfg.resolution);
        let map = GlobalMap::new(cfg.map_size, cfg.resolution);

        let mut categories: Vec<String> = DEFAULT_VOCABULARY.iter().map(|s| s.to_string()).collect();
        categories.extend(world.categories());
        categories.sort();
        categories.dedup();
        let vocabulary = noun_vocabulary(&categories);
        let synonyms = default_synonyms();
        let similarity = SimilarityTable::new(vocabulary.clone(), synonyms.into_iter());
        let captioner = Captioner::new(&cfg.captioner, vocabulary.clone(), Duration::from_millis(cfg.captioner_timeout_ms))?;
        let rewards = RewardState::new(cfg.reward, world.categories(), &map, &gt, cfg.curiosity_lambda);
        let header = Header {
            schema_version: SCHEMA_VERSION,
            code_version: CODE_VERSION.to_string(),
            world_hash: world.content_hash()?,
            world_name: world.name().to_string(),
            spawn,
            objects: world.objects().iter().map(|o| o.category.clone()).collect(),
            vocabulary,
            config: cfg.clone(),
        };
        Ok(Self {
            mapper: LocalMapper::new(cfg.local_size, cfg.resolution, &cfg.sensor),
            tracker: PoseTracker::new(Pose::origin(), cfg.scan_match_enabled()).with_window(SearchWindow::for_noise(&cfg.odometry)),
            rewards,
            planner: Planner::new(),
            captioner,
            similarity,
            header,
            rng_sensor: substream(cfg.seed, "sensor"),
            rng_odometry: substream(cfg.seed, "odometry"),
            rng_mapper: substream(cfg.seed, "mapper"),
            rng_agent: substream(cfg.seed, "agent"),
            true_pose: spawn,
            prev_true: spawn,
            prev_est: None,
            goal: None,
            goal_origin: Pose::origin(),
            local_goal: None,
            blacklist: Vec::new(),
            failed_rungs: ((usize::MAX, usize::MAX), 0),
            collisions: 0,
            turns: 0,
            record_plans: false,
            plans: Vec::new(),
            records: Vec::with_capacity(cfg.steps),
            termination: None,
            cfg: cfg.clone(),
            world,
            spawn,
            gt,
            map,
        })
    }

    pub fn config(&self) -> &EpisodeConfig {
        &self.cfg
    }

    pub fn world(&self) -> &GridWorld {
        &self.world
    }

    pub fn spawn(&self) -> Pose {
        self.spawn
    }

    pub fn map(&self) -> &GlobalMap {
        &self.map
    }

    pub fn ground_truth(&self) -> &GroundTruthMap {
        &self.gt
    }

    pub fn reward_state(&self) -> &RewardState {
        &self.rewards
    }

    pub fn true_pose(&self) -> Pose {
        self.true_pose
    }

    /// Estimated pose in the episode frame.
    pub fn estimate(&self) -> Pose {
        self.tracker.pose()
    }

    pub fn records(&self) -> &[StepRecord] {
        &self.records
    }

    pub fn termination(&self) -> Option<Termination> {
        self.termination
    }

    pub fn plans(&self) -> &[(u64, Vec<(usize, usize)>)] {
        &self.plans
    }

    pub fn is_done(&self) -> bool {
        self.termination.is_some() || self.records.len() >= self.cfg.steps
    }

    /// Runs one step; returns `false` (and does nothing) once the episode
    /// is over.
    pub fn step(&mut self) -> Result<bool> {
        if self.is_done() {
            return Ok(false);
        }
        let t = self.records.len() as u64;
        let obs = raycast_observe(&self.world, &self.true_pose, &self.cfg.sensor, &mut self.rng_sensor)?;
        let local = if self.cfg.mapper_noise > 0.0 {
            self.mapper.build_noisy(&obs, self.cfg.mapper_noise, &mut self.rng_mapper)
        } else {
            self.mapper.build(&obs)
        };
        if t == 0 {
            self.tracker.observe_initial(&local);
        } else {
            let truth = self.prev_true.relative(&self.true_pose);
            let reading = self.cfg.odometry.corrupt((truth.x, truth.y, truth.theta), &mut self.rng_odometry);
            self.tracker.update(&local, reading);
        }
        let est = self.tracker.pose();

        let footprint = match registration_footprint(&self.map, &local, &est) {
            Ok(f) => f,
            Err(Error::FootprintOutOfBounds) => {
                self.termination = Some(Termination::MapSaturated);
                return Ok(false);
            }
            Err(e) => return Err(e),
        };
        let before = footprint.map(|r| MapScoreTracker::rect_scores(&self.map, &self.gt, &r));
        register_local_map(&mut self.map, &local, &est)?;
        let scores = footprint.zip(before).map(|(r, b)| (b, MapScoreTracker::rect_scores(&self.map, &self.gt, &r)));
        let rewards = self.rewards.step(&local, &obs, &est, scores);

        let r_local = match (self.local_goal, self.prev_est) {
            (Some(goal), Some(prev)) => local_reward(&mut self.planner, &self.map, &prev, &est, goal.cell),
            _ => 0.0,
        };

        let action = match self.cfg.agent {
            AgentKind::Random => Action::ALL[self.rng_agent.random_range(0..Action::ALL.len())],
            AgentKind::Navigator => match self.navigate(t, &est, &obs) {
                Some(a) => a,
                None => {
                    self.termination = Some(Termination::FullyExplored);
                    return Ok(false);
                }
            },
        };
        let (next, collided) = apply_action(&self.world, &self.true_pose, action);
        self.collisions = if collided { self.collisions + 1 } else { 0 };
        self.turns = if action == Action::Forward { 0 } else { self.turns + 1 };

        let (speak, trigger_value) = should_speak(&self.cfg.speaker, &obs);
        let caption =
            speak.then(|| self.captioner.caption(&obs, t, Trigger { policy: self.cfg.speaker, value: trigger_value }, est));

        self.records.push(StepRecord {
            t,
            true_pose: self.true_pose,
            est_pose: est,
            action,
            collided,
            r_global: rewards.get(self.cfg.reward),
            r_local,
            n_hat: rewards.n_hat,
            rewards,
            goal: self.goal.as_ref().map(|g| g.cell),
            speak,
            trigger_value,
            view: View::from_observation(&obs),
            caption,
        });
        self.prev_true = self.true_pose;
        self.true_pose = next;
        self.prev_est = Some(est);
        Ok(true)
    }

    /// Picks the next action of the navigator; `None` once nothing is left
    /// to explore.
    fn navigate(&mut self, t: u64, est: &Pose, obs: &Observation) -> Option<Action> {
        let Some(agent) = self.map.cell_of(est.x, est.y) else {
            return Some(Action::TurnLeft);
        };
        let mut reselect = match &self.goal {
            None => true,
            Some(g) => {
                let (gx, gy) = self.map.cell_center(g.cell.0, g.cell.1);
                let reached = (gx - est.x).hypot(gy - est.y) <= REACH_DISTANCE;
                let stale = t - g.selected_at >= self.cfg.goal_interval as u64;
                if stale && !reached && self.goal_origin.distance_to(est) < MIN_PROGRESS {
                    self.blacklist.push(g.cell);
                }
                reached || stale
            }
        };
        if self.collisions >= COLLISION_PATIENCE || self.turns >= TURN_PATIENCE {
            if let Some(g) = &self.goal {
                self.blacklist.push(g.cell);
            }
            self.collisions = 0;
            self.turns = 0;
            reselect = true;
        }
        if reselect {
            self.select_goal(t, est)?;
        }
        for _ in 0..MAX_REPLANS {
            let goal = self.goal.as_ref().expect("goal selected above").cell;
            match self.plan_inflated(agent, goal) {
                Some(plan) => {
                    let raw = extract_local_goal(&plan, &self.map, est);
                    let local_goal = visible_local_goal(&plan, &self.map, est, raw, SIGHT_CLEARANCE);
                    self.local_goal = Some(local_goal);
                    if self.record_plans {
                        self.plans.push((t, plan.cells));
                    }
                    return Some(local_controller(est, &local_goal, obs, &self.cfg.sensor));
                }
                None => {
                    self.blacklist.push(goal);
                    self.select_goal(t, est)?;
                }
            }
        }
        Some(Action::TurnLeft)
    }

    fn select_goal(&mut self, t: u64, est: &Pose) -> Option<()> {
        let potential = GoalPotential::for_reward(self.cfg.reward, self.rewards.grid_counts());
        let selection = select_global_goal(&self.map, est, potential, &self.blacklist, t, &self.cfg.goal);
        self.goal = selection.goal;
        self.goal_origin = *est;
        self.goal.as_ref().map(|_| ())
    }

    /// Tries the inflation ladder from the widest clearance down. Rungs that
    /// failed for this goal are skipped until the goal changes, so a goal
    /// hugging a wall does not cost a failed search on every step.
    fn plan_inflated(&mut self, start: (usize, usize), goal: (usize, usize)) -> Option<Plan> {
        if self.failed_rungs.0 != goal {
            self.failed_rungs = (goal, 0);
        }
        for (rung, &inflation) in INFLATION_LADDER.iter().enumerate().skip(self.failed_rungs.1) {
            let cfg = PlannerConfig { inflation, ..PlannerConfig::default() };
            if let Ok(plan) = self.planner.plan(&self.map, start, goal, &cfg) {
                return Some(plan);
            }
            self.failed_rungs.1 = rung + 1;
        }
        None
    }

    /// Scores the episode and assembles its log.
    pub fn finish(self) -> EpisodeLog {
        let navigation = navigation_metrics(&self.map, &self.gt);
        let (captions, views): (Vec<_>, Vec<_>) =
            self.records.iter().filter_map(|r| r.caption.clone().map(|c| (c, r.view.clone()))).unzip();
        let flags = DegenerateFlags {
            dme_degenerate: self.rewards.degenerate_counts(),
            captioner_warnings: self.captioner.warnings(),
            ..Default::default()
        };
        let report = episode_report(
            navigation,
            &captions,
            &views,
            self.records.len(),
            &self.header.objects,
            &F1Alignment,
            &self.similarity,
            flags,
        );
        let position_error = self
            .records
            .last()
            .map_or(0.0, |r| self.spawn.compose(&r.est_pose).distance_to(&r.true_pose));
        EpisodeLog {
            footer: Footer {
                steps_completed: self.records.len(),
                termination: self.termination,
                navigation,
                position_error,
                report,
            },
            header: self.header,
            steps: self.records,
        }
    }
}

/// Decrease of the geodesic distance to a fixed local goal between two
/// poses, both measured on the same map; 0 when either is undefined.
pub fn local_reward(planner: &mut Planner, map: &GlobalMap, prev: &Pose, cur: &Pose, goal: (usize, usize)) -> f64 {
    let (Some(a), Some(b)) = (map.cell_of(prev.x, prev.y), map.cell_of(cur.x, cur.y)) else {
        return 0.0;
    };
    let d0 = planner.geodesic(map, a, goal);
    let d1 = planner.geodesic(map, b, goal);
    if d0.is_finite() && d1.is_finite() {
        d0 - d1
    } else {
        0.0
    }
}

pub fn run_episode(cfg: &EpisodeConfig) -> Result<EpisodeLog> {
    run_episode_with(cfg, &RunOptions::default()).map(|(log, _)| log)
}

/// Runs an episode to completion, writing snapshots as requested. Returns
/// the log and the recorded plans (empty unless `record_plans`).
pub fn run_episode_with(cfg: &EpisodeConfig, opts: &RunOptions) -> Result<(EpisodeLog, Vec<(u64, Vec<(usize, usize)>)>)> {
    let mut episode = Episode::new(cfg)?;
    episode.record_plans = opts.record_plans;
    let snapshots = match (&opts.snapshot_dir, opts.snapshot_every) {
        (Some(dir), Some(every)) if every > 0 => {
            std::fs::create_dir_all(dir)?;
            Some((dir.clone(), every))
        }
        _ => None,
    };
    while episode.step()? {
        if let Some((dir, every)) = &snapshots {
            let n = episode.records.len();
            if n % every == 0 {
                episode.map.write_snapshot(dir, &format!("map_{n:06}"), episode.spawn)?;
            }
        }
    }
    if let Some((dir, _)) = &snapshots {
        episode.map.write_snapshot(dir, "map_final", episode.spawn)?;
    }
    let plans = std::mem::take(&mut episode.plans);
    Ok((episode.finish(), plans))
}
