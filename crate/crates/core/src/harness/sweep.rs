//! Post-hoc speaker evaluation on recorded traces, threshold sweeps and
//! replay verification.
//!
//! Navigation never depends on the speaker, so one trace per seed serves
//! every speaker policy: decisions and captions are recomputed from the
//! recorded views.

use std::path::Path;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::episode::run_episode;
use super::log::EpisodeLog;
use super::EpisodeConfig;
use crate::error::{Error, Result};
use crate::metrics::{episode_report, F1Alignment, MetricReport, SimilarityTable};
use crate::speaker::{default_synonyms, should_speak, Captioner, SpeakerPolicy, Trigger};

/// Description metrics of `log` under `policy`. The recorded captions are
/// reused when `policy` is the one the episode ran with; otherwise the
/// speaker is re-evaluated on every recorded view and `captioner` produces
/// the captions.
pub fn evaluate_speaker(log: &EpisodeLog, policy: SpeakerPolicy, captioner: &mut Captioner) -> MetricReport {
    let recorded = policy == log.header.config.speaker;
    let warnings_before = captioner.warnings();
    let mut captions = Vec::new();
    let mut views = Vec::new();
    for r in &log.steps {
        if recorded {
            if let Some(c) = &r.caption {
                captions.push(c.clone());
                views.push(r.view.clone());
            }
            continue;
        }
        let obs = r.view.to_observation();
        let (speak, value) = should_speak(&policy, &obs);
        if speak {
            captions.push(captioner.caption(&obs, r.t, Trigger { policy, value }, r.est_pose));
            views.push(r.view.clone());
        }
    }
    let mut flags = log.footer.report.degenerate_flags;
    flags.cov_undefined = 0;
    if !recorded {
        flags.captioner_warnings = captioner.warnings() - warnings_before;
    }
    let similarity = SimilarityTable::new(log.header.vocabulary.clone(), default_synonyms());
    episode_report(
        log.footer.navigation,
        &captions,
        &views,
        log.steps.len(),
        &log.header.objects,
        &F1Alignment,
        &similarity,
        flags,
    )
}

/// One CSV row per (seed, policy) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub seed: u64,
    pub policy: String,
    pub threshold: Option<f64>,
    pub status: String,
    pub steps: usize,
    pub loquacity: f64,
    pub cov_mean: f64,
    pub div_mean: f64,
    pub align_mean: f64,
    pub assignment_iou: f64,
    pub ed_s: f64,
    pub map_iou: f64,
    pub map_acc: f64,
    pub area_seen: f64,
    pub pct_area_seen: f64,
}

impl SweepRow {
    fn ok(seed: u64, policy: &SpeakerPolicy, steps: usize, r: &MetricReport) -> Self {
        Self {
            seed,
            policy: policy.name().to_string(),
            threshold: policy.threshold(),
            status: "ok".to_string(),
            steps,
            loquacity: r.loquacity,
            cov_mean: r.cov_mean,
            div_mean: r.div_mean,
            align_mean: r.align_mean,
            assignment_iou: r.assignment_iou,
            ed_s: r.ed_s,
            map_iou: r.map_iou,
            map_acc: r.map_acc,
            area_seen: r.area_seen,
            pct_area_seen: r.pct_area_seen,
        }
    }

    fn failed(seed: u64, policy: &SpeakerPolicy, error: &Error) -> Self {
        let nan = f64::NAN;
        Self {
            seed,
            policy: policy.name().to_string(),
            threshold: policy.threshold(),
            status: format!("error: {error}"),
            steps: 0,
            loquacity: nan,
            cov_mean: nan,
            div_mean: nan,
            align_mean: nan,
            assignment_iou: nan,
            ed_s: nan,
            map_iou: nan,
            map_acc: nan,
            area_seen: nan,
            pct_area_seen: nan,
        }
    }
}

/// Runs one navigation trace per seed (in parallel) and evaluates every
/// policy of `grid` on each. Rows are ordered seed-major, then by grid
/// order; failed traces yield error rows and the sweep continues. The
/// traces are returned alongside (`None` for failures).
pub fn sweep(base: &EpisodeConfig, grid: &[SpeakerPolicy], seeds: &[u64]) -> Result<(Vec<SweepRow>, Vec<Option<EpisodeLog>>)> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty policy grid".into()));
    }
    if seeds.is_empty() {
        return Err(Error::InvalidParameter("empty seed list".into()));
    }
    for p in grid {
        p.validate()?;
    }
    base.validate()?;
    let cells: Vec<(Vec<SweepRow>, Option<EpisodeLog>)> = seeds
        .par_iter()
        .map(|&seed| {
            let cfg = EpisodeConfig { seed, ..base.clone() };
            let trace = run_episode(&cfg).and_then(|log| {
                let captioner =
                    Captioner::new(&cfg.captioner, log.header.vocabulary.clone(), Duration::from_millis(cfg.captioner_timeout_ms))?;
                Ok((log, captioner))
            });
            match trace {
                Ok((log, mut captioner)) => {
                    let rows = grid
                        .iter()
                        .map(|p| SweepRow::ok(seed, p, log.steps.len(), &evaluate_speaker(&log, *p, &mut captioner)))
                        .collect();
                    (rows, Some(log))
                }
                Err(e) => (grid.iter().map(|p| SweepRow::failed(seed, p, &e)).collect(), None),
            }
        })
        .collect();
    let mut rows = Vec::with_capacity(seeds.len() * grid.len());
    let mut traces = Vec::with_capacity(seeds.len());
    for (r, t) in cells {
        rows.extend(r);
        traces.push(t);
    }
    Ok((rows, traces))
}

pub fn write_sweep_csv(path: impl AsRef<Path>, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    for r in rows {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidParameter(format!("csv: {other:?}")),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayOutcome {
    /// Metrics recomputed from the recorded stream.
    pub recomputed: MetricReport,
    pub footer_matches: bool,
    /// Re-simulation produced byte-identical log content (when requested).
    pub resimulated_identical: Option<bool>,
    /// First step whose re-simulated record differs.
    pub first_divergence: Option<usize>,
}

/// Recomputes the description metrics of a log and, optionally, re-runs
/// the episode from its header to check that it reproduces the log.
pub fn replay(log: &EpisodeLog, resimulate: bool) -> Result<ReplayOutcome> {
    let cfg = &log.header.config;
    let mut captioner = Captioner::template();
    let recomputed = evaluate_speaker(log, cfg.speaker, &mut captioner);
    let footer_matches = recomputed == log.footer.report;
    let (mut resimulated_identical, mut first_divergence) = (None, None);
    if resimulate {
        let again = run_episode(cfg)?;
        first_divergence = log
            .steps
            .iter()
            .zip(&again.steps)
            .position(|(a, b)| a != b)
            .or_else(|| (log.steps.len() != again.steps.len()).then(|| log.steps.len().min(again.steps.len())));
        resimulated_identical = Some(again.to_jsonl()? == log.to_jsonl()?);
    }
    Ok(ReplayOutcome { recomputed, footer_matches, resimulated_identical, first_divergence })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::WorldSource;
    use crate::world::WorldParams;

    fn base(steps: usize) -> EpisodeConfig {
        EpisodeConfig {
            world: WorldSource::Generated { seed: 11, params: WorldParams::new(8.0, 2, 5) },
            steps,
            map_size: 401,
            ..Default::default()
        }
    }

    #[test]
    fn post_hoc_evaluation_matches_live_runs() {
        let trace = run_episode(&base(60)).unwrap();
        for policy in [SpeakerPolicy::Depth(1.5), SpeakerPolicy::ObjectCount(1), SpeakerPolicy::Activation(4.5)] {
            let live = run_episode(&EpisodeConfig { speaker: policy, ..base(60) }).unwrap();
            let post = evaluate_speaker(&trace, policy, &mut Captioner::template());
            assert_eq!(post, live.footer.report, "{policy}");
            let decisions: Vec<bool> = live.steps.iter().map(|s| s.speak).collect();
            let replayed: Vec<bool> =
                trace.steps.iter().map(|s| should_speak(&policy, &s.view.to_observation()).0).collect();
            assert_eq!(decisions, replayed);
        }
    }

    #[test]
    fn sweep_grid_cardinality_and_order() {
        let grid = [SpeakerPolicy::Always, SpeakerPolicy::Depth(1.0), SpeakerPolicy::Depth(1.5), SpeakerPolicy::Depth(2.0)];
        let seeds = [1, 2, 3, 4, 5];
        let (rows, traces) = sweep(&base(20), &grid, &seeds).unwrap();
        assert_eq!(rows.len(), 20);
        assert_eq!(traces.len(), 5);
        assert_eq!(rows[4].seed, 2);
        assert_eq!(rows[5].policy, "depth");
        for chunk in rows.chunks(4) {
            assert_eq!(chunk[0].loquacity, 100.0);
            assert!(chunk[1].loquacity >= chunk[2].loquacity && chunk[2].loquacity >= chunk[3].loquacity);
        }
    }

    #[test]
    fn sweep_rejects_empty_inputs() {
        assert!(sweep(&base(5), &[], &[1]).is_err());
        assert!(sweep(&base(5), &[SpeakerPolicy::Always], &[]).is_err());
    }

    #[test]
    fn failed_cells_are_recorded() {
        let cfg = EpisodeConfig { world: WorldSource::File { path: "/nonexistent/world.json".into() }, ..base(5) };
        let (rows, traces) = sweep(&cfg, &[SpeakerPolicy::Always], &[1, 2]).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.status.starts_with("error")));
        assert!(traces.iter().all(Option::is_none));
    }

    #[test]
    fn replay_reproduces_a_log() {
        let log = run_episode(&EpisodeConfig { speaker: SpeakerPolicy::Depth(2.0), ..base(40) }).unwrap();
        let out = replay(&log, true).unwrap();
        assert!(out.footer_matches);
        assert_eq!(out.resimulated_identical, Some(true));
        assert_eq!(out.first_divergence, None);
    }
}
