//! Dataset-level aggregation of episode logs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::log::EpisodeLog;
use super::sweep::csv_error;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub file: String,
    pub world_hash: String,
    pub seed: u64,
    pub agent: String,
    pub reward: String,
    pub policy: String,
    pub threshold: Option<f64>,
    pub steps: usize,
    pub termination: String,
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
    pub position_error: f64,
}

/// Means over episodes of every numeric metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub episodes: usize,
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
}

/// Loads every log; the first unreadable one aborts with its path.
pub fn read_logs(paths: &[PathBuf]) -> Result<Vec<(PathBuf, EpisodeLog)>> {
    paths.iter().map(|p| EpisodeLog::load(p).map(|log| (p.clone(), log))).collect()
}

pub fn report(logs: &[(PathBuf, EpisodeLog)]) -> Result<(Vec<ReportRow>, ReportSummary)> {
    if logs.is_empty() {
        return Err(Error::InvalidParameter("no logs to report".into()));
    }
    let rows: Vec<ReportRow> = logs
        .iter()
        .map(|(path, log)| {
            let cfg = &log.header.config;
            let r = &log.footer.report;
            ReportRow {
                file: path.display().to_string(),
                world_hash: log.header.world_hash.clone(),
                seed: cfg.seed,
                agent: serde_json::to_value(cfg.agent).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default(),
                reward: cfg.reward.to_string(),
                policy: cfg.speaker.name().to_string(),
                threshold: cfg.speaker.threshold(),
                steps: log.steps.len(),
                termination: match log.footer.termination {
                    None => "completed".to_string(),
                    Some(t) => serde_json::to_value(t).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default(),
                },
                map_iou: r.map_iou,
                map_acc: r.map_acc,
                area_seen: r.area_seen,
                pct_area_seen: r.pct_area_seen,
                cov_mean: r.cov_mean,
                div_mean: r.div_mean,
                loquacity: r.loquacity,
                align_mean: r.align_mean,
                assignment_iou: r.assignment_iou,
                ed_s: r.ed_s,
                position_error: log.footer.position_error,
            }
        })
        .collect();
    let n = rows.len() as f64;
    let mean = |f: fn(&ReportRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
    let summary = ReportSummary {
        episodes: rows.len(),
        map_iou: mean(|r| r.map_iou),
        map_acc: mean(|r| r.map_acc),
        area_seen: mean(|r| r.area_seen),
        pct_area_seen: mean(|r| r.pct_area_seen),
        cov_mean: mean(|r| r.cov_mean),
        div_mean: mean(|r| r.div_mean),
        loquacity: mean(|r| r.loquacity),
        align_mean: mean(|r| r.align_mean),
        assignment_iou: mean(|r| r.assignment_iou),
        ed_s: mean(|r| r.ed_s),
    };
    Ok((rows, summary))
}

pub fn write_report_csv(path: impl AsRef<Path>, rows: &[ReportRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    for r in rows {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{run_episode, EpisodeConfig, WorldSource};
    use crate::world::WorldParams;

    fn log(seed: u64) -> EpisodeLog {
        run_episode(&EpisodeConfig {
            world: WorldSource::Generated { seed: 2, params: WorldParams::new(8.0, 2, 4) },
            seed,
            steps: 15,
            map_size: 401,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn single_log_summary_equals_footer() {
        let l = log(1);
        let (rows, s) = report(&[("a.jsonl".into(), l.clone())]).unwrap();
        assert_eq!(rows.len(), 1);
        let r = &l.footer.report;
        assert_eq!((s.ed_s, s.loquacity, s.area_seen, s.map_iou), (r.ed_s, r.loquacity, r.area_seen, r.map_iou));
    }

    #[test]
    fn summary_is_the_arithmetic_mean() {
        let mut a = log(1);
        let mut b = log(2);
        a.footer.report.ed_s = 0.2;
        b.footer.report.ed_s = 0.4;
        let (_, s) = report(&[("a".into(), a), ("b".into(), b)]).unwrap();
        assert!((s.ed_s - 0.3).abs() < 1e-15);
    }

    #[test]
    fn schema_mismatch_names_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let good = dir.path().join("good.jsonl");
        log(1).save(&good).unwrap();
        let text = std::fs::read_to_string(&good).unwrap().replacen("\"schema_version\":1", "\"schema_version\":99", 1);
        let bad = dir.path().join("bad.jsonl");
        std::fs::write(&bad, text).unwrap();
        let err = read_logs(&[good.clone(), bad.clone()]).unwrap_err().to_string();
        assert!(err.contains("bad.jsonl") && err.contains("schema version 99"), "{err}");

        let truncated = dir.path().join("cut.jsonl");
        let full = std::fs::read_to_string(&good).unwrap();
        std::fs::write(&truncated, &full[..full.len() / 2]).unwrap();
        let err = read_logs(&[truncated]).unwrap_err().to_string();
        assert!(err.contains("cut.jsonl"), "{err}");
    }

    #[test]
    fn csv_has_one_row_per_log() {
        let dir = tempfile::tempdir().unwrap();
        let (rows, _) = report(&[("a".into(), log(1)), ("b".into(), log(2))]).unwrap();
        let path = dir.path().join("r.csv");
        write_report_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("file,world_hash,seed"));
    }
}
