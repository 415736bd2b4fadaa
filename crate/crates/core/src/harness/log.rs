//! JSONL episode logs: one header line, one line per step, one footer.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EpisodeConfig, Termination};
use crate::error::{Error, Result};
use crate::metrics::{MetricReport, NavigationMetrics, View};
use crate::rewards::StepRewards;
use crate::rng::sha256_hex;
use crate::speaker::Caption;
use crate::world::{Action, Pose};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub schema_version: u32,
    pub code_version: String,
    pub world_hash: String,
    pub world_name: String,
    pub spawn: Pose,
    /// Category of every world object (a multiset).
    pub objects: Vec<String>,
    /// Noun vocabulary used for caption parsing.
    pub vocabulary: Vec<String>,
    pub config: EpisodeConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: u64,
    /// World frame.
    pub true_pose: Pose,
    /// Episode frame (origin at the spawn pose).
    pub est_pose: Pose,
    pub action: Action,
    pub collided: bool,
    pub r_global: f64,
    pub r_local: f64,
    #[serde(with = "crate::rewards::infinite_as_null")]
    pub n_hat: f64,
    pub rewards: StepRewards,
    pub goal: Option<(usize, usize)>,
    pub speak: bool,
    pub trigger_value: f64,
    pub view: View,
    pub caption: Option<Caption>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Footer {
    pub steps_completed: usize,
    pub termination: Option<Termination>,
    pub navigation: NavigationMetrics,
    /// Distance between the true and the estimated final position, meters.
    pub position_error: f64,
    pub report: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogLine {
    Header(Header),
    Step(StepRecord),
    Footer(Footer),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub header: Header,
    pub steps: Vec<StepRecord>,
    pub footer: Footer,
}

impl EpisodeLog {
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        write_line(&mut w, &LogLine::Header(self.header.clone()))?;
        for s in &self.steps {
            write_line(&mut w, &LogLine::Step(s.clone()))?;
        }
        write_line(&mut w, &LogLine::Footer(self.footer.clone()))
    }

    pub fn to_jsonl(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf)?;
        Ok(buf)
    }

    pub fn sha256(&self) -> Result<String> {
        Ok(sha256_hex(&self.to_jsonl()?))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_jsonl(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// Parses a log; every failure names the file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let fail = |message: String| Error::Log { path: path.to_path_buf(), message };
        let file = std::fs::File::open(path).map_err(|e| fail(e.to_string()))?;
        let mut header = None;
        let mut steps = Vec::new();
        let mut footer = None;
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| fail(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            if n == 0 {
                let probe: serde_json::Value = serde_json::from_str(&line).map_err(|e| fail(format!("line 1: {e}")))?;
                let version = probe.get("schema_version").and_then(|v| v.as_u64());
                if version != Some(SCHEMA_VERSION as u64) {
                    return Err(fail(format!(
                        "schema version {} is not supported (expected {SCHEMA_VERSION})",
                        version.map_or("missing".to_string(), |v| v.to_string())
                    )));
                }
            }
            if footer.is_some() {
                return Err(fail(format!("line {}: content after footer", n + 1)));
            }
            match serde_json::from_str::<LogLine>(&line).map_err(|e| fail(format!("line {}: {e}", n + 1)))? {
                LogLine::Header(h) if n == 0 => header = Some(h),
                LogLine::Step(s) if header.is_some() => {
                    if s.t != steps.len() as u64 {
                        return Err(fail(format!("line {}: step {} out of order", n + 1, s.t)));
                    }
                    steps.push(s)
                }
                LogLine::Footer(f) if header.is_some() => footer = Some(f),
                _ => return Err(fail(format!("line {}: unexpected record", n + 1))),
            }
        }
        let header = header.ok_or_else(|| fail("empty log".into()))?;
        let footer = footer.ok_or_else(|| fail("missing footer (truncated log?)".into()))?;
        if footer.steps_completed != steps.len() {
            return Err(fail(format!("footer claims {} steps, found {}", footer.steps_completed, steps.len())));
        }
        Ok(Self { header, steps, footer })
    }
}

fn write_line<W: Write>(w: &mut W, line: &LogLine) -> Result<()> {
    serde_json::to_writer(&mut *w, line)?;
    w.write_all(b"\n")?;
    Ok(())
}
