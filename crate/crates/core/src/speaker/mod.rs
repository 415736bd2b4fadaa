//! When to speak and what to say.

mod external;
mod nouns;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::world::{Observation, Pose};

pub use external::{CaptionRequest, CaptionResponse, Endpoint, ExternalCaptioner, VisibleEntry, PROTOCOL_VERSION};
pub use nouns::{default_synonyms, extract_nouns};

/// Minimum apparent area for an object to count toward the object policy.
pub const OBJECT_AREA_FLOOR: f64 = 0.01;

pub const DEPTH_THRESHOLDS: [f64; 3] = [1.0, 2.0, 3.0];
pub const DEPTH_THRESHOLDS_ALT: [f64; 3] = [1.0, 1.5, 2.0];
pub const OBJECT_THRESHOLDS: [u32; 3] = [1, 3, 5];
pub const OBJECT_THRESHOLDS_ALT: [u32; 3] = [1, 2, 3];
pub const ACTIVATION_THRESHOLDS: [f64; 3] = [4.5, 5.0, 5.5];

/// Threshold rule deciding whether the current view gets a caption. All
/// comparisons are inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", content = "threshold", rename_all = "snake_case")]
pub enum SpeakerPolicy {
    Always,
    Depth(f64),
    ObjectCount(u32),
    Activation(f64),
}

impl SpeakerPolicy {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            SpeakerPolicy::Always => true,
            SpeakerPolicy::Depth(d) => d > 0.0 && d.is_finite(),
            SpeakerPolicy::ObjectCount(o) => o > 0,
            SpeakerPolicy::Activation(a) => a > 0.0 && a.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("speaker threshold must be positive: {self}")))
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SpeakerPolicy::Always => "always",
            SpeakerPolicy::Depth(_) => "depth",
            SpeakerPolicy::ObjectCount(_) => "object",
            SpeakerPolicy::Activation(_) => "activation",
        }
    }

    pub fn threshold(&self) -> Option<f64> {
        match *self {
            SpeakerPolicy::Always => None,
            SpeakerPolicy::Depth(d) => Some(d),
            SpeakerPolicy::ObjectCount(o) => Some(o as f64),
            SpeakerPolicy::Activation(a) => Some(a),
        }
    }

    /// Builds a policy from a CLI-style name and optional threshold; the
    /// middle value of the default threshold set is used when omitted.
    pub fn from_parts(name: &str, threshold: Option<f64>) -> Result<Self> {
        let policy = match name {
            "always" => SpeakerPolicy::Always,
            "depth" => SpeakerPolicy::Depth(threshold.unwrap_or(DEPTH_THRESHOLDS[1])),
            "object" => {
                let o = threshold.unwrap_or(OBJECT_THRESHOLDS[1] as f64);
                if o.fract() != 0.0 || o < 0.0 {
                    return Err(Error::InvalidParameter(format!("object threshold must be a whole number, got {o}")));
                }
                SpeakerPolicy::ObjectCount(o as u32)
            }
            "activation" => SpeakerPolicy::Activation(threshold.unwrap_or(ACTIVATION_THRESHOLDS[1])),
            other => return Err(Error::InvalidParameter(format!("unknown speaker policy '{other}'"))),
        };
        policy.validate()?;
        Ok(policy)
    }
}

impl fmt::Display for SpeakerPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.threshold() {
            None => f.write_str(self.name()),
            Some(t) => write!(f, "{}:{}", self.name(), t),
        }
    }
}

impl FromStr for SpeakerPolicy {
    type Err = Error;

    /// Parses `always`, `depth:2.0`, `object:3`, `activation:5.0`.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None => Self::from_parts(s, None),
            Some((name, t)) => {
                let t: f64 = t.parse().map_err(|_| Error::InvalidParameter(format!("bad threshold in '{s}'")))?;
                Self::from_parts(name, Some(t))
            }
        }
    }
}

/// Decision plus the measured quantity (mean depth, object count,
/// activation; 1 for `Always`).
pub fn should_speak(policy: &SpeakerPolicy, obs: &Observation) -> (bool, f64) {
    match *policy {
        SpeakerPolicy::Always => (true, 1.0),
        SpeakerPolicy::Depth(d) => {
            let v = obs.mean_depth();
            (v >= d, v)
        }
        SpeakerPolicy::ObjectCount(o) => {
            let n = obs.visible.iter().filter(|v| v.apparent_area >= OBJECT_AREA_FLOOR).count();
            (n >= o as usize, n as f64)
        }
        SpeakerPolicy::Activation(a) => (obs.activation >= a, obs.activation),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trigger {
    pub policy: SpeakerPolicy,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaptionSource {
    Template,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Caption {
    pub t: u64,
    pub text: String,
    pub nouns: Vec<String>,
    pub trigger: Trigger,
    pub pose: Pose,
    pub source: CaptionSource,
}

/// Text and nouns of the built-in captioner.
pub fn template_text(obs: &Observation) -> (String, Vec<String>) {
    let mut objs: Vec<_> = obs.visible.iter().collect();
    objs.sort_by(|a, b| {
        b.apparent_area
            .total_cmp(&a.apparent_area)
            .then_with(|| a.category.cmp(&b.category))
            .then_with(|| a.object_id.cmp(&b.object_id))
    });
    let nouns: Vec<String> = objs.iter().take(3).map(|o| o.category.clone()).collect();
    let text = match nouns.as_slice() {
        [] => return ("an empty room".to_string(), vec!["room".to_string()]),
        [a] => format!("a room with a {a}"),
        [a, b] => format!("a room with a {a} and a {b}"),
        [a, b, c, ..] => format!("a room with a {a}, a {b} and a {c}"),
    };
    (text, nouns)
}

pub fn template_caption(obs: &Observation, t: u64, trigger: Trigger, pose: Pose) -> Caption {
    let (text, nouns) = template_text(obs);
    Caption { t, text, nouns, trigger, pose, source: CaptionSource::Template }
}

/// Noun vocabulary: object categories plus "room".
pub fn noun_vocabulary(categories: &[String]) -> Vec<String> {
    let mut v: Vec<String> = categories.to_vec();
    if !v.iter().any(|c| c == "room") {
        v.push("room".to_string());
    }
    v
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum CaptionerSpec {
    Template,
    External(String),
}

impl FromStr for CaptionerSpec {
    type Err = Error;

    /// `template` or `external:<endpoint>`.
    fn from_str(s: &str) -> Result<Self> {
        if s == "template" {
            return Ok(CaptionerSpec::Template);
        }
        if let Some(ep) = s.strip_prefix("external:") {
            Endpoint::parse(ep)?;
            return Ok(CaptionerSpec::External(ep.to_string()));
        }
        Err(Error::InvalidParameter(format!("captioner must be 'template' or 'external:<endpoint>', got '{s}'")))
    }
}

impl TryFrom<String> for CaptionerSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<CaptionerSpec> for String {
    fn from(spec: CaptionerSpec) -> String {
        spec.to_string()
    }
}

impl fmt::Display for CaptionerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CaptionerSpec::Template => f.write_str("template"),
            CaptionerSpec::External(ep) => write!(f, "external:{ep}"),
        }
    }
}

/// Caption generator with template fallback for external failures.
#[derive(Debug)]
pub struct Captioner {
    external: Option<ExternalCaptioner>,
    vocabulary: Vec<String>,
    synonyms: BTreeMap<String, String>,
    warnings: u64,
}

impl Captioner {
    pub fn template() -> Self {
        Self { external: None, vocabulary: Vec::new(), synonyms: BTreeMap::new(), warnings: 0 }
    }

    pub fn new(spec: &CaptionerSpec, vocabulary: Vec<String>, timeout: Duration) -> Result<Self> {
        let external = match spec {
            CaptionerSpec::Template => None,
            CaptionerSpec::External(ep) => Some(ExternalCaptioner::new(Endpoint::parse(ep)?, timeout)),
        };
        Ok(Self { external, vocabulary, synonyms: default_synonyms(), warnings: 0 })
    }

    pub fn warnings(&self) -> u64 {
        self.warnings
    }

    pub fn caption(&mut self, obs: &Observation, t: u64, trigger: Trigger, pose: Pose) -> Caption {
        if let Some(client) = self.external.as_mut() {
            match client.request(&CaptionRequest::from_observation(obs, t)) {
                Ok(resp) => {
                    let nouns = resp.nouns.unwrap_or_else(|| extract_nouns(&resp.text, &self.vocabulary, &self.synonyms));
                    return Caption { t, text: resp.text, nouns, trigger, pose, source: CaptionSource::External };
                }
                Err(e) => {
                    self.warnings += 1;
                    log::warn!("captioner failed at t={t}: {e}; using template caption");
                }
            }
        }
        template_caption(obs, t, trigger, pose)
    }
}
