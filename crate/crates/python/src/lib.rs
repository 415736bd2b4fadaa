//! Python bindings. Structured values cross the boundary as JSON text so the
//! Python side sees exactly the on-disk formats.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use roamtell::harness::{self, EpisodeConfig, EpisodeLog};
use roamtell::metrics::SimilarityTable;
use roamtell::speaker::{default_synonyms, SpeakerPolicy};
use roamtell::world::{self, WorldParams};
use roamtell::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidParameter(_) | Error::InvalidWorld(_) | Error::UnsupportedVersion { .. } | Error::GenerationFailed { .. } => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn parse_config(config: Option<&str>) -> PyResult<EpisodeConfig> {
    let cfg: EpisodeConfig = match config {
        Some(text) => serde_json::from_str(text).map_err(|e| PyValueError::new_err(format!("config: {e}")))?,
        None => EpisodeConfig::default(),
    };
    cfg.validate().map_err(to_py)?;
    Ok(cfg)
}

fn json<T: serde::Serialize>(value: &T) -> PyResult<String> {
    serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Default episode configuration as JSON.
#[pyfunction]
fn default_config() -> PyResult<String> {
    json(&EpisodeConfig::default())
}

/// Procedural world as JSON.
#[pyfunction]
#[pyo3(signature = (seed, extent=12.0, rooms=4, objects=8))]
fn generate_world(seed: u64, extent: f64, rooms: usize, objects: usize) -> PyResult<String> {
    world::generate_world(seed, &WorldParams::new(extent, rooms, objects)).and_then(|w| w.to_json_string()).map_err(to_py)
}

/// Runs one episode; returns the JSONL log.
#[pyfunction]
#[pyo3(signature = (config=None))]
fn run_episode(py: Python<'_>, config: Option<&str>) -> PyResult<String> {
    let cfg = parse_config(config)?;
    let bytes = py.detach(|| harness::run_episode(&cfg).and_then(|log| log.to_jsonl())).map_err(to_py)?;
    String::from_utf8(bytes).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Evaluates every policy of `grid` (e.g. `"depth:1.5"`) on one trace per
/// seed; returns the rows as a JSON list.
#[pyfunction]
#[pyo3(signature = (grid, seeds, config=None))]
fn sweep(py: Python<'_>, grid: Vec<String>, seeds: Vec<u64>, config: Option<&str>) -> PyResult<String> {
    let cfg = parse_config(config)?;
    let grid: Vec<SpeakerPolicy> = grid.iter().map(|s| s.parse()).collect::<Result<_, _>>().map_err(to_py)?;
    let (rows, _) = py.detach(|| harness::sweep(&cfg, &grid, &seeds)).map_err(to_py)?;
    json(&rows)
}

/// Recomputes the metrics of a log file. Returns `(recomputed report JSON,
/// footer matches, re-simulation identical or None)`.
#[pyfunction]
#[pyo3(signature = (path, resimulate=false))]
fn replay(py: Python<'_>, path: PathBuf, resimulate: bool) -> PyResult<(String, bool, Option<bool>)> {
    let out = py
        .detach(|| EpisodeLog::load(&path).and_then(|log| harness::replay(&log, resimulate)))
        .map_err(to_py)?;
    Ok((json(&out.recomputed)?, out.footer_matches, out.resimulated_identical))
}

/// Multiset IoU of caption nouns against object categories under the
/// default synonym table.
#[pyfunction]
fn assignment_iou(nouns: Vec<String>, objects: Vec<String>) -> f64 {
    let sim = SimilarityTable::new(Vec::new(), default_synonyms());
    roamtell::metrics::assignment_iou(&nouns, &objects, &sim)
}

#[pymodule]
fn roamtell_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("SCHEMA_VERSION", harness::SCHEMA_VERSION)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(generate_world, m)?)?;
    m.add_function(wrap_pyfunction!(run_episode, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(replay, m)?)?;
    m.add_function(wrap_pyfunction!(assignment_iou, m)?)?;
    Ok(())
}
