//! Files a run leaves behind: manifest, reward curves, sweep metrics and
//! per-slot rate traces.
//!
//! Two curve files are written per training run. `training.csv` carries
//! wall-clock timings for profiling; `rewards.csv` carries only the
//! deterministic columns, so identical (config, seed) runs produce
//! byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use platoon_core::eval::EvalPointResult;
use platoon_core::{Result, SimConfig, TrainLogRow};

/// Everything needed to trace an output file back to the invocation that
/// produced it. One manifest per run directory.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub algo: String,
    pub seed: u64,
    pub code_version: String,
    pub started_utc: String,
    pub finished_utc: String,
    /// Which evaluation episode the rate traces were taken from; drawn from
    /// a dedicated stream of the run seed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_episode: Option<u64>,
    /// Structural hash binding checkpoints to this scenario.
    pub scenario_hash: String,
    /// Files this run wrote, relative to the manifest's directory.
    pub outputs: Vec<String>,
    /// Full configuration snapshot after command-line overrides.
    pub config: SimConfig,
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        fs::write(&path, text)?;
        Ok(path)
    }
}

fn fmt_opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

/// Full training curve including wall-clock time per episode.
pub fn write_training_csv(path: &Path, log: &[TrainLogRow]) -> Result<()> {
    let mut out = String::from("episode,epsilon,total_reward,loss,wall_ms\n");
    for r in log {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.episode,
            r.epsilon,
            r.total_reward,
            fmt_opt(&r.loss),
            r.wall_ms
        )
        .expect("string write");
    }
    fs::write(path, out)?;
    Ok(())
}

/// Deterministic subset of the training curve (no timings).
pub fn write_rewards_csv(path: &Path, log: &[TrainLogRow]) -> Result<()> {
    let mut out = String::from("episode,epsilon,total_reward,loss\n");
    for r in log {
        writeln!(out, "{},{},{},{}", r.episode, r.epsilon, r.total_reward, fmt_opt(&r.loss))
            .expect("string write");
    }
    fs::write(path, out)?;
    Ok(())
}

pub const METRICS_HEADER: &str = "point,algo,payload_multiple,payload_bytes,delivery_probability,\
                                  all_delivered_probability,mean_episode_reward,mean_completion_slot,\
                                  trace_episode,trace_file\n";

/// One payload-sweep row per line; `trace_file` names the JSONL trace
/// written alongside.
pub fn metrics_rows(algo: &str, rows: &[EvalPointResult], trace_files: &[String]) -> String {
    let mut out = String::new();
    for (i, (r, trace)) in rows.iter().zip(trace_files).enumerate() {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            i,
            algo,
            r.payload_multiple,
            r.payload_bytes,
            r.delivery_probability,
            r.all_delivered_probability,
            r.mean_episode_reward,
            fmt_opt(&r.mean_completion_slot),
            r.trace_episode,
            trace
        )
        .expect("string write");
    }
    out
}

/// Per-slot rate trace of the designated episode, one JSON object per slot.
pub fn write_trace_jsonl(path: &Path, rows: &[platoon_core::TraceRow]) -> Result<()> {
    let mut out = String::new();
    for row in rows {
        out.push_str(&serde_json::to_string(row).expect("trace row serializes"));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}
