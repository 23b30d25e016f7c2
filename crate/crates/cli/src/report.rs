//! Timing, run metadata and file output shared by the runners.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

/// Runs `f` `repeats` times and returns the last result with the fastest
/// wall-clock time in seconds.
pub fn timed<T, F>(repeats: usize, mut f: F) -> Result<(T, f64)>
where
    F: FnMut() -> Result<T>,
{
    let mut best = f64::INFINITY;
    let mut out = None;
    for _ in 0..repeats.max(1) {
        let start = Instant::now();
        let v = f()?;
        best = best.min(start.elapsed().as_secs_f64());
        out = Some(v);
    }
    Ok((out.expect("at least one repeat"), best))
}

/// CPU model (when the OS exposes it), architecture and logical core count.
pub fn hardware() -> String {
    let cpu = fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|s| {
            s.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split_once(':'))
                .map(|(_, v)| v.trim().to_string())
        })
        .unwrap_or_else(|| "unknown cpu".into());
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    format!(
        "{cpu}; {} {}; {cores} logical cores",
        std::env::consts::ARCH,
        std::env::consts::OS
    )
}

/// Fields every manifest carries. `hardware`, `threads` and all timings are
/// the only parts that may differ between reruns of the same config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub tool_version: String,
    pub seed: u64,
    pub config_hash: String,
    pub config: RunConfig,
    pub hardware: String,
    pub threads: usize,
}

impl RunInfo {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        Ok(RunInfo {
            tool_version: env!("CARGO_PKG_VERSION").into(),
            seed: cfg.seed,
            config_hash: cfg.hash()?,
            config: cfg.clone(),
            hardware: hardware(),
            threads: rayon::current_num_threads(),
        })
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Shortest round-trip rendering, always with a '.' decimal separator.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}
