//! Adaptive-degree runs over a sweep of path counts.

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::config::{Interpolation, RunConfig};
use crate::experiment::{execute, ExperimentReport};
use crate::report::{ensure_dir, num, write_json, write_text, RunInfo};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub n: usize,
    pub pass: bool,
    pub speedup: f64,
    /// Speed-up with the degree-1 pilot charged to the accelerated run.
    pub speedup_with_pilot: f64,
    pub mean_degree: f64,
    pub max_degree: usize,
    pub report: ExperimentReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub points: Vec<SweepPoint>,
    pub all_pass: bool,
    pub speedup_nondecreasing: bool,
}

/// Forces adaptive interpolation; keeps the config's settings if it already is.
pub fn adaptive_config(cfg: &RunConfig) -> RunConfig {
    let mut cfg = cfg.clone();
    if !matches!(cfg.interpolation, Interpolation::Adaptive { .. }) {
        cfg.interpolation = Interpolation::Adaptive {
            target: None,
            probes: 100,
            cap: 1024,
        };
    }
    cfg
}

pub fn run_sweep(cfg: &RunConfig) -> Result<SweepReport> {
    let base = adaptive_config(cfg);
    let mut points = Vec::with_capacity(cfg.sweep.len());
    for &n in &cfg.sweep {
        let run = RunConfig { n, ..base.clone() };
        let out = execute(&run).with_context(|| format!("adaptive run with n = {n}"))?;
        let r = out.report;
        let t = &r.timings;
        let degrees: Vec<usize> = r.fits.iter().map(|f| f.degrees[0]).collect();
        let pilot = t.pilot_s.unwrap_or(0.0);
        points.push(SweepPoint {
            n,
            pass: r.pass,
            speedup: r.speedup,
            speedup_with_pilot: (t.full_s + t.mask_s) / (t.accel_s + t.mask_s + pilot),
            mean_degree: degrees.iter().sum::<usize>() as f64 / degrees.len().max(1) as f64,
            max_degree: degrees.iter().copied().max().unwrap_or(0),
            report: r,
        });
    }
    Ok(SweepReport {
        all_pass: points.iter().all(|p| p.pass),
        speedup_nondecreasing: points.windows(2).all(|w| w[1].speedup >= w[0].speedup),
        points,
    })
}

pub fn sweep_csv(r: &SweepReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "n",
        "pass",
        "speedup",
        "speedup_with_pilot",
        "mean_degree",
        "max_degree",
        "full_s",
        "accel_s",
    ])?;
    for p in &r.points {
        w.write_record([
            p.n.to_string(),
            p.pass.to_string(),
            num(p.speedup),
            num(p.speedup_with_pilot),
            num(p.mean_degree),
            p.max_degree.to_string(),
            num(p.report.timings.full_s),
            num(p.report.timings.accel_s),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepManifest {
    pub run: RunInfo,
    pub sweep: SweepReport,
}

pub fn run_adaptive(cfg: &RunConfig, dir: &Path) -> Result<SweepReport> {
    let report = run_sweep(cfg)?;
    ensure_dir(dir)?;
    write_text(&dir.join("adaptive.csv"), &sweep_csv(&report)?)?;
    write_json(
        &dir.join("manifest.json"),
        &SweepManifest {
            run: RunInfo::new(&adaptive_config(cfg))?,
            sweep: report.clone(),
        },
    )?;
    Ok(report)
}

pub fn render_sweep(r: &SweepReport) -> String {
    let mut s = format!(
        "{:>8} {:>6} {:>9} {:>11} {:>8}\n",
        "n", "pass", "speed-up", "+pilot", "deg"
    );
    for p in &r.points {
        s.push_str(&format!(
            "{:>8} {:>6} {:>9.1} {:>11.1} {:>8.1}\n",
            p.n,
            if p.pass { "yes" } else { "NO" },
            p.speedup,
            p.speedup_with_pilot,
            p.mean_degree
        ));
    }
    s.push_str(&format!("speed-up nondecreasing in n: {}\n", r.speedup_nondecreasing));
    s
}
