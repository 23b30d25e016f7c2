//! Per-call cost of the reference pricer against its interpolant, plus a
//! timed experiment.

use std::hint::black_box;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use chebexpo_core::pricing::Pricer;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::experiment::{execute, ExperimentReport};
use crate::report::{ensure_dir, write_json, RunInfo};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallCost {
    pub u: usize,
    pub calls: usize,
    pub pricer_ns: f64,
    pub approximant_ns: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub per_call: Vec<CallCost>,
    pub experiment: ExperimentReport,
}

pub fn compute_bench(cfg: &RunConfig) -> Result<BenchReport> {
    let out = execute(cfg)?;
    let h = cfg.pricer()?;
    let paths = &out.paths;
    let mut per_call = Vec::new();
    // first, middle and last interpolated dates
    let fits = &out.report.fits;
    let picks: Vec<usize> = if fits.is_empty() {
        Vec::new()
    } else {
        let mut p = vec![0, fits.len() / 2, fits.len() - 1];
        p.dedup();
        p
    };
    for k in picks {
        let u = fits[k].u;
        let t = paths.grid.time(u);
        let approx = &out.approximants[k];
        let states: Vec<&[f64]> = (0..paths.n_paths).map(|i| paths.state(i, u)).collect();
        let start = Instant::now();
        for z in &states {
            black_box(h.value(t, z).context("pricer call")?);
        }
        let pricer = start.elapsed().as_secs_f64();
        let start = Instant::now();
        for z in &states {
            black_box(approx.eval(z).context("approximant call")?);
        }
        let approx_t = start.elapsed().as_secs_f64();
        let calls = states.len();
        per_call.push(CallCost {
            u,
            calls,
            pricer_ns: 1e9 * pricer / calls as f64,
            approximant_ns: 1e9 * approx_t / calls as f64,
            ratio: pricer / approx_t.max(f64::MIN_POSITIVE),
        });
    }
    Ok(BenchReport {
        per_call,
        experiment: out.report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchManifest {
    pub run: RunInfo,
    pub bench: BenchReport,
}

pub fn run_bench(cfg: &RunConfig, dir: &Path) -> Result<BenchReport> {
    let rep = compute_bench(cfg)?;
    ensure_dir(dir)?;
    write_json(
        &dir.join("bench.json"),
        &BenchManifest {
            run: RunInfo::new(cfg)?,
            bench: rep.clone(),
        },
    )?;
    Ok(rep)
}

pub fn render_bench(r: &BenchReport) -> String {
    let mut s = String::new();
    for c in &r.per_call {
        s.push_str(&format!(
            "u={:>3}: pricer {:>9.1} ns/call, interpolant {:>7.1} ns/call, ratio {:.1}\n",
            c.u, c.pricer_ns, c.approximant_ns, c.ratio
        ));
    }
    let t = &r.experiment.timings;
    s.push_str(&format!(
        "experiment: full {:.3}s, fit {:.3}s, eval {:.3}s, speed-up {:.1}\n",
        t.full_s, t.fit_s, t.accel_eval_s, r.experiment.speedup
    ));
    s
}
