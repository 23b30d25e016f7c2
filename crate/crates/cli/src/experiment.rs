//! Exposure experiment: simulate, re-evaluate in full, interpolate per date,
//! re-evaluate with the interpolants, mask, compare profiles, time it all.

use std::path::Path;

use anyhow::{anyhow, Context, Result};
use chebexpo_core::chebyshev::{adaptive_fit, build_domains, fit_fixed, AdaptiveOptions, ChebyshevApproximant};
use chebexpo_core::exposure::{
    accelerated_reeval, apply_masking, full_reeval, masking_holds, max_abs_difference, measure_sorted,
    profile_and_compare, speedup, speedup_american, ExposureCube, Masking, MeasureSpec, ProfileComparison,
};
use chebexpo_core::pricing::{OptionKind, OptionSpec, Pricer, PricerHandle};
use chebexpo_core::simulation::{simulate, PathSet};
use serde::{Deserialize, Serialize};

use crate::config::{Interpolation, RunConfig};
use crate::formats::{save_approximant, ApproximantRecord};
use crate::report::{ensure_dir, num, opt_num, timed, write_json, write_text, RunInfo};

/// Relative CI length above which a measure profile is flagged as noisy.
pub const WIDE_CI: f64 = 0.1;

/// Absolute tolerance of the exercise-boundary bisection, relative to the strike.
pub const BOUNDARY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub simulate_s: f64,
    /// Full re-evaluation (reference pricer on every path and date).
    pub full_s: f64,
    /// Domains and interpolants for every date.
    pub fit_s: f64,
    /// Path-wise evaluation of the interpolants.
    pub accel_eval_s: f64,
    /// `fit_s + accel_eval_s`.
    pub accel_s: f64,
    /// Exercise boundaries (American) or knock-out detection, plus masking.
    pub mask_s: f64,
    /// Degree-1 pilot of the adaptive mode.
    pub pilot_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsRow {
    pub measure: String,
    pub eps: f64,
    pub eps_mc: Option<f64>,
    pub u_star: Option<usize>,
    pub excluded: usize,
    pub pass: bool,
}

impl EpsRow {
    fn from(c: &ProfileComparison) -> Self {
        EpsRow {
            measure: c.spec.label(),
            eps: c.eps,
            eps_mc: c.eps_mc,
            u_star: c.u_star,
            excluded: c.excluded.len(),
            pass: c.pass,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DateFit {
    pub u: usize,
    pub degrees: [usize; 2],
    pub pieces: usize,
    /// Pricer calls spent on nodes (excluding domain bisection).
    pub nodes: usize,
    /// Adaptive target used at this date.
    pub target: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub pricer: String,
    pub n: usize,
    pub m: usize,
    pub fits: Vec<DateFit>,
    pub eps_table: Vec<EpsRow>,
    pub pass: bool,
    pub speedup: f64,
    pub speedup_formula: String,
    pub masking_holds: bool,
    pub knocked_out_or_exercised: usize,
    pub max_abs_difference: f64,
    /// Measures whose relative CI length exceeds [`WIDE_CI`] at some date.
    pub wide_ci: Vec<String>,
    pub timings: Timings,
}

/// Everything a run produces, for callers that want more than the files.
pub struct Outcome {
    pub report: ExperimentReport,
    pub comparisons: Vec<ProfileComparison>,
    pub paths: PathSet,
    pub approximants: Vec<ChebyshevApproximant>,
    pub full: ExposureCube,
    pub accel: ExposureCube,
}

/// Dates that need an interpolant: all of them except a final date at maturity.
pub fn fit_dates(paths: &PathSet, option: &OptionSpec) -> Vec<usize> {
    let m = paths.steps();
    let last = if paths.grid.time(m) >= option.maturity {
        m - 1
    } else {
        m
    };
    (1..=last).collect()
}

pub fn masking_for(paths: &PathSet, h: &PricerHandle) -> Result<Masking> {
    Ok(match h.option.kind {
        OptionKind::UpAndOutCall { barrier } => Masking::Barrier { level: barrier },
        OptionKind::AmericanPut => {
            let tol = BOUNDARY_TOL * h.option.strike;
            let boundaries = (1..=paths.steps())
                .map(|u| {
                    let t = paths.grid.time(u);
                    if t < h.option.maturity {
                        h.exercise_boundary(t, tol)
                            .with_context(|| format!("exercise boundary at u = {u}"))
                    } else {
                        Ok(None)
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            Masking::Exercise { boundaries }
        }
        _ => Masking::None,
    })
}

fn date_fit(u: usize, a: &ChebyshevApproximant, nodes: usize, target: Option<f64>) -> DateFit {
    DateFit {
        u,
        degrees: a.max_degree(),
        pieces: a.pieces.len(),
        nodes,
        target,
    }
}

/// Fixed-degree interpolants for `dates`.
pub fn fit_fixed_all(
    paths: &PathSet,
    h: &PricerHandle,
    cfg: &RunConfig,
    dates: &[usize],
    degrees: impl Fn(usize) -> [usize; 2],
) -> Result<(Vec<ChebyshevApproximant>, Vec<DateFit>)> {
    let domains = build_domains(paths, dates, &h.option, h, h.model.r, &cfg.domain.options()).context("domains")?;
    let id = h.id();
    let mut out = Vec::with_capacity(dates.len());
    let mut fits = Vec::with_capacity(dates.len());
    for (&u, domain) in dates.iter().zip(&domains) {
        let t = paths.grid.time(u);
        let a =
            fit_fixed(|z: &[f64]| h.value(t, z), domain, degrees(u), &id).with_context(|| format!("fit at u = {u}"))?;
        let nodes = a.pieces.iter().map(|p| (p.degrees[0] + 1) * (p.degrees[1] + 1)).sum();
        fits.push(date_fit(u, &a, nodes, None));
        out.push(a);
    }
    Ok((out, fits))
}

/// Degree-doubling interpolants, one target per entry of `dates`.
pub fn fit_adaptive_all(
    paths: &PathSet,
    h: &PricerHandle,
    cfg: &RunConfig,
    dates: &[usize],
    targets: &[f64],
) -> Result<(Vec<ChebyshevApproximant>, Vec<DateFit>)> {
    let Interpolation::Adaptive { probes, cap, .. } = cfg.interpolation else {
        return Err(anyhow!("adaptive fit requested for a fixed-degree config"));
    };
    let domains = build_domains(paths, dates, &h.option, h, h.model.r, &cfg.domain.options()).context("domains")?;
    let id = h.id();
    let mut out = Vec::with_capacity(dates.len());
    let mut fits = Vec::with_capacity(dates.len());
    for ((&u, &target), domain) in dates.iter().zip(targets).zip(&domains) {
        let t = paths.grid.time(u);
        let ao = AdaptiveOptions {
            probes,
            cap,
            ..AdaptiveOptions::new(target, cfg.seed ^ (u as u64))
        };
        let (a, rep) = adaptive_fit(|z: &[f64]| h.value(t, z), domain, &ao, &id)
            .with_context(|| format!("adaptive fit at u = {u}"))?;
        fits.push(date_fit(u, &a, rep.pricer_calls, Some(target)));
        out.push(a);
    }
    Ok((out, fits))
}

/// Narrowest absolute CI length across `specs` at each date of `dates`,
/// from the (masked) exposures of a degree-1 interpolation. Dates without
/// any usable interval take the smallest value found elsewhere.
pub fn pilot_targets(
    paths: &PathSet,
    h: &PricerHandle,
    cfg: &RunConfig,
    dates: &[usize],
    masking: &Masking,
    specs: &[MeasureSpec],
) -> Result<Vec<f64>> {
    let (approx, _) = fit_fixed_all(paths, h, cfg, dates, |_| [1, 1])?;
    let mut cube = accelerated_reeval(paths, &approx, &h.option, h.model.r)?;
    apply_masking(&mut cube, paths, masking)?;
    let per_date = dates
        .iter()
        .map(|&u| {
            let mut col = cube.column(u).to_vec();
            col.sort_unstable_by(f64::total_cmp);
            let mut best = f64::INFINITY;
            for spec in specs {
                if let Some(hw) = measure_sorted(&col, spec)?.ci_halfwidth {
                    if hw > 0.0 {
                        best = best.min(2.0 * hw);
                    }
                }
            }
            Ok(best)
        })
        .collect::<Result<Vec<f64>>>()?;
    let floor = per_date.iter().copied().fold(f64::INFINITY, f64::min);
    if !floor.is_finite() {
        return Err(anyhow!("pilot run produced no usable confidence interval"));
    }
    Ok(per_date
        .into_iter()
        .map(|w| if w.is_finite() { w } else { floor })
        .collect())
}

fn wide_measures(comparisons: &[ProfileComparison]) -> Vec<String> {
    comparisons
        .iter()
        .filter(|c| {
            c.full
                .iter()
                .any(|r| r.estimate != 0.0 && r.ci_halfwidth.is_none_or(|hw| 2.0 * hw / r.estimate.abs() > WIDE_CI))
        })
        .map(|c| c.spec.label())
        .collect()
}

/// Runs the full pipeline without touching the file system.
pub fn execute(cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate().context("config")?;
    let h = cfg.pricer()?;
    let option = h.option;
    let grid = cfg.grid()?;
    let reps = cfg.timing_repeats;
    let specs = cfg.measure_specs();
    let mut timings = Timings::default();

    let (paths, dt) = timed(1, || {
        Ok(simulate(&h.model, grid, cfg.n, cfg.simulation_measure, cfg.seed)?)
    })
    .context("stage simulate")?;
    timings.simulate_s = dt;

    let (mut full, dt) = timed(reps, || Ok(full_reeval(&paths, &h, &option)?)).context("stage full re-evaluation")?;
    timings.full_s = dt;

    let (masking, dt_boundary) = timed(reps, || masking_for(&paths, &h)).context("stage exercise boundaries")?;

    let dates = fit_dates(&paths, &option);
    let targets = match cfg.interpolation {
        Interpolation::Fixed { .. } => None,
        Interpolation::Adaptive { target: Some(t), .. } => Some(vec![t; dates.len()]),
        Interpolation::Adaptive { target: None, .. } => {
            let (t, dt) = timed(1, || pilot_targets(&paths, &h, cfg, &dates, &masking, &specs))
                .context("stage adaptive pilot")?;
            timings.pilot_s = Some(dt);
            Some(t)
        }
    };

    let ((approximants, fits), dt) = timed(reps, || match (&targets, cfg.fixed_degrees()) {
        (None, Some(deg)) => fit_fixed_all(&paths, &h, cfg, &dates, |u| cfg.fixed_degrees_at(u).unwrap_or(deg)),
        (Some(t), _) => fit_adaptive_all(&paths, &h, cfg, &dates, t),
        (None, None) => Err(anyhow!("no interpolation mode")),
    })
    .context("stage interpolation")?;
    timings.fit_s = dt;

    let (mut accel, dt) = timed(reps, || {
        Ok(accelerated_reeval(&paths, &approximants, &option, h.model.r)?)
    })
    .context("stage accelerated re-evaluation")?;
    timings.accel_eval_s = dt;
    timings.accel_s = timings.fit_s + timings.accel_eval_s;

    let (stops, dt_mask) = timed(1, || Ok(apply_masking(&mut full, &paths, &masking)?)).context("stage masking")?;
    apply_masking(&mut accel, &paths, &masking).context("stage masking")?;
    timings.mask_s = dt_boundary + dt_mask;
    let holds = masking_holds(&full, &stops) && masking_holds(&accel, &stops);

    let comparisons = profile_and_compare(&full, &accel, &specs).context("stage profiles")?;
    let (factor, formula) = match masking {
        Masking::Exercise { .. } => (
            speedup_american(timings.full_s, timings.accel_s, timings.mask_s)?,
            "(full + mask) / (accel + mask)",
        ),
        _ => (speedup(timings.full_s, timings.accel_s)?, "full / accel"),
    };
    let report = ExperimentReport {
        pricer: h.id(),
        n: cfg.n,
        m: cfg.m,
        fits,
        eps_table: comparisons.iter().map(EpsRow::from).collect(),
        pass: comparisons.iter().all(|c| c.pass),
        speedup: factor,
        speedup_formula: formula.into(),
        masking_holds: holds,
        knocked_out_or_exercised: stops.iter().filter(|s| s.is_some()).count(),
        max_abs_difference: max_abs_difference(&full, &accel),
        wide_ci: wide_measures(&comparisons),
        timings,
    };
    Ok(Outcome {
        report,
        comparisons,
        paths,
        approximants,
        full,
        accel,
    })
}

/// `u,t,measure,estimate_full,estimate_accel,ci_halfwidth` rows.
pub fn profiles_csv(paths: &PathSet, comparisons: &[ProfileComparison]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["u", "t", "measure", "estimate_full", "estimate_accel", "ci_halfwidth"])?;
    for c in comparisons {
        let label = c.spec.label();
        for (k, (full, accel)) in c.full.iter().zip(&c.accel).enumerate() {
            let u = k + 1;
            w.write_record([
                u.to_string(),
                num(paths.grid.time(u)),
                label.clone(),
                num(full.estimate),
                num(*accel),
                opt_num(full.ci_halfwidth),
            ])?;
        }
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub run: RunInfo,
    pub report: ExperimentReport,
}

pub fn write_outputs(cfg: &RunConfig, out: &Outcome, dir: &Path) -> Result<()> {
    ensure_dir(dir)?;
    write_text(&dir.join("profiles.csv"), &profiles_csv(&out.paths, &out.comparisons)?)?;
    if cfg.save_approximants {
        let adir = dir.join("approximants");
        ensure_dir(&adir)?;
        for (a, f) in out.approximants.iter().zip(&out.report.fits) {
            let rec = ApproximantRecord::new(f.u, out.paths.grid.time(f.u), a.clone());
            save_approximant(&rec, &adir.join(format!("u{:03}.bin", f.u)))?;
        }
    }
    let manifest = ExperimentManifest {
        run: RunInfo::new(cfg)?,
        report: out.report.clone(),
    };
    write_json(&dir.join("manifest.json"), &manifest)
}

/// [`execute`] followed by [`write_outputs`] into `dir`.
pub fn run_experiment(cfg: &RunConfig, dir: &Path) -> Result<ExperimentReport> {
    let out = execute(cfg)?;
    write_outputs(cfg, &out, dir)?;
    Ok(out.report)
}

/// Plain-text summary mirroring the `eps` / `MC` columns.
pub fn render_table(r: &ExperimentReport) -> String {
    let mut s = format!("{}  n={} m={}\n", r.pricer, r.n, r.m);
    s.push_str(&format!(
        "{:<10} {:>12} {:>12} {:>6} {:>5}\n",
        "measure", "eps", "MC", "u*", "pass"
    ));
    for row in &r.eps_table {
        s.push_str(&format!(
            "{:<10} {:>12.3e} {:>12} {:>6} {:>5}\n",
            row.measure,
            row.eps,
            row.eps_mc.map_or("n/a".into(), |v| format!("{v:.3e}")),
            row.u_star.map_or("-".into(), |u| u.to_string()),
            if row.pass { "yes" } else { "NO" }
        ));
    }
    s.push_str(&format!(
        "speed-up {:.1} ({}), full {:.3}s, accel {:.3}s, mask {:.3}s\n",
        r.speedup, r.speedup_formula, r.timings.full_s, r.timings.accel_s, r.timings.mask_s
    ));
    if !r.wide_ci.is_empty() {
        s.push_str(&format!("wide confidence intervals: {}\n", r.wide_ci.join(", ")));
    }
    s
}
