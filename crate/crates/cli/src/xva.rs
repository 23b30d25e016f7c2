//! CVA delta and sensitivity-based MVA with analytic and interpolated deltas
//! on shared risk-neutral paths.

use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use chebexpo_core::pricing::Pricer;
use chebexpo_core::simulation::{simulate, Dynamics, MeasureKind, PathSet};
use chebexpo_core::xva::{cva_delta_path, delta_approximants, mva_path, InnerSampler, PdCurve, XvaEstimate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::report::{ensure_dir, write_json, RunInfo};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pair {
    pub analytic: XvaEstimate,
    pub chebyshev: XvaEstimate,
    pub abs_diff: f64,
    pub rel_diff: f64,
    pub analytic_s: f64,
    pub chebyshev_s: f64,
}

impl Pair {
    fn new(analytic: XvaEstimate, chebyshev: XvaEstimate, analytic_s: f64, chebyshev_s: f64) -> Self {
        let abs_diff = (analytic.value - chebyshev.value).abs();
        Pair {
            rel_diff: abs_diff / analytic.value.abs(),
            analytic,
            chebyshev,
            abs_diff,
            analytic_s,
            chebyshev_s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XvaReport {
    pub cva_delta: Pair,
    pub mva: Option<Pair>,
    /// Some inner quantile index had to be clamped to the sample maximum.
    pub im_clamped: bool,
    pub pd: PdCurve,
    /// Interpolation (domains and fits) time for the Chebyshev deltas.
    pub fit_s: f64,
    pub runtime_s: f64,
}

type DeltaFn<'a> = Box<dyn Fn(usize, f64) -> chebexpo_core::error::Result<f64> + Sync + 'a>;

fn cva(paths: &PathSet, delta: &DeltaFn<'_>, pd: &PdCurve, r: f64) -> Result<(XvaEstimate, f64)> {
    let start = Instant::now();
    let terms = (0..paths.n_paths)
        .into_par_iter()
        .map(|i| cva_delta_path(paths, i, &mut |u, s| delta(u, s), pd, r))
        .collect::<chebexpo_core::error::Result<Vec<f64>>>()?;
    Ok((XvaEstimate::from_samples(&terms)?, start.elapsed().as_secs_f64()))
}

fn mva(
    paths: &PathSet,
    delta: &DeltaFn<'_>,
    sampler: &InnerSampler,
    cfg: &RunConfig,
) -> Result<(XvaEstimate, bool, f64)> {
    let start = Instant::now();
    let terms = (0..paths.n_paths)
        .into_par_iter()
        .map(|i| {
            mva_path(
                paths,
                i,
                sampler,
                &mut |u, s| delta(u, s),
                &cfg.xva.funding,
                cfg.xva.im_quantile,
            )
        })
        .collect::<chebexpo_core::error::Result<Vec<(f64, bool)>>>()?;
    let values: Vec<f64> = terms.iter().map(|t| t.0).collect();
    Ok((
        XvaEstimate::from_samples(&values)?,
        terms.iter().any(|t| t.1),
        start.elapsed().as_secs_f64(),
    ))
}

pub fn compute_xva(cfg: &RunConfig) -> Result<XvaReport> {
    let start = Instant::now();
    cfg.validate().context("config")?;
    let h = cfg.pricer()?;
    if !matches!(h.model.dynamics, Dynamics::Bsm { .. }) {
        bail!("XVA runs need the BSM model, where deltas are available in closed form");
    }
    let grid = cfg.grid()?;
    let r = h.model.r;
    let paths = simulate(&h.model, grid, cfg.n, MeasureKind::RiskNeutral, cfg.seed).context("stage simulate")?;
    let pd = cfg.xva.pd.clone().unwrap_or(PdCurve::Uniform { horizon: grid.horizon });
    pd.validate()?;

    let fit_start = Instant::now();
    let derivs = delta_approximants(&paths, &h, &h.option, r, cfg.xva.degree, &cfg.domain.options())
        .context("stage delta interpolation")?;
    let fit_s = fit_start.elapsed().as_secs_f64();

    let analytic: DeltaFn<'_> = Box::new(|u, s| h.delta(grid.time(u), &[s]));
    let chebyshev: DeltaFn<'_> = Box::new(|u, s| derivs[u - 1].eval(&[s]));

    let (ca, ta) = cva(&paths, &analytic, &pd, r).context("stage CVA delta (analytic)")?;
    let (cc, tc) = cva(&paths, &chebyshev, &pd, r).context("stage CVA delta (Chebyshev)")?;
    let cva_delta = Pair::new(ca, cc, ta, tc + fit_s);

    let (mva_pair, clamped) = if cfg.xva.skip_mva {
        (None, false)
    } else {
        let sampler = InnerSampler {
            horizon: cfg.xva.margin_period,
            samples: cfg.xva.inner_paths,
            ..InnerSampler::new(h.model, cfg.seed)
        };
        sampler.validate()?;
        let (ma, fa, ta) = mva(&paths, &analytic, &sampler, cfg).context("stage MVA (analytic)")?;
        let (mc, fc, tc) = mva(&paths, &chebyshev, &sampler, cfg).context("stage MVA (Chebyshev)")?;
        (Some(Pair::new(ma, mc, ta, tc + fit_s)), fa || fc)
    };
    Ok(XvaReport {
        cva_delta,
        mva: mva_pair,
        im_clamped: clamped,
        pd,
        fit_s,
        runtime_s: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XvaManifest {
    pub run: RunInfo,
    pub cva_delta: Pair,
    pub mva: Option<Pair>,
    pub im_clamped: bool,
    pub pd: PdCurve,
    pub seed: u64,
    pub runtime_s: f64,
}

pub fn run_xva(cfg: &RunConfig, dir: &Path) -> Result<XvaReport> {
    let rep = compute_xva(cfg)?;
    ensure_dir(dir)?;
    write_json(
        &dir.join("xva.json"),
        &XvaManifest {
            run: RunInfo::new(cfg)?,
            cva_delta: rep.cva_delta.clone(),
            mva: rep.mva.clone(),
            im_clamped: rep.im_clamped,
            pd: rep.pd.clone(),
            seed: cfg.seed,
            runtime_s: rep.runtime_s,
        },
    )?;
    Ok(rep)
}

pub fn render_xva(r: &XvaReport) -> String {
    let mut s = String::new();
    let row = |name: &str, p: &Pair| {
        format!(
            "{name:<10} analytic {:.4} (se {:.4})  chebyshev {:.4}  |diff| {:.2e}  rel {:.2e}  time {:.2}s / {:.2}s\n",
            p.analytic.value,
            p.analytic.std_error,
            p.chebyshev.value,
            p.abs_diff,
            p.rel_diff,
            p.analytic_s,
            p.chebyshev_s
        )
    };
    s.push_str(&row("CVA'", &r.cva_delta));
    if let Some(m) = &r.mva {
        s.push_str(&row("MVA", m));
    }
    if r.im_clamped {
        s.push_str("warning: inner sample too small for the IM quantile; clamped to the maximum\n");
    }
    s
}
