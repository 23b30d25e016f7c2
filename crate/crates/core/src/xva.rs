//! CVA delta from path-wise derivatives and sensitivity-based (ISDA-style)
//! initial margin with its margin valuation adjustment.
//!
//! Zero recovery, no variation-margin netting. Every estimator is exposed
//! both per outer path and aggregated, so callers can parallelise across
//! paths and still reproduce the sequential result bit for bit.

use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by the inherent methods whenever std is linked
use num_traits::Float;

use serde::{Deserialize, Serialize};

use crate::chebyshev::{build_domains, fit_fixed, ChebyshevApproximant, DomainOptions};
use crate::error::{finite, Error, Result};
use crate::exposure::measures::scaled;
use crate::pricing::{OptionSpec, Pricer};
use crate::simulation::{path_rng, step_price, MeasureKind, ModelSpec, PathSet};

/// Ten business days.
pub const MARGIN_PERIOD: f64 = 10.0 / 252.0;
pub const DEFAULT_INNER_PATHS: usize = 1000;
pub const DEFAULT_IM_QUANTILE: f64 = 0.99;
pub const DEFAULT_FUNDING_SPREAD: f64 = 0.01;

fn interp(times: &[f64], values: &[f64], t: f64) -> f64 {
    if t <= times[0] {
        return values[0];
    }
    match times.iter().position(|&x| x >= t) {
        None => values[values.len() - 1],
        Some(k) => {
            let w = (t - times[k - 1]) / (times[k] - times[k - 1]);
            values[k - 1] + w * (values[k] - values[k - 1])
        }
    }
}

fn check_knots(times: &[f64], values: &[f64]) -> Result<()> {
    if times.is_empty() || times.len() != values.len() {
        return Err(Error::invalid("curve needs matching, nonempty knots and values"));
    }
    if times.windows(2).any(|w| !(w[0] < w[1])) || !(times[0] >= 0.0) {
        return Err(Error::invalid("curve knots must be nonnegative and increasing"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("curve values".into()));
    }
    Ok(())
}

/// Counterparty default probability `PD(t)` with `PD(0) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PdCurve {
    /// Default time uniform on `[0, horizon]`.
    Uniform { horizon: f64 },
    /// Linear between `(0, 0)` and the given knots, flat afterwards.
    Piecewise { times: Vec<f64>, probs: Vec<f64> },
}

impl PdCurve {
    pub fn validate(&self) -> Result<()> {
        match self {
            PdCurve::Uniform { horizon } => {
                if !(*horizon > 0.0 && horizon.is_finite()) {
                    return Err(Error::invalid("uniform PD horizon must be positive"));
                }
            }
            PdCurve::Piecewise { times, probs } => {
                check_knots(times, probs)?;
                if times[0] <= 0.0 {
                    return Err(Error::invalid("PD knots must be strictly positive"));
                }
                let mut prev = 0.0;
                for &p in probs {
                    if !(p >= prev && p <= 1.0) {
                        return Err(Error::invalid("PD must be nondecreasing in [0, 1]"));
                    }
                    prev = p;
                }
            }
        }
        Ok(())
    }

    pub fn pd(&self, t: f64) -> f64 {
        match self {
            PdCurve::Uniform { horizon } => (t / horizon).clamp(0.0, 1.0),
            PdCurve::Piecewise { times, probs } => {
                if t <= 0.0 {
                    0.0
                } else if t < times[0] {
                    probs[0] * t / times[0]
                } else {
                    interp(times, probs, t)
                }
            }
        }
    }
}

/// Funding spread `FS(t) >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FundingSpread {
    Constant {
        spread: f64,
    },
    /// Linear between knots, flat outside.
    Piecewise {
        times: Vec<f64>,
        spreads: Vec<f64>,
    },
}

impl Default for FundingSpread {
    fn default() -> Self {
        FundingSpread::Constant {
            spread: DEFAULT_FUNDING_SPREAD,
        }
    }
}

impl FundingSpread {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            FundingSpread::Constant { spread } => *spread >= 0.0 && spread.is_finite(),
            FundingSpread::Piecewise { times, spreads } => {
                check_knots(times, spreads)?;
                spreads.iter().all(|s| *s >= 0.0)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("funding spread must be nonnegative"))
        }
    }

    pub fn at(&self, t: f64) -> f64 {
        match self {
            FundingSpread::Constant { spread } => *spread,
            FundingSpread::Piecewise { times, spreads } => interp(times, spreads, t),
        }
    }
}

/// Monte Carlo estimate with its standard error across outer paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XvaEstimate {
    pub value: f64,
    pub std_error: f64,
    pub paths: usize,
}

impl XvaEstimate {
    /// Mean and standard error of per-path contributions.
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        let n = samples.len();
        if n == 0 {
            return Err(Error::invalid("no path contributions"));
        }
        let nf = n as f64;
        let value = finite(samples.iter().sum::<f64>() / nf, "XVA estimate")?;
        let std_error = if n > 1 {
            let var = samples.iter().map(|x| (x - value) * (x - value)).sum::<f64>() / (nf - 1.0);
            (var / nf).sqrt()
        } else {
            0.0
        };
        Ok(XvaEstimate {
            value,
            std_error,
            paths: n,
        })
    }
}

fn single_factor(paths: &PathSet) -> Result<()> {
    if paths.dim != 1 {
        return Err(Error::Unsupported(
            "sensitivity-based XVA needs a single-state model".into(),
        ));
    }
    Ok(())
}

/// Path `i`'s term of the CVA delta estimator
/// `sum_u e^{-r t_u} (PD(t_u) - PD(t_{u-1})) V'_{t_u}(s_u) s_u / s_0`.
pub fn cva_delta_path<D>(paths: &PathSet, i: usize, delta_fn: &mut D, pd: &PdCurve, r: f64) -> Result<f64>
where
    D: FnMut(usize, f64) -> Result<f64>,
{
    let s0 = paths.price(i, 0);
    let mut acc = 0.0;
    for u in 1..=paths.steps() {
        let (t0, t1) = (paths.grid.time(u - 1), paths.grid.time(u));
        let dpd = pd.pd(t1) - pd.pd(t0);
        if dpd == 0.0 {
            continue;
        }
        let s = paths.price(i, u);
        acc += (-r * t1).exp() * dpd * delta_fn(u, s)? * s / s0;
    }
    Ok(acc)
}

/// Path-wise CVA delta over all outer (risk-neutral) paths.
pub fn cva_delta_mc<D>(paths: &PathSet, mut delta_fn: D, pd: &PdCurve, r: f64) -> Result<XvaEstimate>
where
    D: FnMut(usize, f64) -> Result<f64>,
{
    single_factor(paths)?;
    pd.validate()?;
    let contributions = (0..paths.n_paths)
        .map(|i| cva_delta_path(paths, i, &mut delta_fn, pd, r))
        .collect::<Result<Vec<_>>>()?;
    XvaEstimate::from_samples(&contributions)
}

/// Conditional one-step sampler of `z_{t+delta} - z_t` given `z_t`.
///
/// Each `(date, path)` pair draws from its own ChaCha stream, so results do
/// not depend on the order in which outer paths are visited.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerSampler {
    pub model: ModelSpec,
    pub measure: MeasureKind,
    pub horizon: f64,
    pub samples: usize,
    pub seed: u64,
}

impl InnerSampler {
    pub fn new(model: ModelSpec, seed: u64) -> Self {
        InnerSampler {
            model,
            measure: MeasureKind::RiskNeutral,
            horizon: MARGIN_PERIOD,
            samples: DEFAULT_INNER_PATHS,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.model.dim() != 1 {
            return Err(Error::Unsupported(
                "conditional one-step sampling needs a single-factor model".into(),
            ));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) || self.samples == 0 {
            return Err(Error::invalid("inner horizon and sample count must be positive"));
        }
        Ok(())
    }

    /// Fills `out` with `samples` increments from state `s` at date `u` of path `i`.
    pub fn increments(&self, u: usize, i: usize, s: f64, out: &mut Vec<f64>) -> Result<()> {
        let mut rng = path_rng(self.seed, ((u as u64) << 40) | i as u64);
        out.clear();
        for _ in 0..self.samples {
            out.push(step_price(&self.model, self.measure, s, self.horizon, &mut rng)? - s);
        }
        Ok(())
    }
}

/// Initial margin from one inner sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialMargin {
    pub value: f64,
    /// Set when `p < 1/(1 - alpha)`, so the quantile index was clamped to
    /// the sample maximum.
    pub clamped: bool,
}

/// `IM = Q_alpha({delta * dz_j})` with `Q(a) = inf{x : F_p(x) >= a}` of
/// the empirical distribution, i.e. `x^{(ceil(p alpha))}`. Reorders
/// `scratch`.
pub fn isda_im(delta: f64, increments: &[f64], alpha: f64, scratch: &mut Vec<f64>) -> Result<InitialMargin> {
    let p = increments.len();
    if p == 0 {
        return Err(Error::invalid("inner sample is empty"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid("alpha must lie in (0, 1)"));
    }
    let rank = (scaled(p, alpha).ceil() as usize).clamp(1, p);
    let (idx, clamped) = (rank - 1, (p as f64) * (1.0 - alpha) < 1.0);
    scratch.clear();
    scratch.extend(increments.iter().map(|dz| delta * dz));
    if scratch.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("sensitivity-based P&L".into()));
    }
    let (_, q, _) = scratch.select_nth_unstable_by(idx, f64::total_cmp);
    Ok(InitialMargin { value: *q, clamped })
}

/// Per-path initial margins at date `u` for a set of outer states.
pub fn isda_im_column<D>(
    states: &[f64],
    u: usize,
    sampler: &InnerSampler,
    mut delta_fn: D,
    alpha: f64,
) -> Result<(Vec<f64>, bool)>
where
    D: FnMut(usize, f64) -> Result<f64>,
{
    sampler.validate()?;
    let (mut inc, mut scratch) = (Vec::new(), Vec::new());
    let mut clamped = false;
    let mut out = Vec::with_capacity(states.len());
    for (i, &s) in states.iter().enumerate() {
        sampler.increments(u, i, s, &mut inc)?;
        let im = isda_im(delta_fn(u, s)?, &inc, alpha, &mut scratch)?;
        clamped |= im.clamped;
        out.push(im.value);
    }
    Ok((out, clamped))
}

/// Path `i`'s term `sum_u FS(t_u) (t_u - t_{u-1}) IM^i_{t_u}` of the MVA
/// estimator, and whether any quantile was clamped.
pub fn mva_path<D>(
    paths: &PathSet,
    i: usize,
    sampler: &InnerSampler,
    delta_fn: &mut D,
    fs: &FundingSpread,
    alpha: f64,
) -> Result<(f64, bool)>
where
    D: FnMut(usize, f64) -> Result<f64>,
{
    let (mut inc, mut scratch) = (Vec::with_capacity(sampler.samples), Vec::with_capacity(sampler.samples));
    let mut acc = 0.0;
    let mut clamped = false;
    for u in 1..=paths.steps() {
        let (t0, t1) = (paths.grid.time(u - 1), paths.grid.time(u));
        let w = fs.at(t1) * (t1 - t0);
        if w == 0.0 {
            continue;
        }
        let s = paths.price(i, u);
        sampler.increments(u, i, s, &mut inc)?;
        let im = isda_im(delta_fn(u, s)?, &inc, alpha, &mut scratch)?;
        clamped |= im.clamped;
        acc += w * im.value;
    }
    Ok((acc, clamped))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MvaResult {
    pub estimate: XvaEstimate,
    pub clamped: bool,
}

/// Sensitivity-based MVA over all outer paths.
pub fn mva_isda<D>(
    paths: &PathSet,
    sampler: &InnerSampler,
    mut delta_fn: D,
    fs: &FundingSpread,
    alpha: f64,
) -> Result<MvaResult>
where
    D: FnMut(usize, f64) -> Result<f64>,
{
    single_factor(paths)?;
    sampler.validate()?;
    fs.validate()?;
    let mut clamped = false;
    let mut contributions = Vec::with_capacity(paths.n_paths);
    for i in 0..paths.n_paths {
        let (c, f) = mva_path(paths, i, sampler, &mut delta_fn, fs, alpha)?;
        clamped |= f;
        contributions.push(c);
    }
    Ok(MvaResult {
        estimate: XvaEstimate::from_samples(&contributions)?,
        clamped,
    })
}

/// Derivatives of fixed-degree interpolants of the value function on the
/// domains induced by `paths`, one per date `u = 1..=m` (index `u - 1`).
pub fn delta_approximants<P: Pricer + ?Sized>(
    paths: &PathSet,
    pricer: &P,
    option: &OptionSpec,
    r: f64,
    degree: usize,
    opts: &DomainOptions,
) -> Result<Vec<ChebyshevApproximant>> {
    single_factor(paths)?;
    let steps: Vec<usize> = (1..=paths.steps()).collect();
    let domains = build_domains(paths, &steps, option, pricer, r, opts)?;
    let id = pricer.id();
    steps
        .iter()
        .zip(&domains)
        .map(|(&u, domain)| {
            let t = paths.grid.time(u);
            let fit = fit_fixed(|z: &[f64]| pricer.value(t, z), domain, [degree, 0], &id)?;
            Ok(fit.derivative())
        })
        .collect()
}
