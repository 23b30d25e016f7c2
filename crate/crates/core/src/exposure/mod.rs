//! Path-wise exposures `x_{t_u}^i = max(V_{t_u}(z_{t_u}^i), 0)` from full
//! re-evaluation or from Chebyshev approximants, path-dependency masking,
//! and comparison of the resulting exposure profiles.

pub mod measures;

use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by the inherent methods whenever std is linked
use num_traits::Float;

use serde::{Deserialize, Serialize};

use crate::chebyshev::{value_bounds, ChebyshevApproximant};
use crate::error::{Error, Result};
use crate::pricing::{OptionSpec, Pricer};
use crate::simulation::PathSet;

pub use measures::{measure, measure_generic, measure_sorted, MeasureResult, MeasureSpec, VarianceDetail};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskKind {
    None,
    Barrier,
    American,
}

/// `n x m` nonnegative exposures for `u = 1..=m`, stored time-major so that
/// each exposure date is a contiguous sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExposureCube {
    pub n: usize,
    pub m: usize,
    values: Vec<f64>,
    pub mask: MaskKind,
}

impl ExposureCube {
    /// Builds a cube from per-date columns (`columns[u - 1]` holds date `u`).
    pub fn from_columns(columns: Vec<Vec<f64>>) -> Result<Self> {
        let m = columns.len();
        let n = columns.first().map_or(0, Vec::len);
        if m == 0 || n == 0 || columns.iter().any(|c| c.len() != n) {
            return Err(Error::invalid("exposure columns must be non-empty and equally long"));
        }
        let values: Vec<f64> = columns.into_iter().flatten().collect();
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::invalid("exposures must be finite and nonnegative"));
        }
        Ok(ExposureCube {
            n,
            m,
            values,
            mask: MaskKind::None,
        })
    }

    /// Exposures of all paths at date `u` (`1..=m`).
    pub fn column(&self, u: usize) -> &[f64] {
        &self.values[(u - 1) * self.n..u * self.n]
    }

    pub fn get(&self, path: usize, u: usize) -> f64 {
        self.values[(u - 1) * self.n + path]
    }

    fn set(&mut self, path: usize, u: usize, v: f64) {
        self.values[(u - 1) * self.n + path] = v;
    }

    /// Returns `self + c` elementwise (for cash-additivity checks).
    pub fn shifted(&self, c: f64) -> Result<Self> {
        let columns = (1..=self.m)
            .map(|u| self.column(u).iter().map(|v| v + c).collect())
            .collect();
        ExposureCube::from_columns(columns)
    }
}

fn is_final(paths: &PathSet, u: usize, option: &OptionSpec) -> bool {
    u == paths.steps() && paths.grid.time(u) >= option.maturity
}

/// Exposures at date `u` from the value function `f`; maturity dates use
/// the payoff directly.
pub fn exposure_column<F>(paths: &PathSet, u: usize, option: &OptionSpec, mut f: F) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let final_date = is_final(paths, u, option);
    (0..paths.n_paths)
        .map(|i| {
            let z = paths.state(i, u);
            let v = if final_date {
                option.payoff(z[0])
            } else {
                f(z).map_err(|e| Error::Pricing {
                    path: i,
                    step: u,
                    source: alloc::boxed::Box::new(e),
                })?
            };
            if !v.is_finite() {
                return Err(Error::NonFinite(alloc::format!("value on path {i} at step {u}")));
            }
            Ok(v.max(0.0))
        })
        .collect()
}

/// Full re-evaluation: the reference pricer on every path and date.
pub fn full_reeval<P: Pricer + ?Sized>(paths: &PathSet, pricer: &P, option: &OptionSpec) -> Result<ExposureCube> {
    let columns = (1..=paths.steps())
        .map(|u| {
            let t = paths.grid.time(u);
            exposure_column(paths, u, option, |z| pricer.value(t, z))
        })
        .collect::<Result<Vec<_>>>()?;
    ExposureCube::from_columns(columns)
}

/// Exposures at date `u` from an approximant, projected onto the static
/// no-arbitrage range of the value at rate `r`; every out-of-domain state is
/// reported at once.
pub fn approximant_column(
    paths: &PathSet,
    u: usize,
    option: &OptionSpec,
    r: f64,
    approx: Option<&ChebyshevApproximant>,
) -> Result<Vec<f64>> {
    let mut out = alloc::vec![0.0; paths.n_paths];
    approximant_column_into(paths, u, option, r, approx, &mut out, &mut Vec::new())?;
    Ok(out)
}

/// [`approximant_column`] writing into `out`; `prices` is scratch space.
#[allow(clippy::too_many_arguments)]
fn approximant_column_into(
    paths: &PathSet,
    u: usize,
    option: &OptionSpec,
    r: f64,
    approx: Option<&ChebyshevApproximant>,
    out: &mut [f64],
    prices: &mut Vec<f64>,
) -> Result<()> {
    if is_final(paths, u, option) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = option.payoff(paths.price(i, u)).max(0.0);
        }
        return Ok(());
    }
    let approx = approx.ok_or_else(|| Error::invalid("missing approximant for an exposure date"))?;
    let (lower, upper) = value_bounds(option, r, option.maturity - paths.grid.time(u));
    // the true value lies in the range, so projecting never increases the error
    let project = |v: f64, s: f64| v.max(lower.eval(s)).min(upper.eval(s)).max(0.0);
    let mut offending = Vec::new();
    let mut finite = true;
    if approx.dim() == 1 {
        // contiguous copy first: strided reads inside the kernel are slower
        prices.clear();
        prices.extend((0..paths.n_paths).map(|i| paths.price(i, u)));
        approx.eval_prices(prices, out)?;
        if out.iter().fold(false, |bad, v| bad | !v.is_finite()) {
            for (i, v) in out.iter().enumerate() {
                if v.is_nan() {
                    offending.push((i, prices[i]));
                } else if !v.is_finite() {
                    finite = false;
                }
            }
        }
        // NaN projects to a finite value; offenders were collected above
        out.iter_mut()
            .zip(prices.iter())
            .for_each(|(v, &s)| *v = project(*v, s));
    } else {
        for (i, o) in out.iter_mut().enumerate() {
            let z = paths.state(i, u);
            *o = match approx.eval(z) {
                Ok(v) => {
                    finite &= v.is_finite();
                    project(v, z[0])
                }
                Err(Error::OutOfDomain { .. }) => {
                    offending.push((i, z[0]));
                    0.0
                }
                Err(e) => return Err(e),
            };
        }
    }
    if !offending.is_empty() {
        return Err(Error::StatesOutOfDomain {
            step: u,
            states: offending,
        });
    }
    if !finite {
        return Err(Error::NonFinite(alloc::format!("approximant value at step {u}")));
    }
    Ok(())
}

/// Accelerated re-evaluation: `approximants[u - 1]` at date `u`; the last
/// entry may be omitted when the final date is the maturity.
pub fn accelerated_reeval(
    paths: &PathSet,
    approximants: &[ChebyshevApproximant],
    option: &OptionSpec,
    r: f64,
) -> Result<ExposureCube> {
    let (n, m) = (paths.n_paths, paths.steps());
    if n == 0 || m == 0 {
        return Err(Error::invalid("exposure columns must be non-empty and equally long"));
    }
    let mut values = alloc::vec![0.0; n * m];
    let mut prices = Vec::with_capacity(n);
    for (k, out) in values.chunks_exact_mut(n).enumerate() {
        approximant_column_into(paths, k + 1, option, r, approximants.get(k), out, &mut prices)?;
    }
    Ok(ExposureCube {
        n,
        m,
        values,
        mask: MaskKind::None,
    })
}

/// Path-dependency rule applied after pricing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Masking {
    None,
    /// Knock-out at the first date with `s >= level`; zero from there on.
    Barrier {
        level: f64,
    },
    /// Exercise at the first date with `s < boundary[u - 1]`; zero after it.
    /// `None` entries never trigger.
    Exercise {
        boundaries: Vec<Option<f64>>,
    },
}

/// First knock-out / exercise date per path (`None` if never).
pub fn stopping_dates(paths: &PathSet, masking: &Masking) -> Vec<Option<usize>> {
    (0..paths.n_paths)
        .map(|i| {
            (1..=paths.steps()).find(|&u| {
                let s = paths.price(i, u);
                match masking {
                    Masking::None => false,
                    Masking::Barrier { level } => s >= *level,
                    Masking::Exercise { boundaries } => {
                        matches!(boundaries.get(u - 1), Some(Some(b)) if s < *b)
                    }
                }
            })
        })
        .collect()
}

/// Zeroes exposures on `u >= u*` (barrier) or `u > u*` (exercise) and
/// returns the stopping dates used.
pub fn apply_masking(cube: &mut ExposureCube, paths: &PathSet, masking: &Masking) -> Result<Vec<Option<usize>>> {
    if cube.n != paths.n_paths || cube.m != paths.steps() {
        return Err(Error::invalid("cube and paths disagree in shape"));
    }
    let stops = stopping_dates(paths, masking);
    let first_zero = |u: usize| match masking {
        Masking::Exercise { .. } => u + 1,
        _ => u,
    };
    for (i, stop) in stops.iter().enumerate() {
        if let Some(u) = stop {
            for v in first_zero(*u)..=cube.m {
                cube.set(i, v, 0.0);
            }
        }
    }
    cube.mask = match masking {
        Masking::None => MaskKind::None,
        Masking::Barrier { .. } => MaskKind::Barrier,
        Masking::Exercise { .. } => MaskKind::American,
    };
    Ok(stops)
}

/// Time profiles of one measure for both cubes and the acceleration error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileComparison {
    pub spec: MeasureSpec,
    /// Full re-evaluation estimates with CIs, `u = 1..=m`.
    pub full: Vec<MeasureResult>,
    /// Accelerated estimates, `u = 1..=m`.
    pub accel: Vec<f64>,
    /// `max_u |rho(x_u) - rho(y_u)| / rho(x_u)` over dates with `rho(x_u) != 0`.
    pub eps: f64,
    /// Date attaining `eps`.
    pub u_star: Option<usize>,
    /// Relative 95% CI length of the full estimate at `u_star`.
    pub eps_mc: Option<f64>,
    /// Dates left out because `rho(x_u) = 0`.
    pub excluded: Vec<usize>,
    pub pass: bool,
}

pub fn profile_and_compare(
    x: &ExposureCube,
    y: &ExposureCube,
    specs: &[MeasureSpec],
) -> Result<Vec<ProfileComparison>> {
    if x.n != y.n || x.m != y.m {
        return Err(Error::invalid("cubes must have the same shape"));
    }
    let sorted = |c: &ExposureCube| -> Vec<Vec<f64>> {
        (1..=c.m)
            .map(|u| {
                let mut v = c.column(u).to_vec();
                v.sort_unstable_by(f64::total_cmp);
                v
            })
            .collect()
    };
    let (xs, ys) = (sorted(x), sorted(y));
    specs
        .iter()
        .map(|spec| {
            let mut full = Vec::with_capacity(x.m);
            let mut accel = Vec::with_capacity(x.m);
            let mut eps: f64 = 0.0;
            let mut u_star = None;
            let mut excluded = Vec::new();
            for u in 1..=x.m {
                let fx = measure_sorted(&xs[u - 1], spec)?;
                let ay = measure_sorted(&ys[u - 1], spec)?.estimate;
                if fx.estimate == 0.0 {
                    excluded.push(u);
                } else {
                    let rel = (fx.estimate - ay).abs() / fx.estimate.abs();
                    if u_star.is_none() || rel > eps {
                        eps = rel;
                        u_star = Some(u);
                    }
                }
                full.push(fx);
                accel.push(ay);
            }
            let eps_mc = u_star.and_then(|u| {
                let r = &full[u - 1];
                r.ci_halfwidth.map(|h| 2.0 * h / r.estimate.abs())
            });
            let pass = eps == 0.0 || eps_mc.is_some_and(|mc| eps <= mc);
            Ok(ProfileComparison {
                spec: spec.clone(),
                full,
                accel,
                eps,
                u_star,
                eps_mc,
                excluded,
                pass,
            })
        })
        .collect()
}

/// `full / accel`.
pub fn speedup(full: f64, accel: f64) -> Result<f64> {
    if !(full > 0.0 && accel > 0.0) {
        return Err(Error::invalid("timings must be positive"));
    }
    Ok(full / accel)
}

/// `(full + mask) / (accel + mask)`, counting the exercise-policy time in both runs.
pub fn speedup_american(full: f64, accel: f64, mask: f64) -> Result<f64> {
    if !(full > 0.0 && accel > 0.0 && mask >= 0.0) {
        return Err(Error::invalid("timings must be positive"));
    }
    Ok((full + mask) / (accel + mask))
}

/// Largest `|x_i - y_i|` over the whole cube.
pub fn max_abs_difference(x: &ExposureCube, y: &ExposureCube) -> f64 {
    x.values
        .iter()
        .zip(&y.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Checks that once a path hits zero due to masking it stays zero.
pub fn masking_holds(cube: &ExposureCube, stops: &[Option<usize>]) -> bool {
    let offset = usize::from(cube.mask == MaskKind::American);
    stops.iter().enumerate().all(|(i, stop)| match stop {
        Some(u) => (u + offset..=cube.m).all(|v| cube.get(i, v) == 0.0),
        None => true,
    })
}

/// Sorted copies of two samples (for the ordered-difference property).
pub fn sorted_pair(a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable_by(f64::total_cmp);
    b.sort_unstable_by(f64::total_cmp);
    (a, b)
}

/// `l^p` distance (`p = inf` for the maximum norm).
pub fn lp_distance(a: &[f64], b: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        return a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    }
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs().powf(p))
        .sum::<f64>()
        .powf(1.0 / p)
}

#[cfg(test)]
mod tests;
