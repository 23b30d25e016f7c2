//! Interpolation domains induced by simulated states at one exposure date.

use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by the inherent methods whenever std is linked
use num_traits::Float;

use crate::chebyshev::approx::{ChebDomain, Linear, Tail};
use crate::error::{Error, Result};
use crate::pricing::{OptionKind, OptionSpec, Pricer};
use crate::simulation::PathSet;

/// Deep out-of-the-money (`low`) and deep in-the-money (`high`) behaviour
/// of the value at time-to-maturity `tau`, for the side where it is linear
/// in `s`; `None` where the side is handled otherwise (barrier).
pub fn asymptotes(option: &OptionSpec, r: f64, tau: f64) -> (Option<Linear>, Option<Linear>) {
    let k = option.strike;
    let disc = (-r * tau).exp();
    match option.kind {
        OptionKind::EuropeanCall => (
            Some(Linear::ZERO),
            Some(Linear {
                intercept: -k * disc,
                slope: 1.0,
            }),
        ),
        OptionKind::DigitalPut => (Some(Linear::constant(disc)), Some(Linear::ZERO)),
        OptionKind::UpAndOutCall { .. } => (Some(Linear::ZERO), None),
        OptionKind::AmericanPut => (
            Some(Linear {
                intercept: k,
                slope: -1.0,
            }),
            Some(Linear::ZERO),
        ),
    }
}

/// Static no-arbitrage range `(lower, upper)` of the value at
/// time-to-maturity `tau` as linear functions of `s`; valid for `r >= 0`
/// and a non-dividend-paying underlying.
pub fn value_bounds(option: &OptionSpec, r: f64, tau: f64) -> (Linear, Linear) {
    let k = option.strike;
    let disc = (-r * tau).exp();
    match option.kind {
        OptionKind::EuropeanCall => (
            Linear {
                intercept: -k * disc,
                slope: 1.0,
            },
            Linear {
                intercept: 0.0,
                slope: 1.0,
            },
        ),
        OptionKind::DigitalPut => (Linear::ZERO, Linear::constant(disc)),
        OptionKind::UpAndOutCall { barrier } => (Linear::ZERO, Linear::constant((barrier - k).max(0.0) * disc)),
        OptionKind::AmericanPut => (
            Linear {
                intercept: k,
                slope: -1.0,
            },
            Linear::constant(k),
        ),
    }
}

/// Scale for the tail tolerance: the strike for notional-type payoffs,
/// one for the digital.
pub fn value_scale(option: &OptionSpec) -> f64 {
    match option.kind {
        OptionKind::DigitalPut => 1.0,
        _ => option.strike,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainOptions {
    /// Absolute tolerance for switching to a tail formula; `None` means
    /// `1e-8` times [`value_scale`].
    pub tol_tail: Option<f64>,
    pub split_at_strike: bool,
    pub tails: bool,
    pub max_bisection: usize,
}

impl Default for DomainOptions {
    fn default() -> Self {
        DomainOptions {
            tol_tail: None,
            split_at_strike: true,
            tails: true,
            max_bisection: 60,
        }
    }
}

/// Range of component `k` at step `u`, widened to `+-1%` of the initial
/// value when all paths coincide.
fn state_range(paths: &PathSet, (lo, hi): (f64, f64), k: usize) -> (f64, f64) {
    let start = paths.state(0, 0)[k];
    let scale = start.abs().max(hi.abs()).max(1e-12);
    if hi - lo > 1e-12 * scale {
        return (lo, hi);
    }
    let mid = 0.5 * (lo + hi);
    let half = 0.01 * if start > 0.0 { start } else { scale };
    if k == 0 {
        ((mid - half).max(0.5 * mid), mid + half)
    } else {
        ((mid - half).max(0.0), mid + half)
    }
}

/// Walks from `good` (within tolerance of the asymptote) towards `bad` and
/// returns the last point known to be within tolerance.
fn bisect<G: FnMut(f64) -> Result<bool>>(
    mut good: f64,
    mut bad: f64,
    span: f64,
    iterations: usize,
    mut ok: G,
) -> Result<f64> {
    for _ in 0..iterations {
        if (bad - good).abs() <= 1e-6 * span {
            break;
        }
        let mid = 0.5 * (good + bad);
        if ok(mid)? {
            good = mid;
        } else {
            bad = mid;
        }
    }
    Ok(good)
}

/// Domain for the value function `V_t` at exposure step `u`: the range of
/// simulated prices (and variances for two-factor states), split at the
/// strike, with tails located by bisection where `V_t` is within tolerance
/// of its linear asymptote. Up-and-out calls are clipped at the barrier with
/// a zero tail beyond it.
pub fn build_domain<P: Pricer + ?Sized>(
    paths: &PathSet,
    u: usize,
    option: &OptionSpec,
    pricer: &P,
    r: f64,
    opts: &DomainOptions,
) -> Result<ChebDomain> {
    if u == 0 || u > paths.steps() {
        return Err(Error::invalid("domain step must lie in 1..=m"));
    }
    let variance = (paths.dim == 2).then(|| paths.range(u, 1));
    domain_from_ranges(paths, u, paths.range(u, 0), variance, option, pricer, r, opts)
}

/// [`build_domain`] for several steps, scanning the paths once.
pub fn build_domains<P: Pricer + ?Sized>(
    paths: &PathSet,
    steps: &[usize],
    option: &OptionSpec,
    pricer: &P,
    r: f64,
    opts: &DomainOptions,
) -> Result<Vec<ChebDomain>> {
    if steps.iter().any(|&u| u == 0 || u > paths.steps()) {
        return Err(Error::invalid("domain step must lie in 1..=m"));
    }
    let prices = paths.ranges(0);
    let variances = (paths.dim == 2).then(|| paths.ranges(1));
    steps
        .iter()
        .map(|&u| {
            let variance = variances.as_ref().map(|v| v[u]);
            domain_from_ranges(paths, u, prices[u], variance, option, pricer, r, opts)
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn domain_from_ranges<P: Pricer + ?Sized>(
    paths: &PathSet,
    u: usize,
    price: (f64, f64),
    variance: Option<(f64, f64)>,
    option: &OptionSpec,
    pricer: &P,
    r: f64,
    opts: &DomainOptions,
) -> Result<ChebDomain> {
    let t = paths.grid.time(u);
    let tau = option.maturity - t;
    let (mut a, mut b) = state_range(paths, price, 0);
    let mut right_fixed = None;
    if let Some(barrier) = option.barrier() {
        if b >= barrier {
            b = barrier;
            right_fixed = Some(Tail {
                cut: barrier,
                formula: Linear::ZERO,
            });
            if a >= b {
                a = 0.99 * barrier;
            }
        }
    }
    let mut domain = if let Some(v) = variance {
        ChebDomain::rectangle((a, b), state_range(paths, v, 1))?
    } else {
        ChebDomain::interval(a, b)?
    };
    let k = option.strike;
    if opts.split_at_strike && k > a && k < b {
        domain = domain.with_split(k)?;
    }

    let mut left = None;
    let mut right = right_fixed;
    if opts.tails && tau > 0.0 {
        let tol = opts.tol_tail.unwrap_or(1e-8 * value_scale(option));
        let (low, high) = asymptotes(option, r, tau);
        let span = b - a;
        let inner = k.clamp(a, b);
        // the asymptotes do not depend on the variance, but the approach to
        // them does: require the tolerance at both variance edges, the
        // high-variance edge first since it usually fails
        let vs: Vec<f64> = domain.variance.map_or_else(Vec::new, |(c, d)| alloc::vec![d, c]);
        let close = |f: Linear, s: f64| -> Result<bool> {
            if vs.is_empty() {
                return Ok((pricer.value(t, &[s])? - f.eval(s)).abs() < tol);
            }
            for &v in &vs {
                if (pricer.value(t, &[s, v])? - f.eval(s)).abs() >= tol {
                    return Ok(false);
                }
            }
            Ok(true)
        };
        if let Some(f) = low {
            if inner > a && close(f, a)? {
                let cut = bisect(a, inner, span, opts.max_bisection, |s| close(f, s))?;
                left = Some(Tail { cut, formula: f });
            }
        }
        if right.is_none() {
            if let Some(f) = high {
                if inner < b && close(f, b)? {
                    let cut = bisect(b, inner, span, opts.max_bisection, |s| close(f, s))?;
                    right = Some(Tail { cut, formula: f });
                }
            }
        }
        let lo = left.map_or(a, |t| t.cut);
        let hi = right.map_or(b, |t| t.cut);
        if hi - lo <= 1e-9 * span {
            // everything is asymptotic: keep plain interpolation
            left = None;
            right = right_fixed;
        }
    }
    domain.with_tails(left, right)
}
