//! Black-Scholes closed forms (no dividends).

use crate::error::{Error, Result};
use crate::math::{norm_cdf, norm_pdf};
use crate::pricing::{OptionKind, OptionSpec};
#[allow(unused_imports)] // shadowed by the inherent methods whenever std is linked
use num_traits::Float;

/// Below this total volatility the closed forms fall back to the
/// deterministic (intrinsic forward) limit.
const MIN_TOTAL_VOL: f64 = 1e-12;

fn d1_d2(s: f64, k: f64, tau: f64, r: f64, sigma: f64) -> (f64, f64) {
    let vol = sigma * tau.sqrt();
    let d1 = ((s / k).ln() + (r + 0.5 * sigma * sigma) * tau) / vol;
    (d1, d1 - vol)
}

pub fn call(s: f64, k: f64, tau: f64, r: f64, sigma: f64) -> f64 {
    let disc = (-r * tau).exp();
    if sigma * tau.sqrt() < MIN_TOTAL_VOL {
        return (s - k * disc).max(0.0);
    }
    let (d1, d2) = d1_d2(s, k, tau, r, sigma);
    s * norm_cdf(d1) - k * disc * norm_cdf(d2)
}

pub fn call_delta(s: f64, k: f64, tau: f64, r: f64, sigma: f64) -> f64 {
    if sigma * tau.sqrt() < MIN_TOTAL_VOL {
        return if s > k * (-r * tau).exp() { 1.0 } else { 0.0 };
    }
    norm_cdf(d1_d2(s, k, tau, r, sigma).0)
}

/// Cash-or-nothing put paying 1 if `S_T < K`.
pub fn digital_put(s: f64, k: f64, tau: f64, r: f64, sigma: f64) -> f64 {
    let disc = (-r * tau).exp();
    if sigma * tau.sqrt() < MIN_TOTAL_VOL {
        return if s * (r * tau).exp() < k { disc } else { 0.0 };
    }
    disc * norm_cdf(-d1_d2(s, k, tau, r, sigma).1)
}

pub fn digital_put_delta(s: f64, k: f64, tau: f64, r: f64, sigma: f64) -> f64 {
    if sigma * tau.sqrt() < MIN_TOTAL_VOL {
        return 0.0;
    }
    let vol = sigma * tau.sqrt();
    let d2 = d1_d2(s, k, tau, r, sigma).1;
    -(-r * tau).exp() * norm_pdf(d2) / (s * vol)
}

/// Continuously monitored up-and-out call with zero rebate (`K < B`).
///
/// Reflection-principle form `A - B + C - D` of Reiner-Rubinstein.
pub fn up_and_out_call(s: f64, k: f64, barrier: f64, tau: f64, r: f64, sigma: f64) -> f64 {
    if s >= barrier || k >= barrier {
        return 0.0;
    }
    let disc = (-r * tau).exp();
    let vol = sigma * tau.sqrt();
    if vol < MIN_TOTAL_VOL {
        // deterministic path: knocked out iff the forward crosses B before T
        return if s * (r.max(0.0) * tau).exp() >= barrier {
            0.0
        } else {
            (s - k * disc).max(0.0)
        };
    }
    let mu = (r - 0.5 * sigma * sigma) / (sigma * sigma);
    let shift = (1.0 + mu) * vol;
    let x1 = (s / k).ln() / vol + shift;
    let x2 = (s / barrier).ln() / vol + shift;
    let y1 = (barrier * barrier / (s * k)).ln() / vol + shift;
    let y2 = (barrier / s).ln() / vol + shift;
    let ratio = (barrier / s).ln();
    let pw1 = (2.0 * (mu + 1.0) * ratio).exp();
    let pw2 = (2.0 * mu * ratio).exp();
    let term = |n1: f64, n2: f64| if n1 == 0.0 { 0.0 } else { n1 * n2 };
    let a = s * norm_cdf(x1) - k * disc * norm_cdf(x1 - vol);
    let b = s * norm_cdf(x2) - k * disc * norm_cdf(x2 - vol);
    let c = s * term(norm_cdf(-y1), pw1) - k * disc * term(norm_cdf(-y1 + vol), pw2);
    let d = s * term(norm_cdf(-y2), pw1) - k * disc * term(norm_cdf(-y2 + vol), pw2);
    (a - b + c - d).max(0.0)
}

/// Closed-form BSM value at time `t < T` and spot `s`.
pub fn price_analytic_bsm(option: &OptionSpec, sigma: f64, r: f64, t: f64, s: f64) -> Result<f64> {
    let tau = option.maturity - t;
    if !(tau > 0.0) {
        return Err(Error::invalid(
            "analytic pricer needs t < T; use the payoff at maturity",
        ));
    }
    if !(s > 0.0) {
        return Err(Error::invalid("spot must be positive"));
    }
    let k = option.strike;
    match option.kind {
        OptionKind::EuropeanCall => Ok(call(s, k, tau, r, sigma)),
        OptionKind::DigitalPut => Ok(digital_put(s, k, tau, r, sigma)),
        OptionKind::UpAndOutCall { barrier } => Ok(up_and_out_call(s, k, barrier, tau, r, sigma)),
        OptionKind::AmericanPut => Err(Error::Unsupported("no closed form for the American put".into())),
    }
}

/// Closed-form delta where one exists (European call, digital put).
pub fn delta_analytic_bsm(option: &OptionSpec, sigma: f64, r: f64, t: f64, s: f64) -> Option<f64> {
    let tau = option.maturity - t;
    if !(tau > 0.0) || !(s > 0.0) {
        return None;
    }
    match option.kind {
        OptionKind::EuropeanCall => Some(call_delta(s, option.strike, tau, r, sigma)),
        OptionKind::DigitalPut => Some(digital_put_delta(s, option.strike, tau, r, sigma)),
        _ => None,
    }
}
