//! Cox-Ross-Rubinstein tree for American exercise in the Black-Scholes model.

use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by the inherent methods whenever std is linked
use num_traits::Float;

use crate::error::{Error, Result};

pub const MIN_STEPS: usize = 64;

/// Which side the holder may exercise on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Right {
    Put,
    Call,
}

impl Right {
    pub fn payoff(self, strike: f64, s: f64) -> f64 {
        match self {
            Right::Put => (strike - s).max(0.0),
            Right::Call => (s - strike).max(0.0),
        }
    }
}

/// Root value of the tree together with the continuation value there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeValue {
    pub value: f64,
    pub continuation: f64,
}

/// Rolls an American `right` back through a `steps`-level CRR tree.
pub fn american_crr(
    right: Right,
    strike: f64,
    sigma: f64,
    r: f64,
    steps: usize,
    tau: f64,
    s: f64,
) -> Result<TreeValue> {
    if steps < MIN_STEPS {
        return Err(Error::invalid("binomial tree needs at least 64 steps"));
    }
    if !(strike > 0.0 && s > 0.0 && tau > 0.0 && sigma > 0.0) {
        return Err(Error::invalid("binomial tree needs K, s, tau, sigma > 0"));
    }
    let dt = tau / steps as f64;
    let up = (sigma * dt.sqrt()).exp();
    let down = 1.0 / up;
    let growth = (r * dt).exp();
    let p = (growth - down) / (up - down);
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid("binomial probability outside (0, 1); refine the tree"));
    }
    let disc = 1.0 / growth;
    let (pu, pd) = (disc * p, disc * (1.0 - p));

    let mut spot: Vec<f64> = Vec::with_capacity(steps + 1);
    let mut node = s * down.powi(steps as i32);
    let up2 = up * up;
    for _ in 0..=steps {
        spot.push(node);
        node *= up2;
    }
    let mut value: Vec<f64> = spot.iter().map(|&x| right.payoff(strike, x)).collect();
    let mut continuation = 0.0;
    for level in (0..steps).rev() {
        for j in 0..=level {
            spot[j] *= up;
            let cont = pu * value[j + 1] + pd * value[j];
            if level == 0 {
                continuation = cont;
            }
            value[j] = cont.max(right.payoff(strike, spot[j]));
        }
    }
    Ok(TreeValue {
        value: value[0],
        continuation,
    })
}

/// Spot below (put) or above (call) which immediate exercise beats holding,
/// found by bisection on `payoff - continuation`. `None` when exercise is
/// never strictly optimal inside the search interval.
pub fn exercise_boundary(
    right: Right,
    strike: f64,
    sigma: f64,
    r: f64,
    steps: usize,
    tau: f64,
    tol: f64,
) -> Result<Option<f64>> {
    let gain = |s: f64| -> Result<f64> {
        let tv = american_crr(right, strike, sigma, r, steps, tau, s)?;
        Ok(right.payoff(strike, s) - tv.continuation)
    };
    let slack = 1e-12 * strike;
    let (mut inside, mut outside) = match right {
        Right::Put => (1e-3 * strike, strike),
        Right::Call => (1e3 * strike, strike),
    };
    if gain(inside)? <= slack {
        return Ok(None);
    }
    for _ in 0..200 {
        if (outside - inside).abs() <= tol {
            break;
        }
        let mid = 0.5 * (inside + outside);
        if gain(mid)? > slack {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    Ok(Some(inside))
}
