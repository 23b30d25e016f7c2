//! Fourier-cosine (COS) pricing of European-style payoffs from the
//! characteristic function of the log-return `ln(S_T / S_t)`.

use core::f64::consts::PI;
#[allow(unused_imports)] // shadowed by the inherent methods whenever std is linked
use num_traits::Float;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::pricing::{OptionKind, OptionSpec};
use crate::simulation::{Dynamics, ModelSpec};

pub const MIN_TERMS: usize = 16;
pub const DEFAULT_TERMS: usize = 256;
pub const DEFAULT_WIDTH: f64 = 10.0;

/// Risk-neutral characteristic function of `X = ln(S_{t+tau} / S_t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CharacteristicFn {
    Bsm {
        sigma: f64,
        r: f64,
        tau: f64,
    },
    Mjd {
        sigma: f64,
        lambda: f64,
        gamma: f64,
        delta: f64,
        r: f64,
        tau: f64,
    },
    /// Heston, conditioned on the current variance `v`.
    Hsv {
        kappa: f64,
        theta: f64,
        eta: f64,
        rho: f64,
        v: f64,
        r: f64,
        tau: f64,
    },
}

impl CharacteristicFn {
    /// Characteristic function of the model over `tau`, given the current
    /// state (`z[1]` is the variance for Heston).
    pub fn new(model: &ModelSpec, tau: f64, z: &[f64]) -> Result<Self> {
        let r = model.r;
        Ok(match model.dynamics {
            Dynamics::Bsm { sigma } => CharacteristicFn::Bsm { sigma, r, tau },
            Dynamics::Mjd {
                sigma,
                lambda,
                gamma,
                delta,
            } => CharacteristicFn::Mjd {
                sigma,
                lambda,
                gamma,
                delta,
                r,
                tau,
            },
            Dynamics::Hsv {
                kappa, theta, eta, rho, ..
            } => {
                let v = *z.get(1).ok_or_else(|| Error::invalid("Heston state needs (s, v)"))?;
                CharacteristicFn::Hsv {
                    kappa,
                    theta,
                    eta,
                    rho,
                    v: v.max(0.0),
                    r,
                    tau,
                }
            }
        })
    }

    pub fn tau(&self) -> f64 {
        match *self {
            CharacteristicFn::Bsm { tau, .. }
            | CharacteristicFn::Mjd { tau, .. }
            | CharacteristicFn::Hsv { tau, .. } => tau,
        }
    }

    pub fn rate(&self) -> f64 {
        match *self {
            CharacteristicFn::Bsm { r, .. } | CharacteristicFn::Mjd { r, .. } | CharacteristicFn::Hsv { r, .. } => r,
        }
    }

    pub fn eval(&self, u: f64) -> Complex64 {
        let iu = Complex64::new(0.0, u);
        match *self {
            CharacteristicFn::Bsm { sigma, r, tau } => {
                let s2 = sigma * sigma;
                (iu * (r - 0.5 * s2) * tau - 0.5 * s2 * u * u * tau).exp()
            }
            CharacteristicFn::Mjd {
                sigma,
                lambda,
                gamma,
                delta,
                r,
                tau,
            } => {
                let s2 = sigma * sigma;
                let comp = (gamma + 0.5 * delta * delta).exp() - 1.0;
                let jump = (iu * gamma - 0.5 * delta * delta * u * u).exp() - 1.0;
                (iu * (r - 0.5 * s2 - lambda * comp) * tau - 0.5 * s2 * u * u * tau + lambda * tau * jump).exp()
            }
            CharacteristicFn::Hsv {
                kappa,
                theta,
                eta,
                rho,
                v,
                r,
                tau,
            } => {
                // "little trap" form: continuous in u for the principal log
                let eta2 = eta * eta;
                let beta = kappa - rho * eta * iu;
                let d = (beta * beta + eta2 * (iu + u * u)).sqrt();
                let g = (beta - d) / (beta + d);
                let edt = (-d * tau).exp();
                let c =
                    iu * r * tau + kappa * theta / eta2 * ((beta - d) * tau - 2.0 * ((1.0 - g * edt) / (1.0 - g)).ln());
                let dd = (beta - d) / eta2 * (1.0 - edt) / (1.0 - g * edt);
                (c + dd * v).exp()
            }
        }
    }

    /// First, second and fourth cumulants of `X` (`c4 = 0` for Heston).
    pub fn cumulants(&self) -> (f64, f64, f64) {
        match *self {
            CharacteristicFn::Bsm { sigma, r, tau } => {
                let s2 = sigma * sigma;
                ((r - 0.5 * s2) * tau, s2 * tau, 0.0)
            }
            CharacteristicFn::Mjd {
                sigma,
                lambda,
                gamma,
                delta,
                r,
                tau,
            } => {
                let s2 = sigma * sigma;
                let d2 = delta * delta;
                let comp = (gamma + 0.5 * d2).exp() - 1.0;
                let c1 = (r - 0.5 * s2 - lambda * comp + lambda * gamma) * tau;
                let c2 = (s2 + lambda * (gamma * gamma + d2)) * tau;
                let g2 = gamma * gamma;
                let c4 = lambda * tau * (g2 * g2 + 6.0 * g2 * d2 + 3.0 * d2 * d2);
                (c1, c2, c4)
            }
            CharacteristicFn::Hsv {
                kappa,
                theta,
                eta,
                rho,
                v,
                r,
                tau,
            } => {
                let ekt = (-kappa * tau).exp();
                let c1 = r * tau + (1.0 - ekt) * (theta - v) / (2.0 * kappa) - 0.5 * theta * tau;
                // variance from the second-order expansion of the Riccati ODEs
                let (k2, e2) = (kappa * kappa, eta * eta);
                let p = e2 * kappa * tau * (theta - v) + e2 * theta
                    - 2.0 * eta * k2 * rho * tau * (theta - v)
                    - 4.0 * eta * kappa * rho * theta
                    + 2.0 * eta * kappa * rho * v
                    + 2.0 * k2 * (theta - v);
                let q = 2.0 * e2 * kappa * tau * theta - 5.0 * e2 * theta + 2.0 * e2 * v
                    - 8.0 * eta * k2 * rho * tau * theta
                    + 16.0 * eta * kappa * rho * theta
                    - 8.0 * eta * kappa * rho * v
                    + 8.0 * k2 * kappa * tau * theta
                    + 8.0 * k2 * (v - theta);
                let c2 = (e2 * (theta - 2.0 * v) * ekt * ekt + 4.0 * p * ekt + q) / (8.0 * k2 * kappa);
                (c1, c2, 0.0)
            }
        }
    }
}

/// Cosine coefficient integrals on `[c, d]` within the expansion range `[a, b]`.
fn chi(k: usize, a: f64, b: f64, c: f64, d: f64) -> f64 {
    let w = k as f64 * PI / (b - a);
    let (sd, cd) = (w * (d - a)).sin_cos();
    let (sc, cc) = (w * (c - a)).sin_cos();
    let (ed, ec) = (d.exp(), c.exp());
    (cd * ed - cc * ec + w * sd * ed - w * sc * ec) / (1.0 + w * w)
}

fn psi(k: usize, a: f64, b: f64, c: f64, d: f64) -> f64 {
    if k == 0 {
        return d - c;
    }
    let w = k as f64 * PI / (b - a);
    ((w * (d - a)).sin() - (w * (c - a)).sin()) / w
}

/// COS price at spot `s` of a European call or digital put with strike `k`.
pub fn price_with(
    kind: OptionKind,
    strike: f64,
    cf: &CharacteristicFn,
    s: f64,
    terms: usize,
    width: f64,
) -> Result<f64> {
    if terms < MIN_TERMS {
        return Err(Error::invalid("COS needs at least 16 terms"));
    }
    if !(width > 0.0) {
        return Err(Error::invalid("COS truncation width must be positive"));
    }
    if !(s > 0.0) {
        return Err(Error::invalid("spot must be positive"));
    }
    let x = (s / strike).ln();
    let (c1, c2, c4) = cf.cumulants();
    let half = width * (c2.abs() + c4.abs().sqrt()).max(1e-12).sqrt();
    let (a, b) = (x + c1 - half, x + c1 + half);
    let range = b - a;
    let payoff = |k: usize| -> f64 {
        match kind {
            OptionKind::EuropeanCall => {
                if b <= 0.0 {
                    0.0
                } else {
                    let c = a.max(0.0);
                    2.0 / range * strike * (chi(k, a, b, c, b) - psi(k, a, b, c, b))
                }
            }
            OptionKind::DigitalPut => {
                if a >= 0.0 {
                    0.0
                } else {
                    2.0 / range * psi(k, a, b, a, b.min(0.0))
                }
            }
            _ => 0.0,
        }
    };
    if !matches!(kind, OptionKind::EuropeanCall | OptionKind::DigitalPut) {
        return Err(Error::Unsupported(
            "COS supports European calls and digital puts only".into(),
        ));
    }
    let mut sum = 0.0;
    for k in 0..terms {
        let u = k as f64 * PI / range;
        let phi = cf.eval(u);
        let term = (phi * Complex64::new(0.0, u * (x - a)).exp()).re * payoff(k);
        if !term.is_finite() {
            return Err(Error::NonFinite(alloc::format!("characteristic function at u = {u}")));
        }
        sum += if k == 0 { 0.5 * term } else { term };
    }
    Ok((-cf.rate() * cf.tau()).exp() * sum)
}

/// COS value of `option` at time `t < T` in state `z`.
pub fn price_cos(option: &OptionSpec, model: &ModelSpec, terms: usize, width: f64, t: f64, z: &[f64]) -> Result<f64> {
    let tau = option.maturity - t;
    if !(tau > 0.0) {
        return Err(Error::invalid("COS pricer needs t < T; use the payoff at maturity"));
    }
    let cf = CharacteristicFn::new(model, tau, z)?;
    price_with(option.kind, option.strike, &cf, z[0], terms, width)
}
