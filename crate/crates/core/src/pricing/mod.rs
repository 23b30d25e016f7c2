//! Reference pricers `V_t(z)`: closed forms, COS and a binomial tree, behind
//! a common [`Pricer`] interface.

pub mod analytic;
pub mod binomial;
pub mod cos;

use alloc::format;
use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulation::{Dynamics, ModelSpec, REFERENCE_SPOT};

pub use binomial::Right;
pub use cos::CharacteristicFn;

/// Barrier level of the reference up-and-out call.
pub const REFERENCE_BARRIER: f64 = 5738.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum OptionKind {
    EuropeanCall,
    /// Cash-or-nothing put paying 1 if `S_T < K`.
    DigitalPut,
    /// Zero-rebate up-and-out call.
    UpAndOutCall {
        barrier: f64,
    },
    AmericanPut,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptionSpec {
    pub kind: OptionKind,
    pub strike: f64,
    pub maturity: f64,
}

impl OptionSpec {
    /// At-the-money one-year contract on the reference spot.
    pub fn reference(kind: OptionKind) -> Self {
        OptionSpec {
            kind,
            strike: REFERENCE_SPOT,
            maturity: 1.0,
        }
    }

    pub fn reference_barrier() -> Self {
        Self::reference(OptionKind::UpAndOutCall {
            barrier: REFERENCE_BARRIER,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.strike > 0.0 && self.strike.is_finite()) {
            return Err(Error::invalid("strike must be positive"));
        }
        if !(self.maturity > 0.0 && self.maturity.is_finite()) {
            return Err(Error::invalid("maturity must be positive"));
        }
        if let OptionKind::UpAndOutCall { barrier } = self.kind {
            if !(barrier > self.strike) {
                return Err(Error::invalid("barrier must exceed the strike"));
            }
        }
        Ok(())
    }

    pub fn barrier(&self) -> Option<f64> {
        match self.kind {
            OptionKind::UpAndOutCall { barrier } => Some(barrier),
            _ => None,
        }
    }

    /// Payoff at maturity for a path that is still alive.
    pub fn payoff(&self, s: f64) -> f64 {
        let k = self.strike;
        match self.kind {
            OptionKind::EuropeanCall => (s - k).max(0.0),
            OptionKind::DigitalPut => {
                if s < k {
                    1.0
                } else {
                    0.0
                }
            }
            OptionKind::UpAndOutCall { barrier } => {
                if s >= barrier {
                    0.0
                } else {
                    (s - k).max(0.0)
                }
            }
            OptionKind::AmericanPut => (k - s).max(0.0),
        }
    }

    /// Derivative of the payoff in `s` (zero at the kinks and jumps).
    pub fn payoff_slope(&self, s: f64) -> f64 {
        let k = self.strike;
        match self.kind {
            OptionKind::EuropeanCall => f64::from(u8::from(s > k)),
            OptionKind::DigitalPut => 0.0,
            OptionKind::UpAndOutCall { barrier } => f64::from(u8::from(s > k && s < barrier)),
            OptionKind::AmericanPut => -f64::from(u8::from(s < k)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum PricingMethod {
    AnalyticBsm,
    Cos { terms: usize, width: f64 },
    BinomialCrr { steps: usize },
}

impl PricingMethod {
    pub fn cos_default() -> Self {
        PricingMethod::Cos {
            terms: cos::DEFAULT_TERMS,
            width: cos::DEFAULT_WIDTH,
        }
    }
}

/// Value function `z -> V_t(z)` at a fixed time, possibly multi-dimensional.
pub trait Pricer {
    /// State dimension.
    fn dim(&self) -> usize;

    fn value(&self, t: f64, z: &[f64]) -> Result<f64>;

    /// `dV/ds`; central differences unless overridden.
    fn delta(&self, t: f64, z: &[f64]) -> Result<f64> {
        central_difference(self, t, z, 1e-4)
    }

    /// Short label used for approximant provenance.
    fn id(&self) -> String {
        String::from("pricer")
    }
}

/// `(V(s + h) - V(s - h)) / 2h` with `h = rel * s`.
pub fn central_difference<P: Pricer + ?Sized>(pricer: &P, t: f64, z: &[f64], rel: f64) -> Result<f64> {
    let s = z[0];
    let h = rel * s;
    let mut up = [0.0; 2];
    let mut dn = [0.0; 2];
    let d = z.len().min(2);
    up[..d].copy_from_slice(&z[..d]);
    dn[..d].copy_from_slice(&z[..d]);
    up[0] = s + h;
    dn[0] = s - h;
    Ok((pricer.value(t, &up[..d])? - pricer.value(t, &dn[..d])?) / (2.0 * h))
}

/// A model, a contract and a method checked against the support matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PricerHandle {
    pub model: ModelSpec,
    pub option: OptionSpec,
    pub method: PricingMethod,
}

impl PricerHandle {
    /// European and digital: closed form (BSM) or COS (any model).
    /// Barrier: closed form (BSM). American: binomial tree (BSM).
    pub fn new(model: ModelSpec, option: OptionSpec, method: PricingMethod) -> Result<Self> {
        model.validate()?;
        option.validate()?;
        let bsm = matches!(model.dynamics, Dynamics::Bsm { .. });
        let ok = match (option.kind, method) {
            (OptionKind::EuropeanCall | OptionKind::DigitalPut, PricingMethod::AnalyticBsm) => bsm,
            (OptionKind::EuropeanCall | OptionKind::DigitalPut, PricingMethod::Cos { terms, .. }) => {
                if terms < cos::MIN_TERMS {
                    return Err(Error::invalid("COS needs at least 16 terms"));
                }
                true
            }
            (OptionKind::UpAndOutCall { .. }, PricingMethod::AnalyticBsm) => bsm,
            (OptionKind::AmericanPut, PricingMethod::BinomialCrr { steps }) => {
                if steps < binomial::MIN_STEPS {
                    return Err(Error::invalid("binomial tree needs at least 64 steps"));
                }
                bsm
            }
            _ => false,
        };
        if !ok {
            return Err(Error::Unsupported(format!(
                "{:?} with {:?} under {:?}",
                option.kind, method, model.dynamics
            )));
        }
        Ok(PricerHandle { model, option, method })
    }

    fn sigma(&self) -> f64 {
        match self.model.dynamics {
            Dynamics::Bsm { sigma } => sigma,
            _ => f64::NAN,
        }
    }

    /// Early-exercise boundary of the American put at time `t < T`, found by
    /// bisection to absolute tolerance `tol`; `None` if exercise is never
    /// optimal.
    pub fn exercise_boundary(&self, t: f64, tol: f64) -> Result<Option<f64>> {
        let PricingMethod::BinomialCrr { steps } = self.method else {
            return Err(Error::Unsupported("exercise boundary needs the binomial pricer".into()));
        };
        let tau = self.option.maturity - t;
        if !(tau > 0.0) {
            return Err(Error::invalid("exercise boundary needs t < T"));
        }
        binomial::exercise_boundary(
            Right::Put,
            self.option.strike,
            self.sigma(),
            self.model.r,
            steps,
            tau,
            tol,
        )
    }
}

impl Pricer for PricerHandle {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn value(&self, t: f64, z: &[f64]) -> Result<f64> {
        if z.len() != self.dim() {
            return Err(Error::invalid("state dimension does not match the model"));
        }
        let s = z[0];
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::invalid("spot must be positive and finite"));
        }
        if t >= self.option.maturity {
            return Ok(self.option.payoff(s));
        }
        match self.method {
            PricingMethod::AnalyticBsm => analytic::price_analytic_bsm(&self.option, self.sigma(), self.model.r, t, s),
            PricingMethod::Cos { terms, width } => cos::price_cos(&self.option, &self.model, terms, width, t, z),
            PricingMethod::BinomialCrr { steps } => Ok(binomial::american_crr(
                Right::Put,
                self.option.strike,
                self.sigma(),
                self.model.r,
                steps,
                self.option.maturity - t,
                s,
            )?
            .value),
        }
    }

    fn delta(&self, t: f64, z: &[f64]) -> Result<f64> {
        if t >= self.option.maturity {
            return Ok(self.option.payoff_slope(z[0]));
        }
        match self.method {
            PricingMethod::AnalyticBsm => {
                match analytic::delta_analytic_bsm(&self.option, self.sigma(), self.model.r, t, z[0]) {
                    Some(d) => Ok(d),
                    None => central_difference(self, t, z, 1e-4),
                }
            }
            PricingMethod::Cos { .. } => central_difference(self, t, z, 1e-4),
            PricingMethod::BinomialCrr { .. } => central_difference(self, t, z, 1e-3),
        }
    }

    fn id(&self) -> String {
        let model = match self.model.dynamics {
            Dynamics::Bsm { .. } => "bsm",
            Dynamics::Mjd { .. } => "mjd",
            Dynamics::Hsv { .. } => "hsv",
        };
        let option = match self.option.kind {
            OptionKind::EuropeanCall => "european",
            OptionKind::DigitalPut => "digital",
            OptionKind::UpAndOutCall { .. } => "barrier",
            OptionKind::AmericanPut => "american",
        };
        let method = match self.method {
            PricingMethod::AnalyticBsm => String::from("analytic"),
            PricingMethod::Cos { terms, width } => format!("cos{terms}x{width}"),
            PricingMethod::BinomialCrr { steps } => format!("crr{steps}"),
        };
        format!("{model}-{option}-{method}")
    }
}
