//! Run configuration, read from a TOML file.
//!
//! Every field has a default, so `model = "bsm"` plus `option = "european"`
//! is a complete config for the reference setup.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use chebexpo_core::bounds::PlannerInput;
use chebexpo_core::chebyshev::DomainOptions;
use chebexpo_core::exposure::MeasureSpec;
use chebexpo_core::pricing::{OptionKind, OptionSpec, PricerHandle, PricingMethod, REFERENCE_BARRIER};
use chebexpo_core::simulation::{Dynamics, MeasureKind, ModelSpec, TimeGrid};
use chebexpo_core::xva::{FundingSpread, PdCurve, DEFAULT_IM_QUANTILE, DEFAULT_INNER_PATHS, MARGIN_PERIOD};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Smallest path count for which measure confidence intervals are reported.
pub const MIN_PATHS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelId {
    Bsm,
    Mjd,
    Hsv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionId {
    European,
    Digital,
    Barrier,
    American,
}

/// Overrides of the reference spot, drift and rate.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Market {
    pub s0: Option<f64>,
    pub mu: Option<f64>,
    pub r: Option<f64>,
}

/// Overrides of the reference contract terms.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Contract {
    pub strike: Option<f64>,
    pub maturity: Option<f64>,
    pub barrier: Option<f64>,
}

fn default_probes() -> usize {
    100
}

fn default_cap() -> usize {
    1024
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum Interpolation {
    /// Same degree on every piece; `variance_degree` defaults to `degree`.
    Fixed {
        degree: usize,
        #[serde(default)]
        variance_degree: Option<usize>,
        /// Price-dimension degrees for individual dates.
        #[serde(default)]
        overrides: Vec<DegreeOverride>,
    },
    /// Degree doubling until the estimated error is below `target`. Without a
    /// target, each date uses the narrowest confidence interval of a
    /// degree-1 pilot run.
    Adaptive {
        #[serde(default)]
        target: Option<f64>,
        #[serde(default = "default_probes")]
        probes: usize,
        #[serde(default = "default_cap")]
        cap: usize,
    },
}

impl Default for Interpolation {
    fn default() -> Self {
        Interpolation::Fixed {
            degree: 8,
            variance_degree: None,
            overrides: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DegreeOverride {
    pub u: usize,
    pub degree: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainConfig {
    pub tol_tail: Option<f64>,
    pub split_at_strike: bool,
    pub tails: bool,
}

impl Default for DomainConfig {
    fn default() -> Self {
        let d = DomainOptions::default();
        DomainConfig {
            tol_tail: d.tol_tail,
            split_at_strike: d.split_at_strike,
            tails: d.tails,
        }
    }
}

impl DomainConfig {
    pub fn options(&self) -> DomainOptions {
        DomainOptions {
            tol_tail: self.tol_tail,
            split_at_strike: self.split_at_strike,
            tails: self.tails,
            ..DomainOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct XvaConfig {
    /// Defaults to a uniform default time over the simulation horizon.
    pub pd: Option<PdCurve>,
    pub funding: FundingSpread,
    pub inner_paths: usize,
    pub im_quantile: f64,
    pub margin_period: f64,
    /// Chebyshev degree per piece for the interpolated deltas.
    pub degree: usize,
    /// Skip the nested MVA estimate.
    pub skip_mva: bool,
}

impl Default for XvaConfig {
    fn default() -> Self {
        XvaConfig {
            pd: None,
            funding: FundingSpread::default(),
            inner_paths: DEFAULT_INNER_PATHS,
            im_quantile: DEFAULT_IM_QUANTILE,
            margin_period: MARGIN_PERIOD,
            degree: 16,
            skip_mva: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiniteSampleConfig {
    pub n: usize,
    pub p: f64,
    pub etas: Vec<f64>,
    pub trials: usize,
    pub grid_points: usize,
}

impl Default for FiniteSampleConfig {
    fn default() -> Self {
        FiniteSampleConfig {
            n: 1000,
            p: 2.0,
            etas: vec![0.05, 0.2],
            trials: 500,
            grid_points: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    /// Degrees of the convergence study (BSM call on a strike-split interval).
    pub degrees: Vec<usize>,
    pub time: f64,
    pub probes: usize,
    /// Random sample pairs for the ordered-difference checks.
    pub lemma_trials: usize,
    pub finite_sample: FiniteSampleConfig,
    /// Extra planner inputs to render next to the built-in cases.
    pub planner: Vec<PlannerInput>,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            degrees: vec![4, 8, 16, 32],
            time: 0.5,
            probes: 10_000,
            lemma_trials: 10_000,
            finite_sample: FiniteSampleConfig::default(),
            planner: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelId,
    pub option: OptionId,
    /// Model parameters; must match `model` when given.
    pub dynamics: Option<Dynamics>,
    pub market: Market,
    pub contract: Contract,
    pub n: usize,
    pub m: usize,
    /// Simulation horizon `T` (defaults to the maturity).
    pub horizon: Option<f64>,
    pub seed: u64,
    pub simulation_measure: MeasureKind,
    /// Reference pricer; defaults follow the support matrix.
    pub pricer: Option<PricingMethod>,
    pub interpolation: Interpolation,
    /// Confidence level of the default PFE and CES measures.
    pub alpha: f64,
    /// Defaults to EE, PFE(alpha) and CES(alpha).
    pub measures: Option<Vec<MeasureSpec>>,
    pub domain: DomainConfig,
    /// Each timed stage runs this many times and the fastest run is kept.
    pub timing_repeats: usize,
    /// Path counts of the adaptive sweep.
    pub sweep: Vec<usize>,
    /// Write per-date approximant records.
    pub save_approximants: bool,
    pub out: Option<PathBuf>,
    pub xva: XvaConfig,
    pub diagnostics: DiagnosticsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelId::Bsm,
            option: OptionId::European,
            dynamics: None,
            market: Market::default(),
            contract: Contract::default(),
            n: 10_000,
            m: 52,
            horizon: None,
            seed: 2024,
            simulation_measure: MeasureKind::Physical,
            pricer: None,
            interpolation: Interpolation::default(),
            alpha: 0.95,
            measures: None,
            domain: DomainConfig::default(),
            timing_repeats: 1,
            sweep: vec![1250, 2500, 5000, 10_000],
            save_approximants: true,
            out: None,
            xva: XvaConfig::default(),
            diagnostics: DiagnosticsConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).context("parsing config")?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// SHA-256 of the canonical JSON rendering.
    pub fn hash(&self) -> Result<String> {
        let json = serde_json::to_vec(self)?;
        Ok(format!("{:x}", Sha256::digest(&json)))
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        let mut spec = match self.model {
            ModelId::Bsm => ModelSpec::reference_bsm(),
            ModelId::Mjd => ModelSpec::reference_mjd(),
            ModelId::Hsv => ModelSpec::reference_hsv(),
        };
        if let Some(d) = self.dynamics {
            let matches = matches!(
                (self.model, d),
                (ModelId::Bsm, Dynamics::Bsm { .. })
                    | (ModelId::Mjd, Dynamics::Mjd { .. })
                    | (ModelId::Hsv, Dynamics::Hsv { .. })
            );
            ensure!(matches, "dynamics {d:?} do not belong to model {:?}", self.model);
            spec.dynamics = d;
        }
        spec.s0 = self.market.s0.unwrap_or(spec.s0);
        spec.mu = self.market.mu.unwrap_or(spec.mu);
        spec.r = self.market.r.unwrap_or(spec.r);
        spec.validate()?;
        Ok(spec)
    }

    pub fn option_spec(&self) -> Result<OptionSpec> {
        let s0 = self.model_spec()?.s0;
        let kind = match self.option {
            OptionId::European => OptionKind::EuropeanCall,
            OptionId::Digital => OptionKind::DigitalPut,
            OptionId::Barrier => OptionKind::UpAndOutCall {
                barrier: self.contract.barrier.unwrap_or(REFERENCE_BARRIER),
            },
            OptionId::American => OptionKind::AmericanPut,
        };
        if self.contract.barrier.is_some() && self.option != OptionId::Barrier {
            bail!("a barrier level is only meaningful for the barrier option");
        }
        let spec = OptionSpec {
            kind,
            strike: self.contract.strike.unwrap_or(s0),
            maturity: self.contract.maturity.unwrap_or(1.0),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn pricing_method(&self) -> PricingMethod {
        if let Some(m) = self.pricer {
            return m;
        }
        match (self.model, self.option) {
            (ModelId::Bsm, OptionId::American) => PricingMethod::BinomialCrr { steps: 256 },
            (ModelId::Bsm, _) => PricingMethod::AnalyticBsm,
            _ => PricingMethod::cos_default(),
        }
    }

    pub fn pricer(&self) -> Result<PricerHandle> {
        Ok(PricerHandle::new(
            self.model_spec()?,
            self.option_spec()?,
            self.pricing_method(),
        )?)
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        let horizon = self.horizon.unwrap_or(self.option_spec()?.maturity);
        Ok(TimeGrid::new(horizon, self.m)?)
    }

    pub fn measure_specs(&self) -> Vec<MeasureSpec> {
        self.measures.clone().unwrap_or_else(|| {
            vec![
                MeasureSpec::Ee,
                MeasureSpec::Pfe { alpha: self.alpha },
                MeasureSpec::Ces { alpha: self.alpha },
            ]
        })
    }

    /// Degrees `[price, variance]` of a fixed-degree run.
    pub fn fixed_degrees(&self) -> Option<[usize; 2]> {
        match self.interpolation {
            Interpolation::Fixed {
                degree,
                variance_degree,
                ..
            } => Some([degree, variance_degree.unwrap_or(degree)]),
            Interpolation::Adaptive { .. } => None,
        }
    }

    /// Fixed degrees at date `u`, overrides applied.
    pub fn fixed_degrees_at(&self, u: usize) -> Option<[usize; 2]> {
        let [d0, d1] = self.fixed_degrees()?;
        let Interpolation::Fixed { overrides, .. } = &self.interpolation else {
            return None;
        };
        Some([overrides.iter().find(|o| o.u == u).map_or(d0, |o| o.degree), d1])
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.n >= MIN_PATHS,
            "n = {} is below the minimum of {MIN_PATHS} paths",
            self.n
        );
        ensure!(self.m >= 1, "need at least one exposure date");
        ensure!(self.timing_repeats >= 1, "timing_repeats must be >= 1");
        ensure!(
            self.sweep.iter().all(|&n| n >= MIN_PATHS),
            "sweep path counts must be >= {MIN_PATHS}"
        );
        ensure!(self.alpha > 0.0 && self.alpha < 1.0, "alpha must lie in (0, 1)");
        let option = self.option_spec()?;
        let grid = self.grid()?;
        ensure!(
            grid.horizon <= option.maturity * (1.0 + 1e-12),
            "horizon {} exceeds the maturity {}",
            grid.horizon,
            option.maturity
        );
        self.pricer()?;
        for spec in self.measure_specs() {
            spec.validate()?;
        }
        match &self.interpolation {
            Interpolation::Fixed {
                degree,
                variance_degree,
                overrides,
            } => {
                ensure!(*degree >= 1, "Chebyshev degree must be >= 1");
                ensure!(*variance_degree != Some(0), "variance degree must be >= 1");
                for o in overrides {
                    ensure!(o.degree >= 1, "override degree at u = {} must be >= 1", o.u);
                    ensure!(
                        (1..=self.m).contains(&o.u),
                        "override date u = {} outside 1..={}",
                        o.u,
                        self.m
                    );
                }
            }
            &Interpolation::Adaptive { target, probes, cap } => {
                if let Some(t) = target {
                    ensure!(t > 0.0 && t.is_finite(), "adaptive target must be positive");
                }
                ensure!(probes >= 1 && cap >= 2, "adaptive probes >= 1 and cap >= 2 required");
            }
        }
        if let Some(pd) = &self.xva.pd {
            pd.validate()?;
        }
        self.xva.funding.validate()?;
        ensure!(self.xva.inner_paths >= 1, "inner_paths must be >= 1");
        ensure!(self.xva.degree >= 2, "delta interpolation needs degree >= 2");
        ensure!(
            self.xva.im_quantile > 0.0 && self.xva.im_quantile < 1.0,
            "im_quantile must lie in (0, 1)"
        );
        ensure!(self.xva.margin_period > 0.0, "margin_period must be positive");
        Ok(())
    }
}
