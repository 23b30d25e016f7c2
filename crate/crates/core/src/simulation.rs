//! Risk-factor path generation on an equidistant exposure grid.
//!
//! BSM and MJD advance the log-price with an exact exponential update per
//! step, which keeps prices strictly positive. Heston uses full-truncation
//! Euler on `(log S, v)` with `v+` in the drift and diffusion terms, and the
//! stored variance is floored at zero after every step.
//!
//! Every path draws from its own ChaCha8 stream (`set_stream(path index)`), so
//! the first `k` paths of a run are identical whatever the total count is, and
//! paths can be produced on any number of workers in any order.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by the inherent methods whenever std is linked
use num_traits::Float;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Model-specific parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum Dynamics {
    /// Geometric Brownian motion.
    Bsm { sigma: f64 },
    /// Merton jump-diffusion with `N(gamma, delta^2)` log-jump sizes.
    Mjd {
        sigma: f64,
        lambda: f64,
        gamma: f64,
        delta: f64,
    },
    /// Heston stochastic volatility.
    Hsv {
        v0: f64,
        kappa: f64,
        theta: f64,
        eta: f64,
        rho: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub dynamics: Dynamics,
    pub s0: f64,
    /// Physical drift (1/yr).
    pub mu: f64,
    /// Risk-free rate (1/yr).
    pub r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasureKind {
    Physical,
    RiskNeutral,
}

/// S&P 500 level on the calibration date used by the reference setups.
pub const REFERENCE_SPOT: f64 = 3825.33;
pub const REFERENCE_DRIFT: f64 = 0.11;
pub const REFERENCE_RATE: f64 = 0.0110;

impl ModelSpec {
    pub fn reference_bsm() -> Self {
        ModelSpec {
            dynamics: Dynamics::Bsm { sigma: 0.1943 },
            s0: REFERENCE_SPOT,
            mu: REFERENCE_DRIFT,
            r: REFERENCE_RATE,
        }
    }

    pub fn reference_mjd() -> Self {
        ModelSpec {
            dynamics: Dynamics::Mjd {
                sigma: 0.1483,
                lambda: 1.2998,
                gamma: -0.1475,
                delta: 0.1331,
            },
            s0: REFERENCE_SPOT,
            mu: REFERENCE_DRIFT,
            r: REFERENCE_RATE,
        }
    }

    pub fn reference_hsv() -> Self {
        ModelSpec {
            dynamics: Dynamics::Hsv {
                v0: 0.0650,
                kappa: 2.3134,
                theta: 0.0889,
                eta: 0.9898,
                rho: -0.7040,
            },
            s0: REFERENCE_SPOT,
            mu: REFERENCE_DRIFT,
            r: REFERENCE_RATE,
        }
    }

    /// Number of state components: 1 for BSM/MJD, 2 (price, variance) for Heston.
    pub fn dim(&self) -> usize {
        match self.dynamics {
            Dynamics::Hsv { .. } => 2,
            _ => 1,
        }
    }

    pub fn initial_state(&self) -> Vec<f64> {
        match self.dynamics {
            Dynamics::Hsv { v0, .. } => vec![self.s0, v0],
            _ => vec![self.s0],
        }
    }

    pub fn drift(&self, measure: MeasureKind) -> f64 {
        match measure {
            MeasureKind::Physical => self.mu,
            MeasureKind::RiskNeutral => self.r,
        }
    }

    /// `E[e^J] - 1` for the MJD jump size, zero otherwise.
    pub fn jump_compensator(&self) -> f64 {
        match self.dynamics {
            Dynamics::Mjd { gamma, delta, .. } => (gamma + 0.5 * delta * delta).exp() - 1.0,
            _ => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |cond: bool, msg: &str| {
            if cond {
                Ok(())
            } else {
                Err(Error::invalid(msg))
            }
        };
        ok(self.s0 > 0.0 && self.s0.is_finite(), "s0 must be positive")?;
        ok(
            self.mu.is_finite() && self.r.is_finite(),
            "drift and rate must be finite",
        )?;
        match self.dynamics {
            Dynamics::Bsm { sigma } => ok(sigma >= 0.0 && sigma.is_finite(), "sigma must be >= 0"),
            Dynamics::Mjd {
                sigma,
                lambda,
                gamma,
                delta,
            } => {
                ok(sigma >= 0.0 && sigma.is_finite(), "sigma must be >= 0")?;
                ok(lambda >= 0.0 && lambda.is_finite(), "lambda must be >= 0")?;
                ok(gamma.is_finite(), "gamma must be finite")?;
                ok(delta >= 0.0 && delta.is_finite(), "delta must be >= 0")
            }
            Dynamics::Hsv {
                v0,
                kappa,
                theta,
                eta,
                rho,
            } => {
                ok(v0 >= 0.0 && theta >= 0.0, "v0 and theta must be >= 0")?;
                ok(kappa > 0.0, "kappa must be > 0")?;
                ok(eta > 0.0, "eta must be > 0")?;
                ok((-1.0..=1.0).contains(&rho), "rho must lie in [-1, 1]")
            }
        }
    }
}

/// Equidistant grid `t_u = u T / m`, `u = 0..=m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub horizon: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::invalid("time horizon must be positive"));
        }
        if steps == 0 {
            return Err(Error::invalid("time grid needs at least one step"));
        }
        Ok(TimeGrid { horizon, steps })
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn time(&self, u: usize) -> f64 {
        if u == self.steps {
            self.horizon
        } else {
            u as f64 * self.horizon / self.steps as f64
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|u| self.time(u)).collect()
    }
}

/// Simulated states, `n x (m + 1) x d`, path-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSet {
    pub grid: TimeGrid,
    pub dim: usize,
    pub seed: u64,
    pub n_paths: usize,
    states: Vec<f64>,
}

impl PathSet {
    /// Wraps raw row-major states (`[path][step][component]`).
    pub fn from_raw(grid: TimeGrid, dim: usize, seed: u64, n_paths: usize, states: Vec<f64>) -> Result<Self> {
        if dim == 0 || dim > 2 {
            return Err(Error::invalid("state dimension must be 1 or 2"));
        }
        if states.len() != n_paths * (grid.steps + 1) * dim {
            return Err(Error::invalid("state buffer does not match n x (m+1) x d"));
        }
        Ok(PathSet {
            grid,
            dim,
            seed,
            n_paths,
            states,
        })
    }

    pub fn raw(&self) -> &[f64] {
        &self.states
    }

    pub fn steps(&self) -> usize {
        self.grid.steps
    }

    fn offset(&self, path: usize, step: usize) -> usize {
        (path * (self.grid.steps + 1) + step) * self.dim
    }

    pub fn state(&self, path: usize, step: usize) -> &[f64] {
        let o = self.offset(path, step);
        &self.states[o..o + self.dim]
    }

    pub fn price(&self, path: usize, step: usize) -> f64 {
        self.states[self.offset(path, step)]
    }

    pub fn variance(&self, path: usize, step: usize) -> Option<f64> {
        (self.dim == 2).then(|| self.states[self.offset(path, step) + 1])
    }

    /// Initial price shared by all paths.
    pub fn spot(&self) -> f64 {
        self.states[0]
    }

    /// Min and max of component `k` over all paths at `step`.
    pub fn range(&self, step: usize, k: usize) -> (f64, f64) {
        (0..self.n_paths).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), i| {
            let v = self.state(i, step)[k];
            (lo.min(v), hi.max(v))
        })
    }

    /// Min and max of component `k` at every step `0..=m`, in one pass over
    /// the path-major storage.
    pub fn ranges(&self, k: usize) -> Vec<(f64, f64)> {
        let width = self.grid.steps + 1;
        let mut out = vec![(f64::INFINITY, f64::NEG_INFINITY); width];
        for path in self.states.chunks_exact(width * self.dim) {
            for (r, z) in out.iter_mut().zip(path.chunks_exact(self.dim)) {
                r.0 = r.0.min(z[k]);
                r.1 = r.1.max(z[k]);
            }
        }
        out
    }

    /// The first `n` paths. Identical to a fresh run with `n` paths and the same seed.
    pub fn truncate(&self, n: usize) -> PathSet {
        let n = n.min(self.n_paths);
        let len = n * (self.grid.steps + 1) * self.dim;
        PathSet {
            grid: self.grid,
            dim: self.dim,
            seed: self.seed,
            n_paths: n,
            states: self.states[..len].to_vec(),
        }
    }
}

/// Deterministic generator for path `index` of the run seeded with `seed`.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Simulates `n` paths. See [`simulate_path`] for the per-path scheme.
pub fn simulate(model: &ModelSpec, grid: TimeGrid, n: usize, measure: MeasureKind, seed: u64) -> Result<PathSet> {
    if n == 0 {
        return Err(Error::invalid("number of paths must be >= 1"));
    }
    TimeGrid::new(grid.horizon, grid.steps)?;
    model.validate()?;
    let dim = model.dim();
    let row = (grid.steps + 1) * dim;
    let mut states = vec![0.0; n * row];
    for (i, chunk) in states.chunks_exact_mut(row).enumerate() {
        simulate_path(model, grid, measure, seed, i as u64, chunk);
    }
    PathSet::from_raw(grid, dim, seed, n, states)
}

/// Writes path `index` into `out` (`(m + 1) * d` values).
///
/// Inputs are assumed validated; [`simulate`] does that once per run.
pub fn simulate_path(model: &ModelSpec, grid: TimeGrid, measure: MeasureKind, seed: u64, index: u64, out: &mut [f64]) {
    let mut rng = path_rng(seed, index);
    let dt = grid.dt();
    let sqrt_dt = dt.sqrt();
    let drift = model.drift(measure);
    match model.dynamics {
        Dynamics::Bsm { sigma } => {
            let step_drift = (drift - 0.5 * sigma * sigma) * dt;
            let mut log_s = model.s0.ln();
            out[0] = model.s0;
            for slot in out.iter_mut().skip(1) {
                let z: f64 = rng.sample(StandardNormal);
                log_s += step_drift + sigma * sqrt_dt * z;
                *slot = log_s.exp();
            }
        }
        Dynamics::Mjd {
            sigma,
            lambda,
            gamma,
            delta,
        } => {
            let kbar = model.jump_compensator();
            let step_drift = (drift - 0.5 * sigma * sigma - lambda * kbar) * dt;
            let jumps = (lambda > 0.0).then(|| Poisson::new(lambda * dt).ok()).flatten();
            let mut log_s = model.s0.ln();
            out[0] = model.s0;
            for slot in out.iter_mut().skip(1) {
                let z: f64 = rng.sample(StandardNormal);
                log_s += step_drift + sigma * sqrt_dt * z;
                if let Some(pois) = &jumps {
                    let count = pois.sample(&mut rng) as u64;
                    for _ in 0..count {
                        let j: f64 = rng.sample(StandardNormal);
                        log_s += gamma + delta * j;
                    }
                }
                *slot = log_s.exp();
            }
        }
        Dynamics::Hsv {
            v0,
            kappa,
            theta,
            eta,
            rho,
        } => {
            let orth = (1.0 - rho * rho).max(0.0).sqrt();
            let mut log_s = model.s0.ln();
            let mut v = v0;
            out[0] = model.s0;
            out[1] = v0;
            for step in 1..=grid.steps {
                let zv: f64 = rng.sample(StandardNormal);
                let zp: f64 = rng.sample(StandardNormal);
                let zs = rho * zv + orth * zp;
                let vp = v.max(0.0);
                let vol = (vp * dt).sqrt();
                log_s += (drift - 0.5 * vp) * dt + vol * zs;
                v = (v + kappa * (theta - vp) * dt + eta * vol * zv).max(0.0);
                out[2 * step] = log_s.exp();
                out[2 * step + 1] = v;
            }
        }
    }
}

/// One conditional step of length `dt` from price `s` (single-factor models).
///
/// Used by the nested initial-margin sampler. Heston is rejected because the
/// conditional law needs the variance state as well.
pub fn step_price<R: Rng + ?Sized>(
    model: &ModelSpec,
    measure: MeasureKind,
    s: f64,
    dt: f64,
    rng: &mut R,
) -> Result<f64> {
    let drift = model.drift(measure);
    let sqrt_dt = dt.sqrt();
    match model.dynamics {
        Dynamics::Bsm { sigma } => {
            let z: f64 = rng.sample(StandardNormal);
            Ok(s * ((drift - 0.5 * sigma * sigma) * dt + sigma * sqrt_dt * z).exp())
        }
        Dynamics::Mjd {
            sigma,
            lambda,
            gamma,
            delta,
        } => {
            let kbar = model.jump_compensator();
            let z: f64 = rng.sample(StandardNormal);
            let mut x = (drift - 0.5 * sigma * sigma - lambda * kbar) * dt + sigma * sqrt_dt * z;
            if lambda > 0.0 {
                let pois =
                    Poisson::new(lambda * dt).map_err(|_| Error::invalid("jump intensity too large for one step"))?;
                let count = pois.sample(rng) as u64;
                for _ in 0..count {
                    let j: f64 = rng.sample(StandardNormal);
                    x += gamma + delta * j;
                }
            }
            Ok(s * x.exp())
        }
        Dynamics::Hsv { .. } => Err(Error::Unsupported(
            "conditional one-step sampling needs a single-factor model".into(),
        )),
    }
}
