//! Numerical evaluation of the exposure error bounds: the (L, N, M)
//! parameter planner, uniform and L^p gaps between a value function and its
//! approximation, the two-digital example, and the finite-sample bounds with
//! an empirical coverage check.

use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by the inherent methods whenever std is linked
use num_traits::Float;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exposure::measures::{measure, MeasureSpec};
use crate::math::{integrate, norm_cdf, norm_inv, norm_pdf};
use crate::simulation::path_rng;

/// Absolute tolerance of every norm and quantile integral.
pub const QUAD_TOL: f64 = 1e-8;
pub const DEFAULT_GRID_POINTS: usize = 100_000;
const QUAD_SPLITS: usize = 64;
const QUAD_MAX_INTERVALS: usize = 4000;

/// Adaptive quadrature after a uniform pre-split, so narrow features are not
/// missed by the first Gauss-Kronrod pass.
fn integrate_split<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64) -> Result<f64> {
    let h = (b - a) / QUAD_SPLITS as f64;
    let mut total = 0.0;
    for k in 0..QUAD_SPLITS {
        let lo = a + h * k as f64;
        let hi = if k + 1 == QUAD_SPLITS { b } else { lo + h };
        total += integrate(&mut f, lo, hi, QUAD_TOL / QUAD_SPLITS as f64, QUAD_MAX_INTERVALS)?.value;
    }
    Ok(total)
}

/// Hölder conjugate, with `1 -> inf`.
pub fn conjugate(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

// ---------------------------------------------------------------- planner

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerInput {
    /// Outer paths `n`.
    pub n: f64,
    pub kappa: f64,
    pub sigma_rho: f64,
    /// Tail constants: `P(Z not in Omega_L) <= alpha exp(-beta L^gamma)`.
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Convergence constants: `||V - I_N V|| <= a exp(b (L^theta - N^{1/D}))`.
    pub a: f64,
    pub b: f64,
    pub theta: f64,
    /// Stability constant of the interpolation operator.
    pub stability: f64,
    pub dim: u32,
    /// Bound on the reference pricer's standard deviation.
    pub sigma_bar: f64,
    /// Construction-effort exponent; carried for reporting only.
    #[serde(default)]
    pub xi: Option<f64>,
}

impl PlannerInput {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.n,
            self.kappa,
            self.sigma_rho,
            self.alpha,
            self.beta,
            self.gamma,
            self.a,
            self.b,
            self.stability,
            self.sigma_bar,
        ];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::invalid("planner constants must be positive and finite"));
        }
        if !(self.theta >= 2.0 && self.theta.is_finite()) {
            return Err(Error::invalid("theta must be >= 2"));
        }
        if self.dim == 0 {
            return Err(Error::invalid("dimension must be >= 1"));
        }
        if let Some(xi) = self.xi {
            if !(xi > 0.0) {
                return Err(Error::invalid("xi must be positive"));
            }
        }
        Ok(())
    }

    /// `ln(kappa / (3 a sqrt(n))) / b`
    pub fn side_rhs(&self) -> f64 {
        (self.kappa / (3.0 * self.a * self.n.sqrt())).ln() / self.b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    /// Domain size `L`.
    pub l: f64,
    /// `ceil(L^theta - ln(kappa / (3 a sqrt n)) / b)`, clamped to at least one.
    pub base: u64,
    /// Number of nodes `N = base^D`.
    pub nodes: u64,
    /// Pricing paths `M`.
    pub paths: u64,
    /// The base was below one and clamped.
    pub clamped: bool,
}

impl Plan {
    /// `L^theta - N^{1/D} <= ln(kappa / (3 a sqrt n)) / b`
    pub fn side_condition(&self, input: &PlannerInput) -> bool {
        let root = (self.nodes as f64).powf(1.0 / input.dim as f64);
        self.l.powf(input.theta) - root <= input.side_rhs() + 1e-9 * root.max(1.0)
    }
}

pub fn plan_parameters(input: &PlannerInput) -> Result<Plan> {
    input.validate()?;
    let arg =
        (input.n.ln() + input.alpha.ln() + input.kappa * input.kappa / (18.0 * input.sigma_rho * input.sigma_rho))
            / input.beta;
    if !(arg > 0.0) {
        return Err(Error::Infeasible(alloc::format!(
            "domain-size argument {arg} is not positive"
        )));
    }
    let l = arg.powf(1.0 / input.gamma);
    let raw = (l.powf(input.theta) - input.side_rhs()).ceil();
    if !(raw < 2f64.powi(63)) {
        return Err(Error::Infeasible("node count overflows".into()));
    }
    let clamped = raw < 1.0;
    let base = if clamped { 1 } else { raw as u64 };
    let nodes = base
        .checked_pow(input.dim)
        .ok_or_else(|| Error::Infeasible("node count overflows".into()))?;
    let ln_n = (nodes as f64).ln();
    let log_term = 1.0 + ln_n;
    let m = (input.n
        * input.stability
        * input.stability
        * log_term
        * log_term
        * input.sigma_bar
        * input.sigma_bar
        * (18.0 * ln_n / (input.kappa * input.kappa) + 1.0 / (input.sigma_rho * input.sigma_rho)))
        .ceil();
    if !(m < 2f64.powi(63)) {
        return Err(Error::Infeasible("pricing path count overflows".into()));
    }
    Ok(Plan {
        l,
        base,
        nodes,
        paths: m as u64,
        clamped,
    })
}

// ------------------------------------------------------ risk factors, m

/// Law of a scalar risk factor `Z_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RiskFactorDist {
    Normal {
        mean: f64,
        sd: f64,
    },
    /// `exp(N(mu, sigma^2))`
    LogNormal {
        mu: f64,
        sigma: f64,
    },
}

impl RiskFactorDist {
    pub fn validate(&self) -> Result<()> {
        let (m, s) = match *self {
            RiskFactorDist::Normal { mean, sd } => (mean, sd),
            RiskFactorDist::LogNormal { mu, sigma } => (mu, sigma),
        };
        if !(s > 0.0 && s.is_finite() && m.is_finite()) {
            return Err(Error::invalid("risk-factor scale must be positive"));
        }
        Ok(())
    }

    pub fn pdf(&self, z: f64) -> f64 {
        match *self {
            RiskFactorDist::Normal { mean, sd } => norm_pdf((z - mean) / sd) / sd,
            RiskFactorDist::LogNormal { mu, sigma } => {
                if z <= 0.0 {
                    0.0
                } else {
                    norm_pdf((z.ln() - mu) / sigma) / (sigma * z)
                }
            }
        }
    }

    pub fn cdf(&self, z: f64) -> f64 {
        match *self {
            RiskFactorDist::Normal { mean, sd } => norm_cdf((z - mean) / sd),
            RiskFactorDist::LogNormal { mu, sigma } => {
                if z <= 0.0 {
                    0.0
                } else {
                    norm_cdf((z.ln() - mu) / sigma)
                }
            }
        }
    }

    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            RiskFactorDist::Normal { mean, sd } => mean + sd * norm_inv(u),
            RiskFactorDist::LogNormal { mu, sigma } => (mu + sigma * norm_inv(u)).exp(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let x: f64 = rng.sample(StandardNormal);
        match *self {
            RiskFactorDist::Normal { mean, sd } => mean + sd * x,
            RiskFactorDist::LogNormal { mu, sigma } => (mu + sigma * x).exp(),
        }
    }

    /// `||f_Z||_inf`, attained at the mode.
    pub fn sup_density(&self) -> f64 {
        match *self {
            RiskFactorDist::Normal { .. } => self.pdf(self.quantile(0.5)),
            RiskFactorDist::LogNormal { mu, sigma } => self.pdf((mu - sigma * sigma).exp()),
        }
    }

    /// Interval carrying all but `2e-15` of the mass.
    pub fn effective_support(&self) -> (f64, f64) {
        (self.quantile(1e-15), self.quantile(1.0 - 1e-15))
    }

    /// `||f_Z||_{L^s}` for `s` in `[1, inf]`.
    pub fn density_norm(&self, s: f64) -> Result<f64> {
        if s.is_infinite() {
            return Ok(self.sup_density());
        }
        if !(s >= 1.0) {
            return Err(Error::invalid("norm exponent must be >= 1"));
        }
        let (a, b) = self.effective_support();
        Ok(integrate_split(|z| self.pdf(z).powf(s), a, b)?.powf(1.0 / s))
    }
}

/// Density of the weighting measure `m` as `(lo, hi, value)` pieces.
pub fn measure_density(spec: &MeasureSpec) -> Result<Vec<(f64, f64, f64)>> {
    spec.validate()?;
    match spec {
        MeasureSpec::Ee => Ok(alloc::vec![(0.0, 1.0, 1.0)]),
        MeasureSpec::Ces { alpha } => Ok(alloc::vec![(*alpha, 1.0, 1.0 / (1.0 - alpha))]),
        MeasureSpec::Sem { density } => {
            let w = 1.0 / density.len() as f64;
            Ok(density
                .iter()
                .enumerate()
                .filter(|(_, d)| **d > 0.0)
                .map(|(k, d)| (k as f64 * w, (k + 1) as f64 * w, *d))
                .collect())
        }
        MeasureSpec::Pfe { .. } => Err(Error::Unsupported(
            "PFE weights a single quantile and has no density".into(),
        )),
    }
}

/// `||f_m||_{L^s(0,1)}`
pub fn measure_density_norm(spec: &MeasureSpec, s: f64) -> Result<f64> {
    let pieces = measure_density(spec)?;
    if s.is_infinite() {
        return Ok(pieces.iter().fold(0.0, |acc, p| acc.max(p.2)));
    }
    Ok(pieces
        .iter()
        .map(|(lo, hi, v)| (hi - lo) * v.powf(s))
        .sum::<f64>()
        .powf(1.0 / s))
}

/// Direction of a monotone value function, used to read exposure quantiles
/// off the risk-factor quantiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Monotone {
    Increasing,
    Decreasing,
}

/// `Q_X(u)` for `X = V(Z)^+` with monotone `V`.
pub fn exposure_quantile<V: Fn(f64) -> f64>(v: &V, dir: Monotone, dist: &RiskFactorDist, u: f64) -> f64 {
    let z = match dir {
        Monotone::Increasing => dist.quantile(u),
        Monotone::Decreasing => dist.quantile(1.0 - u),
    };
    v(z).max(0.0)
}

/// Population `rho_m(X) = int_0^1 Q_X(u) m(du)`; PFE is the quantile itself.
pub fn population_measure<V: Fn(f64) -> f64>(
    v: &V,
    dir: Monotone,
    dist: &RiskFactorDist,
    spec: &MeasureSpec,
) -> Result<f64> {
    if let MeasureSpec::Pfe { alpha } = spec {
        spec.validate()?;
        return Ok(exposure_quantile(v, dir, dist, *alpha));
    }
    let mut total = 0.0;
    for (lo, hi, d) in measure_density(spec)? {
        let q = integrate(
            |u| exposure_quantile(v, dir, dist, u),
            lo,
            hi,
            QUAD_TOL,
            QUAD_MAX_INTERVALS,
        )?;
        total += d * q.value;
    }
    Ok(total)
}

// ------------------------------------------------------------------ gaps

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformGap {
    pub gap: f64,
    pub argmax: f64,
    pub points: usize,
}

/// `max |V - U|` over `points` equispaced points of `[a, b]`.
pub fn uniform_gap<V, U>(v: V, u: U, range: (f64, f64), points: usize) -> Result<UniformGap>
where
    V: Fn(f64) -> f64,
    U: Fn(f64) -> f64,
{
    let (a, b) = range;
    if !(a < b) || points < 2 {
        return Err(Error::invalid("gap grid needs a < b and at least two points"));
    }
    let mut best = UniformGap {
        gap: 0.0,
        argmax: a,
        points,
    };
    for k in 0..points {
        let z = if k + 1 == points {
            b
        } else {
            a + (b - a) * k as f64 / (points - 1) as f64
        };
        let d = (v(z) - u(z)).abs();
        if !d.is_finite() {
            return Err(Error::NonFinite(alloc::format!("|V - U| at {z}")));
        }
        if d > best.gap {
            best.gap = d;
            best.argmax = z;
        }
    }
    Ok(best)
}

/// `||V - U||_{L^p(a, b)}` for finite `p >= 1`.
pub fn lp_gap<V, U>(v: V, u: U, range: (f64, f64), p: f64) -> Result<f64>
where
    V: Fn(f64) -> f64,
    U: Fn(f64) -> f64,
{
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::invalid("L^p gap needs finite p >= 1"));
    }
    Ok(integrate_split(|z| (v(z) - u(z)).abs().powf(p), range.0, range.1)?.powf(1.0 / p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpBound {
    pub p: f64,
    pub r: f64,
    pub q: f64,
    pub lp_gap: f64,
    pub density_norm: f64,
    pub measure_norm: f64,
    pub bound: f64,
    /// `|rho_m(X) - rho_m(Y)|` by quadrature of the quantile functions.
    pub measured: f64,
    /// One of the norm factors is infinite.
    pub vacuous: bool,
}

impl LpBound {
    pub fn holds(&self) -> bool {
        self.vacuous || self.measured <= self.bound + QUAD_TOL
    }
}

/// `||V - U||_{L^p} ||f_Z||_{L^{q'}}^{1/r} ||f_m||_{L^{r'}}` with `p = r q`,
/// together with the measured gap of the two population measures.
#[allow(clippy::too_many_arguments)]
pub fn lp_bound_eval<V, U>(
    v: V,
    u: U,
    dir: Monotone,
    dist: &RiskFactorDist,
    spec: &MeasureSpec,
    range: (f64, f64),
    r: f64,
    q: f64,
) -> Result<LpBound>
where
    V: Fn(f64) -> f64,
    U: Fn(f64) -> f64,
{
    dist.validate()?;
    if !(r >= 1.0 && q >= 1.0 && r.is_finite() && q.is_finite()) {
        return Err(Error::invalid("r and q must be finite and >= 1"));
    }
    let p = r * q;
    let gap = lp_gap(&v, &u, range, p)?;
    let density_norm = dist.density_norm(conjugate(q))?;
    let measure_norm = measure_density_norm(spec, conjugate(r))?;
    let bound = gap * density_norm.powf(1.0 / r) * measure_norm;
    let measured = (population_measure(&v, dir, dist, spec)? - population_measure(&u, dir, dist, spec)?).abs();
    Ok(LpBound {
        p,
        r,
        q,
        lp_gap: gap,
        density_norm,
        measure_norm,
        bound,
        measured,
        vacuous: !bound.is_finite(),
    })
}

// ------------------------------------------------------- digital example

/// Two digital calls on a normal log-return `Z ~ N(-sigma^2 t / 2, sigma^2 t)`,
/// `V = Phi(d^{k1})`, `U = Phi(d^{k2})` with
/// `d^k(z) = (z - k - sigma^2 tau / 2) / sqrt(sigma^2 tau)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DigitalExample {
    pub sigma: f64,
    pub t: f64,
    pub tau: f64,
    pub k1: f64,
    pub k2: f64,
    pub alpha: f64,
}

impl Default for DigitalExample {
    fn default() -> Self {
        DigitalExample {
            sigma: 0.05,
            t: 1.0 / 24.0,
            tau: 1.0 / 24.0,
            k1: 0.03,
            k2: 0.04,
            alpha: 0.99,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DigitalReport {
    pub pfe_x: f64,
    pub ces_x: f64,
    pub pfe_y: f64,
    pub ces_y: f64,
    pub l2_gap: f64,
    /// `|PFE(X) - PFE(Y)| > 4 ||V - U||_{L^2}`
    pub pfe_exceeds_4x: bool,
    /// `|CES(X) - CES(Y)| > 5 ||V - U||_{L^2}`
    pub ces_exceeds_5x: bool,
}

impl DigitalExample {
    pub fn risk_factor(&self) -> RiskFactorDist {
        RiskFactorDist::Normal {
            mean: -0.5 * self.sigma * self.sigma * self.t,
            sd: self.sigma * self.t.sqrt(),
        }
    }

    fn digital(&self, k: f64, z: f64) -> f64 {
        let s = self.sigma * self.tau.sqrt();
        norm_cdf((z - k - 0.5 * s * s) / s)
    }

    pub fn v(&self, z: f64) -> f64 {
        self.digital(self.k1, z)
    }

    pub fn u(&self, z: f64) -> f64 {
        self.digital(self.k2, z)
    }

    /// Range outside of which `|V - U|` is below double precision.
    pub fn gap_range(&self) -> (f64, f64) {
        let s = self.sigma * self.tau.sqrt();
        (self.k1.min(self.k2) - 12.0 * s, self.k1.max(self.k2) + 12.0 * s)
    }

    pub fn run(&self) -> Result<DigitalReport> {
        let dist = self.risk_factor();
        dist.validate()?;
        let v = |z: f64| self.v(z);
        let u = |z: f64| self.u(z);
        let pfe = MeasureSpec::Pfe { alpha: self.alpha };
        let ces = MeasureSpec::Ces { alpha: self.alpha };
        let dir = Monotone::Increasing;
        let pfe_x = population_measure(&v, dir, &dist, &pfe)?;
        let pfe_y = population_measure(&u, dir, &dist, &pfe)?;
        let ces_x = population_measure(&v, dir, &dist, &ces)?;
        let ces_y = population_measure(&u, dir, &dist, &ces)?;
        let l2_gap = lp_gap(v, u, self.gap_range(), 2.0)?;
        Ok(DigitalReport {
            pfe_x,
            ces_x,
            pfe_y,
            ces_y,
            l2_gap,
            pfe_exceeds_4x: (pfe_x - pfe_y).abs() > 4.0 * l2_gap,
            ces_exceeds_5x: (ces_x - ces_y).abs() > 5.0 * l2_gap,
        })
    }
}

pub fn digital_example() -> Result<DigitalReport> {
    DigitalExample::default().run()
}

// --------------------------------------------------- finite-sample bounds

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteSampleSetup {
    pub dist: RiskFactorDist,
    /// Sample size `n` per trial.
    pub n: usize,
    pub p: f64,
    pub eta: f64,
    pub trials: usize,
    pub seed: u64,
    /// Range for the L^p and uniform norms of `V - U`.
    pub range: (f64, f64),
    pub grid_points: usize,
    /// Measures checked against bound (a); those with a density also
    /// against bound (b).
    pub measures: Vec<MeasureSpec>,
}

impl FiniteSampleSetup {
    pub fn validate(&self) -> Result<()> {
        self.dist.validate()?;
        if self.n < 2 || self.trials == 0 {
            return Err(Error::invalid("need n >= 2 and at least one trial"));
        }
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return Err(Error::invalid("p must be finite and >= 1"));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::invalid("eta must lie in (0, 1]"));
        }
        if self.measures.is_empty() {
            return Err(Error::invalid("no measures to check"));
        }
        self.measures.iter().try_for_each(MeasureSpec::validate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteSampleBounds {
    pub lp_gap: f64,
    pub sup_gap: f64,
    pub sup_density: f64,
    /// `(||f_Z||_inf / eta)^{1/p} n^{1/p} ||V - U||_{L^p}`
    pub bound_a: f64,
    /// `||f_m||_{L^q} ||f_Z||_inf^{1/p} ||V - U||_{L^p}
    ///  + (-ln eta / n)^{1/(2p)} ||f_m||_{L^q} ||V - U||_inf`, per measure
    /// (`None` for PFE).
    pub bound_b: Vec<Option<f64>>,
}

pub fn finite_sample_bounds<V, U>(setup: &FiniteSampleSetup, v: V, u: U) -> Result<FiniteSampleBounds>
where
    V: Fn(f64) -> f64,
    U: Fn(f64) -> f64,
{
    setup.validate()?;
    let p = setup.p;
    let nf = setup.n as f64;
    let lp = lp_gap(&v, &u, setup.range, p)?;
    let sup = uniform_gap(&v, &u, setup.range, setup.grid_points)?.gap;
    let fz = setup.dist.sup_density();
    let bound_a = (fz / setup.eta).powf(1.0 / p) * nf.powf(1.0 / p) * lp;
    let hoeffding = (-setup.eta.ln() / nf).powf(1.0 / (2.0 * p));
    let bound_b = setup
        .measures
        .iter()
        .map(|m| match m {
            MeasureSpec::Pfe { .. } => Ok(None),
            _ => {
                let fm = measure_density_norm(m, conjugate(p))?;
                Ok(Some(fm * fz.powf(1.0 / p) * lp + hoeffding * fm * sup))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FiniteSampleBounds {
        lp_gap: lp,
        sup_gap: sup,
        sup_density: fz,
        bound_a,
        bound_b,
    })
}

/// Violations `(a, b)` of one trial: a fresh i.i.d. sample of `Z` from the
/// trial's own stream.
pub fn finite_sample_trial<V, U>(
    setup: &FiniteSampleSetup,
    bounds: &FiniteSampleBounds,
    v: V,
    u: U,
    trial: usize,
) -> Result<(bool, bool)>
where
    V: Fn(f64) -> f64,
    U: Fn(f64) -> f64,
{
    let mut rng = path_rng(setup.seed, trial as u64);
    let mut x = Vec::with_capacity(setup.n);
    let mut y = Vec::with_capacity(setup.n);
    for _ in 0..setup.n {
        let z = setup.dist.sample(&mut rng);
        x.push(v(z).max(0.0));
        y.push(u(z).max(0.0));
    }
    let (mut va, mut vb) = (false, false);
    for (spec, bb) in setup.measures.iter().zip(&bounds.bound_b) {
        let d = (measure(&x, spec)?.estimate - measure(&y, spec)?.estimate).abs();
        va |= d > bounds.bound_a;
        if let Some(b) = bb {
            vb |= d > *b;
        }
    }
    Ok((va, vb))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub bounds: FiniteSampleBounds,
    pub trials: usize,
    pub violations_a: usize,
    pub violations_b: usize,
    /// `eta + 2 sqrt(eta (1 - eta) / trials)`
    pub allowed_rate: f64,
}

impl CoverageReport {
    pub fn from_trials(setup: &FiniteSampleSetup, bounds: FiniteSampleBounds, outcomes: &[(bool, bool)]) -> Self {
        let trials = outcomes.len();
        let eta = setup.eta;
        CoverageReport {
            bounds,
            trials,
            violations_a: outcomes.iter().filter(|o| o.0).count(),
            violations_b: outcomes.iter().filter(|o| o.1).count(),
            allowed_rate: eta + 2.0 * (eta * (1.0 - eta) / trials as f64).sqrt(),
        }
    }

    pub fn rate_a(&self) -> f64 {
        self.violations_a as f64 / self.trials as f64
    }

    pub fn rate_b(&self) -> f64 {
        self.violations_b as f64 / self.trials as f64
    }

    pub fn pass(&self) -> bool {
        self.rate_a() <= self.allowed_rate && self.rate_b() <= self.allowed_rate
    }
}

/// Empirical frequency with which the finite-sample bounds fail.
pub fn finite_sample_bound_check<V, U>(setup: &FiniteSampleSetup, v: V, u: U) -> Result<CoverageReport>
where
    V: Fn(f64) -> f64,
    U: Fn(f64) -> f64,
{
    let bounds = finite_sample_bounds(setup, &v, &u)?;
    let outcomes = (0..setup.trials)
        .map(|k| finite_sample_trial(setup, &bounds, &v, &u, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(CoverageReport::from_trials(setup, bounds, &outcomes))
}

#[cfg(test)]
mod tests;
