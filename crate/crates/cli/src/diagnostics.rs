//! Analytic example, planner output, convergence study, ordered-difference
//! checks and finite-sample coverage, rendered to `diagnostics.json`.

use std::path::Path;

use anyhow::{Context, Result};
use chebexpo_core::bounds::{
    digital_example, finite_sample_bounds, finite_sample_trial, plan_parameters, uniform_gap, CoverageReport,
    DigitalExample, DigitalReport, FiniteSampleSetup, Plan, PlannerInput, RiskFactorDist,
};
use chebexpo_core::chebyshev::{fit_fixed, ChebDomain};
use chebexpo_core::exposure::{lp_distance, measure, sorted_pair, MeasureSpec};
use chebexpo_core::math::ols_slope;
use chebexpo_core::pricing::{OptionKind, OptionSpec, Pricer, PricerHandle, PricingMethod};
use chebexpo_core::simulation::{path_rng, Dynamics, ModelSpec};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{DiagnosticsConfig, RunConfig};
use crate::report::{ensure_dir, write_json, RunInfo};

/// Slack for floating-point rounding in the exact inequalities.
pub const ROUNDING_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerRow {
    pub input: PlannerInput,
    pub plan: Option<Plan>,
    pub error: Option<String>,
    pub side_condition: Option<bool>,
}

/// Worked planner inputs: unit constants in one and two dimensions and a
/// setting with a slowly decaying tail.
pub fn builtin_planner_inputs() -> Vec<PlannerInput> {
    let unit = |dim| PlannerInput {
        n: 1e4,
        kappa: 3.0 * 2f64.sqrt(),
        sigma_rho: 1.0,
        alpha: 1.0,
        beta: 1.0,
        gamma: 2.0,
        a: 1.0,
        b: 1.0,
        theta: 2.0,
        stability: 1.0,
        dim,
        sigma_bar: 1.0,
        xi: None,
    };
    vec![
        unit(1),
        unit(2),
        PlannerInput {
            n: 2500.0,
            kappa: 1.5,
            sigma_rho: 0.5,
            alpha: 2.0,
            beta: 0.5,
            gamma: 1.0,
            a: 0.1,
            b: 2.0,
            theta: 2.0,
            stability: 0.5,
            dim: 1,
            sigma_bar: 0.2,
            xi: None,
        },
    ]
}

pub fn planner_rows(inputs: &[PlannerInput]) -> Vec<PlannerRow> {
    inputs
        .iter()
        .map(|input| match plan_parameters(input) {
            Ok(plan) => PlannerRow {
                input: *input,
                side_condition: Some(plan.side_condition(input)),
                plan: Some(plan),
                error: None,
            },
            Err(e) => PlannerRow {
                input: *input,
                plan: None,
                error: Some(e.to_string()),
                side_condition: None,
            },
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub time: f64,
    pub domain: (f64, f64),
    pub probes: usize,
    /// `(N, max |V - I_N V|)` over the probes.
    pub errors: Vec<(usize, f64)>,
    /// Least-squares slope of `ln error` against `log2 N`.
    pub slope: f64,
}

/// Interpolation error of the BSM call value at time `t` on a strike-split
/// interval of `+-4` standard deviations of the log-price.
pub fn convergence(model: &ModelSpec, degrees: &[usize], t: f64, probes: usize, seed: u64) -> Result<Convergence> {
    let Dynamics::Bsm { sigma } = model.dynamics else {
        anyhow::bail!("the convergence study uses the BSM model");
    };
    let option = OptionSpec::reference(OptionKind::EuropeanCall);
    let option = OptionSpec {
        strike: model.s0,
        ..option
    };
    let h = PricerHandle::new(*model, option, PricingMethod::AnalyticBsm)?;
    let spread = 4.0 * sigma * t.sqrt();
    let (a, b) = (model.s0 * (-spread).exp(), model.s0 * spread.exp());
    let domain = ChebDomain::interval(a, b)?.with_split(option.strike)?;
    let mut rng = path_rng(seed, 0);
    let points: Vec<f64> = (0..probes).map(|_| rng.random_range(a..=b)).collect();
    let mut errors = Vec::with_capacity(degrees.len());
    for &n in degrees {
        let approx = fit_fixed(|z: &[f64]| h.value(t, z), &domain, [n, 0], "bsm-call")?;
        let mut worst: f64 = 0.0;
        for &s in &points {
            worst = worst.max((approx.eval(&[s])? - h.value(t, &[s])?).abs());
        }
        errors.push((n, worst));
    }
    let xs: Vec<f64> = errors.iter().map(|e| (e.0 as f64).log2()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.1.max(f64::MIN_POSITIVE).ln()).collect();
    Ok(Convergence {
        time: t,
        domain: (a, b),
        probes,
        errors,
        slope: ols_slope(&xs, &ys),
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LemmaSuite {
    pub trials: usize,
    /// `|rho(x) - rho(y)| > max_i |x_i - y_i|` for EE, PFE, CES.
    pub measure_violations: [usize; 3],
    /// `||sort x - sort y||_p > ||x - y||_p` for p = 1, 2, inf.
    pub contraction_violations: [usize; 3],
}

impl LemmaSuite {
    pub fn clean(&self) -> bool {
        self.measure_violations
            .iter()
            .chain(&self.contraction_violations)
            .all(|&v| v == 0)
    }
}

/// One random pair: sizes 2..=300, exposures from a mix of point masses,
/// heavy tails and zeros, `y` either a perturbation of `x` or independent.
fn random_pair<R: Rng>(rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    let n = rng.random_range(2..=300);
    let draw = |rng: &mut R| -> f64 {
        match rng.random_range(0..4) {
            0 => 0.0,
            1 => rng.random_range(0.0..1.0),
            2 => (rng.random_range(0.0..1.0f64)).powi(-2) - 1.0,
            _ => f64::from(rng.random_range(0..5u8)),
        }
    };
    let x: Vec<f64> = (0..n).map(|_| draw(rng)).collect();
    let y = if rng.random_bool(0.5) {
        let scale = rng.random_range(0.0..2.0);
        x.iter()
            .map(|v| (v + scale * rng.random_range(-1.0..1.0)).max(0.0))
            .collect()
    } else {
        (0..n).map(|_| draw(rng)).collect()
    };
    (x, y)
}

pub fn lemma_suite(trials: usize, alpha: f64, seed: u64) -> Result<LemmaSuite> {
    let specs = [MeasureSpec::Ee, MeasureSpec::Pfe { alpha }, MeasureSpec::Ces { alpha }];
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = path_rng(seed, k as u64);
            let (x, y) = random_pair(&mut rng);
            let sup = lp_distance(&x, &y, f64::INFINITY);
            let scale = x.iter().chain(&y).fold(1.0, |a: f64, b| a.max(b.abs()));
            let mut m = [false; 3];
            for (flag, spec) in m.iter_mut().zip(&specs) {
                let d = (measure(&x, spec)?.estimate - measure(&y, spec)?.estimate).abs();
                *flag = d > sup + ROUNDING_SLACK * scale;
            }
            let (sx, sy) = sorted_pair(&x, &y);
            let mut c = [false; 3];
            for (flag, p) in c.iter_mut().zip([1.0, 2.0, f64::INFINITY]) {
                *flag = lp_distance(&sx, &sy, p) > lp_distance(&x, &y, p) * (1.0 + ROUNDING_SLACK) + ROUNDING_SLACK;
            }
            Ok((m, c))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut suite = LemmaSuite {
        trials,
        ..LemmaSuite::default()
    };
    for (m, c) in outcomes {
        for k in 0..3 {
            suite.measure_violations[k] += usize::from(m[k]);
            suite.contraction_violations[k] += usize::from(c[k]);
        }
    }
    Ok(suite)
}

/// Lognormal `Z` with the digital pair of the analytic example as `V, U`.
pub fn finite_sample_setup(cfg: &DiagnosticsConfig, eta: f64, seed: u64) -> (FiniteSampleSetup, DigitalExample) {
    let ex = DigitalExample::default();
    let s = ex.sigma * ex.t.sqrt();
    let dist = RiskFactorDist::LogNormal {
        mu: -0.5 * s * s,
        sigma: s,
    };
    let fs = &cfg.finite_sample;
    let setup = FiniteSampleSetup {
        dist,
        n: fs.n,
        p: fs.p,
        eta,
        trials: fs.trials,
        seed,
        range: dist.effective_support(),
        grid_points: fs.grid_points,
        measures: vec![
            MeasureSpec::Ee,
            MeasureSpec::Pfe { alpha: 0.95 },
            MeasureSpec::Ces { alpha: 0.95 },
        ],
    };
    (setup, ex)
}

/// Violation frequencies of both finite-sample bounds, trials in parallel.
pub fn coverage(setup: &FiniteSampleSetup, ex: &DigitalExample) -> Result<CoverageReport> {
    let v = |z: f64| ex.v(z.ln());
    let u = |z: f64| ex.u(z.ln());
    let bounds = finite_sample_bounds(setup, v, u)?;
    let outcomes = (0..setup.trials)
        .into_par_iter()
        .map(|k| finite_sample_trial(setup, &bounds, v, u, k))
        .collect::<chebexpo_core::error::Result<Vec<_>>>()?;
    Ok(CoverageReport::from_trials(setup, bounds, &outcomes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub eta: f64,
    pub report: CoverageReport,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub digital: DigitalReport,
    pub planner: Vec<PlannerRow>,
    pub convergence: Convergence,
    pub lemma: LemmaSuite,
    pub coverage: Vec<CoverageRow>,
    /// Sup-norm gap of the digital pair on its support (grid maximum).
    pub digital_sup_gap: f64,
}

pub fn compute_diagnostics(cfg: &RunConfig) -> Result<Diagnostics> {
    let d = &cfg.diagnostics;
    let digital = digital_example().context("analytic example")?;
    let ex = DigitalExample::default();
    let sup = uniform_gap(|z| ex.v(z), |z| ex.u(z), ex.gap_range(), 100_000)?.gap;
    let mut inputs = builtin_planner_inputs();
    inputs.extend(d.planner.iter().copied());
    let bsm = match cfg.model_spec()? {
        m @ ModelSpec {
            dynamics: Dynamics::Bsm { .. },
            ..
        } => m,
        _ => ModelSpec::reference_bsm(),
    };
    let conv = convergence(&bsm, &d.degrees, d.time, d.probes, cfg.seed).context("convergence study")?;
    let lemma = lemma_suite(d.lemma_trials, cfg.alpha, cfg.seed).context("ordered-difference suite")?;
    let coverage = d
        .finite_sample
        .etas
        .iter()
        .map(|&eta| {
            let (setup, ex) = finite_sample_setup(d, eta, cfg.seed);
            let report = coverage(&setup, &ex).with_context(|| format!("finite-sample coverage at eta = {eta}"))?;
            Ok(CoverageRow {
                eta,
                pass: report.pass(),
                report,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Diagnostics {
        digital,
        planner: planner_rows(&inputs),
        convergence: conv,
        lemma,
        coverage,
        digital_sup_gap: sup,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsManifest {
    pub run: RunInfo,
    pub diagnostics: Diagnostics,
}

pub fn run_diagnostics(cfg: &RunConfig, dir: &Path) -> Result<Diagnostics> {
    let diag = compute_diagnostics(cfg)?;
    ensure_dir(dir)?;
    write_json(
        &dir.join("diagnostics.json"),
        &DiagnosticsManifest {
            run: RunInfo::new(cfg)?,
            diagnostics: diag.clone(),
        },
    )?;
    Ok(diag)
}

pub fn render_diagnostics(d: &Diagnostics) -> String {
    let g = &d.digital;
    let mut s = format!(
        "digital: PFE(X) {:.4}  CES(X) {:.4}  PFE(Y) {:.4}  CES(Y) {:.4}  L2 {:.4}  >4x {}  >5x {}\n",
        g.pfe_x, g.ces_x, g.pfe_y, g.ces_y, g.l2_gap, g.pfe_exceeds_4x, g.ces_exceeds_5x
    );
    for row in &d.planner {
        match (&row.plan, &row.error) {
            (Some(p), _) => s.push_str(&format!(
                "planner n={} D={}: L {:.4}  N {}  M {}  side condition {}\n",
                row.input.n,
                row.input.dim,
                p.l,
                p.nodes,
                p.paths,
                row.side_condition == Some(true)
            )),
            (None, e) => s.push_str(&format!("planner n={}: {}\n", row.input.n, e.as_deref().unwrap_or("?"))),
        }
    }
    s.push_str("convergence:");
    for (n, e) in &d.convergence.errors {
        s.push_str(&format!(" N={n}: {e:.2e}"));
    }
    s.push_str(&format!("  slope {:.2}\n", d.convergence.slope));
    s.push_str(&format!(
        "ordered differences: {} trials, measure violations {:?}, contraction violations {:?}\n",
        d.lemma.trials, d.lemma.measure_violations, d.lemma.contraction_violations
    ));
    for c in &d.coverage {
        s.push_str(&format!(
            "finite-sample eta={}: rate (a) {:.3}  rate (b) {:.3}  allowed {:.3}  pass {}\n",
            c.eta,
            c.report.rate_a(),
            c.report.rate_b(),
            c.report.allowed_rate,
            c.pass
        ));
    }
    s
}
