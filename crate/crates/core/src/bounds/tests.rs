use alloc::vec;
use alloc::vec::Vec;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::chebyshev::{fit_fixed, ChebDomain};
use crate::math::ols_slope;
use crate::pricing::{OptionKind, OptionSpec, Pricer, PricerHandle, PricingMethod};
use crate::simulation::ModelSpec;

#[allow(clippy::too_many_arguments)]
fn input(
    n: f64,
    kappa: f64,
    sigma_rho: f64,
    alpha: f64,
    beta: f64,
    gamma: f64,
    a: f64,
    b: f64,
    theta: f64,
    stability: f64,
    dim: u32,
    sigma_bar: f64,
) -> PlannerInput {
    PlannerInput {
        n,
        kappa,
        sigma_rho,
        alpha,
        beta,
        gamma,
        a,
        b,
        theta,
        stability,
        dim,
        sigma_bar,
        xi: None,
    }
}

fn unit_case(dim: u32) -> PlannerInput {
    input(1e4, 3.0 * 2f64.sqrt(), 1.0, 1.0, 1.0, 2.0, 1.0, 1.0, 2.0, 1.0, dim, 1.0)
}

#[test]
fn planner_direct_substitution() {
    // kappa^2 / (18 sigma_rho^2) = 1, so L = sqrt(ln 1e4 + 1);
    // ln(kappa / (3 sqrt n)) = ln(sqrt 2 / 100) = -4.2586, ceil(10.2103 + 4.2586) = 15
    let plan = plan_parameters(&unit_case(1)).unwrap();
    assert!((plan.l - (1e4f64.ln() + 1.0).sqrt()).abs() < 1e-14);
    assert_eq!((plan.base, plan.nodes, plan.paths), (15, 15, 509_844));
    assert!(!plan.clamped);
    assert!(plan.side_condition(&unit_case(1)));
}

#[test]
fn planner_dimension_exponent() {
    let one = plan_parameters(&unit_case(1)).unwrap();
    let two = plan_parameters(&unit_case(2)).unwrap();
    assert_eq!(two.l, one.l);
    assert_eq!(two.nodes, one.nodes * one.nodes);
    assert_eq!(two.paths, 2_641_274);
}

#[test]
fn planner_more_cases() {
    let cases = [
        (
            input(2500.0, 1.5, 0.5, 2.0, 0.5, 1.0, 0.1, 2.0, 2.0, 0.5, 1, 0.2),
            327,
            57_998,
        ),
        (
            input(1e6, 2.0, 1.0, 1.0, 2.0, 2.0, 1.0, 0.5, 3.0, 1.0, 1, 0.1),
            34,
            3_456_034,
        ),
        (
            input(100.0, 1.0, 1.0, 0.5, 1.0, 2.0, 1e-3, 4.0, 2.0, 2.0, 1, 1.0),
            4,
            59_116,
        ),
    ];
    for (inp, nodes, paths) in cases {
        let plan = plan_parameters(&inp).unwrap();
        assert_eq!((plan.nodes, plan.paths), (nodes, paths), "{inp:?}");
        assert!(plan.side_condition(&inp));
    }
}

#[test]
fn planner_monotone_in_n() {
    let mut prev = plan_parameters(&input(100.0, 3.0, 1.0, 1.0, 1.0, 2.0, 1.0, 1.0, 2.0, 1.0, 1, 1.0)).unwrap();
    for k in 3..=8 {
        let n = 10f64.powi(k);
        let plan = plan_parameters(&input(n, 3.0, 1.0, 1.0, 1.0, 2.0, 1.0, 1.0, 2.0, 1.0, 1, 1.0)).unwrap();
        assert!(plan.l > prev.l && plan.nodes >= prev.nodes && plan.paths > prev.paths);
        prev = plan;
    }
}

#[test]
fn planner_infeasible_and_clamped() {
    // ln n + ln alpha + kappa^2 / 18 < 0
    let bad = input(10.0, 0.1, 1.0, 1e-3, 1.0, 2.0, 1.0, 1.0, 2.0, 1.0, 1, 1.0);
    assert!(matches!(plan_parameters(&bad), Err(Error::Infeasible(_))));
    let mut bad_theta = unit_case(1);
    bad_theta.theta = 1.5;
    assert!(matches!(plan_parameters(&bad_theta), Err(Error::InvalidInput(_))));
    // a tiny convergence constant makes the raw base negative
    let tiny = input(1e4, 3.0, 1.0, 1.0, 1.0, 2.0, 1e-9, 0.5, 2.0, 1.0, 1, 1.0);
    let plan = plan_parameters(&tiny).unwrap();
    assert!(plan.clamped);
    assert_eq!((plan.base, plan.nodes), (1, 1));
    assert!(plan.side_condition(&tiny));
}

#[test]
fn planner_side_condition_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..100 {
        let inp = input(
            10f64.powf(rng.random_range(2.0..7.0)),
            rng.random_range(0.5..6.0),
            rng.random_range(0.2..3.0),
            rng.random_range(0.5..4.0),
            rng.random_range(0.2..3.0),
            rng.random_range(1.0..3.0),
            rng.random_range(0.01..5.0),
            rng.random_range(0.2..4.0),
            rng.random_range(2.0..3.0),
            rng.random_range(0.1..3.0),
            rng.random_range(1..=3),
            rng.random_range(0.01..1.0),
        );
        let plan = plan_parameters(&inp).unwrap();
        assert!(plan.side_condition(&inp), "{inp:?} -> {plan:?}");
    }
}

#[test]
fn digital_example_values() {
    let r = digital_example().unwrap();
    for (got, want) in [
        (r.pfe_x, 0.2666),
        (r.ces_x, 0.3904),
        (r.pfe_y, 0.0545),
        (r.ces_y, 0.1139),
        (r.l2_gap, 0.0516),
    ] {
        assert!((got - want).abs() < 5e-5, "{got} vs {want}");
    }
    assert!(r.pfe_exceeds_4x && r.ces_exceeds_5x);
}

#[test]
fn digital_example_against_sampling() {
    let ex = DigitalExample::default();
    let dist = ex.risk_factor();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x: Vec<f64> = (0..200_000).map(|_| ex.v(dist.sample(&mut rng))).collect();
    let ces = measure(&x, &MeasureSpec::Ces { alpha: 0.99 }).unwrap();
    let pop = population_measure(
        &|z| ex.v(z),
        Monotone::Increasing,
        &dist,
        &MeasureSpec::Ces { alpha: 0.99 },
    )
    .unwrap();
    assert!((ces.estimate - pop).abs() < 4.0 * ces.ci_halfwidth.unwrap());
}

#[test]
fn uniform_gap_trivial() {
    let v = |z: f64| z.sin();
    assert_eq!(uniform_gap(v, v, (0.0, 3.0), 1000).unwrap().gap, 0.0);
    let g = uniform_gap(v, |z: f64| z.sin() + 0.25, (0.0, 3.0), 1000).unwrap();
    assert!((g.gap - 0.25).abs() < 1e-15);
    assert!(uniform_gap(v, v, (1.0, 1.0), 10).is_err());
}

#[test]
fn norms_against_closed_forms() {
    // ||N(0, s^2) density||_{L^q} = (2 pi s^2)^{(1-q)/(2q)} q^{-1/(2q)}
    let s = 0.3;
    let dist = RiskFactorDist::Normal { mean: 0.1, sd: s };
    for q in [1.0, 1.5, 2.0, 4.0] {
        let want = (2.0 * core::f64::consts::PI * s * s).powf((1.0 - q) / (2.0 * q)) * q.powf(-0.5 / q);
        assert!(
            (dist.density_norm(q).unwrap() - want).abs() < 1e-8 * want.max(1.0),
            "q={q}"
        );
    }
    assert!(
        (dist.density_norm(f64::INFINITY).unwrap() - 1.0 / (s * (2.0 * core::f64::consts::PI).sqrt())).abs() < 1e-14
    );
    let ln = RiskFactorDist::LogNormal { mu: 0.0, sigma: 0.4 };
    assert!((ln.density_norm(1.0).unwrap() - 1.0).abs() < 1e-8);
    // sup of the lognormal density is at the mode and dominates a grid
    let grid_max = (1..20_000).map(|k| ln.pdf(k as f64 * 2e-4)).fold(0.0, f64::max);
    assert!(ln.sup_density() >= grid_max && ln.sup_density() - grid_max < 1e-6);

    let ces = MeasureSpec::Ces { alpha: 0.9 };
    assert!((measure_density_norm(&ces, f64::INFINITY).unwrap() - 10.0).abs() < 1e-12);
    assert!((measure_density_norm(&ces, 2.0).unwrap() - 10f64.sqrt()).abs() < 1e-12);
    assert_eq!(measure_density_norm(&MeasureSpec::Ee, 3.0).unwrap(), 1.0);
    assert!(measure_density_norm(&MeasureSpec::Pfe { alpha: 0.9 }, 2.0).is_err());

    // L^2 gap of two shifted unit-slope ramps clipped to [0, 1]: shift c gives sqrt(c^2 (1 - c) + c^3 / 3 * 2)
    let c: f64 = 0.2;
    let ramp = |z: f64| z.clamp(0.0, 1.0);
    let got = lp_gap(ramp, |z: f64| (z - c).clamp(0.0, 1.0), (-1.0, 2.0), 2.0).unwrap();
    let want = (c * c * (1.0 - c) + 2.0 * c * c * c / 3.0).sqrt();
    assert!((got - want).abs() < 1e-8);
}

#[test]
fn lp_bound_on_digital_pair() {
    let ex = DigitalExample::default();
    let dist = ex.risk_factor();
    let b = lp_bound_eval(
        |z| ex.v(z),
        |z| ex.u(z),
        Monotone::Increasing,
        &dist,
        &MeasureSpec::Ces { alpha: 0.99 },
        ex.gap_range(),
        1.0,
        2.0,
    )
    .unwrap();
    assert_eq!(b.p, 2.0);
    assert!((b.measure_norm - 100.0).abs() < 1e-9);
    assert!((b.measured - (0.390_351_873 - 0.113_880_312)).abs() < 1e-6);
    assert!(b.holds() && !b.vacuous);
    let same = lp_bound_eval(
        |z| ex.v(z),
        |z| ex.v(z),
        Monotone::Increasing,
        &dist,
        &MeasureSpec::Ces { alpha: 0.99 },
        ex.gap_range(),
        2.0,
        1.0,
    )
    .unwrap();
    assert_eq!(same.bound, 0.0);
    assert!(same.measured.abs() < 1e-12);
}

#[test]
fn lp_bound_shrinks_with_degree() {
    let ex = DigitalExample::default();
    let dist = ex.risk_factor();
    let (a, b) = dist.effective_support();
    let d = ChebDomain::interval(a, b).unwrap();
    let mut prev = f64::INFINITY;
    for n in [4, 8, 16, 32] {
        let approx = fit_fixed(|z: &[f64]| Ok(ex.v(z[0])), &d, [n, 0], "digital").unwrap();
        let u = |z: f64| approx.eval(&[z.clamp(a, b)]).unwrap();
        let bound = lp_bound_eval(
            |z| ex.v(z),
            u,
            Monotone::Increasing,
            &dist,
            &MeasureSpec::Ee,
            (a, b),
            1.0,
            2.0,
        )
        .unwrap();
        assert!(bound.holds());
        assert!(bound.bound <= prev, "N={n}: {} > {prev}", bound.bound);
        prev = bound.bound;
    }
}

#[test]
fn split_bound_with_population_measures() {
    // |rho(X) - rho_hat(y)| <= ||V - U||_inf + |rho(Y) - rho_hat(y)|
    let ex = DigitalExample::default();
    let dist = ex.risk_factor();
    let sup = uniform_gap(|z| ex.v(z), |z| ex.u(z), ex.gap_range(), 20_000)
        .unwrap()
        .gap;
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let y: Vec<f64> = (0..5000).map(|_| ex.u(dist.sample(&mut rng))).collect();
    for spec in [
        MeasureSpec::Ee,
        MeasureSpec::Pfe { alpha: 0.9 },
        MeasureSpec::Ces { alpha: 0.9 },
    ] {
        let rx = population_measure(&|z| ex.v(z), Monotone::Increasing, &dist, &spec).unwrap();
        let ry = population_measure(&|z| ex.u(z), Monotone::Increasing, &dist, &spec).unwrap();
        let hat = measure(&y, &spec).unwrap().estimate;
        assert!((rx - hat).abs() <= sup + (ry - hat).abs() + 1e-12);
    }
}

#[test]
fn decreasing_value_functions() {
    let dist = RiskFactorDist::Normal { mean: 0.0, sd: 1.0 };
    // V(z) = -z: Q_X(u) = max(z_u, 0) mirrored, EE = E[max(-Z, 0)] = 1/sqrt(2 pi)
    let ee = population_measure(&|z: f64| -z, Monotone::Decreasing, &dist, &MeasureSpec::Ee).unwrap();
    assert!((ee - crate::math::INV_SQRT_2PI).abs() < 1e-8);
}

fn lognormal_setup(eta: f64, trials: usize) -> (FiniteSampleSetup, impl Fn(f64) -> f64, impl Fn(f64) -> f64) {
    let ex = DigitalExample::default();
    let s = ex.sigma * ex.t.sqrt();
    let dist = RiskFactorDist::LogNormal {
        mu: -0.5 * s * s,
        sigma: s,
    };
    let setup = FiniteSampleSetup {
        dist,
        n: 1000,
        p: 2.0,
        eta,
        trials,
        seed: 21,
        range: dist.effective_support(),
        grid_points: 20_000,
        measures: vec![
            MeasureSpec::Ee,
            MeasureSpec::Pfe { alpha: 0.95 },
            MeasureSpec::Ces { alpha: 0.95 },
        ],
    };
    let v = move |z: f64| ex.v(z.ln());
    let u = move |z: f64| ex.u(z.ln());
    (setup, v, u)
}

#[test]
fn finite_sample_identical_functions() {
    let (setup, v, _) = lognormal_setup(0.05, 100);
    let r = finite_sample_bound_check(&setup, &v, &v).unwrap();
    assert_eq!((r.violations_a, r.violations_b), (0, 0));
    assert_eq!(r.bounds.bound_a, 0.0);
}

#[test]
fn finite_sample_lognormal_coverage() {
    let (setup, v, u) = lognormal_setup(0.05, 500);
    let r = finite_sample_bound_check(&setup, v, u).unwrap();
    assert!(r.pass(), "{r:?}");
    assert!((r.allowed_rate - (0.05 + 2.0 * (0.05f64 * 0.95 / 500.0).sqrt())).abs() < 1e-15);
    assert!(r.bounds.bound_b[1].is_none() && r.bounds.bound_b[2].is_some());
}

#[test]
fn bound_a_grows_like_n_to_one_over_p() {
    let (mut setup, v, u) = lognormal_setup(0.05, 1);
    let a1 = finite_sample_bounds(&setup, &v, &u).unwrap().bound_a;
    setup.n *= 16;
    let a16 = finite_sample_bounds(&setup, &v, &u).unwrap().bound_a;
    assert!((a16 / a1 - 4.0).abs() < 1e-12);
}

#[test]
fn bsm_call_gap_decays_geometrically() {
    let model = ModelSpec::reference_bsm();
    let option = OptionSpec::reference(OptionKind::EuropeanCall);
    let h = PricerHandle::new(model, option, PricingMethod::AnalyticBsm).unwrap();
    let t = 0.5;
    let d = ChebDomain::interval(2500.0, 5500.0)
        .unwrap()
        .with_split(option.strike)
        .unwrap();
    let v = |s: f64| h.value(t, &[s]).unwrap();
    let mut logs = Vec::new();
    let degrees = [4.0, 8.0, 16.0, 32.0];
    for n in degrees {
        let a = fit_fixed(|z: &[f64]| h.value(t, z), &d, [n as usize, 0], "c").unwrap();
        let g = uniform_gap(v, |s| a.eval(&[s]).unwrap(), (2500.0, 5500.0), 10_000).unwrap();
        logs.push(g.gap.max(1e-300).ln());
    }
    let xs: Vec<f64> = degrees.iter().map(|d: &f64| d.log2()).collect();
    assert!(ols_slope(&xs, &logs) < -0.5, "{logs:?}");
    assert!(logs.windows(2).all(|w| w[1] < w[0]));
}

proptest! {
    #[test]
    fn bounded_shift_is_lipschitz(
        x in prop::collection::vec(0.0f64..10.0, 10..200),
        eps in 0.0f64..1.0,
        seed in 0u64..1000,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<f64> = x.iter().map(|v| v + eps * rng.random_range(-1.0..=1.0)).collect();
        for spec in [MeasureSpec::Ee, MeasureSpec::Pfe { alpha: 0.9 }, MeasureSpec::Ces { alpha: 0.9 }] {
            let d = (measure(&x, &spec).unwrap().estimate - measure(&y, &spec).unwrap().estimate).abs();
            prop_assert!(d <= eps + 1e-12);
        }
    }
}
