use alloc::vec;
use alloc::vec::Vec;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::chebyshev::{build_domain, fit_fixed, DomainOptions};
use crate::pricing::{OptionKind, PricerHandle, PricingMethod};
use crate::simulation::{simulate, Dynamics, MeasureKind, ModelSpec, TimeGrid};

fn grid() -> TimeGrid {
    TimeGrid::new(1.0, 52).unwrap()
}

fn bsm_setup(kind: OptionKind, n: usize) -> (PathSet, PricerHandle) {
    let model = ModelSpec::reference_bsm();
    let option = OptionSpec::reference(kind);
    let paths = simulate(&model, grid(), n, MeasureKind::Physical, 5).unwrap();
    (
        paths,
        PricerHandle::new(model, option, PricingMethod::AnalyticBsm).unwrap(),
    )
}

fn specs() -> Vec<MeasureSpec> {
    vec![
        MeasureSpec::Ee,
        MeasureSpec::Pfe { alpha: 0.95 },
        MeasureSpec::Ces { alpha: 0.95 },
    ]
}

#[test]
fn deep_itm_call_is_not_floored() {
    let model = ModelSpec::reference_bsm();
    let option = OptionSpec {
        kind: OptionKind::EuropeanCall,
        strike: 100.0,
        maturity: 1.0,
    };
    let h = PricerHandle::new(model, option, PricingMethod::AnalyticBsm).unwrap();
    let paths = simulate(&model, grid(), 50, MeasureKind::Physical, 1).unwrap();
    let cube = full_reeval(&paths, &h, &option).unwrap();
    for u in 1..52 {
        for i in 0..50 {
            let raw = h.value(paths.grid.time(u), paths.state(i, u)).unwrap();
            assert_eq!(cube.get(i, u), raw);
        }
    }
}

#[test]
fn terminal_profile_is_payoff_mean() {
    let (paths, h) = bsm_setup(OptionKind::EuropeanCall, 1000);
    let cube = full_reeval(&paths, &h, &h.option).unwrap();
    let payoff: f64 = (0..1000)
        .map(|i| (paths.price(i, 52) - h.option.strike).max(0.0))
        .sum::<f64>()
        / 1000.0;
    let ee = measure(cube.column(52), &MeasureSpec::Ee).unwrap();
    assert!((ee.estimate - payoff).abs() < 1e-9);
    assert!(ee.ci_halfwidth.unwrap() > 0.0);
}

#[test]
fn exact_approximant_reproduces_full_cube() {
    // polynomial value function inside the call's no-arbitrage range on the
    // simulated prices: the degree-2 interpolant is exact
    let model = ModelSpec::reference_bsm();
    let paths = simulate(&model, grid(), 200, MeasureKind::Physical, 3).unwrap();
    let option = OptionSpec::reference(OptionKind::EuropeanCall);
    struct Quadratic;
    impl Pricer for Quadratic {
        fn dim(&self) -> usize {
            1
        }
        fn value(&self, t: f64, z: &[f64]) -> Result<f64> {
            Ok(1e-4 * z[0] * z[0] * (1.0 + 0.1 * t))
        }
    }
    let full = full_reeval(&paths, &Quadratic, &option).unwrap();
    let approx: Vec<_> = (1..=52)
        .map(|u| {
            let t = paths.grid.time(u);
            let (a, b) = paths.range(u, 0);
            let d = crate::chebyshev::ChebDomain::interval(a - 1.0, b + 1.0).unwrap();
            fit_fixed(|z: &[f64]| Quadratic.value(t, z), &d, [2, 0], "q").unwrap()
        })
        .collect();
    let accel = accelerated_reeval(&paths, &approx, &option, model.r).unwrap();
    assert!(max_abs_difference(&full, &accel) < 1e-8);
    // the final date is the payoff whatever the approximant
    let accel_short = accelerated_reeval(&paths, &approx[..51], &option, model.r).unwrap();
    assert_eq!(accel_short.column(52), full.column(52));
}

#[test]
fn out_of_domain_states_are_listed() {
    let (paths, h) = bsm_setup(OptionKind::EuropeanCall, 100);
    let t = paths.grid.time(10);
    let (a, b) = paths.range(10, 0);
    let narrow = crate::chebyshev::ChebDomain::interval(a + 0.25 * (b - a), b).unwrap();
    let approx = fit_fixed(|z: &[f64]| h.value(t, z), &narrow, [4, 0], "c").unwrap();
    let err = approximant_column(&paths, 10, &h.option, h.model.r, Some(&approx)).unwrap_err();
    match err {
        Error::StatesOutOfDomain { step, states } => {
            assert_eq!(step, 10);
            assert!(!states.is_empty());
            assert!(states
                .iter()
                .all(|&(i, s)| s < a + 0.25 * (b - a) && paths.price(i, 10) == s));
        }
        e => panic!("unexpected {e:?}"),
    }
}

#[test]
fn pricing_errors_carry_coordinates() {
    struct Failing;
    impl Pricer for Failing {
        fn dim(&self) -> usize {
            1
        }
        fn value(&self, _: f64, z: &[f64]) -> Result<f64> {
            if z[0] > 4000.0 {
                Err(Error::invalid("boom"))
            } else {
                Ok(1.0)
            }
        }
    }
    let (paths, h) = bsm_setup(OptionKind::EuropeanCall, 100);
    match full_reeval(&paths, &Failing, &h.option) {
        Err(Error::Pricing { path, step, .. }) => assert!(paths.price(path, step) > 4000.0),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn split_fit_error_bounds_cube_difference() {
    let (paths, h) = bsm_setup(OptionKind::EuropeanCall, 1000);
    let full = full_reeval(&paths, &h, &h.option).unwrap();
    let mut approx = Vec::new();
    let mut bound: f64 = 0.0;
    for u in 1..52 {
        let t = paths.grid.time(u);
        let d = build_domain(&paths, u, &h.option, &h, h.model.r, &DomainOptions::default()).unwrap();
        let a = fit_fixed(|z: &[f64]| h.value(t, z), &d, [8, 0], "c").unwrap();
        // uniform gap on a dense grid over the domain
        let (lo, hi) = d.price;
        for k in 0..=20_000 {
            let s = (lo + (hi - lo) * k as f64 / 20_000.0).min(hi);
            bound = bound.max((a.eval(&[s]).unwrap() - h.value(t, &[s]).unwrap()).abs());
        }
        approx.push(a);
    }
    let accel = accelerated_reeval(&paths, &approx, &h.option, h.model.r).unwrap();
    let gap = max_abs_difference(&full, &accel);
    assert!(gap <= bound * (1.0 + 1e-9) + 1e-12, "{gap} vs {bound}");
    for r in profile_and_compare(&full, &accel, &specs()).unwrap() {
        assert!(r.pass, "{:?} eps {} mc {:?}", r.spec, r.eps, r.eps_mc);
    }
}

fn cube_from(columns: Vec<Vec<f64>>) -> ExposureCube {
    ExposureCube::from_columns(columns).unwrap()
}

#[test]
fn barrier_masking_is_inclusive() {
    let model = ModelSpec {
        dynamics: Dynamics::Bsm { sigma: 0.3 },
        ..ModelSpec::reference_bsm()
    };
    let paths = simulate(&model, TimeGrid::new(1.0, 12).unwrap(), 300, MeasureKind::Physical, 8).unwrap();
    let level = 4300.0;
    let mut cube = cube_from(vec![vec![1.0; 300]; 12]);
    let stops = apply_masking(&mut cube, &paths, &Masking::Barrier { level }).unwrap();
    assert!(stops.iter().any(Option::is_some));
    for (i, stop) in stops.iter().enumerate() {
        match stop {
            Some(u) => {
                assert!(paths.price(i, *u) >= level);
                assert_eq!(cube.get(i, *u), 0.0);
                if *u > 1 {
                    assert_eq!(cube.get(i, u - 1), 1.0);
                }
            }
            None => assert!((1..=12).all(|u| cube.get(i, u) == 1.0)),
        }
    }
    assert!(masking_holds(&cube, &stops));
    assert_eq!(cube.mask, MaskKind::Barrier);

    let mut untouched = cube_from(vec![vec![1.0; 300]; 12]);
    apply_masking(&mut untouched, &paths, &Masking::Barrier { level: 1e9 }).unwrap();
    assert!((1..=12).all(|u| untouched.column(u).iter().all(|&v| v == 1.0)));
}

#[test]
fn barrier_breached_at_first_date_zeroes_row() {
    let model = ModelSpec::reference_bsm();
    let paths = simulate(&model, TimeGrid::new(1.0, 6).unwrap(), 50, MeasureKind::Physical, 2).unwrap();
    let i = 7;
    let level = paths.price(i, 1);
    let mut cube = cube_from(vec![vec![2.0; 50]; 6]);
    let stops = apply_masking(&mut cube, &paths, &Masking::Barrier { level }).unwrap();
    assert_eq!(stops[i], Some(1));
    assert!((1..=6).all(|u| cube.get(i, u) == 0.0));
}

#[test]
fn exercise_masking_is_exclusive() {
    let model = ModelSpec::reference_bsm();
    let paths = simulate(&model, TimeGrid::new(1.0, 12).unwrap(), 300, MeasureKind::Physical, 4).unwrap();
    let boundaries = vec![Some(3700.0); 12];
    let mut cube = cube_from(vec![vec![1.0; 300]; 12]);
    let stops = apply_masking(&mut cube, &paths, &Masking::Exercise { boundaries }).unwrap();
    assert!(stops.iter().any(Option::is_some));
    for (i, stop) in stops.iter().enumerate() {
        if let Some(u) = stop {
            assert!(paths.price(i, *u) < 3700.0);
            assert_eq!(cube.get(i, *u), 1.0);
            assert!((u + 1..=12).all(|v| cube.get(i, v) == 0.0));
        }
    }
    assert!(masking_holds(&cube, &stops));
    // no boundary, no exercise
    let mut cube = cube_from(vec![vec![1.0; 300]; 12]);
    let stops = apply_masking(
        &mut cube,
        &paths,
        &Masking::Exercise {
            boundaries: vec![None; 12],
        },
    )
    .unwrap();
    assert!(stops.iter().all(Option::is_none));
}

#[test]
fn identical_and_shifted_cubes() {
    let (paths, h) = bsm_setup(OptionKind::EuropeanCall, 300);
    let x = full_reeval(&paths, &h, &h.option).unwrap();
    for r in profile_and_compare(&x, &x, &specs()).unwrap() {
        assert_eq!(r.eps, 0.0);
        assert!(r.pass);
    }
    let y = x.shifted(2.5).unwrap();
    for r in profile_and_compare(&x, &y, &specs()).unwrap() {
        for (f, a) in r.full.iter().zip(&r.accel) {
            assert!((a - f.estimate - 2.5).abs() < 1e-9);
        }
    }
}

#[test]
fn zero_profiles_are_excluded() {
    let x = cube_from(vec![vec![0.0; 10], (0..10).map(f64::from).collect()]);
    let y = cube_from(vec![vec![1.0; 10], (0..10).map(|v| f64::from(v) * 1.01).collect()]);
    let r = &profile_and_compare(&x, &y, &[MeasureSpec::Ee]).unwrap()[0];
    assert_eq!(r.excluded, [1]);
    assert_eq!(r.u_star, Some(2));
    assert!((r.eps - 0.01).abs() < 1e-12);
    let mc = r.eps_mc.unwrap();
    let want = 2.0 * r.full[1].ci_halfwidth.unwrap() / r.full[1].estimate;
    assert_eq!(mc, want);
}

#[test]
fn speedup_formulas() {
    assert_eq!(speedup(3.0, 3.0).unwrap(), 1.0);
    assert_eq!(speedup(100.0, 2.0).unwrap(), 50.0);
    assert_eq!(speedup_american(100.0, 2.0, 8.0).unwrap(), 10.8);
    assert!(speedup(0.0, 1.0).is_err());
}

fn ordered_contraction(a: &[f64], b: &[f64]) -> bool {
    let (sa, sb) = sorted_pair(a, b);
    [1.0, 2.0, f64::INFINITY]
        .iter()
        .all(|&p| lp_distance(&sa, &sb, p) <= lp_distance(a, b, p) * (1.0 + 1e-12) + 1e-12)
}

#[test]
fn ordered_differences_contract() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..10_000 {
        let len = rng.random_range(1..30);
        let a: Vec<f64> = (0..len).map(|_| rng.random_range(-10.0..10.0)).collect();
        let b: Vec<f64> = (0..len).map(|_| rng.random_range(-10.0..10.0)).collect();
        assert!(ordered_contraction(&a, &b));
    }
}

proptest! {
    #[test]
    fn measure_gap_chain(
        pairs in prop::collection::vec((0.0f64..50.0, -3.0f64..3.0), 20..300),
    ) {
        let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let y: Vec<f64> = pairs.iter().map(|p| (p.0 + p.1).max(0.0)).collect();
        let (sx, sy) = sorted_pair(&x, &y);
        let ordered = lp_distance(&sx, &sy, f64::INFINITY);
        let pathwise = lp_distance(&x, &y, f64::INFINITY);
        prop_assert!(ordered <= pathwise + 1e-12);
        for spec in specs() {
            let gap = (measure(&x, &spec).unwrap().estimate - measure(&y, &spec).unwrap().estimate).abs();
            prop_assert!(gap <= ordered + 1e-9);
        }
    }

    #[test]
    fn sorted_lp_contraction(
        a in prop::collection::vec(-100.0f64..100.0, 1..50),
        seed in 0u64..10_000,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b: Vec<f64> = a.iter().map(|_| rng.random_range(-100.0..100.0)).collect();
        prop_assert!(ordered_contraction(&a, &b));
    }
}

#[test]
fn projection_never_increases_the_error() {
    // a coarse digital interpolant without tails overshoots the discount factor
    let (paths, h) = bsm_setup(OptionKind::DigitalPut, 2000);
    let opts = DomainOptions {
        tails: false,
        ..DomainOptions::default()
    };
    let mut projected = 0;
    for u in [10, 40, 51] {
        let t = paths.grid.time(u);
        let d = build_domain(&paths, u, &h.option, &h, h.model.r, &opts).unwrap();
        let a = fit_fixed(|z: &[f64]| h.value(t, z), &d, [4, 0], "d").unwrap();
        let col = approximant_column(&paths, u, &h.option, h.model.r, Some(&a)).unwrap();
        for (i, &v) in col.iter().enumerate() {
            let z = paths.state(i, u);
            let exact = h.value(t, z).unwrap();
            let raw = a.eval(z).unwrap();
            assert!((v - exact).abs() <= (raw - exact).abs() + 1e-15, "u={u} path {i}");
            projected += usize::from(v != raw);
        }
    }
    assert!(projected > 0);
}
