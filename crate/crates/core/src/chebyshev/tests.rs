use alloc::vec::Vec;
use core::cell::Cell;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::{Error, Result};
use crate::math::ols_slope;
use crate::pricing::{analytic, OptionKind, OptionSpec, Pricer, PricerHandle, PricingMethod};
use crate::simulation::{simulate, Dynamics, MeasureKind, ModelSpec, TimeGrid};

const K: f64 = 3825.33;
const SIGMA: f64 = 0.1943;
const R: f64 = 0.011;

fn bsm_call(s: f64) -> f64 {
    analytic::call(s, K, 0.5, R, SIGMA)
}

fn call_domain() -> ChebDomain {
    ChebDomain::interval(2500.0, 5500.0).unwrap().with_split(K).unwrap()
}

fn fit_call(n: usize, domain: &ChebDomain) -> ChebyshevApproximant {
    fit_fixed(|z: &[f64]| Ok(bsm_call(z[0])), domain, [n, 0], "bsm-call").unwrap()
}

fn max_error<F: Fn(f64) -> f64>(approx: &ChebyshevApproximant, f: F, probes: usize, seed: u64) -> f64 {
    let (a, b) = approx.domain.price;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..probes)
        .map(|_| {
            let s = rng.random_range(a..=b);
            (approx.eval(&[s]).unwrap() - f(s)).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn linear_fit_is_exact() {
    let d = ChebDomain::interval(-1.0, 1.0).unwrap();
    let a = fit_fixed(|z: &[f64]| Ok(z[0]), &d, [1, 0], "id").unwrap();
    assert!((a.eval(&[0.3]).unwrap() - 0.3).abs() < 1e-15);
}

#[test]
fn interpolates_nodal_values() {
    let d = call_domain();
    let a = fit_call(8, &d);
    for piece in &a.pieces {
        for p in Piece::node_points(piece.lower, piece.upper, piece.degrees) {
            let v = bsm_call(p[0]);
            assert!((a.eval(&[p[0]]).unwrap() - v).abs() < 1e-13 * K);
        }
    }
}

#[test]
fn fitted_call_error_is_covered_by_estimate() {
    let d = call_domain();
    let low = fit_call(8, &d);
    let high = fit_call(16, &d);
    let estimate = cheb_error_estimate(&low, &high, 1000, 11).unwrap();
    let realized = max_error(&low, bsm_call, 10_000, 12);
    assert!(
        realized <= 1.05 * estimate,
        "realized {realized} vs estimate {estimate}"
    );
    assert!(realized > 0.5 * estimate);
}

#[test]
fn out_of_domain_is_an_error() {
    let a = fit_call(4, &call_domain());
    assert!(matches!(a.eval(&[2000.0]), Err(Error::OutOfDomain { dim: 0, .. })));
    assert!(a.eval(&[5500.0]).is_ok());
}

#[test]
fn tails_take_over_beyond_cut_points() {
    let left = Tail {
        cut: 2600.0,
        formula: Linear::ZERO,
    };
    let right = Tail {
        cut: 5400.0,
        formula: Linear {
            intercept: -1.0,
            slope: 2.0,
        },
    };
    let d = call_domain().with_tails(Some(left), Some(right)).unwrap();
    let a = fit_call(8, &d);
    assert_eq!(a.eval(&[100.0]).unwrap(), 0.0);
    assert_eq!(a.eval(&[1e5]).unwrap(), 2e5 - 1.0);
    assert_eq!(a.pieces[0].lower[0], 2600.0);
    let da = a.derivative();
    assert_eq!(da.eval(&[1e5]).unwrap(), 2.0);
    assert!(ChebDomain::interval(0.0, 1.0)
        .unwrap()
        .with_tails(
            Some(Tail {
                cut: 0.7,
                formula: Linear::ZERO
            }),
            Some(Tail {
                cut: 0.6,
                formula: Linear::ZERO
            })
        )
        .is_err());
    assert!(ChebDomain::interval(0.0, 1.0).unwrap().with_split(1.0).is_err());
}

#[test]
fn derivative_of_square() {
    let d = ChebDomain::interval(-1.0, 1.0).unwrap();
    let a = fit_fixed(|z: &[f64]| Ok(z[0] * z[0]), &d, [2, 0], "sq").unwrap();
    assert!((a.derivative().eval(&[0.5]).unwrap() - 1.0).abs() < 1e-13);
    let c = fit_fixed(|_: &[f64]| Ok(3.0), &d, [4, 0], "c").unwrap().derivative();
    for x in [-1.0, -0.2, 0.7] {
        assert!(c.eval(&[x]).unwrap().abs() < 1e-15);
    }
}

#[test]
fn derivative_of_call_fit_tracks_delta() {
    let d = call_domain();
    let da = fit_call(16, &d).derivative();
    let mut worst: f64 = 0.0;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 1..1000 {
        let s = 2500.0 + 3000.0 * i as f64 / 1000.0;
        let delta = analytic::call_delta(s, K, 0.5, R, SIGMA);
        lo = lo.min(delta);
        hi = hi.max(delta);
        worst = worst.max((da.eval(&[s]).unwrap() - delta).abs());
    }
    assert!(worst < 1e-3 * (hi - lo), "delta error {worst}");
}

#[test]
fn derivative_consistent_with_finite_differences() {
    let d = call_domain();
    let a = fit_call(16, &d);
    let da = a.derivative();
    for piece in &a.pieces {
        let (pa, pb) = (piece.lower[0], piece.upper[0]);
        let h = 1e-4 * (pb - pa);
        for i in 1..20 {
            let s = pa + (pb - pa) * i as f64 / 20.0;
            let fd = (a.eval(&[s + h]).unwrap() - a.eval(&[s - h]).unwrap()) / (2.0 * h);
            // h^2 |f'''| / 6 with |f'''| ~ gamma / s, plus roundoff K eps / h
            assert!((fd - da.eval(&[s]).unwrap()).abs() < 1e-7, "s={s}");
        }
    }
}

#[test]
fn error_estimate_examples() {
    let d = ChebDomain::interval(-1.0, 1.0).unwrap();
    let sq = |n| fit_fixed(|z: &[f64]| Ok(z[0] * z[0]), &d, [n, 0], "sq").unwrap();
    let one = sq(1);
    assert_eq!(cheb_error_estimate(&one, &one, 100, 1).unwrap(), 0.0);
    // the degree-1 interpolant of x^2 through +-1 is the constant 1, so the
    // estimate is max over probes of 1 - x^2
    let est = cheb_error_estimate(&one, &sq(2), 100, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    rng.set_stream(0);
    let oracle = (0..100)
        .map(|_| 1.0 - rng.random_range(-1.0..=1.0f64).powi(2))
        .fold(0.0, f64::max);
    assert!((est - oracle).abs() < 1e-15 && est > 0.9 && est <= 1.0);

    let e = |n| fit_fixed(|z: &[f64]| Ok((z[0]).exp() * (3.0 * z[0]).sin()), &d, [n, 0], "f").unwrap();
    let coarse = cheb_error_estimate(&e(4), &e(8), 100, 2).unwrap();
    let fine = cheb_error_estimate(&e(8), &e(16), 100, 2).unwrap();
    assert!(fine * 10.0 <= coarse, "{fine} vs {coarse}");
}

#[test]
fn spectral_convergence_with_split() {
    let d = call_domain();
    let degrees = [4usize, 8, 16, 32];
    let errs: Vec<f64> = degrees
        .iter()
        .map(|&n| max_error(&fit_call(n, &d), bsm_call, 2000, 5).max(1e-15).ln())
        .collect();
    let xs: Vec<f64> = (0..degrees.len()).map(|i| i as f64).collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    assert!(ols_slope(&xs, &errs) < -0.5);
}

#[test]
fn kink_converges_slowly_without_split() {
    let kink = |x: f64| x.max(0.0);
    let plain = ChebDomain::interval(-1.0, 1.0).unwrap();
    let split = plain.clone().with_split(0.0).unwrap();
    let err = |d: &ChebDomain, n| {
        let a = fit_fixed(|z: &[f64]| Ok(kink(z[0])), d, [n, 0], "kink").unwrap();
        max_error(&a, kink, 4000, 9)
    };
    let (e16, e64) = (err(&plain, 16), err(&plain, 64));
    // at most algebraic: quadrupling N gains far less than spectral decay would
    assert!(e64 > e16 / 20.0 && e64 > 1e-3, "{e16} {e64}");
    assert!(err(&split, 4) < 1e-14);
}

#[test]
fn adaptive_call_fit_meets_target() {
    let d = call_domain();
    let opts = AdaptiveOptions::new(1e-3, 7);
    let (a, report) = adaptive_fit(|z: &[f64]| Ok(bsm_call(z[0])), &d, &opts, "bsm-call").unwrap();
    assert!(a.max_degree()[0] <= 64);
    assert!(max_error(&a, bsm_call, 10_000, 8) < 1e-3);
    assert_eq!(report.history.len(), 2);
}

#[test]
fn adaptive_stops_on_exact_polynomial() {
    let d = ChebDomain::interval(-2.0, 3.0).unwrap();
    let calls = Cell::new(0usize);
    let cubic = |z: &[f64]| -> Result<f64> {
        calls.set(calls.get() + 1);
        let x = z[0];
        Ok(1.0 - x + 0.5 * x * x * x)
    };
    let (a, report) = adaptive_fit(cubic, &d, &AdaptiveOptions::new(1e-9, 3), "cubic").unwrap();
    assert_eq!(a.pieces[0].degrees[0], 4);
    let last = report.history[0].last().unwrap();
    assert_eq!(last.0, 4);
    assert!(last.1 < 1e-12);
    assert_eq!(calls.get(), report.pricer_calls);
    assert_eq!(report.pricer_calls, 2 * 4 + 1);
}

#[test]
fn adaptive_call_count_per_piece() {
    let d = call_domain();
    let calls = Cell::new(0usize);
    let f = |z: &[f64]| -> Result<f64> {
        calls.set(calls.get() + 1);
        Ok(bsm_call(z[0]))
    };
    let (a, report) = adaptive_fit(f, &d, &AdaptiveOptions::new(1e-6, 1), "c").unwrap();
    let expected: usize = a.pieces.iter().map(|p| 2 * p.degrees[0] + 1).sum();
    assert_eq!(calls.get(), expected);
    assert_eq!(report.pricer_calls, expected);
}

#[test]
fn adaptive_finer_flag_and_cap() {
    let d = call_domain();
    let mut opts = AdaptiveOptions::new(1e-4, 1);
    opts.return_finer = true;
    let (a, report) = adaptive_fit(|z: &[f64]| Ok(bsm_call(z[0])), &d, &opts, "c").unwrap();
    assert_eq!(a.pieces[0].degrees[0], 2 * report.history[0].last().unwrap().0);
    opts.cap = 4;
    opts.target = 1e-12;
    let err = adaptive_fit(|z: &[f64]| Ok(bsm_call(z[0])), &d, &opts, "c");
    assert!(matches!(err, Err(Error::DegreeCap { cap: 4, .. })));
    assert!(adaptive_fit(|z: &[f64]| Ok(z[0]), &d, &AdaptiveOptions::new(0.0, 1), "c").is_err());
}

#[test]
fn tensor_fit_reproduces_bilinear_plus() {
    let d = ChebDomain::rectangle((1.0, 3.0), (0.0, 0.5))
        .unwrap()
        .with_split(2.0)
        .unwrap();
    let f = |z: &[f64]| z[0] * z[0] * z[1] + 2.0 * z[1] * z[1] - z[0];
    let a = fit_fixed(|z: &[f64]| Ok(f(z)), &d, [3, 3], "poly2").unwrap();
    assert_eq!(a.pieces.len(), 2);
    assert_eq!(a.pieces[0].coeffs.len(), 16);
    for &(s, v) in &[(1.1, 0.3), (2.0, 0.0), (2.9, 0.5)] {
        assert!((a.eval(&[s, v]).unwrap() - f(&[s, v])).abs() < 1e-13);
    }
    let da = a.derivative();
    assert!((da.eval(&[1.5, 0.2]).unwrap() - (2.0 * 1.5 * 0.2 - 1.0)).abs() < 1e-12);
    assert!(matches!(a.eval(&[2.0, 0.6]), Err(Error::OutOfDomain { dim: 1, .. })));
}

#[test]
fn adaptive_doubles_both_dimensions() {
    let d = ChebDomain::rectangle((-1.0, 1.0), (-1.0, 1.0)).unwrap();
    let calls = Cell::new(0usize);
    let f = |z: &[f64]| -> Result<f64> {
        calls.set(calls.get() + 1);
        Ok(z[0] * z[0] * z[1] + z[1])
    };
    let (a, report) = adaptive_fit(f, &d, &AdaptiveOptions::new(1e-10, 5), "p").unwrap();
    assert_eq!(a.pieces[0].degrees, [2, 2]);
    assert_eq!(report.pricer_calls, 25);
    assert_eq!(calls.get(), 25);
}

#[test]
fn heston_value_in_two_dimensions() {
    let model = ModelSpec::reference_hsv();
    let opt = OptionSpec::reference(OptionKind::EuropeanCall);
    let h = PricerHandle::new(model, opt, PricingMethod::cos_default()).unwrap();
    let d = ChebDomain::rectangle((2800.0, 5000.0), (0.02, 0.2))
        .unwrap()
        .with_split(K)
        .unwrap();
    let a = fit_fixed(|z: &[f64]| h.value(0.5, z), &d, [16, 8], &h.id()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let z = [rng.random_range(2800.0..5000.0), rng.random_range(0.02..0.2)];
        let err = (a.eval(&z).unwrap() - h.value(0.5, &z).unwrap()).abs();
        assert!(err < 0.05, "{z:?}: {err}");
    }
    assert_eq!(a.provenance.pricer, "hsv-european-cos256x10");
}

#[test]
fn provenance_hash_tracks_node_values() {
    let d = call_domain();
    let a = fit_call(8, &d);
    let b = fit_call(8, &d);
    assert_eq!(a.provenance, b.provenance);
    let c = fit_fixed(|z: &[f64]| Ok(bsm_call(z[0]) + 1e-9), &d, [8, 0], "bsm-call").unwrap();
    assert_ne!(a.provenance.node_hash, c.provenance.node_hash);
}

fn reference_paths(model: &ModelSpec, sigma_zero: bool) -> crate::simulation::PathSet {
    let mut m = *model;
    if sigma_zero {
        m.dynamics = Dynamics::Bsm { sigma: 0.0 };
    }
    simulate(&m, TimeGrid::new(1.0, 52).unwrap(), 2000, MeasureKind::Physical, 17).unwrap()
}

#[test]
fn domain_covers_paths_and_splits_at_strike() {
    let model = ModelSpec::reference_bsm();
    let opt = OptionSpec::reference(OptionKind::EuropeanCall);
    let h = PricerHandle::new(model, opt, PricingMethod::AnalyticBsm).unwrap();
    let paths = reference_paths(&model, false);
    let d = build_domain(&paths, 26, &opt, &h, R, &DomainOptions::default()).unwrap();
    let (lo, hi) = paths.range(26, 0);
    assert!(d.price.0 <= lo && d.price.1 >= hi);
    assert_eq!(d.splits, [K]);
    // tails agree with the pricer at the cut points
    let t = paths.grid.time(26);
    let tol = 1e-8 * K;
    for tail in [d.left, d.right].into_iter().flatten() {
        let v = h.value(t, &[tail.cut]).unwrap();
        assert!((v - tail.formula.eval(tail.cut)).abs() < tol);
    }
    let a = fit_fixed(|z: &[f64]| h.value(t, z), &d, [8, 0], "c").unwrap();
    if let Some(tail) = d.left {
        assert!((a.eval(&[tail.cut]).unwrap() - tail.formula.eval(tail.cut)).abs() < tol);
    }
}

#[test]
fn degenerate_paths_widen_domain() {
    let model = ModelSpec::reference_bsm();
    let opt = OptionSpec::reference(OptionKind::EuropeanCall);
    let h = PricerHandle::new(model, opt, PricingMethod::AnalyticBsm).unwrap();
    let paths = reference_paths(&model, true);
    let opts = DomainOptions {
        tails: false,
        ..DomainOptions::default()
    };
    let d = build_domain(&paths, 10, &opt, &h, R, &opts).unwrap();
    let s = paths.price(0, 10);
    assert!((d.price.0 - (s - 0.01 * model.s0)).abs() < 1e-9);
    assert!((d.price.1 - (s + 0.01 * model.s0)).abs() < 1e-9);
}

#[test]
fn barrier_domain_is_clipped() {
    let model = ModelSpec::reference_bsm();
    let opt = OptionSpec::reference(OptionKind::UpAndOutCall { barrier: 4200.0 });
    let h = PricerHandle::new(model, opt, PricingMethod::AnalyticBsm).unwrap();
    let paths = reference_paths(&model, false);
    let d = build_domain(&paths, 40, &opt, &h, R, &DomainOptions::default()).unwrap();
    assert_eq!(d.price.1, 4200.0);
    let right = d.right.unwrap();
    assert_eq!((right.cut, right.formula), (4200.0, Linear::ZERO));
    let a = fit_fixed(|z: &[f64]| h.value(paths.grid.time(40), z), &d, [8, 0], "b").unwrap();
    assert_eq!(a.eval(&[5000.0]).unwrap(), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn batched_prices_match_pointwise(n in 1usize..24, mixed in any::<bool>(), tails in any::<bool>(), seed in 0u64..1000) {
        let mut d = call_domain();
        if tails {
            let right = Tail { cut: 5300.0, formula: Linear { intercept: -K, slope: 1.0 } };
            d = d.with_tails(Some(Tail { cut: 2700.0, formula: Linear::ZERO }), Some(right)).unwrap();
        }
        let mut a = fit_call(n, &d);
        if mixed {
            a.pieces[1] = fit_call(n + 3, &d).pieces[1].clone();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s: Vec<f64> = (0..37).map(|_| rng.random_range(2000.0..6000.0)).collect();
        let mut out = alloc::vec![0.0; s.len()];
        a.eval_prices(&s, &mut out).unwrap();
        for (x, v) in s.iter().zip(&out) {
            match a.eval(&[*x]) {
                Ok(w) => prop_assert_eq!(w.to_bits(), v.to_bits()),
                Err(_) => prop_assert!(v.is_nan()),
            }
        }
    }

    /// Chebyshev points have Lebesgue constant at most 2/pi ln(N + 1) + 1.
    #[test]
    fn perturbation_stability(n in 1usize..200, delta in 1e-8f64..1e-2, seed in 0u64..1000) {
        let d = ChebDomain::interval(0.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise: Vec<f64> = (0..=n).map(|_| rng.random_range(-delta..=delta)).collect();
        let idx = Cell::new(0usize);
        let base = fit_fixed(|z: &[f64]| Ok(z[0].sin()), &d, [n, 0], "f").unwrap();
        let noisy = fit_fixed(
            |z: &[f64]| {
                let i = idx.get();
                idx.set(i + 1);
                Ok(z[0].sin() + noise[i])
            },
            &d,
            [n, 0],
            "f",
        )
        .unwrap();
        let lebesgue = 2.0 / core::f64::consts::PI * ((n + 1) as f64).ln() + 1.0;
        let gap = cheb_error_estimate(&base, &noisy, 200, seed).unwrap();
        prop_assert!(gap <= lebesgue * delta * (1.0 + 1e-9) + 1e-14);
    }
}
