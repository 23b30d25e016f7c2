//! Empirical quantile-based exposure measures `sum_i w_{n,i} x^{(i)}` and
//! their CLT confidence intervals.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by the inherent methods whenever std is linked
use num_traits::Float;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{norm_pdf, two_sided_quantile};

/// Significance of the reported confidence intervals (95%).
pub const CI_SIGNIFICANCE: f64 = 0.05;

/// Mixing measure `m` on `(0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "measure", rename_all = "lowercase")]
pub enum MeasureSpec {
    /// Expected exposure (uniform `m`).
    Ee,
    /// Potential future exposure (Dirac mass at `alpha`).
    Pfe { alpha: f64 },
    /// Credit expected shortfall (uniform on `(alpha, 1)`).
    Ces { alpha: f64 },
    /// Spectral measure with a step density taking `density[k]` on the k-th
    /// of `density.len()` equal bins.
    Sem { density: Vec<f64> },
}

impl MeasureSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            MeasureSpec::Ee => Ok(()),
            MeasureSpec::Pfe { alpha } | MeasureSpec::Ces { alpha } => {
                if *alpha > 0.0 && *alpha < 1.0 {
                    Ok(())
                } else {
                    Err(Error::invalid("alpha must lie in (0, 1)"))
                }
            }
            MeasureSpec::Sem { density } => {
                if density.is_empty() || density.iter().any(|d| !(*d >= 0.0) || !d.is_finite()) {
                    return Err(Error::invalid("spectral density must be nonnegative"));
                }
                if density.windows(2).any(|w| w[1] < w[0]) {
                    return Err(Error::invalid("spectral density must be nondecreasing"));
                }
                let mass = density.iter().sum::<f64>() / density.len() as f64;
                if (mass - 1.0).abs() > 1e-10 {
                    return Err(Error::invalid("spectral density must integrate to one"));
                }
                Ok(())
            }
        }
    }

    pub fn label(&self) -> alloc::string::String {
        match self {
            MeasureSpec::Ee => "EE".into(),
            MeasureSpec::Pfe { alpha } => alloc::format!("PFE{alpha}"),
            MeasureSpec::Ces { alpha } => alloc::format!("CES{alpha}"),
            MeasureSpec::Sem { .. } => "SEM".into(),
        }
    }

    /// `m([0, u))`.
    fn cdf(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match self {
            MeasureSpec::Ee => u,
            MeasureSpec::Pfe { alpha } => f64::from(u8::from(u > *alpha)),
            MeasureSpec::Ces { alpha } => ((u - alpha) / (1.0 - alpha)).max(0.0),
            MeasureSpec::Sem { density } => {
                let bins = density.len() as f64;
                let pos = u * bins;
                let full = (pos.floor() as usize).min(density.len());
                let mut acc: f64 = density[..full].iter().sum();
                if full < density.len() {
                    acc += density[full] * (pos - full as f64);
                }
                acc / bins
            }
        }
    }

    /// Order-statistic weights `w_i = m([(i-1)/n, i/n))`, i.e. the weights of
    /// `int Q_x(u) m(du)` with `Q_x(u) = x^{(floor(nu) + 1)}`.
    pub fn weights(&self, n: usize) -> Result<Vec<f64>> {
        self.validate()?;
        if n == 0 {
            return Err(Error::invalid("empty sample"));
        }
        if let MeasureSpec::Pfe { alpha } = self {
            let mut w = vec![0.0; n];
            w[quantile_index(n, *alpha)?] = 1.0;
            return Ok(w);
        }
        let nf = n as f64;
        let mut w: Vec<f64> = (1..=n)
            .map(|i| self.cdf(i as f64 / nf) - self.cdf((i - 1) as f64 / nf))
            .collect();
        // the last cell is [(n-1)/n, 1]
        w[n - 1] = 1.0 - self.cdf((n - 1) as f64 / nf);
        Ok(w)
    }
}

/// `n alpha`, snapped to the nearest integer when within rounding of it
/// (so that e.g. `100 * 0.95` counts as 95).
pub(crate) fn scaled(n: usize, alpha: f64) -> f64 {
    let na = n as f64 * alpha;
    let r = na.round();
    if (na - r).abs() <= 1e-9 * na.max(1.0) {
        r
    } else {
        na
    }
}

/// Zero-based index of `x^{(floor(n alpha) + 1)}`.
pub fn quantile_index(n: usize, alpha: f64) -> Result<usize> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid("alpha must lie in (0, 1)"));
    }
    let idx = scaled(n, alpha).floor() as usize;
    if idx >= n {
        return Err(Error::invalid("floor(n alpha) + 1 exceeds the sample size"));
    }
    Ok(idx)
}

fn sorted(sample: &[f64]) -> Result<Vec<f64>> {
    if sample.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("exposure sample".into()));
    }
    let mut s = sample.to_vec();
    s.sort_unstable_by(f64::total_cmp);
    Ok(s)
}

/// `sum_i w_i x^{(i)}` for weights summing to one.
pub fn measure_generic(sample: &[f64], weights: &[f64]) -> Result<f64> {
    if sample.len() != weights.len() || sample.is_empty() {
        return Err(Error::invalid("sample and weights must have the same positive length"));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::invalid("weights must be nonnegative"));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::invalid("weights must sum to one"));
    }
    Ok(sorted(sample)?.iter().zip(weights).map(|(x, w)| x * w).sum())
}

/// How the standard deviation of the estimator was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum VarianceDetail {
    /// `Var[X]`.
    Sample { variance: f64 },
    /// `alpha (1 - alpha) / f(q)^2` with a Gaussian kernel density estimate.
    Density { density: f64, bandwidth: f64 },
    /// `Var[(X - q) 1{X > q}] / (1 - alpha)^2` with the empirical quantile.
    Tail { variance: f64, quantile: f64 },
    /// Variance of the empirical influence function of the L-statistic.
    Influence { variance: f64 },
    /// The CLT variance could not be estimated (e.g. zero density).
    Unavailable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureResult {
    pub estimate: f64,
    /// Asymptotic standard deviation `sigma` (CI half-width is `q sigma / sqrt n`).
    pub sigma: Option<f64>,
    /// Half-width of the 95% confidence interval.
    pub ci_halfwidth: Option<f64>,
    pub detail: VarianceDetail,
}

fn sample_variance(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
}

/// Silverman's rule `0.9 min(sd, IQR / 1.34) n^{-1/5}` on a sorted sample.
pub fn silverman_bandwidth(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    let sd = sample_variance(sorted).sqrt();
    let q = |p: f64| sorted[((p * n as f64).floor() as usize).min(n - 1)];
    let iqr = q(0.75) - q(0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * (n as f64).powf(-0.2)
}

/// Gaussian kernel density estimate at `x`.
pub fn kernel_density(sample: &[f64], bandwidth: f64, x: f64) -> f64 {
    let sum: f64 = sample.iter().map(|v| norm_pdf((x - v) / bandwidth)).sum();
    sum / (sample.len() as f64 * bandwidth)
}

/// Estimate and 95% CI of the measure on one exposure sample.
pub fn measure(sample: &[f64], spec: &MeasureSpec) -> Result<MeasureResult> {
    measure_sorted(&sorted(sample)?, spec)
}

/// [`measure`] on a sample already sorted ascending, so that several
/// measures can share one sort.
pub fn measure_sorted(x: &[f64], spec: &MeasureSpec) -> Result<MeasureResult> {
    spec.validate()?;
    let n = x.len();
    if n < 2 {
        return Err(Error::invalid("measures need at least two observations"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("exposure sample".into()));
    }
    if x.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::invalid("sample must be sorted ascending"));
    }
    let nf = n as f64;
    let (estimate, detail, sigma) = match spec {
        MeasureSpec::Ee => {
            let var = sample_variance(x);
            (
                x.iter().sum::<f64>() / nf,
                VarianceDetail::Sample { variance: var },
                Some(var.sqrt()),
            )
        }
        MeasureSpec::Pfe { alpha } => {
            let q = x[quantile_index(n, *alpha)?];
            let h = silverman_bandwidth(x);
            let f = if h > 0.0 { kernel_density(x, h, q) } else { 0.0 };
            if f > 0.0 && f.is_finite() {
                let sigma = (alpha * (1.0 - alpha)).sqrt() / f;
                (
                    q,
                    VarianceDetail::Density {
                        density: f,
                        bandwidth: h,
                    },
                    Some(sigma),
                )
            } else {
                (q, VarianceDetail::Unavailable, None)
            }
        }
        MeasureSpec::Ces { alpha } => {
            let k = quantile_index(n, *alpha)?;
            let na = scaled(n, *alpha);
            let tail: f64 = x[k + 1..].iter().sum();
            let est = (x[k] * (k as f64 + 1.0 - na) + tail) / (nf * (1.0 - alpha));
            let q = x[k];
            let excess: Vec<f64> = x.iter().map(|v| (v - q).max(0.0)).collect();
            let var = sample_variance(&excess) / ((1.0 - alpha) * (1.0 - alpha));
            (
                est,
                VarianceDetail::Tail {
                    variance: var,
                    quantile: q,
                },
                Some(var.sqrt()),
            )
        }
        MeasureSpec::Sem { density } => {
            let w = spec.weights(n)?;
            let est = x.iter().zip(&w).map(|(a, b)| a * b).sum();
            let var = influence_variance(x, density);
            (est, VarianceDetail::Influence { variance: var }, Some(var.sqrt()))
        }
    };
    let q = two_sided_quantile(CI_SIGNIFICANCE);
    let ci_halfwidth = sigma.map(|s| q * s / nf.sqrt());
    Ok(MeasureResult {
        estimate,
        sigma,
        ci_halfwidth,
        detail,
    })
}

/// Variance of the empirical influence function
/// `IF(x) = -int (1{x <= y} - F_n(y)) J(F_n(y)) dy` of an L-statistic with
/// score `J` = step density; O(n) via suffix sums over the order statistics.
fn influence_variance(x: &[f64], density: &[f64]) -> f64 {
    let n = x.len();
    let bins = density.len() as f64;
    let j_at = |u: f64| density[((u * bins).floor() as usize).min(density.len() - 1)];
    // gap j (1-based) between x_(j) and x_(j+1), where F_n = j / n
    let gaps: Vec<f64> = (1..n).map(|j| j_at(j as f64 / n as f64) * (x[j] - x[j - 1])).collect();
    let a: f64 = gaps
        .iter()
        .enumerate()
        .map(|(j, g)| (j + 1) as f64 / n as f64 * g)
        .sum();
    let mut suffix = 0.0;
    let mut infl = vec![0.0; n];
    for k in (0..n).rev() {
        // gaps with index j >= k + 1 (1-based) lie above x_(k+1)
        if k < n - 1 {
            suffix += gaps[k];
        }
        infl[k] = a - suffix;
    }
    sample_variance(&infl)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{norm_cdf, norm_inv};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;

    fn ramp() -> Vec<f64> {
        (1..=100).map(f64::from).collect()
    }

    #[test]
    fn small_examples() {
        assert_eq!(measure(&[1.0, 2.0, 3.0], &MeasureSpec::Ee).unwrap().estimate, 2.0);
        assert_eq!(
            measure(&ramp(), &MeasureSpec::Pfe { alpha: 0.95 }).unwrap().estimate,
            96.0
        );
        let ces = measure(&ramp(), &MeasureSpec::Ces { alpha: 0.95 }).unwrap().estimate;
        assert!((ces - 98.0).abs() < 1e-12);
    }

    #[test]
    fn weights_reproduce_closed_forms() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let x: Vec<f64> = (0..1000).map(|_| rng.random::<f64>() * 5.0).collect();
        let n = x.len();
        let ee = measure_generic(&x, &MeasureSpec::Ee.weights(n).unwrap()).unwrap();
        assert!((ee - measure(&x, &MeasureSpec::Ee).unwrap().estimate).abs() < 1e-12);
        for alpha in [0.9, 0.95, 0.975, 0.99, 0.3337] {
            let pfe = measure_generic(&x, &MeasureSpec::Pfe { alpha }.weights(n).unwrap()).unwrap();
            assert_eq!(pfe, measure(&x, &MeasureSpec::Pfe { alpha }).unwrap().estimate);
            let spec = MeasureSpec::Ces { alpha };
            let ces = measure_generic(&x, &spec.weights(n).unwrap()).unwrap();
            // direct substitution into the tail-average formula
            let mut s = x.clone();
            s.sort_by(f64::total_cmp);
            let na = n as f64 * alpha;
            let k = na.floor() as usize;
            let brute = (s[k] * (k as f64 + 1.0 - na) + s[k + 1..].iter().sum::<f64>()) / (n as f64 * (1.0 - alpha));
            assert!((ces - brute).abs() < 1e-9, "alpha {alpha}: {ces} vs {brute}");
            assert!((measure(&x, &spec).unwrap().estimate - brute).abs() < 1e-9);
        }
    }

    #[test]
    fn step_density_with_tail_bin_is_ces() {
        let mut density = vec![0.0; 20];
        density[19] = 20.0;
        let sem = MeasureSpec::Sem { density };
        let x: Vec<f64> = (0..4000).map(|i| ((i * 37) % 4000) as f64).collect();
        let a = measure(&x, &sem).unwrap();
        let b = measure(&x, &MeasureSpec::Ces { alpha: 0.95 }).unwrap();
        assert!((a.estimate - b.estimate).abs() < 1e-9);
        let rel = (a.sigma.unwrap() - b.sigma.unwrap()).abs() / b.sigma.unwrap();
        assert!(rel < 0.05, "{a:?} vs {b:?}");
    }

    #[test]
    fn influence_variance_of_uniform_density_is_sample_variance() {
        let x: Vec<f64> = (0..300).map(|i| ((i * 7919) % 300) as f64 / 17.0).collect();
        let a = measure(&x, &MeasureSpec::Sem { density: vec![1.0; 4] }).unwrap();
        let b = measure(&x, &MeasureSpec::Ee).unwrap();
        assert!((a.estimate - b.estimate).abs() < 1e-10);
        assert!((a.sigma.unwrap() - b.sigma.unwrap()).abs() < 1e-9 * b.sigma.unwrap());
    }

    #[test]
    fn invalid_specs_and_weights() {
        assert!(measure(&ramp(), &MeasureSpec::Pfe { alpha: 1.0 }).is_err());
        assert!(measure(&[1.0, 2.0], &MeasureSpec::Pfe { alpha: 0.99 }).is_ok());
        assert!(MeasureSpec::Sem {
            density: vec![2.0, 0.0]
        }
        .validate()
        .is_err());
        assert!(MeasureSpec::Sem {
            density: vec![0.5, 1.0]
        }
        .validate()
        .is_err());
        assert!(measure_generic(&[1.0, 2.0], &[0.5, 0.5 + 1e-9]).is_err());
        assert!(measure_generic(&[1.0, 2.0], &[0.5, 0.5 + 1e-12]).is_ok());
    }

    #[test]
    fn constant_sample_has_no_quantile_ci() {
        let r = measure(&[2.0; 50], &MeasureSpec::Pfe { alpha: 0.9 }).unwrap();
        assert_eq!(r.estimate, 2.0);
        assert_eq!(r.ci_halfwidth, None);
        assert_eq!(r.detail, VarianceDetail::Unavailable);
    }

    /// Coverage of the CLT intervals on lognormal samples with known
    /// quantile and tail mean.
    #[test]
    fn lognormal_coverage() {
        let alpha = 0.95;
        let (mu, s) = (0.0, 0.5);
        let za = norm_inv(alpha);
        let pfe_true = (mu + s * za).exp();
        let ces_true = (mu + 0.5 * s * s).exp() * norm_cdf(s - za) / (1.0 - alpha);
        let reps = 200;
        let n = 4000;
        let (mut hit_pfe, mut hit_ces) = (0, 0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..reps {
            let x: Vec<f64> = (0..n)
                .map(|_| (mu + s * rng.sample::<f64, _>(StandardNormal)).exp())
                .collect();
            let p = measure(&x, &MeasureSpec::Pfe { alpha }).unwrap();
            let c = measure(&x, &MeasureSpec::Ces { alpha }).unwrap();
            hit_pfe += usize::from((p.estimate - pfe_true).abs() <= p.ci_halfwidth.unwrap());
            hit_ces += usize::from((c.estimate - ces_true).abs() <= c.ci_halfwidth.unwrap());
        }
        // binomial(200, 0.95): 4 standard deviations ~ 0.062
        let (cp, cc) = (hit_pfe as f64 / reps as f64, hit_ces as f64 / reps as f64);
        assert!((cp - 0.95).abs() < 0.062, "PFE coverage {cp}");
        assert!((cc - 0.95).abs() < 0.062, "CES coverage {cc}");
    }

    #[test]
    fn estimator_error_shrinks_like_root_n() {
        let alpha = 0.95;
        let pfe_true = (0.5 * norm_inv(alpha)).exp();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        let mut rmse = Vec::new();
        for &n in &[500usize, 2000, 8000] {
            let mut sq = 0.0;
            for _ in 0..100 {
                let x: Vec<f64> = (0..n)
                    .map(|_| (0.5 * rng.sample::<f64, _>(StandardNormal)).exp())
                    .collect();
                let e = measure(&x, &MeasureSpec::Pfe { alpha }).unwrap().estimate - pfe_true;
                sq += e * e;
            }
            rmse.push((sq / 100.0).sqrt());
        }
        let xs = [500f64.ln(), 2000f64.ln(), 8000f64.ln()];
        let ys: Vec<f64> = rmse.iter().map(|v| v.ln()).collect();
        let slope = crate::math::ols_slope(&xs, &ys);
        assert!((slope + 0.5).abs() < 0.15, "slope {slope}");
    }

    fn specs() -> Vec<MeasureSpec> {
        vec![
            MeasureSpec::Ee,
            MeasureSpec::Pfe { alpha: 0.95 },
            MeasureSpec::Ces { alpha: 0.95 },
            MeasureSpec::Sem {
                density: vec![0.0, 0.5, 1.0, 2.5],
            },
        ]
    }

    proptest! {
        #[test]
        fn monotone_cash_additive_lipschitz(
            x in prop::collection::vec(0.0f64..100.0, 20..200),
            bumps in prop::collection::vec(0.0f64..5.0, 200),
            c in -50.0f64..50.0,
        ) {
            let y: Vec<f64> = x.iter().zip(&bumps).map(|(a, b)| a + b).collect();
            let shifted: Vec<f64> = x.iter().map(|a| a + c).collect();
            let max_bump = x.iter().zip(&bumps).map(|(_, b)| *b).fold(0.0, f64::max);
            for spec in specs() {
                let rx = measure(&x, &spec).unwrap().estimate;
                let ry = measure(&y, &spec).unwrap().estimate;
                let rs = measure(&shifted, &spec).unwrap().estimate;
                prop_assert!(rx <= ry + 1e-9);
                prop_assert!((rs - rx - c).abs() < 1e-9);
                prop_assert!((ry - rx).abs() <= max_bump + 1e-9);
            }
        }

        #[test]
        fn ci_halfwidth_nonnegative(x in prop::collection::vec(0.0f64..10.0, 10..100)) {
            for spec in specs() {
                if let Some(h) = measure(&x, &spec).unwrap().ci_halfwidth {
                    prop_assert!(h >= 0.0);
                }
            }
        }
    }
}
