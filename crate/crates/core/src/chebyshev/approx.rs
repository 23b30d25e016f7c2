//! Piecewise Chebyshev approximants over a [`ChebDomain`].

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::basis;
use crate::error::{Error, Result};
use crate::math::fnv1a_f64;

/// `s -> intercept + slope * s`, the asymptotic value outside the cut points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub intercept: f64,
    pub slope: f64,
}

impl Linear {
    pub const ZERO: Linear = Linear {
        intercept: 0.0,
        slope: 0.0,
    };

    pub fn constant(c: f64) -> Self {
        Linear {
            intercept: c,
            slope: 0.0,
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.intercept + self.slope * s
    }

    pub fn derivative(&self) -> Self {
        Linear::constant(self.slope)
    }
}

/// Tail formula used beyond `cut` in the price dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tail {
    pub cut: f64,
    pub formula: Linear,
}

/// Price interval (plus an optional variance interval), split points in the
/// price dimension and optional asymptotic tails.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChebDomain {
    pub price: (f64, f64),
    pub variance: Option<(f64, f64)>,
    pub splits: Vec<f64>,
    pub left: Option<Tail>,
    pub right: Option<Tail>,
}

impl ChebDomain {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        let d = ChebDomain {
            price: (a, b),
            variance: None,
            splits: Vec::new(),
            left: None,
            right: None,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn rectangle(price: (f64, f64), variance: (f64, f64)) -> Result<Self> {
        let d = ChebDomain {
            price,
            variance: Some(variance),
            splits: Vec::new(),
            left: None,
            right: None,
        };
        d.validate()?;
        Ok(d)
    }

    /// Adds a split point; it must lie strictly inside the price interval.
    pub fn with_split(mut self, at: f64) -> Result<Self> {
        self.splits.push(at);
        self.splits.sort_by(f64::total_cmp);
        self.validate()?;
        Ok(self)
    }

    pub fn with_tails(mut self, left: Option<Tail>, right: Option<Tail>) -> Result<Self> {
        self.left = left;
        self.right = right;
        self.validate()?;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        if self.variance.is_some() {
            2
        } else {
            1
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b) = self.price;
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::invalid("domain needs a < b"));
        }
        if let Some((c, d)) = self.variance {
            if !(c < d) || !c.is_finite() || !d.is_finite() {
                return Err(Error::invalid("variance interval needs c < d"));
            }
        }
        if self.splits.iter().any(|&k| !(k > a && k < b)) {
            return Err(Error::invalid("split points must lie strictly inside the domain"));
        }
        let lo = self.left.map_or(a, |t| t.cut);
        let hi = self.right.map_or(b, |t| t.cut);
        if !(a <= lo && lo < hi && hi <= b) {
            return Err(Error::invalid("cut points need a <= low < high <= b"));
        }
        Ok(())
    }

    /// Price range covered by polynomial pieces.
    pub fn interpolation_interval(&self) -> (f64, f64) {
        (
            self.left.map_or(self.price.0, |t| t.cut),
            self.right.map_or(self.price.1, |t| t.cut),
        )
    }

    /// Piece boundaries in the price dimension: the interpolation interval
    /// cut at every split point lying strictly inside it.
    pub fn piece_bounds(&self) -> Vec<(f64, f64)> {
        let (lo, hi) = self.interpolation_interval();
        let mut edges = vec![lo];
        edges.extend(self.splits.iter().copied().filter(|&k| k > lo && k < hi));
        edges.push(hi);
        edges.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

/// One polynomial piece: a box, a degree per dimension and the coefficient
/// vector (row-major tensor in 2D).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub lower: [f64; 2],
    pub upper: [f64; 2],
    pub degrees: [usize; 2],
    pub coeffs: Vec<f64>,
}

/// Centre and inverse half-width of `[a, b]`.
fn unit_map(a: f64, b: f64) -> (f64, f64) {
    (0.5 * (a + b), 2.0 / (b - a))
}

fn to_unit(x: f64, a: f64, b: f64) -> f64 {
    let (mid, scale) = unit_map(a, b);
    ((x - mid) * scale).clamp(-1.0, 1.0)
}

fn from_unit(z: f64, a: f64, b: f64) -> f64 {
    if z == 1.0 {
        b
    } else if z == -1.0 {
        a
    } else {
        0.5 * (a + b) + 0.5 * (b - a) * z
    }
}

impl Piece {
    fn dim(&self) -> usize {
        if self.degrees[1] == 0 {
            1
        } else {
            2
        }
    }

    /// Interpolation points of this box, in node order (dimension 0 outer).
    pub fn node_points(lower: [f64; 2], upper: [f64; 2], degrees: [usize; 2]) -> Vec<[f64; 2]> {
        let mut out = Vec::with_capacity((degrees[0] + 1) * (degrees[1] + 1));
        for k0 in 0..=degrees[0] {
            let x0 = from_unit(basis::node(k0, degrees[0]), lower[0], upper[0]);
            if degrees[1] == 0 {
                out.push([x0, 0.0]);
                continue;
            }
            for k1 in 0..=degrees[1] {
                out.push([x0, from_unit(basis::node(k1, degrees[1]), lower[1], upper[1])]);
            }
        }
        out
    }

    pub fn from_values(lower: [f64; 2], upper: [f64; 2], degrees: [usize; 2], values: &[f64]) -> Result<Self> {
        let coeffs = if degrees[1] == 0 {
            basis::fit(values, degrees[0])?
        } else {
            basis::fit_2d(values, degrees[0], degrees[1])?
        };
        Ok(Piece {
            lower,
            upper,
            degrees,
            coeffs,
        })
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        let z0 = to_unit(z[0], self.lower[0], self.upper[0]);
        if self.dim() == 1 {
            basis::clenshaw(&self.coeffs, z0)
        } else {
            let z1 = to_unit(z[1], self.lower[1], self.upper[1]);
            basis::clenshaw_2d(&self.coeffs, self.degrees[0], self.degrees[1], z0, z1)
        }
    }

    fn derivative(&self) -> Piece {
        let scale = 2.0 / (self.upper[0] - self.lower[0]);
        let (mut coeffs, d0) = if self.dim() == 1 {
            (basis::derivative(&self.coeffs), self.degrees[0].saturating_sub(1))
        } else {
            (
                basis::derivative_2d(&self.coeffs, self.degrees[0], self.degrees[1]),
                self.degrees[0].saturating_sub(1),
            )
        };
        coeffs.iter_mut().for_each(|c| *c *= scale);
        Piece {
            lower: self.lower,
            upper: self.upper,
            degrees: [d0, self.degrees[1]],
            coeffs,
        }
    }

    fn sample<R: Rng>(&self, dim: usize, rng: &mut R) -> [f64; 2] {
        let mut z = [0.0; 2];
        for (d, zd) in z.iter_mut().enumerate().take(dim) {
            *zd = rng.random_range(self.lower[d]..=self.upper[d]);
        }
        z
    }
}

/// Where an approximant came from: the pricer label and a hash of the nodal
/// values it was fitted to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub pricer: String,
    pub node_hash: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChebyshevApproximant {
    pub domain: ChebDomain,
    pub pieces: Vec<Piece>,
    pub provenance: Provenance,
}

impl ChebyshevApproximant {
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Highest degree over pieces, per dimension.
    pub fn max_degree(&self) -> [usize; 2] {
        self.pieces
            .iter()
            .fold([0, 0], |acc, p| [acc[0].max(p.degrees[0]), acc[1].max(p.degrees[1])])
    }

    /// Value at state `z`; tail formulas apply beyond the cut points and any
    /// other state outside the domain is an error.
    pub fn eval(&self, z: &[f64]) -> Result<f64> {
        let s = z[0];
        if let Some(t) = self.domain.left {
            if s < t.cut {
                return Ok(t.formula.eval(s));
            }
        }
        if let Some(t) = self.domain.right {
            if s > t.cut {
                return Ok(t.formula.eval(s));
            }
        }
        let (lo, hi) = self.domain.interpolation_interval();
        if !(s >= lo && s <= hi) {
            return Err(Error::OutOfDomain {
                dim: 0,
                value: s,
                lower: lo,
                upper: hi,
            });
        }
        if let Some((c, d)) = self.domain.variance {
            let v = *z.get(1).ok_or_else(|| Error::invalid("2D approximant needs (s, v)"))?;
            if !(v >= c && v <= d) {
                return Err(Error::OutOfDomain {
                    dim: 1,
                    value: v,
                    lower: c,
                    upper: d,
                });
            }
        }
        let i = self
            .pieces
            .partition_point(|p| p.upper[0] < s)
            .min(self.pieces.len() - 1);
        Ok(self.pieces[i].eval(z))
    }

    /// Values of a 1D approximant at many prices, four at a time; `out[i]`
    /// equals `eval(&[s[i]])` bit for bit, and is NaN where `s[i]` lies
    /// outside the domain.
    pub fn eval_prices(&self, s: &[f64], out: &mut [f64]) -> Result<()> {
        const LANES: usize = 4;
        if self.dim() != 1 {
            return Err(Error::invalid("price-only evaluation needs a 1D approximant"));
        }
        if s.len() != out.len() {
            return Err(Error::invalid("input and output lengths differ"));
        }
        // leading zero coefficients leave the Clenshaw sums unchanged
        let len = self.pieces.iter().map(|p| p.coeffs.len()).max().unwrap_or(0);
        let padded: Vec<Vec<f64>> = self
            .pieces
            .iter()
            .map(|p| {
                let mut c = p.coeffs.clone();
                c.resize(len, 0.0);
                c
            })
            .collect();
        let np = self.pieces.len();
        let edges: Vec<f64> = self.pieces[..np - 1].iter().map(|p| p.upper[0]).collect();
        let maps: Vec<(f64, f64)> = self.pieces.iter().map(|p| unit_map(p.lower[0], p.upper[0])).collect();
        let (lo, hi) = self.domain.interpolation_interval();
        let (left, right) = (self.domain.left, self.domain.right);
        for (oc, sc) in out.chunks_mut(LANES).zip(s.chunks(LANES)) {
            let mut z = [0.0; LANES];
            let mut idx = [0; LANES];
            for (l, &x) in sc.iter().enumerate() {
                let i = edges.iter().filter(|&&e| x > e).count();
                let (mid, scale) = maps[i];
                idx[l] = i;
                z[l] = ((x - mid) * scale).clamp(-1.0, 1.0);
            }
            let cs: [&[f64]; LANES] = core::array::from_fn(|l| &padded[idx[l]][..len]);
            let mut b1 = [0.0; LANES];
            let mut b2 = [0.0; LANES];
            for k in (1..len).rev() {
                for l in 0..LANES {
                    let b = basis::clenshaw_step(cs[l][k], z[l], b1[l], b2[l]);
                    b2[l] = b1[l];
                    b1[l] = b;
                }
            }
            for (l, (o, &x)) in oc.iter_mut().zip(sc).enumerate() {
                *o = match (left, right) {
                    (Some(t), _) if x < t.cut => t.formula.eval(x),
                    (_, Some(t)) if x > t.cut => t.formula.eval(x),
                    _ if !(x >= lo && x <= hi) => f64::NAN,
                    _ => basis::clenshaw_last(cs[l][0], z[l], b1[l], b2[l]),
                };
            }
        }
        Ok(())
    }

    /// Derivative in the price dimension, tails differentiated alongside.
    pub fn derivative(&self) -> ChebyshevApproximant {
        let mut domain = self.domain.clone();
        if let Some(t) = domain.left.as_mut() {
            t.formula = t.formula.derivative();
        }
        if let Some(t) = domain.right.as_mut() {
            t.formula = t.formula.derivative();
        }
        ChebyshevApproximant {
            domain,
            pieces: self.pieces.iter().map(Piece::derivative).collect(),
            provenance: Provenance {
                pricer: alloc::format!("d/ds {}", self.provenance.pricer),
                node_hash: self.provenance.node_hash,
            },
        }
    }
}

fn piece_boxes(domain: &ChebDomain) -> Vec<([f64; 2], [f64; 2])> {
    let (c, d) = domain.variance.unwrap_or((0.0, 0.0));
    domain
        .piece_bounds()
        .into_iter()
        .map(|(a, b)| ([a, c], [b, d]))
        .collect()
}

fn evaluate_nodes<F>(f: &mut F, points: &[[f64; 2]], dim: usize, out: &mut Vec<f64>) -> Result<()>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    for p in points {
        let v = f(&p[..dim])?;
        if !v.is_finite() {
            return Err(Error::NonFinite(alloc::format!("pricer at {:?}", &p[..dim])));
        }
        out.push(v);
    }
    Ok(())
}

/// Fits every piece of `domain` at the same degree (`degrees[1]` is ignored
/// in 1D) from the value function `f`.
pub fn fit_fixed<F>(mut f: F, domain: &ChebDomain, degrees: [usize; 2], pricer: &str) -> Result<ChebyshevApproximant>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    domain.validate()?;
    let dim = domain.dim();
    let degrees = if dim == 1 { [degrees[0], 0] } else { degrees };
    if degrees[0] == 0 || (dim == 2 && degrees[1] == 0) {
        return Err(Error::invalid("Chebyshev degree must be at least 1"));
    }
    let mut pieces = Vec::new();
    let mut all_values = Vec::new();
    for (lower, upper) in piece_boxes(domain) {
        let points = Piece::node_points(lower, upper, degrees);
        let mut values = Vec::with_capacity(points.len());
        evaluate_nodes(&mut f, &points, dim, &mut values)?;
        pieces.push(Piece::from_values(lower, upper, degrees, &values)?);
        all_values.extend(values);
    }
    Ok(ChebyshevApproximant {
        domain: domain.clone(),
        pieces,
        provenance: Provenance {
            pricer: String::from(pricer),
            node_hash: fnv1a_f64(&all_values),
        },
    })
}

/// Probe generator for piece `index`: its own ChaCha stream under `seed`.
fn probe_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn piece_gap(low: &Piece, high: &Piece, dim: usize, probes: usize, rng: &mut ChaCha8Rng) -> f64 {
    let mut gap: f64 = 0.0;
    for _ in 0..probes {
        let z = low.sample(dim, rng);
        gap = gap.max((low.eval(&z[..dim]) - high.eval(&z[..dim])).abs());
    }
    gap
}

/// Largest absolute difference of two approximants over `n_probe` uniform
/// points per piece of `low` (pieces must match).
pub fn cheb_error_estimate(
    low: &ChebyshevApproximant,
    high: &ChebyshevApproximant,
    n_probe: usize,
    seed: u64,
) -> Result<f64> {
    if low.domain != high.domain || low.pieces.len() != high.pieces.len() {
        return Err(Error::invalid("error estimate needs approximants on the same domain"));
    }
    let dim = low.dim();
    Ok(low
        .pieces
        .iter()
        .zip(&high.pieces)
        .enumerate()
        .map(|(i, (l, h))| piece_gap(l, h, dim, n_probe, &mut probe_rng(seed, i)))
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveOptions {
    /// Target `eps` for the estimated error.
    pub target: f64,
    pub probes: usize,
    pub seed: u64,
    /// Largest admissible degree per dimension.
    pub cap: usize,
    /// Return the finer of the last two approximants instead of the preceding one.
    pub return_finer: bool,
}

impl AdaptiveOptions {
    pub fn new(target: f64, seed: u64) -> Self {
        AdaptiveOptions {
            target,
            probes: 100,
            seed,
            cap: 1024,
            return_finer: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveReport {
    /// Per piece, the `(N, eps')` sequence with `eps'` comparing `N` and `2N`.
    pub history: Vec<Vec<(usize, f64)>>,
    pub pricer_calls: usize,
}

/// Degree doubling per piece: starting from degree 1, compare the degree-`N`
/// and degree-`2N` interpolants on random probes and stop once the gap is
/// below `target`, keeping the degree-`N` one. Nodal values at degree `N`
/// are reused at `2N` (nested nodes), so a piece stopping at `N` costs
/// `2N + 1` pricer calls per dimension.
pub fn adaptive_fit<F>(
    mut f: F,
    domain: &ChebDomain,
    opts: &AdaptiveOptions,
    pricer: &str,
) -> Result<(ChebyshevApproximant, AdaptiveReport)>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if !(opts.target > 0.0) {
        return Err(Error::invalid("adaptive target must be positive"));
    }
    domain.validate()?;
    let dim = domain.dim();
    let mut pieces = Vec::new();
    let mut history = Vec::new();
    let mut calls = 0;
    let mut all_values = Vec::new();
    for (index, (lower, upper)) in piece_boxes(domain).into_iter().enumerate() {
        let degrees = |n: usize| if dim == 1 { [n, 0] } else { [n, n] };
        let mut n = 1;
        let points = Piece::node_points(lower, upper, degrees(n));
        let mut values = Vec::with_capacity(points.len());
        evaluate_nodes(&mut f, &points, dim, &mut values)?;
        calls += points.len();
        let mut current = Piece::from_values(lower, upper, degrees(n), &values)?;
        let mut trail = Vec::new();
        let mut rng = probe_rng(opts.seed, index);
        loop {
            let fine_n = 2 * n;
            if fine_n > opts.cap {
                return Err(Error::DegreeCap {
                    cap: opts.cap,
                    last_estimate: trail.last().map_or(f64::INFINITY, |t: &(usize, f64)| t.1),
                });
            }
            let fine_points = Piece::node_points(lower, upper, degrees(fine_n));
            let mut fine_values = Vec::with_capacity(fine_points.len());
            let w_coarse = if dim == 1 { 1 } else { n + 1 };
            let w_fine = if dim == 1 { 1 } else { fine_n + 1 };
            for (idx, p) in fine_points.iter().enumerate() {
                let (k0, k1) = (idx / w_fine, idx % w_fine);
                let reusable = k0 % 2 == 0 && (dim == 1 || k1 % 2 == 0);
                if reusable {
                    let coarse_idx = if dim == 1 { k0 / 2 } else { (k0 / 2) * w_coarse + k1 / 2 };
                    fine_values.push(values[coarse_idx]);
                } else {
                    let v = f(&p[..dim])?;
                    if !v.is_finite() {
                        return Err(Error::NonFinite(alloc::format!("pricer at {:?}", &p[..dim])));
                    }
                    fine_values.push(v);
                    calls += 1;
                }
            }
            let fine = Piece::from_values(lower, upper, degrees(fine_n), &fine_values)?;
            let gap = piece_gap(&current, &fine, dim, opts.probes, &mut rng);
            trail.push((n, gap));
            if gap < opts.target {
                if opts.return_finer {
                    all_values.extend(fine_values);
                    pieces.push(fine);
                } else {
                    all_values.extend(values);
                    pieces.push(current);
                }
                break;
            }
            n = fine_n;
            values = fine_values;
            current = fine;
        }
        history.push(trail);
    }
    Ok((
        ChebyshevApproximant {
            domain: domain.clone(),
            pieces,
            provenance: Provenance {
                pricer: String::from(pricer),
                node_hash: fnv1a_f64(&all_values),
            },
        },
        AdaptiveReport {
            history,
            pricer_calls: calls,
        },
    ))
}
