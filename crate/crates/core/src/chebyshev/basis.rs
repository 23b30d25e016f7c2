//! Chebyshev points of the second kind, coefficient transforms and
//! Clenshaw summation on `[-1, 1]`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)] // shadowed by the inherent methods whenever std is linked
use num_traits::Float;

use crate::error::{Error, Result};

/// `cos(pi k / n)` with exact mirror symmetry and an exact zero at the
/// midpoint, so `node(k, n)` and `node(2k, 2n)` are bitwise equal.
pub fn node(k: usize, n: usize) -> f64 {
    if 2 * k == n {
        0.0
    } else if 2 * k > n {
        -node(n - k, n)
    } else {
        ((PI * k as f64) / n as f64).cos()
    }
}

/// The `n + 1` points `cos(pi k / n)`, descending from 1 to -1.
pub fn nodes(n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::invalid("Chebyshev degree must be at least 1"));
    }
    Ok((0..=n).map(|k| node(k, n)).collect())
}

/// `cos(pi m / n)` for `m = 0..2n`.
fn cos_table(n: usize) -> Vec<f64> {
    (0..2 * n)
        .map(|m| if m <= n { node(m, n) } else { node(2 * n - m, n) })
        .collect()
}

/// Coefficients of the degree-`n` interpolant through `values[k] = f(cos(pi k/n))`.
pub fn fit(values: &[f64], n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::invalid("Chebyshev degree must be at least 1"));
    }
    if values.len() != n + 1 {
        return Err(Error::invalid("fit needs exactly n + 1 nodal values"));
    }
    if let Some(k) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(alloc::format!("nodal value {k} = {}", values[k])));
    }
    let table = cos_table(n);
    let mut coeffs = vec![0.0; n + 1];
    for (j, c) in coeffs.iter_mut().enumerate() {
        let mut sum = 0.5 * (values[0] + values[n] * table[(j * n) % (2 * n)]);
        for (k, v) in values.iter().enumerate().take(n).skip(1) {
            sum += v * table[(j * k) % (2 * n)];
        }
        let scale = if j == 0 || j == n { 1.0 } else { 2.0 };
        *c = scale * sum / n as f64;
    }
    Ok(coeffs)
}

/// `sum_j c_j T_j(z)` by Clenshaw's recurrence.
pub fn clenshaw(coeffs: &[f64], z: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &c in coeffs.iter().skip(1).rev() {
        let b = clenshaw_step(c, z, b1, b2);
        b2 = b1;
        b1 = b;
    }
    clenshaw_last(coeffs.first().copied().unwrap_or(0.0), z, b1, b2)
}

/// One Clenshaw recurrence step, grouped so that `c - b2` does not wait
/// for `b1`.
#[inline(always)]
pub(crate) fn clenshaw_step(c: f64, z: f64, b1: f64, b2: f64) -> f64 {
    (c - b2) + 2.0 * z * b1
}

#[inline(always)]
pub(crate) fn clenshaw_last(c0: f64, z: f64, b1: f64, b2: f64) -> f64 {
    (c0 - b2) + z * b1
}

/// Coefficients (in `z`) of the derivative series, degree `n - 1`.
pub fn derivative(coeffs: &[f64]) -> Vec<f64> {
    let n = coeffs.len().saturating_sub(1);
    if n == 0 {
        return vec![0.0];
    }
    let mut d = vec![0.0; n + 1];
    for j in (1..=n).rev() {
        d[j - 1] = d.get(j + 1).copied().unwrap_or(0.0) + 2.0 * j as f64 * coeffs[j];
    }
    d[0] *= 0.5;
    d.truncate(n);
    d
}

/// Tensor fit on the `(n0 + 1) x (n1 + 1)` grid, values row-major with the
/// first dimension outer. Coefficients use the same layout.
pub fn fit_2d(values: &[f64], n0: usize, n1: usize) -> Result<Vec<f64>> {
    if values.len() != (n0 + 1) * (n1 + 1) {
        return Err(Error::invalid("2D fit needs (n0 + 1)(n1 + 1) nodal values"));
    }
    let w = n1 + 1;
    let mut rows = Vec::with_capacity(values.len());
    for k0 in 0..=n0 {
        rows.extend(fit(&values[k0 * w..(k0 + 1) * w], n1)?);
    }
    let mut coeffs = vec![0.0; values.len()];
    let mut column = vec![0.0; n0 + 1];
    for j1 in 0..w {
        for k0 in 0..=n0 {
            column[k0] = rows[k0 * w + j1];
        }
        for (j0, c) in fit(&column, n0)?.into_iter().enumerate() {
            coeffs[j0 * w + j1] = c;
        }
    }
    Ok(coeffs)
}

/// Nested Clenshaw over a row-major `(n0 + 1) x (n1 + 1)` coefficient tensor.
pub fn clenshaw_2d(coeffs: &[f64], n0: usize, n1: usize, z0: f64, z1: f64) -> f64 {
    let w = n1 + 1;
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for j0 in (1..=n0).rev() {
        let c = clenshaw(&coeffs[j0 * w..(j0 + 1) * w], z1);
        let b = clenshaw_step(c, z0, b1, b2);
        b2 = b1;
        b1 = b;
    }
    clenshaw_last(clenshaw(&coeffs[..w], z1), z0, b1, b2)
}

/// Derivative along the first dimension of a row-major coefficient tensor;
/// the result has shape `n0 x (n1 + 1)`.
pub fn derivative_2d(coeffs: &[f64], n0: usize, n1: usize) -> Vec<f64> {
    let w = n1 + 1;
    let rows = n0.max(1);
    let mut out = vec![0.0; rows * w];
    let mut column = vec![0.0; n0 + 1];
    for j1 in 0..w {
        for j0 in 0..=n0 {
            column[j0] = coeffs[j0 * w + j1];
        }
        for (j0, d) in derivative(&column).into_iter().enumerate() {
            out[j0 * w + j1] = d;
        }
    }
    out
}
