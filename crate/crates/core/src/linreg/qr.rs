//! Householder QR least squares on a column-major design matrix.
//!
//! After [`factor`] the strictly-lower part of each column `k` (rows `k..n`)
//! holds the Householder vector, the strictly-upper part holds `R`, and the
//! diagonal of `R` is returned separately. The right-hand side is overwritten
//! with `Qᵀy`.
//!
//! The fault zoo mirrors these loops one for one, so changes here must be
//! reflected in `zoo::pipeline` (the `noop` fault is checked bit-for-bit
//! against this solver).

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub(crate) fn factor(a: &mut [f64], n: usize, p: usize, rhs: &mut [f64]) -> Vec<f64> {
    let mut diag = vec![0.0; p];
    for k in 0..p {
        let (head, tail) = a.split_at_mut((k + 1) * n);
        let col = &mut head[k * n..];

        let mut sumsq = 0.0;
        for v in &col[k..n] {
            sumsq += v * v;
        }
        let norm = sumsq.sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if col[k] > 0.0 { -norm } else { norm };
        col[k] -= alpha;
        let mut vtv = 0.0;
        for v in &col[k..n] {
            vtv += v * v;
        }
        diag[k] = alpha;

        for j in 0..(p - k - 1) {
            let target = &mut tail[j * n..(j + 1) * n];
            reflect(&col[k..n], &mut target[k..n], vtv);
        }
        reflect(&col[k..n], &mut rhs[k..n], vtv);
    }
    diag
}

/// Applies `I - 2 v vᵀ / (vᵀv)` to `target`.
fn reflect(v: &[f64], target: &mut [f64], vtv: f64) {
    let mut s = 0.0;
    for (vi, ti) in v.iter().zip(target.iter()) {
        s += vi * ti;
    }
    let f = 2.0 * s / vtv;
    for (vi, ti) in v.iter().zip(target.iter_mut()) {
        *ti -= f * vi;
    }
}

/// Solves `R beta = (Qᵀy)[..p]`.
pub(crate) fn back_substitute(a: &[f64], diag: &[f64], n: usize, p: usize, qty: &[f64]) -> Vec<f64> {
    let mut beta = vec![0.0; p];
    for i in (0..p).rev() {
        let mut s = qty[i];
        for j in (i + 1)..p {
            s -= a[j * n + i] * beta[j];
        }
        beta[i] = s / diag[i];
    }
    beta
}

/// Dense upper-triangular `R` (p x p).
pub(crate) fn r_matrix(a: &[f64], diag: &[f64], n: usize, p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| match i.cmp(&j) {
        std::cmp::Ordering::Less => a[j * n + i],
        std::cmp::Ordering::Equal => diag[i],
        std::cmp::Ordering::Greater => 0.0,
    })
}

/// Singular values of the design matrix, largest first, taken from `R`.
pub(crate) fn singular_values(a: &[f64], diag: &[f64], n: usize, p: usize) -> Vec<f64> {
    let mut sv: Vec<f64> = r_matrix(a, diag, n, p).singular_values().iter().copied().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

/// `max(n, p) * eps * sigma_max`.
pub fn rank_tolerance(n: usize, p: usize, sigma_max: f64) -> f64 {
    n.max(p) as f64 * f64::EPSILON * sigma_max
}

/// Errors with [`Error::RankDeficient`] when the smallest singular value falls
/// under the rank tolerance. `sv` is sorted largest first.
#[allow(clippy::neg_cmp_op_on_partial_ord)] // a NaN singular value counts as deficient
pub(crate) fn check_rank(sv: &[f64], n: usize, p: usize) -> Result<()> {
    let (smax, smin) = (sv[0], sv[sv.len() - 1]);
    let tolerance = rank_tolerance(n, p, smax);
    if !(smin > tolerance) || smin == 0.0 {
        return Err(Error::RankDeficient { sigma_min: smin, tolerance });
    }
    Ok(())
}

/// Solves `R z = w` for upper-triangular `R` stored as in [`factor`].
pub(crate) fn solve_upper(a: &[f64], diag: &[f64], n: usize, p: usize, w: &[f64]) -> Vec<f64> {
    back_substitute(a, diag, n, p, w)
}

/// Solves `Rᵀ w = b` (forward substitution).
pub(crate) fn solve_upper_transposed(a: &[f64], diag: &[f64], n: usize, p: usize, b: &[f64]) -> Vec<f64> {
    let mut w = vec![0.0; p];
    for i in 0..p {
        let mut s = b[i];
        for (k, wk) in w.iter().enumerate().take(i) {
            s -= a[i * n + k] * wk;
        }
        w[i] = s / diag[i];
    }
    w
}
