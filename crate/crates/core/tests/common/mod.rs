//! Independent oracles. None of these share code with the solver under test.
#![allow(dead_code, clippy::needless_range_loop)]

use mtlr_core::Dataset;
use num_bigint::{BigInt, Sign};
use num_traits::{Signed, ToPrimitive, Zero};

/// Design row `[1, x_i]` (intercept form) or `x_i`, built by hand.
pub fn design_row(ds: &Dataset, i: usize) -> Vec<f64> {
    let mut r = Vec::with_capacity(ds.d() + 1);
    if ds.has_intercept() {
        r.push(1.0);
    }
    r.extend_from_slice(ds.row(i));
    r
}

/// Forms `XᵀX` and `Xᵀy` explicitly and solves by Gaussian elimination with
/// partial pivoting.
pub fn normal_equations(ds: &Dataset) -> Vec<f64> {
    let p = ds.n_coefficients();
    let mut a = vec![vec![0.0; p + 1]; p];
    for i in 0..ds.n() {
        let r = design_row(ds, i);
        for u in 0..p {
            for v in 0..p {
                a[u][v] += r[u] * r[v];
            }
            a[u][p] += r[u] * ds.y()[i];
        }
    }
    for col in 0..p {
        let piv = (col..p).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        for row in col + 1..p {
            let f = a[row][col] / a[col][col];
            for k in col..=p {
                a[row][k] -= f * a[col][k];
            }
        }
    }
    let mut x = vec![0.0; p];
    for i in (0..p).rev() {
        let mut s = a[i][p];
        for j in i + 1..p {
            s -= a[i][j] * x[j];
        }
        x[i] = s / a[i][i];
    }
    x
}

/// Exact `(mantissa, exponent)` with `v = mantissa · 2^exponent`.
fn decompose(v: f64) -> (i64, i32) {
    if v == 0.0 {
        return (0, 0);
    }
    let bits = v.to_bits();
    let sign = if bits >> 63 == 1 { -1 } else { 1 };
    let exp = ((bits >> 52) & 0x7ff) as i32;
    let frac = (bits & ((1u64 << 52) - 1)) as i64;
    let (m, e) = if exp == 0 { (frac, -1074) } else { (frac | (1i64 << 52), exp - 1075) };
    (sign * m, e)
}

/// Correctly rounded enough (well below one ulp of error) `num / den`.
fn ratio_to_f64(num: &BigInt, den: &BigInt) -> f64 {
    if num.is_zero() {
        return 0.0;
    }
    let negative = (num.sign() == Sign::Minus) != (den.sign() == Sign::Minus);
    let (n, d) = (num.abs(), den.abs());
    let shift = 80 + d.bits() as i64 - n.bits() as i64;
    let q = if shift >= 0 { (n << shift as usize) / d } else { n / (d << (-shift) as usize) };
    let mag = q.to_f64().unwrap() * 2f64.powi(-shift as i32);
    if negative {
        -mag
    } else {
        mag
    }
}

/// Exact least-squares solution in rational arithmetic: the normal equations
/// are formed over the integers (every binary64 value is an integer times a
/// common power of two) and solved with fraction-free Bareiss elimination.
pub fn exact_least_squares(ds: &Dataset) -> Vec<f64> {
    let p = ds.n_coefficients();
    let rows: Vec<Vec<f64>> = (0..ds.n()).map(|i| design_row(ds, i)).collect();
    let min_exp = rows.iter().flatten().chain(ds.y()).filter(|v| **v != 0.0).map(|v| decompose(*v).1).min().unwrap_or(0);
    let to_int = |v: f64| -> BigInt {
        let (m, e) = decompose(v);
        if m == 0 {
            BigInt::zero()
        } else {
            BigInt::from(m) << (e - min_exp) as usize
        }
    };
    let xi: Vec<Vec<BigInt>> = rows.iter().map(|r| r.iter().map(|v| to_int(*v)).collect()).collect();
    let yi: Vec<BigInt> = ds.y().iter().map(|v| to_int(*v)).collect();

    let mut m = vec![vec![BigInt::zero(); p + 1]; p];
    for (r, y) in xi.iter().zip(&yi) {
        for u in 0..p {
            for v in u..p {
                let prod = &r[u] * &r[v];
                m[u][v] += &prod;
            }
            m[u][p] += &r[u] * y;
        }
    }
    for u in 0..p {
        for v in 0..u {
            m[u][v] = m[v][u].clone();
        }
    }

    // Bareiss forward elimination on [A | b].
    let mut prev = BigInt::from(1);
    for k in 0..p {
        if m[k][k].is_zero() {
            let swap = (k + 1..p).find(|&i| !m[i][k].is_zero()).expect("singular normal matrix");
            m.swap(k, swap);
        }
        for i in k + 1..p {
            for j in k + 1..=p {
                let v = (&m[i][j] * &m[k][k] - &m[i][k] * &m[k][j]) / &prev;
                m[i][j] = v;
            }
            m[i][k] = BigInt::zero();
        }
        prev = m[k][k].clone();
    }
    // Fraction-free back substitution: x_i = z_i / det, with exact division.
    let det = m[p - 1][p - 1].clone();
    let mut z = vec![BigInt::zero(); p];
    for i in (0..p).rev() {
        let mut s = &det * &m[i][p];
        for j in i + 1..p {
            s -= &m[i][j] * &z[j];
        }
        z[i] = s / &m[i][i];
    }
    z.iter().map(|zi| ratio_to_f64(zi, &det)).collect()
}

/// Singular values of the column set `cols` by one-sided (Hestenes) Jacobi.
/// Works on the columns directly, so accuracy is not squared away by `XᵀX`.
pub fn jacobi_singular_values(mut cols: Vec<Vec<f64>>) -> Vec<f64> {
    let p = cols.len();
    for _sweep in 0..100 {
        let mut rotated = false;
        for i in 0..p {
            for j in i + 1..p {
                let alpha: f64 = cols[i].iter().map(|v| v * v).sum();
                let beta: f64 = cols[j].iter().map(|v| v * v).sum();
                let gamma: f64 = cols[i].iter().zip(&cols[j]).map(|(a, b)| a * b).sum();
                if gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (left, right) = cols.split_at_mut(j);
                for (u, v) in left[i].iter_mut().zip(right[0].iter_mut()) {
                    let (x, y) = (*u, *v);
                    *u = c * x - s * y;
                    *v = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    cols.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).collect()
}

/// `σ_max / σ_min` of the design matrix.
pub fn condition_by_jacobi(ds: &Dataset) -> f64 {
    let p = ds.n_coefficients();
    let mut cols = vec![Vec::with_capacity(ds.n()); p];
    for i in 0..ds.n() {
        for (c, v) in cols.iter_mut().zip(design_row(ds, i)) {
            c.push(v);
        }
    }
    let sv = jacobi_singular_values(cols);
    let max = sv.iter().cloned().fold(f64::MIN, f64::max);
    let min = sv.iter().cloned().fold(f64::MAX, f64::min);
    max / min
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `‖a − b‖ / ‖b‖` (absolute when `b = 0`).
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let nb = norm(b);
    diff_norm(a, b) / if nb > 0.0 { nb } else { 1.0 }
}

#[test]
fn oracles_agree_on_the_worked_line() {
    let ds = Dataset::from_points(&[(1.0, 3.0), (3.0, 7.0), (5.0, 11.0)], true).unwrap();
    assert!(rel_err(&normal_equations(&ds), &[1.0, 2.0]) < 1e-14);
    assert_eq!(exact_least_squares(&ds), vec![1.0, 2.0]);
    let tiny = Dataset::from_points(&[(0.1, 0.3), (0.2, 0.25), (0.7, 1e-3)], true).unwrap();
    assert!(rel_err(&normal_equations(&tiny), &exact_least_squares(&tiny)) < 1e-12);
}

#[test]
fn jacobi_on_a_known_matrix() {
    // Symmetric positive definite, so singular values equal eigenvalues.
    let mut sv = jacobi_singular_values(vec![vec![2.0, 1.0], vec![1.0, 2.0]]);
    sv.sort_by(f64::total_cmp);
    assert!((sv[0] - 1.0).abs() < 1e-14 && (sv[1] - 3.0).abs() < 1e-14);
}
