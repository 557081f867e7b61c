//! Solver pipeline with injectable faults.
//!
//! Stage for stage this is the reference Householder solver in
//! `linreg::qr`; with [`Fault::Noop`] it performs the same floating-point
//! operations in the same order and so returns bit-identical coefficients.
//! Faults that would index out of bounds return [`Halt::Error`] rather than
//! panicking.

use std::time::Instant;

use super::Fault;
use crate::dataset::Dataset;
use crate::linreg::{qr, rank_tolerance};

#[derive(Debug, Clone, PartialEq)]
pub enum Halt {
    Error(String),
    /// Did not finish before the deadline.
    Stalled,
}

fn oob(what: &str) -> Halt {
    Halt::Error(format!("index out of bounds in {what}"))
}

pub fn run_pipeline(fault: Fault, ds: &Dataset, deadline: Instant) -> Result<Vec<f64>, Halt> {
    use Fault::*;
    let f = fault;

    // Screen.
    let mut rows = Vec::with_capacity(ds.n());
    for i in 0..ds.n() {
        let x_ok = ds.row(i).iter().all(|v| v.is_finite());
        let y_ok = ds.y()[i].is_finite();
        let keep = match f {
            ScreenAndNot => x_ok && !y_ok,
            ScreenNegated => !(x_ok && y_ok),
            _ => x_ok && y_ok,
        };
        if keep {
            rows.push(i);
        }
    }
    let n = rows.len();

    // Assemble.
    let flag = if f == InterceptFlagNegated { !ds.has_intercept() } else { ds.has_intercept() };
    let intercept = flag && f != DropIntercept;
    let d = ds.d();
    let off = usize::from(intercept);
    let p = d + off;
    if n < p || n == 0 {
        return Err(Halt::Error(format!("{n} usable rows for {p} coefficients")));
    }
    let order: Vec<usize> = if f == ColumnOrder {
        let means: Vec<f64> = (0..d).map(|j| ds.column(j).sum::<f64>() / ds.n() as f64).collect();
        let mut idx: Vec<usize> = (0..d).collect();
        idx.sort_by(|a, b| means[*a].total_cmp(&means[*b]));
        idx
    } else {
        (0..d).collect()
    };
    let ones = match f {
        InterceptDoubled => 2.0,
        InterceptNegated => -1.0,
        _ => 1.0,
    };
    let step = if f == DesignCopyStrideTwo { 2 } else { 1 };
    let mut a = vec![0.0; n * p];
    let mut rhs = vec![0.0; n];
    let mut r = 0;
    while r < n {
        let xsrc = if f == XRowLag { rows[r.saturating_sub(1)] } else { rows[r] };
        let ysrc = match f {
            YIndexShift => rows[(r + 1) % n],
            YIndexOverrun => *rows.get(r + 1).ok_or_else(|| oob("response copy"))?,
            _ => rows[r],
        };
        if intercept {
            a[r] = ones;
        }
        for (c, &j) in order.iter().enumerate() {
            a[(c + off) * n + r] = ds.x(xsrc, j);
        }
        rhs[r] = match f {
            TruncateY => ds.y()[ysrc].trunc(),
            YPlusOne => ds.y()[ysrc] + 1.0,
            _ => ds.y()[ysrc],
        };
        r += step;
    }

    // Factor.
    let mut diag = vec![0.0; p];
    let kstep = if f == FactorStrideTwo { 2 } else { 1 };
    let mut k = 0;
    while k < p {
        if f == FactorEarlyBreak && k == 1 {
            break;
        }
        let start = if f == NormFromZero { 0 } else { k };
        let mut sumsq = if f == NormInitOne { 1.0 } else { 0.0 };
        for i in start..n {
            if f == SkipLastRow && i == n - 1 {
                continue;
            }
            let v = a[k * n + i];
            sumsq += v * v;
        }
        let norm = match f {
            SqrtArgDoubled => (2.0 * sumsq).sqrt(),
            NormReturnsOne => 1.0,
            _ => sumsq.sqrt(),
        };
        let skip = match f {
            SkipReflectors => true,
            ZeroGuardNever => false,
            GuardOrFirstColumn => norm == 0.0 || k > 0,
            _ => norm == 0.0,
        };
        if skip {
            k += kstep;
            continue;
        }
        let alpha = if a[k * n + k] > 0.0 { -norm } else { norm };
        a[k * n + k] -= alpha;
        let mut vtv = 0.0;
        for i in k..n {
            let v = a[k * n + i];
            vtv += v * v;
        }
        diag[k] = alpha;

        let v: Vec<f64> = a[k * n..(k + 1) * n].to_vec();
        for j in (k + 1)..p {
            reflect(f, &v, &mut a[j * n..(j + 1) * n], k, vtv, false)?;
        }
        reflect(f, &v, &mut rhs, k, vtv, true)?;
        k += kstep;
    }

    // Rank check.
    let sv = qr::singular_values(&a, &diag, n, p);
    let (smax, smin) = (sv[0], sv[p - 1]);
    let tol = rank_tolerance(n, p, smax);
    // A NaN singular value fails `smin > tol` and so counts as deficient.
    let above = smin > tol;
    let deficient = match f {
        RankGuardAlways => true,
        RankCheckFlipped => above,
        RankGuardAnd => !above && smin == 0.0,
        _ => !above || smin == 0.0,
    };
    if deficient {
        return Err(Halt::Error(format!("rank deficient (sigma_min = {smin:e}, tolerance = {tol:e})")));
    }

    // Back-substitute.
    let mut beta = vec![if f == BetaBufferInitOne { 1.0 } else { 0.0 }; p];
    for i in (0..p).rev() {
        let mut s = match f {
            BacksubSumInitZero => 0.0,
            BacksubRhsIndex => rhs[0],
            _ => rhs[i],
        };
        let jend = if f == BacksubBoundShort { p - 1 } else { p };
        let mut j = if f == BacksubInnerFromDiagonal { i } else { i + 1 };
        while j < jend {
            let rij = if f == BacksubTranspose { a[i * n + j] } else { a[j * n + i] };
            s -= rij * beta[j];
            if f == InfiniteLoop {
                if Instant::now() >= deadline {
                    return Err(Halt::Stalled);
                }
                std::hint::spin_loop();
                continue;
            }
            j += 1;
        }
        let rii = match f {
            DiagPlusOne => diag[i] + 1.0,
            DiagFromUpper => a[(p - 1) * n + i],
            ZeroDivisor => diag[i] * 0.0,
            _ => diag[i],
        };
        beta[i] = if f == BacksubMultiply { s * rii } else { s / rii };
    }

    // Output.
    let mut out = beta;
    if f == DropIntercept && ds.has_intercept() {
        out.insert(0, 0.0);
    }
    match f {
        TruncateCoefficients => out.iter_mut().for_each(|b| *b = b.trunc()),
        NegatedOutput => out.iter_mut().for_each(|b| *b = -*b),
        NullOutput => out.clear(),
        _ => {}
    }
    Ok(out)
}

/// Householder reflection of `target` by the vector stored in `v[k..n]`.
fn reflect(f: Fault, v: &[f64], target: &mut [f64], k: usize, vtv: f64, is_rhs: bool) -> Result<(), Halt> {
    use Fault::*;
    let n = v.len();
    let lo = if f == ReflectorRowsFromZero { 0 } else { k };
    let hi = if f == RowBoundOverrun && is_rhs { n + 1 } else { n };
    let mut s = 0.0;
    let mut s32 = 0.0f32;
    for i in lo..hi {
        let vi = if f == ReflectorPivotIndex { v[k] } else { *v.get(i).ok_or_else(|| oob("reflection"))? };
        let ti = *target.get(i).ok_or_else(|| oob("reflection"))?;
        match f {
            DotSub => s -= vi * ti,
            SinglePrecisionDot => s32 += (vi * ti) as f32,
            _ => s += vi * ti,
        }
    }
    if f == SinglePrecisionDot {
        s = s32 as f64;
    }
    let scale = if f == ReflectorScaleDoubled { 2.0 * 2.0 * s / vtv } else { 2.0 * s / vtv };
    for i in lo..hi.min(n) {
        target[i] -= scale * v[i];
    }
    Ok(())
}
