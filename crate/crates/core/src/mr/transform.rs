//! Input transforms and their closed-form effect on the estimator.
//!
//! Variable indices `k`, `p`, `q` are 1-based (`x1..xd`, matching the CSV
//! header). Permutation vectors are 0-based: entry `i` of a sample order names
//! the source row that becomes follow-up row `i`, and entry `j` of a variable
//! order names the source column that becomes follow-up column `j`.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linreg::{self, Estimator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransformSpec {
    /// Append `(x*, y*)` with `y*` predicted by the source output.
    InsertPoint {
        x: Vec<f64>,
    },
    /// Append the componentwise mean of all samples.
    InsertCentroid,
    /// `y ← a·y`, `x_k ← b·x_k`.
    Scale {
        a: f64,
        b: f64,
        k: usize,
    },
    /// `y ← y + a`, `x_k ← x_k + b` (intercept form only).
    Shift {
        a: f64,
        b: f64,
        k: usize,
    },
    PermuteSamples {
        order: Vec<usize>,
    },
    SwapVars {
        p: usize,
        q: usize,
    },
    PermuteVars {
        order: Vec<usize>,
    },
    /// Counter-clockwise rotation of the `(x_p, x_q)` plane by `theta`.
    Rotate {
        p: usize,
        q: usize,
        theta: f64,
    },
}

fn check_var(var: usize, d: usize) -> Result<()> {
    if var == 0 || var > d {
        return Err(Error::IndexOutOfRange { index: var, valid: format!("1..={d}") });
    }
    Ok(())
}

fn check_permutation(order: &[usize], len: usize, what: &str) -> Result<()> {
    let mut seen = vec![false; len];
    if order.len() != len {
        return Err(Error::InvalidTransform(format!("{what} order has length {}, expected {len}", order.len())));
    }
    for &i in order {
        if i >= len || std::mem::replace(&mut seen[i], true) {
            return Err(Error::InvalidTransform(format!("{what} order is not a bijection")));
        }
    }
    Ok(())
}

impl TransformSpec {
    /// Checks parameters against a dataset (or estimator) with `d` variables.
    pub fn validate(&self, d: usize, n: Option<usize>, has_intercept: bool) -> Result<()> {
        match self {
            Self::InsertPoint { x } => {
                if x.len() != d {
                    return Err(Error::DimensionMismatch(format!("x* has {} values, expected {d}", x.len())));
                }
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("x*".into()));
                }
            }
            Self::InsertCentroid => {}
            Self::Scale { a, b, k } => {
                if *a == 0.0 || *b == 0.0 || !a.is_finite() || !b.is_finite() {
                    return Err(Error::InvalidTransform("scale factors must be finite and non-zero".into()));
                }
                check_var(*k, d)?;
            }
            Self::Shift { a, b, k } => {
                if !has_intercept {
                    return Err(Error::ShiftRequiresIntercept);
                }
                if !a.is_finite() || !b.is_finite() {
                    return Err(Error::InvalidTransform("shift distances must be finite".into()));
                }
                check_var(*k, d)?;
            }
            Self::PermuteSamples { order } => {
                if let Some(n) = n {
                    check_permutation(order, n, "sample")?;
                }
            }
            Self::SwapVars { p, q } | Self::Rotate { p, q, .. } => {
                check_var(*p, d)?;
                check_var(*q, d)?;
                if p == q {
                    return Err(Error::InvalidTransform("p and q must differ".into()));
                }
                if let Self::Rotate { theta, .. } = self {
                    if !theta.is_finite() {
                        return Err(Error::InvalidTransform("theta must be finite".into()));
                    }
                }
            }
            Self::PermuteVars { order } => check_permutation(order, d, "variable")?,
        }
        Ok(())
    }

    /// Builds the follow-up dataset. `source_out` is only read by `InsertPoint`.
    pub fn apply_to_dataset(&self, ds: &Dataset, source_out: Option<&Estimator>) -> Result<Dataset> {
        self.validate(ds.d(), Some(ds.n()), ds.has_intercept())?;
        let mut out = ds.clone();
        match self {
            Self::InsertPoint { x } => {
                let est = source_out.ok_or_else(|| Error::MissingSourceOutput("insert_point".into()))?;
                let ystar = linreg::predict(est, x)?;
                if !ystar.is_finite() {
                    return Err(Error::NonFinite("predicted y*".into()));
                }
                out.push_row(x, ystar)?;
            }
            Self::InsertCentroid => {
                let (xbar, ybar) = ds.centroid();
                out.push_row(&xbar, ybar)?;
            }
            Self::Scale { a, b, k } => {
                let (a, b) = (*a, *b);
                out.map_y(|v| a * v);
                out.map_column(k - 1, |v| b * v);
            }
            Self::Shift { a, b, k } => {
                let (a, b) = (*a, *b);
                out.map_y(|v| v + a);
                out.map_column(k - 1, |v| v + b);
            }
            Self::PermuteSamples { order } => {
                let d = ds.d();
                for (i, &src) in order.iter().enumerate() {
                    out.x_mut()[i * d..(i + 1) * d].copy_from_slice(ds.row(src));
                    out.y_mut()[i] = ds.y()[src];
                }
            }
            Self::SwapVars { p, q } => {
                let d = ds.d();
                for row in out.x_mut().chunks_mut(d) {
                    row.swap(p - 1, q - 1);
                }
            }
            Self::PermuteVars { order } => {
                let d = ds.d();
                for (i, row) in out.x_mut().chunks_mut(d).enumerate() {
                    for (j, &src) in order.iter().enumerate() {
                        row[j] = ds.x(i, src);
                    }
                }
            }
            Self::Rotate { p, q, theta } => {
                let (s, c) = theta.sin_cos();
                let d = ds.d();
                for row in out.x_mut().chunks_mut(d) {
                    let (xp, xq) = (row[p - 1], row[q - 1]);
                    row[p - 1] = xp * c - xq * s;
                    row[q - 1] = xp * s + xq * c;
                }
            }
        }
        out.ensure_finite()?;
        Ok(out)
    }

    /// Expected follow-up estimator. The attached bound is the source bound
    /// scaled by [`Self::operator_norm`].
    pub fn apply_to_estimator(&self, est: &Estimator) -> Result<Estimator> {
        let offset = usize::from(est.has_intercept);
        let d = est
            .beta
            .len()
            .checked_sub(offset)
            .ok_or_else(|| Error::DimensionMismatch("intercept-form estimator without coefficients".into()))?;
        self.validate(d, None, est.has_intercept)?;
        let pos = |var: usize| var - 1 + offset;
        let mut beta = est.beta.clone();
        match self {
            Self::InsertPoint { .. } | Self::InsertCentroid | Self::PermuteSamples { .. } => {}
            Self::Scale { a, b, k } => {
                for v in beta.iter_mut() {
                    *v *= a;
                }
                beta[pos(*k)] = a / b * est.beta[pos(*k)];
            }
            Self::Shift { a, b, k } => {
                beta[0] = est.beta[0] - b * est.beta[pos(*k)] + a;
            }
            Self::SwapVars { p, q } => beta.swap(pos(*p), pos(*q)),
            Self::PermuteVars { order } => {
                for (j, &src) in order.iter().enumerate() {
                    beta[offset + j] = est.beta[offset + src];
                }
            }
            Self::Rotate { p, q, theta } => {
                let (s, c) = theta.sin_cos();
                let (bp, bq) = (est.beta[pos(*p)], est.beta[pos(*q)]);
                beta[pos(*p)] = bp * c - bq * s;
                beta[pos(*q)] = bp * s + bq * c;
            }
        }
        let delta = est.delta.iter().map(|v| v * self.operator_norm()).collect();
        Ok(Estimator { beta, delta, has_intercept: est.has_intercept })
    }

    /// 2-norm of the linear part of the estimator map.
    pub fn operator_norm(&self) -> f64 {
        match self {
            Self::Scale { a, b, .. } => a.abs().max((a / b).abs()),
            // Largest singular value of [[1, -b], [0, 1]].
            Self::Shift { b, .. } => (b.abs() + (b * b + 4.0).sqrt()) / 2.0,
            _ => 1.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> Dataset {
        Dataset::from_points(&[(1.0, 3.0), (3.0, 7.0), (5.0, 11.0)], true).unwrap()
    }

    fn est(beta: &[f64]) -> Estimator {
        Estimator::exact(beta.to_vec(), true)
    }

    #[test]
    fn sign_reflection_of_the_response() {
        let t = TransformSpec::Scale { a: -1.0, b: 1.0, k: 1 };
        assert_eq!(t.apply_to_estimator(&est(&[1.0, 2.0])).unwrap().beta, vec![-1.0, -2.0]);
    }

    #[test]
    fn identity_rotation_is_identity() {
        let t = TransformSpec::Rotate { p: 1, q: 2, theta: 0.0 };
        let e = est(&[0.5, -3.0, 7.25]);
        assert_eq!(t.apply_to_estimator(&e).unwrap().beta, e.beta);
    }

    #[test]
    fn shift_of_a_variable_moves_the_intercept() {
        let t = TransformSpec::Shift { a: 0.0, b: 5.0, k: 2 };
        assert_eq!(t.apply_to_estimator(&est(&[1.0, 2.0, 3.0])).unwrap().beta, vec![-14.0, 2.0, 3.0]);
    }

    #[test]
    fn shift_needs_intercept() {
        let t = TransformSpec::Shift { a: 1.0, b: 0.0, k: 1 };
        let e = Estimator::exact(vec![1.0, 2.0], false);
        assert!(matches!(t.apply_to_estimator(&e), Err(Error::ShiftRequiresIntercept)));
        assert!(matches!(t.apply_to_dataset(&line().with_intercept(false), None), Err(Error::ShiftRequiresIntercept)));
    }

    #[test]
    fn index_and_parameter_validation() {
        let e = est(&[1.0, 2.0]);
        assert!(matches!(TransformSpec::Scale { a: 1.0, b: 2.0, k: 2 }.apply_to_estimator(&e), Err(Error::IndexOutOfRange { .. })));
        assert!(TransformSpec::Scale { a: 0.0, b: 1.0, k: 1 }.apply_to_estimator(&e).is_err());
        assert!(TransformSpec::SwapVars { p: 1, q: 1 }.validate(3, None, true).is_err());
        assert!(TransformSpec::PermuteSamples { order: vec![0, 0, 1] }.validate(1, Some(3), true).is_err());
    }

    #[test]
    fn constrained_form_indices_are_shifted() {
        let e = Estimator::exact(vec![1.0, 2.0, 3.0], false);
        let t = TransformSpec::Scale { a: 1.0, b: -1.0, k: 3 };
        assert_eq!(t.apply_to_estimator(&e).unwrap().beta, vec![1.0, 2.0, -3.0]);
    }

    #[test]
    fn sample_swap_reorders_rows() {
        let t = TransformSpec::PermuteSamples { order: vec![2, 1, 0] };
        let out = t.apply_to_dataset(&line(), None).unwrap();
        assert_eq!(out, Dataset::from_points(&[(5.0, 11.0), (3.0, 7.0), (1.0, 3.0)], true).unwrap());
    }

    #[test]
    fn inserted_predicted_point() {
        let t = TransformSpec::InsertPoint { x: vec![7.0] };
        assert!(matches!(t.apply_to_dataset(&line(), None), Err(Error::MissingSourceOutput(_))));
        let out = t.apply_to_dataset(&line(), Some(&est(&[1.0, 2.0]))).unwrap();
        assert_eq!(out.n(), 4);
        assert_eq!((out.row(3)[0], out.y()[3]), (7.0, 15.0));
    }

    #[test]
    fn operator_norms() {
        assert_eq!(TransformSpec::Scale { a: 3.0, b: 0.5, k: 1 }.operator_norm(), 6.0);
        assert_eq!(TransformSpec::Shift { a: 1.0, b: 0.0, k: 1 }.operator_norm(), 1.0);
        let s = TransformSpec::Shift { a: 0.0, b: 2.0, k: 1 }.operator_norm();
        assert!((s - (1.0 + 2f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn bound_is_propagated_through_the_map() {
        let e = Estimator::with_delta_norm(vec![1.0, 2.0], true, 1e-10);
        let out = TransformSpec::Scale { a: 4.0, b: 1.0, k: 1 }.apply_to_estimator(&e).unwrap();
        assert!((out.delta_norm() - 4e-10).abs() < 1e-22);
    }
}
