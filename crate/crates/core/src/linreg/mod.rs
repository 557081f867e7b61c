//! Reference ordinary-least-squares solver and the closed-form estimator
//! updates used by the metamorphic relations.

pub(crate) mod qr;

use serde::{Deserialize, Serialize};

use crate::bounds::{self, BoundConfig};
use crate::dataset::{Dataset, NewPoint};
use crate::error::{Error, Result};
use crate::mr::TransformSpec;

pub use qr::rank_tolerance;

/// Fitted coefficients plus their forward-error bound.
///
/// `beta[0]` is the intercept in the intercept form; otherwise `beta[j]`
/// belongs to variable `x_{j+1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimator {
    pub beta: Vec<f64>,
    pub delta: Vec<f64>,
    pub has_intercept: bool,
}

impl Estimator {
    /// Estimator with a zero error bound, e.g. for hand-written expectations.
    pub fn exact(beta: Vec<f64>, has_intercept: bool) -> Self {
        let delta = vec![0.0; beta.len()];
        Self { beta, delta, has_intercept }
    }

    /// Attaches a norm bound, spread uniformly over the components.
    pub fn with_delta_norm(beta: Vec<f64>, has_intercept: bool, delta_norm: f64) -> Self {
        let per = delta_norm / (beta.len() as f64).sqrt();
        let delta = vec![per; beta.len()];
        Self { beta, delta, has_intercept }
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }

    pub fn delta_norm(&self) -> f64 {
        norm2(&self.delta)
    }

    pub fn is_finite(&self) -> bool {
        self.beta.iter().chain(self.delta.iter()).all(|v| v.is_finite())
    }
}

/// Intermediate QR solution with the design's extreme singular values.
#[derive(Debug, Clone)]
pub(crate) struct Solution {
    pub beta: Vec<f64>,
    pub sigma_max: f64,
    pub sigma_min: f64,
}

pub(crate) fn solve_detailed(ds: &Dataset) -> Result<Solution> {
    let (n, p) = (ds.n(), ds.n_coefficients());
    if n < p {
        return Err(Error::RankDeficient { sigma_min: 0.0, tolerance: 0.0 });
    }
    let mut a = ds.design_column_major();
    let mut rhs = ds.y().to_vec();
    let diag = qr::factor(&mut a, n, p, &mut rhs);
    let sv = qr::singular_values(&a, &diag, n, p);
    qr::check_rank(&sv, n, p)?;
    let beta = qr::back_substitute(&a, &diag, n, p, &rhs);
    Ok(Solution { beta, sigma_max: sv[0], sigma_min: sv[p - 1] })
}

/// Least-squares coefficients only, without the error bound.
///
/// This is the computation the built-in reference SUT performs.
pub fn solve(ds: &Dataset) -> Result<Vec<f64>> {
    solve_detailed(ds).map(|s| s.beta)
}

/// Fits `ds` and attaches the forward-error bound with the default safety factor.
pub fn fit(ds: &Dataset) -> Result<Estimator> {
    fit_with(ds, &BoundConfig::default())
}

pub fn fit_with(ds: &Dataset, cfg: &BoundConfig) -> Result<Estimator> {
    let sol = solve_detailed(ds)?;
    let bound = bounds::bound_from_solution(ds, &sol, cfg);
    Ok(Estimator::with_delta_norm(sol.beta, ds.has_intercept(), bound.delta_norm))
}

/// `β̂ₒ + Σ x_j β̂_j` (intercept form) or `Σ x_j β̂_j`.
pub fn predict(est: &Estimator, xrow: &[f64]) -> Result<f64> {
    let offset = usize::from(est.has_intercept);
    if xrow.len() + offset != est.beta.len() {
        return Err(Error::DimensionMismatch(format!("row has {} values, estimator has {} coefficients", xrow.len(), est.beta.len())));
    }
    let base = if est.has_intercept { est.beta[0] } else { 0.0 };
    Ok(xrow.iter().zip(&est.beta[offset..]).fold(base, |acc, (x, b)| acc + x * b))
}

/// Updates a fit for one extra sample without refitting:
/// `β* = β + G (y* − x*ᵀβ)` with `G = (XᵀX)⁻¹x* / (1 + x*ᵀ(XᵀX)⁻¹x*)`.
///
/// `(XᵀX)⁻¹x*` comes from two triangular solves against `R`; no inverse is formed.
pub fn rank1_update(ds: &Dataset, est: &Estimator, point: &NewPoint) -> Result<Estimator> {
    rank1_update_with(ds, est, point, &BoundConfig::default())
}

pub fn rank1_update_with(ds: &Dataset, est: &Estimator, point: &NewPoint, cfg: &BoundConfig) -> Result<Estimator> {
    let (n, p) = (ds.n(), ds.n_coefficients());
    if est.beta.len() != p || est.has_intercept != ds.has_intercept() {
        return Err(Error::DimensionMismatch(format!("estimator has {} coefficients, dataset needs {p}", est.beta.len())));
    }
    if point.xstar.len() != ds.d() {
        return Err(Error::DimensionMismatch(format!("x* has {} values, expected {}", point.xstar.len(), ds.d())));
    }
    let mut a = ds.design_column_major();
    let mut scratch = vec![0.0; n];
    let diag = qr::factor(&mut a, n, p, &mut scratch);
    let sv = qr::singular_values(&a, &diag, n, p);
    qr::check_rank(&sv, n, p)?;

    let mut xfull = Vec::with_capacity(p);
    if ds.has_intercept() {
        xfull.push(1.0);
    }
    xfull.extend_from_slice(&point.xstar);

    let w = qr::solve_upper_transposed(&a, &diag, n, p, &xfull);
    let z = qr::solve_upper(&a, &diag, n, p, &w);
    let denom = 1.0 + dot(&xfull, &z);
    let resid = point.ystar - dot(&xfull, &est.beta);
    let beta: Vec<f64> = est.beta.iter().zip(&z).map(|(b, zi)| b + zi / denom * resid).collect();

    let mut extended = ds.clone();
    extended.push_row(&point.xstar, point.ystar)?;
    let bound = bounds::forward_bound_with(&extended, &Estimator::exact(beta.clone(), ds.has_intercept()), cfg)?;
    Ok(Estimator::with_delta_norm(beta, ds.has_intercept(), bound.delta_norm))
}

/// Maps a source estimator to the analytically expected follow-up estimator.
pub fn transform_estimator(est: &Estimator, t: &TransformSpec) -> Result<Estimator> {
    t.apply_to_estimator(est)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> Dataset {
        Dataset::from_points(&[(1.0, 3.0), (3.0, 7.0), (5.0, 11.0)], true).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * (1.0 + y.abs()))
    }

    #[test]
    fn fits_the_worked_line() {
        let est = fit(&line()).unwrap();
        assert!(close(&est.beta, &[1.0, 2.0], 1e-12), "{:?}", est.beta);
        assert!(est.delta.iter().all(|d| *d >= 0.0));
    }

    #[test]
    fn all_zero_response_gives_zero_estimator() {
        let ds = Dataset::from_points(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)], true).unwrap();
        let est = fit(&ds).unwrap();
        assert!(est.beta.iter().all(|b| *b == 0.0), "{:?}", est.beta);
    }

    #[test]
    fn refit_is_bit_identical() {
        let ds = Dataset::new(4, 2, vec![1.0, 0.3, 2.0, -1.0, 3.5, 0.7, -2.0, 4.0], vec![1.0, 2.5, -0.5, 3.0], true).unwrap();
        let a = fit(&ds).unwrap();
        let b = fit(&ds).unwrap();
        let bits = |e: &Estimator| e.beta.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn constant_column_is_rank_deficient() {
        let ds = Dataset::from_points(&[(2.0, 1.0), (2.0, 3.0), (2.0, 4.0)], true).unwrap();
        assert!(matches!(fit(&ds), Err(Error::RankDeficient { .. })));
        let under = Dataset::new(1, 1, vec![1.0], vec![1.0], true).unwrap();
        assert!(matches!(fit(&under), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn predict_examples() {
        let est = Estimator::exact(vec![1.0, 2.0], true);
        assert_eq!(predict(&est, &[7.0]).unwrap(), 15.0);
        let est = Estimator::exact(vec![1.0, 2.0, 3.0], true);
        assert_eq!(predict(&est, &[1.0, 1.0]).unwrap(), 6.0);
        let est = Estimator::exact(vec![0.0; 3], true);
        assert_eq!(predict(&est, &[-4.0, 9.5]).unwrap(), 0.0);
        assert!(predict(&est, &[1.0]).is_err());
        let constrained = Estimator::exact(vec![2.0, 3.0], false);
        assert_eq!(predict(&constrained, &[1.0, 1.0]).unwrap(), 5.0);
    }

    #[test]
    fn rank1_update_on_predicted_point_is_identity() {
        let ds = line();
        let est = fit(&ds).unwrap();
        let upd = rank1_update(&ds, &est, &NewPoint::new(vec![7.0], 15.0).unwrap()).unwrap();
        assert!(close(&upd.beta, &[1.0, 2.0], 1e-12), "{:?}", upd.beta);
    }

    #[test]
    fn rank1_update_matches_refit_off_model() {
        let ds = line();
        let est = fit(&ds).unwrap();
        let point = NewPoint::new(vec![2.0], 0.0).unwrap();
        let upd = rank1_update(&ds, &est, &point).unwrap();
        let mut ext = ds.clone();
        ext.push_row(&point.xstar, point.ystar).unwrap();
        let refit = fit(&ext).unwrap();
        assert!(close(&upd.beta, &refit.beta, 1e-12), "{:?} vs {:?}", upd.beta, refit.beta);
    }

    #[test]
    fn constrained_form_fits_through_origin() {
        // y = 2 x1 + 3 x2 exactly.
        let ds = Dataset::new(3, 2, vec![1.0, 0.0, 0.0, 1.0, 1.0, 1.0], vec![2.0, 3.0, 5.0], false).unwrap();
        let est = fit(&ds).unwrap();
        assert!(close(&est.beta, &[2.0, 3.0], 1e-12));
        assert!(!est.has_intercept);
    }
}
