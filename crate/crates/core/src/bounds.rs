//! Forward-error bound for a computed least-squares estimator.
//!
//! The bound is the classical first-order least-squares perturbation result:
//! a normwise backward error `c·u` times the least-squares condition number
//!
//! ```text
//! κ_LS = κ₂(X) + κ₂(X)² ‖r‖₂ / (‖X‖₂ ‖β̂‖₂)
//! ```
//!
//! giving `‖δ‖₂ = c·u·κ_LS·‖β̂‖₂`, where `u` is the unit roundoff of `f64`,
//! `r = y − Xβ̂` and `c` defaults to `10·(n + d + 1)`. When `β̂ = 0` exactly the
//! relative form is meaningless and `c·u·κ₂(X)·‖y‖₂/σ_min` is used instead.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linreg::{self, norm2, qr, Estimator, Solution};

/// Unit roundoff of binary64.
pub const UNIT_ROUNDOFF: f64 = f64::EPSILON / 2.0;

/// Multiplier in the default safety factor `c = 10·(n + d + 1)`.
pub const DEFAULT_SAFETY_PER_DIMENSION: f64 = 10.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundConfig {
    /// Fixed safety factor `c`; `None` selects `10·(n + d + 1)`.
    pub safety_factor: Option<f64>,
}

impl BoundConfig {
    pub fn with_safety_factor(c: f64) -> Self {
        Self { safety_factor: Some(c) }
    }

    pub fn safety_factor_for(&self, n: usize, d: usize) -> f64 {
        self.safety_factor.unwrap_or(DEFAULT_SAFETY_PER_DIMENSION * (n + d + 1) as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBound {
    /// 2-norm condition number of the design matrix.
    pub kappa: f64,
    /// Normwise backward-error bound `c·u`.
    pub backward: f64,
    pub delta_norm: f64,
}

impl ErrorBound {
    pub fn zero() -> Self {
        Self { kappa: 1.0, backward: 0.0, delta_norm: 0.0 }
    }

    /// Same bound scaled by `factor` (used when an estimator is pushed through
    /// a linear map with that operator norm).
    pub fn scaled(self, factor: f64) -> Self {
        Self { delta_norm: self.delta_norm * factor.abs(), ..self }
    }
}

/// Extreme singular values of the design matrix, rank-checked.
pub(crate) fn design_extremes(ds: &Dataset) -> Result<(f64, f64)> {
    let (n, p) = (ds.n(), ds.n_coefficients());
    if n < p {
        return Err(Error::RankDeficient { sigma_min: 0.0, tolerance: 0.0 });
    }
    let mut a = ds.design_column_major();
    let mut scratch = vec![0.0; n];
    let diag = qr::factor(&mut a, n, p, &mut scratch);
    let sv = qr::singular_values(&a, &diag, n, p);
    qr::check_rank(&sv, n, p)?;
    Ok((sv[0], sv[p - 1]))
}

/// `κ₂(X) = σ_max / σ_min` of the design matrix (intercept column included).
pub fn condition_number(ds: &Dataset) -> Result<f64> {
    let (smax, smin) = design_extremes(ds)?;
    Ok(smax / smin)
}

/// `c·u·(κ‖β‖ + κ²‖r‖/‖X‖)`, i.e. `c·u·κ_LS·‖β‖`.
pub fn ls_forward_bound(c: f64, kappa: f64, x_norm: f64, beta_norm: f64, resid_norm: f64) -> f64 {
    c * UNIT_ROUNDOFF * (kappa * beta_norm + kappa * kappa * resid_norm / x_norm)
}

pub fn forward_bound(ds: &Dataset, est: &Estimator) -> Result<ErrorBound> {
    forward_bound_with(ds, est, &BoundConfig::default())
}

pub fn forward_bound_with(ds: &Dataset, est: &Estimator, cfg: &BoundConfig) -> Result<ErrorBound> {
    if est.beta.len() != ds.n_coefficients() {
        return Err(Error::DimensionMismatch(format!(
            "estimator has {} coefficients, dataset needs {}",
            est.beta.len(),
            ds.n_coefficients()
        )));
    }
    if est.beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::NonFinite("estimator".into()));
    }
    let (smax, smin) = design_extremes(ds)?;
    Ok(assemble(ds, &est.beta, smax, smin, cfg))
}

pub(crate) fn bound_from_solution(ds: &Dataset, sol: &Solution, cfg: &BoundConfig) -> ErrorBound {
    assemble(ds, &sol.beta, sol.sigma_max, sol.sigma_min, cfg)
}

fn assemble(ds: &Dataset, beta: &[f64], smax: f64, smin: f64, cfg: &BoundConfig) -> ErrorBound {
    let c = cfg.safety_factor_for(ds.n(), ds.d());
    let kappa = smax / smin;
    let beta_norm = norm2(beta);
    let delta_norm = if beta_norm == 0.0 {
        c * UNIT_ROUNDOFF * kappa * norm2(ds.y()) / smin
    } else {
        ls_forward_bound(c, kappa, smax, beta_norm, residual_norm(ds, beta))
    };
    ErrorBound { kappa, backward: c * UNIT_ROUNDOFF, delta_norm }
}

/// `‖y − Xβ‖₂`.
pub fn residual_norm(ds: &Dataset, beta: &[f64]) -> f64 {
    let offset = usize::from(ds.has_intercept());
    let base = if ds.has_intercept() { beta[0] } else { 0.0 };
    (0..ds.n())
        .map(|i| {
            let fitted = base + linreg::dot(ds.row(i), &beta[offset..]);
            let r = ds.y()[i] - fitted;
            r * r
        })
        .sum::<f64>()
        .sqrt()
}
