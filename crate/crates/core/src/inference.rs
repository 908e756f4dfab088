//! α-approximation regions and intervals.
//!
//! A coefficient vector β belongs to the region when replacing the subset by
//! k Gaussian covariates beats `‖y − X_Sβ‖²` with probability at least α,
//! which reduces to `‖y − X_Sβ‖² ≤ rss_ls / B^{-1}(α; (n−k)/2, k/2)`.

use crate::error::{Error, Result};
use crate::regression::{dot, fit_ls, fit_ls_strict, Dataset};
use crate::special::{beta_inv_cdf, BetaParams};
use serde::Serialize;

/// Relative pivot below which a column is treated as dependent on the rest.
pub const PIVOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApproxRegion {
    pub subset: Vec<usize>,
    pub center: Vec<f64>,
    pub rss_ls: f64,
    pub radius_rss: f64,
    pub n: usize,
    pub k: usize,
    pub alpha: f64,
}

/// Ellipsoid form `(β − c)ᵀ G (β − c) ≤ r`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ellipsoid {
    pub center: Vec<f64>,
    /// Row-major `X_SᵀX_S`.
    pub shape: Vec<Vec<f64>>,
    pub bound: f64,
}

impl ApproxRegion {
    /// `‖y − X_Sβ‖²` for coefficients on the region's subset.
    pub fn rss_at(&self, data: &Dataset, beta: &[f64]) -> f64 {
        let fitted = data.x().combine(&self.subset, beta);
        data.y().iter().zip(&fitted).map(|(y, f)| (y - f) * (y - f)).sum()
    }

    pub fn contains(&self, data: &Dataset, beta: &[f64]) -> bool {
        self.rss_at(data, beta) <= self.radius_rss
    }

    pub fn ellipsoid(&self, data: &Dataset) -> Ellipsoid {
        let shape = self
            .subset
            .iter()
            .map(|&a| self.subset.iter().map(|&b| dot(data.x().column(a), data.x().column(b))).collect())
            .collect();
        Ellipsoid {
            center: self.center.clone(),
            shape,
            bound: self.radius_rss - self.rss_ls,
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("alpha must lie in (0,1), got {alpha}")))
    }
}

fn check_size(data: &Dataset, k: usize) -> Result<()> {
    if k == 0 || k >= data.dof() {
        return Err(Error::Domain(format!(
            "subset size {k} must be between 1 and n − 1 = {}",
            data.dof() - 1
        )));
    }
    Ok(())
}

pub fn region(data: &Dataset, subset: &[usize], alpha: f64) -> Result<ApproxRegion> {
    check_alpha(alpha)?;
    let (n, k) = (data.dof(), subset.len());
    check_size(data, k)?;
    let fit = fit_ls_strict(data.x(), data.y(), subset)?;
    let q = beta_inv_cdf(alpha, BetaParams::new((n - k) as f64 / 2.0, k as f64 / 2.0)?)?;
    Ok(ApproxRegion {
        subset: subset.to_vec(),
        center: fit.coefficients(),
        rss_ls: fit.rss(),
        radius_rss: fit.rss() / q,
        n,
        k,
        alpha,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApproxInterval {
    pub column: usize,
    pub center: f64,
    pub half_width: f64,
    /// `‖x_k − Proj_{S∖k} x_k‖²`, the inverse of `(X_SᵀX_S)^{-1}_{kk}`.
    pub sigma_k_sq: f64,
    pub rss_ls: f64,
    pub alpha: f64,
}

impl ApproxInterval {
    pub fn lower(&self) -> f64 {
        self.center - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.center + self.half_width
    }

    /// Predicted rss when the coefficient is moved to `center + λ` and the
    /// other coefficients are refitted.
    pub fn rss_at_offset(&self, lambda: f64) -> f64 {
        self.rss_ls + lambda * lambda * self.sigma_k_sq
    }
}

/// Interval for the coefficient of `column`, which must belong to `subset`.
pub fn interval(data: &Dataset, subset: &[usize], column: usize, alpha: f64) -> Result<ApproxInterval> {
    check_alpha(alpha)?;
    let (n, k) = (data.dof(), subset.len());
    check_size(data, k)?;
    let Some(pos) = subset.iter().position(|&c| c == column) else {
        return Err(Error::Domain(format!("column {} is not in the subset", column + 1)));
    };
    let fit = fit_ls_strict(data.x(), data.y(), subset)?;
    let inv_diag = fit.state.inverse_gram_diag()[pos];
    let sigma_k_sq = 1.0 / inv_diag;
    let col = data.x().column(column);
    if !(sigma_k_sq > PIVOT_TOL * dot(col, col)) {
        return Err(Error::Collinear { column });
    }
    let q = beta_inv_cdf(alpha, BetaParams::new((n - k) as f64 / 2.0, 0.5)?)?;
    let half_sq = fit.rss() / sigma_k_sq * (1.0 / q - 1.0);
    Ok(ApproxInterval {
        column,
        center: fit.coefficients()[pos],
        half_width: half_sq.max(0.0).sqrt(),
        sigma_k_sq,
        rss_ls: fit.rss(),
        alpha,
    })
}

/// Refit `y − (β_k + λ) x_k` on the other members of `subset`; returns the rss.
pub fn refit_with_offset(data: &Dataset, subset: &[usize], column: usize, center: f64, lambda: f64) -> Result<f64> {
    let shifted: Vec<f64> = data
        .y()
        .iter()
        .zip(data.x().column(column))
        .map(|(y, x)| y - (center + lambda) * x)
        .collect();
    let rest: Vec<usize> = subset.iter().copied().filter(|&c| c != column).collect();
    Ok(fit_ls(data.x(), &shifted, &rest)?.rss())
}
