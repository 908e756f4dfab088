//! Gaussian-covariate P-values.
//!
//! All functions take the effective sample size `n` (already reduced by one
//! when the data were centred for an intercept). Ratios are passed together
//! with their complements so that P-values near 0 and 1 keep full precision.

use crate::error::{Error, Result};
use crate::special::{beta_cdf_xy, beta_inv_cdf, beta_inv_sf, beta_tails_xy, f_sf, BetaParams};
use serde::{Deserialize, Serialize};

/// Order-statistic law used for the outer distribution of the stepwise P-value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OuterLaw {
    /// `Beta_{ν, q−k+1−ν}`: the ν-th smallest of the q−k pool members.
    #[default]
    Pool,
    /// `Beta_{ν, q−k+2−ν}`: pool counted with one extra member.
    PoolPlusOne,
}

fn shape(a: f64, b: f64) -> Result<BetaParams> {
    Ok(BetaParams::new(a, b)?)
}

/// `(rss/rss0, (rss0 − rss)/rss0)`, validated.
fn ratio_pair(rss: f64, rss0: f64) -> Result<(f64, f64)> {
    if !(rss0 > 0.0) || !(rss >= 0.0) || !rss0.is_finite() {
        return Err(Error::Domain(format!("invalid sums of squares rss={rss}, rss0={rss0}")));
    }
    if rss > rss0 * (1.0 + 1e-12) {
        return Err(Error::Domain(format!(
            "rss {rss} exceeds the rss {rss0} of the smaller model"
        )));
    }
    let r = (rss / rss0).min(1.0);
    let c = ((rss0 - rss) / rss0).max(0.0);
    Ok((r, c))
}

/// Joint P-value of `k − k0` covariates: `Beta_{(n−k)/2,(k−k0)/2}(rss/rss0)`.
pub fn pval_joint(rss: f64, rss0: f64, n: usize, k: usize, k0: usize) -> Result<f64> {
    if k0 >= k || k >= n {
        return Err(Error::Domain(format!("need k0 < k < n (k0={k0}, k={k}, n={n})")));
    }
    let (r, c) = ratio_pair(rss, rss0)?;
    let params = shape((n - k) as f64 / 2.0, (k - k0) as f64 / 2.0)?;
    Ok(beta_cdf_xy(r, c, params)?)
}

/// The same P-value through the F distribution.
pub fn pval_joint_f(rss: f64, rss0: f64, n: usize, k: usize, k0: usize) -> Result<f64> {
    if k0 >= k || k >= n {
        return Err(Error::Domain(format!("need k0 < k < n (k0={k0}, k={k}, n={n})")));
    }
    ratio_pair(rss, rss0)?;
    if rss == 0.0 {
        return Ok(0.0);
    }
    let (d1, d2) = ((k - k0) as f64, (n - k) as f64);
    let stat = ((rss0 - rss) / d1) / (rss / d2);
    Ok(f_sf(stat, d1, d2)?)
}

/// P-value of member `i` of a k-subset against the Gaussian competitors:
/// `Beta_{1,q−k+1}(Beta_{(n−k)/2,1/2}(rss_k / rss_{k,−i}))`.
pub fn pval_all_subset(rss_k: f64, rss_k_minus_i: f64, n: usize, k: usize, q: usize) -> Result<f64> {
    if k == 0 || k >= n || k > q {
        return Err(Error::Domain(format!("need 1 ≤ k ≤ q and k < n (k={k}, q={q}, n={n})")));
    }
    let (r, c) = ratio_pair(rss_k, rss_k_minus_i)?;
    let params = shape((n - k) as f64 / 2.0, 0.5)?;
    let m = (q - k + 1) as f64;
    let (lower, upper) = beta_tails_xy(r, c, params)?;
    Ok(one_minus_pow(lower, upper, m))
}

/// Stepwise P-value of the best candidate `b` given the current k-subset:
/// `Beta_{ν,q−k+1−ν}(Beta_{(n−k−1)/2,1/2}(rss_{k,+b} / rss_k))`.
pub fn pval_stepwise(
    rss_k_plus_b: f64,
    rss_k: f64,
    n: usize,
    k: usize,
    q: usize,
    nu: usize,
    law: OuterLaw,
) -> Result<f64> {
    let (r, c) = ratio_pair(rss_k_plus_b, rss_k)?;
    pval_stepwise_ratio(r, c, n, k, q, nu, law)
}

/// [`pval_stepwise`] from the ratio `r = rss_{k,+b}/rss_k` and `c = 1 − r`.
pub fn pval_stepwise_ratio(r: f64, c: f64, n: usize, k: usize, q: usize, nu: usize, law: OuterLaw) -> Result<f64> {
    let inner = stepwise_inner(r, c, n, k)?;
    stepwise_outer(inner, k, q, nu, law)
}

/// Inner value `(u, 1 − u)` of the stepwise P-value.
pub fn stepwise_inner(r: f64, c: f64, n: usize, k: usize) -> Result<(f64, f64)> {
    if k + 1 >= n {
        return Err(Error::Domain(format!("no residual degrees of freedom (k={k}, n={n})")));
    }
    let inner = shape((n - k - 1) as f64 / 2.0, 0.5)?;
    Ok(beta_tails_xy(r, c, inner)?)
}

/// Outer order-statistic law applied to an inner value.
pub fn stepwise_outer((u, uc): (f64, f64), k: usize, q: usize, nu: usize, law: OuterLaw) -> Result<f64> {
    if k >= q {
        return Err(Error::Domain(format!("empty candidate pool (k={k}, q={q})")));
    }
    let pool = q - k;
    if nu == 0 || nu > pool {
        return Err(Error::Domain(format!("rank ν={nu} outside 1..={pool}")));
    }
    let m = match law {
        OuterLaw::Pool => pool,
        OuterLaw::PoolPlusOne => pool + 1,
    };
    if m == 1 {
        return Ok(u);
    }
    if nu == 1 {
        return Ok(one_minus_pow(u, uc, m as f64));
    }
    let outer = shape(nu as f64, (m + 1 - nu) as f64)?;
    Ok(beta_cdf_xy(u, uc, outer)?)
}

/// Inner P-value at which the ν = 1 stepwise P-value equals `alpha`:
/// `1 − (1 − α)^{1/m}` for a pool of size `m`.
pub fn inner_threshold(alpha: f64, pool: usize) -> f64 {
    -((-alpha).ln_1p() / pool as f64).exp_m1()
}

/// Correlation threshold `κ_{n,q} = sqrt(B^{-1}_{1/2,(n−1)/2}((1−α)^{1/q}))`.
///
/// With `n' = n − k`, `q' = q − k` the ν = 1 stepwise test accepts `b` iff
/// `(x̃_bᵀr)² / (‖x̃_b‖² rss_k) ≥ κ²_{n',q'}`.
pub fn kappa(n: usize, q: usize, alpha: f64) -> Result<f64> {
    if n < 2 || q == 0 || !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("kappa needs n ≥ 2, q ≥ 1, 0 < α < 1 (n={n}, q={q}, α={alpha})")));
    }
    let params = shape(0.5, (n - 1) as f64 / 2.0)?;
    let delta = inner_threshold(alpha, q);
    let x = if delta > 0.5 {
        beta_inv_cdf(((-alpha).ln_1p() / q as f64).exp(), params)?
    } else {
        beta_inv_sf(delta, params)?
    };
    Ok(x.sqrt())
}

fn clamp(p: f64) -> f64 {
    // `+ 0.0` turns a negative zero positive.
    p.clamp(0.0, 1.0) + 0.0
}

/// `1 − (1 − u)^m`, taking `log(1 − u)` from whichever of `u`, `uc = 1 − u`
/// is accurate.
fn one_minus_pow(u: f64, uc: f64, m: f64) -> f64 {
    let log_uc = if u < 0.5 { (-u).ln_1p() } else { uc.ln() };
    clamp(-(m * log_uc).exp_m1())
}
