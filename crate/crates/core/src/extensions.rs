//! Stepwise selection with asymptotic P-values for Huber M-regression and
//! for smooth nonlinear (in particular logistic) regression.
//!
//! Both follow the least-squares procedure with the exact Beta inner
//! P-value replaced by a χ²₁ tail: for a candidate with improvement
//! statistic `t`, `u = P(χ²₁ > t)` and the order-statistic law over the
//! `q − k` pool is applied as in the exact case, so at ν = 1 the P-value is
//! `1 − Chisq₁(t)^{q−k}`.

use crate::error::{Error, Result};
use crate::par;
use crate::pvalues::{stepwise_outer, OuterLaw};
use crate::regression::Design;
use crate::selection::{SelectionConfig, SelectionTrace, Step, Termination};
use crate::special::{chisq_sf, normal_pdf};
use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub const MAX_ITER: usize = 500;
pub const OBJ_TOL: f64 = 1e-10;
pub const GRAD_TOL: f64 = 1e-10;
/// |linear predictor| above which a logistic fit counts as separated.
pub const SEPARATION_ETA: f64 = 30.0;
const SCALE_FLOOR: f64 = 1e-12;
const MAD_FACTOR: f64 = 1.4826;

/// How the pool-size exponent enters the asymptotic P-value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Exponent {
    /// `1 − F^{q−k}` with F the χ²₁ CDF at the statistic.
    #[default]
    OnCdf,
    /// `1 − F`: no adjustment for the pool.
    None,
}

/// Asymptotic P-value from a χ²₁ statistic for a pool of `q − k`
/// candidates, at order rank `nu`.
pub fn chisq_pvalue(stat: f64, k: usize, q: usize, nu: usize, law: OuterLaw, exponent: Exponent) -> Result<f64> {
    if !(stat >= 0.0) {
        return Err(Error::Domain(format!("negative improvement statistic {stat}")));
    }
    let u = chisq_sf(stat, 1.0)?;
    match exponent {
        Exponent::None => Ok(u),
        Exponent::OnCdf => stepwise_outer((u, 1.0 - u), k, q, nu, law),
    }
}

/// Huber's ρ with tuning constant `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HuberLoss {
    c: f64,
    /// `E ψ(Z)²` for standard normal Z.
    fisher: f64,
}

impl Default for HuberLoss {
    fn default() -> Self {
        HuberLoss::new(1.0).unwrap()
    }
}

impl HuberLoss {
    pub fn new(c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::Domain(format!("Huber constant must be positive, got {c}")));
        }
        let mut loss = HuberLoss { c, fisher: 0.0 };
        loss.fisher = loss.integrate_fisher();
        Ok(loss)
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn rho(&self, u: f64) -> f64 {
        let a = u.abs();
        if a <= self.c {
            0.5 * u * u
        } else {
            self.c * a - 0.5 * self.c * self.c
        }
    }

    pub fn psi(&self, u: f64) -> f64 {
        u.clamp(-self.c, self.c)
    }

    /// Second derivative; 1 on the seam |u| = c.
    pub fn psi_prime(&self, u: f64) -> f64 {
        if u.abs() <= self.c {
            1.0
        } else {
            0.0
        }
    }

    /// Fisher consistency factor `E ψ(Z)²`.
    pub fn fisher_factor(&self) -> f64 {
        self.fisher
    }

    fn integrate_fisher(&self) -> f64 {
        const UPPER: f64 = 40.0;
        let f = |z: f64| self.psi(z).powi(2) * normal_pdf(z);
        let inner = simpson(&f, 0.0, self.c.min(UPPER), 4000);
        let outer = if self.c < UPPER { simpson(&f, self.c, UPPER, 4000) } else { 0.0 };
        2.0 * (inner + outer)
    }
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let m = intervals + intervals % 2;
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// `1.4826 × MAD(y)`, floored at a tiny positive value.
pub fn initial_scale(y: &[f64]) -> f64 {
    let mut v = y.to_vec();
    let med = median(&mut v);
    let mut dev: Vec<f64> = y.iter().map(|x| (x - med).abs()).collect();
    let mad = MAD_FACTOR * median(&mut dev);
    if mad > SCALE_FLOOR {
        mad
    } else {
        warn!("degenerate response: scale floored at {SCALE_FLOOR}");
        SCALE_FLOOR
    }
}

/// Columns of a sub-model: an optional constant followed by `subset`.
#[derive(Clone, Copy)]
struct Cols<'a> {
    x: &'a Design,
    subset: &'a [usize],
    intercept: bool,
}

impl Cols<'_> {
    fn p(&self) -> usize {
        self.subset.len() + usize::from(self.intercept)
    }

    fn matrix(&self) -> DMatrix<f64> {
        let n = self.x.n();
        let mut m = DMatrix::zeros(n, self.p());
        let off = usize::from(self.intercept);
        if self.intercept {
            m.column_mut(0).fill(1.0);
        }
        for (j, &c) in self.subset.iter().enumerate() {
            m.column_mut(j + off).copy_from_slice(self.x.column(c));
        }
        m
    }
}

/// Solve `(AᵀWA) b = AᵀW z`.
fn weighted_ls(a: &DMatrix<f64>, w: &[f64], z: &[f64]) -> Option<DVector<f64>> {
    let p = a.ncols();
    let mut aw = a.clone();
    for (i, &wi) in w.iter().enumerate() {
        aw.row_mut(i).scale_mut(wi);
    }
    let lhs = aw.transpose() * a;
    let rhs = aw.transpose() * DVector::from_column_slice(z);
    if p == 0 {
        return Some(DVector::zeros(0));
    }
    lhs.cholesky().map(|c| c.solve(&rhs))
}

/// Huber fit of `y` on a subset at fixed scale.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MState {
    pub subset: Vec<usize>,
    pub coeffs: Vec<f64>,
    pub intercept: Option<f64>,
    pub sigma: f64,
    /// Mean loss `(1/n) Σ ρ(r_i/σ)`.
    pub s0: f64,
    pub residuals: Vec<f64>,
    /// `(1/n) Σ ψ(r_i/σ)²`.
    pub s0_rho1: f64,
    /// `Σ ψ'(r_i/σ)`.
    pub s0_rho2: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl MState {
    pub fn rss(&self) -> f64 {
        self.residuals.iter().map(|r| r * r).sum()
    }
}

fn m_objective(loss: &HuberLoss, r: &[f64], sigma: f64) -> f64 {
    r.iter().map(|&v| loss.rho(v / sigma)).sum::<f64>() / r.len() as f64
}

fn residuals(a: &DMatrix<f64>, y: &[f64], b: &DVector<f64>) -> Vec<f64> {
    if b.is_empty() {
        return y.to_vec();
    }
    let fit = a * b;
    y.iter().zip(fit.iter()).map(|(y, f)| y - f).collect()
}

/// Minimise the mean Huber loss by iteratively reweighted least squares.
/// `start` gives initial coefficients (constant first when `intercept`).
pub fn m_fit(
    x: &Design,
    y: &[f64],
    subset: &[usize],
    intercept: bool,
    sigma: f64,
    loss: &HuberLoss,
    start: Option<&[f64]>,
) -> Result<MState> {
    let n = x.n();
    if y.len() != n {
        return Err(Error::InvalidData("response length differs from the design".into()));
    }
    if !(sigma > 0.0) {
        return Err(Error::Domain(format!("scale must be positive, got {sigma}")));
    }
    let cols = Cols { x, subset, intercept };
    if cols.p() >= n {
        return Err(Error::Domain(format!("{} parameters for {n} observations", cols.p())));
    }
    let a = cols.matrix();
    let mut b = match start {
        Some(s) if s.len() == cols.p() => DVector::from_column_slice(s),
        _ => weighted_ls(&a, &vec![1.0; n], y).ok_or(Error::Collinear {
            column: subset.last().copied().unwrap_or(0),
        })?,
    };
    let mut r = residuals(&a, y, &b);
    let mut obj = m_objective(loss, &r, sigma);
    let mut converged = cols.p() == 0;
    let mut iterations = 0;
    while !converged && iterations < MAX_ITER {
        iterations += 1;
        let w: Vec<f64> = r
            .iter()
            .map(|&v| {
                let u = v / sigma;
                if u.abs() <= loss.c() {
                    1.0
                } else {
                    loss.c() / u.abs()
                }
            })
            .collect();
        let Some(next) = weighted_ls(&a, &w, y) else {
            return Err(Error::Collinear {
                column: subset.last().copied().unwrap_or(0),
            });
        };
        // Reweighting never increases the objective; halve if rounding says otherwise.
        let mut step = 1.0;
        let (mut cand, mut r_new, mut obj_new);
        loop {
            cand = &b + (&next - &b) * step;
            r_new = residuals(&a, y, &cand);
            obj_new = m_objective(loss, &r_new, sigma);
            if obj_new <= obj || step < 1e-10 {
                break;
            }
            step *= 0.5;
        }
        let change = (obj - obj_new).abs() / obj.abs().max(f64::MIN_POSITIVE);
        if obj_new <= obj {
            b = cand;
            r = r_new;
            obj = obj_new;
        }
        if change < OBJ_TOL {
            converged = true;
        }
    }
    if !converged {
        warn!("Huber fit did not converge in {MAX_ITER} iterations");
    }
    let s0_rho1 = r.iter().map(|&v| loss.psi(v / sigma).powi(2)).sum::<f64>() / n as f64;
    let s0_rho2 = r.iter().map(|&v| loss.psi_prime(v / sigma)).sum::<f64>();
    let (intercept_coef, coeffs) = split(&b, intercept);
    Ok(MState {
        subset: subset.to_vec(),
        coeffs,
        intercept: intercept_coef,
        sigma,
        s0: obj,
        residuals: r,
        s0_rho1,
        s0_rho2,
        iterations,
        converged,
    })
}

fn split(b: &DVector<f64>, intercept: bool) -> (Option<f64>, Vec<f64>) {
    if intercept {
        (Some(b[0]), b.iter().skip(1).copied().collect())
    } else {
        (None, b.iter().copied().collect())
    }
}

fn start_vector(intercept: Option<f64>, coeffs: &[f64], extra: usize) -> Vec<f64> {
    intercept.into_iter().chain(coeffs.iter().copied()).chain(std::iter::repeat_n(0.0, extra)).collect()
}

/// Improvement statistic `2 s0(ρ'')/s0(ρ') · (s0 − s_ν)`.
pub fn m_statistic(state: &MState, s_nu: f64) -> Result<f64> {
    let gain = state.s0 - s_nu;
    if gain < -1e-12 * state.s0.abs().max(1e-300) {
        return Err(Error::Domain(format!("loss increased from {} to {s_nu}", state.s0)));
    }
    if state.s0_rho1 <= 0.0 {
        return Ok(if gain > 0.0 { f64::INFINITY } else { 0.0 });
    }
    Ok(2.0 * state.s0_rho2 / state.s0_rho1 * gain.max(0.0))
}

/// Asymptotic stepwise P-value of a candidate with mean loss `s_nu`.
pub fn m_pval(state: &MState, s_nu: f64, q: usize, k: usize) -> Result<f64> {
    chisq_pvalue(m_statistic(state, s_nu)?, k, q, 1, OuterLaw::Pool, Exponent::OnCdf)
}

/// Scale after a covariate has been added: residuals `r1` of the enlarged
/// fit at scale `sigma0`, `k1` fitted parameters.
pub fn m_scale_update(r1: &[f64], sigma0: f64, k1: usize, loss: &HuberLoss) -> Result<f64> {
    let n = r1.len();
    if n <= k1 {
        return Err(Error::Domain(format!("no degrees of freedom left (n={n}, k={k1})")));
    }
    let s: f64 = r1.iter().map(|&r| loss.psi(r / sigma0).powi(2)).sum();
    let sigma1 = sigma0 * (s / ((n - k1) as f64 * loss.fisher_factor())).sqrt();
    if sigma1 > SCALE_FLOOR {
        Ok(sigma1)
    } else {
        warn!("residuals vanished: scale floored at {SCALE_FLOOR}");
        Ok(SCALE_FLOOR)
    }
}

fn empty_trace(asymptotic: bool) -> SelectionTrace {
    SelectionTrace {
        steps: Vec::new(),
        chosen: Vec::new(),
        final_pvalues: Vec::new(),
        coeffs: Vec::new(),
        intercept: None,
        rss: 0.0,
        termination: Termination::PoolExhausted,
        final_pass_applied: false,
        asymptotic,
        warnings: Vec::new(),
    }
}

/// Best candidate by a score to be minimised; ties to the lowest index.
fn argmin(scores: &[(usize, Option<f64>)]) -> Option<(usize, f64)> {
    scores
        .iter()
        .filter_map(|&(i, s)| s.map(|s| (i, s)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
}

/// Stepwise Huber regression; the scale is refreshed after every accepted
/// covariate.
pub fn m_stepwise(x: &Design, y: &[f64], intercept: bool, cfg: &SelectionConfig, loss: &HuberLoss) -> Result<SelectionTrace> {
    cfg.validate()?;
    let (n, q) = (x.n(), x.q());
    let n_eff = n - usize::from(intercept);
    let kmx = cfg.kmx.unwrap_or(usize::MAX).min(n_eff.saturating_sub(2)).min(q);
    let mut sigma = initial_scale(y);
    let mut state = m_fit(x, y, &[], intercept, sigma, loss, None)?;
    let mut trace = empty_trace(true);
    let mut pool: Vec<usize> = (0..q).collect();
    let termination = loop {
        let k = state.subset.len();
        if k >= kmx {
            break Termination::MaxSize;
        }
        if pool.is_empty() {
            break Termination::PoolExhausted;
        }
        let start = start_vector(state.intercept, &state.coeffs, 1);
        let scores = par::map_slice(cfg.exec, &pool, |&c| {
            let mut s = state.subset.clone();
            s.push(c);
            (c, m_fit(x, y, &s, intercept, sigma, loss, Some(&start)).ok().map(|f| f.s0))
        });
        let Some((b, s_nu)) = argmin(&scores) else {
            break Termination::NoAdmissibleCandidate;
        };
        let stat = m_statistic(&state, s_nu.min(state.s0))?;
        let pvalue = chisq_pvalue(stat, k, q, cfg.nu.min(q - k), cfg.outer_law, Exponent::OnCdf)?;
        let forced = k < cfg.kmn;
        if !forced && pvalue > cfg.alpha {
            break Termination::PvalueAboveAlpha { index: b, pvalue };
        }
        let mut subset = state.subset.clone();
        subset.push(b);
        let grown = m_fit(x, y, &subset, intercept, sigma, loss, Some(&start))?;
        sigma = m_scale_update(&grown.residuals, sigma, subset.len() + usize::from(intercept), loss)?;
        let warm = start_vector(grown.intercept, &grown.coeffs, 0);
        state = m_fit(x, y, &subset, intercept, sigma, loss, Some(&warm))?;
        pool.retain(|&c| c != b);
        trace.steps.push(Step {
            index: b,
            pvalue,
            rss: state.rss(),
            forced,
        });
    };
    trace.termination = termination;
    trace.chosen = state.subset.clone();
    trace.coeffs = state.coeffs.clone();
    trace.intercept = state.intercept;
    trace.rss = state.rss();
    let k = trace.chosen.len();
    for pos in 0..k {
        let rest: Vec<usize> = trace.chosen.iter().enumerate().filter(|&(j, _)| j != pos).map(|(_, &c)| c).collect();
        let reduced = m_fit(x, y, &rest, intercept, sigma, loss, None)?;
        let stat = m_statistic(&reduced, state.s0.min(reduced.s0))?;
        trace.final_pvalues.push(chisq_pvalue(stat, k - 1, q, 1, cfg.outer_law, Exponent::OnCdf)?);
    }
    Ok(trace)
}

/// Link function of a nonlinear regression `y ≈ g(xᵀβ)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    Identity,
    #[default]
    Logistic,
}

impl Link {
    pub fn g(self, u: f64) -> f64 {
        match self {
            Link::Identity => u,
            Link::Logistic => {
                if u >= 0.0 {
                    1.0 / (1.0 + (-u).exp())
                } else {
                    let e = u.exp();
                    e / (1.0 + e)
                }
            }
        }
    }

    pub fn g1(self, u: f64) -> f64 {
        match self {
            Link::Identity => 1.0,
            Link::Logistic => {
                let p = self.g(u);
                p * (1.0 - p)
            }
        }
    }
}

/// Least-squares fit of `g(Xβ)` to `y`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonlinState {
    pub subset: Vec<usize>,
    pub link: Link,
    pub coeffs: Vec<f64>,
    pub intercept: Option<f64>,
    /// Mean squared residual.
    pub ss0: f64,
    pub residuals: Vec<f64>,
    /// Linear predictor `xᵢᵀβ`.
    pub eta: Vec<f64>,
    /// `Σ g'(ηᵢ)²`.
    pub sum_g1_sq: f64,
    /// `Σ rᵢ² g'(ηᵢ)²`.
    pub sum_r2_g1_sq: f64,
    pub separable: bool,
    pub iterations: usize,
    pub converged: bool,
}

impl NonlinState {
    /// Fitted values `g(ηᵢ)`.
    pub fn fitted(&self) -> Vec<f64> {
        self.eta.iter().map(|&e| self.link.g(e)).collect()
    }
}

fn nonlin_eval(a: &DMatrix<f64>, y: &[f64], b: &DVector<f64>, link: Link) -> (Vec<f64>, Vec<f64>, f64) {
    let eta: Vec<f64> = if b.is_empty() { vec![0.0; y.len()] } else { (a * b).iter().copied().collect() };
    let r: Vec<f64> = y.iter().zip(&eta).map(|(y, &e)| y - link.g(e)).collect();
    let ss = r.iter().map(|v| v * v).sum::<f64>() / y.len() as f64;
    (eta, r, ss)
}

/// Gauss–Newton with step halving. `start` gives initial coefficients
/// (constant first when `intercept`); the default starts the constant at
/// `g⁻¹(ȳ)` for the logistic link.
pub fn nonlin_fit(
    x: &Design,
    y: &[f64],
    subset: &[usize],
    intercept: bool,
    link: Link,
    start: Option<&[f64]>,
) -> Result<NonlinState> {
    let n = x.n();
    let cols = Cols { x, subset, intercept };
    if cols.p() >= n {
        return Err(Error::Domain(format!("{} parameters for {n} observations", cols.p())));
    }
    let a = cols.matrix();
    let mut b = match start {
        Some(s) if s.len() == cols.p() => DVector::from_column_slice(s),
        _ => {
            let mut b = DVector::zeros(cols.p());
            if intercept && link == Link::Logistic {
                let m = (y.iter().sum::<f64>() / n as f64).clamp(1e-6, 1.0 - 1e-6);
                b[0] = (m / (1.0 - m)).ln();
            }
            b
        }
    };
    let (mut eta, mut r, mut ss) = nonlin_eval(&a, y, &b, link);
    let mut iterations = 0;
    let mut converged = cols.p() == 0;
    while !converged && iterations < MAX_ITER {
        iterations += 1;
        let g1: Vec<f64> = eta.iter().map(|&e| link.g1(e)).collect();
        let mut j = a.clone();
        for (i, &d) in g1.iter().enumerate() {
            j.row_mut(i).scale_mut(d);
        }
        let rv = DVector::from_column_slice(&r);
        let grad = j.transpose() * &rv;
        if grad.amax() / (n as f64) < GRAD_TOL {
            converged = true;
            break;
        }
        let jtj = j.transpose() * &j;
        let Some(delta) = jtj.cholesky().map(|c| c.solve(&grad)) else {
            return Err(Error::Collinear {
                column: subset.last().copied().unwrap_or(0),
            });
        };
        let mut step = 1.0;
        let mut improved = false;
        while step >= 1e-12 {
            let cand = &b + &delta * step;
            let (e2, r2, s2) = nonlin_eval(&a, y, &cand, link);
            if s2 <= ss {
                let change = (ss - s2) / ss.max(f64::MIN_POSITIVE);
                b = cand;
                eta = e2;
                r = r2;
                ss = s2;
                improved = true;
                if change < 1e-15 {
                    converged = true;
                }
                break;
            }
            step *= 0.5;
        }
        if !improved {
            // No descent along the Gauss–Newton direction: stationary to rounding.
            converged = true;
        }
    }
    if !converged {
        warn!("nonlinear fit did not converge in {MAX_ITER} iterations");
    }
    let g1: Vec<f64> = eta.iter().map(|&e| link.g1(e)).collect();
    let sum_g1_sq = g1.iter().map(|d| d * d).sum();
    let sum_r2_g1_sq = r.iter().zip(&g1).map(|(r, d)| r * r * d * d).sum();
    let separable = link == Link::Logistic && eta.iter().any(|e| e.abs() > SEPARATION_ETA);
    let (intercept_coef, coeffs) = split(&b, intercept);
    Ok(NonlinState {
        subset: subset.to_vec(),
        link,
        coeffs,
        intercept: intercept_coef,
        ss0: ss,
        residuals: r,
        eta,
        sum_g1_sq,
        sum_r2_g1_sq,
        separable,
        iterations,
        converged,
    })
}

/// `n (ss0 − ss_ν) Σg'² / Σr²g'²`, asymptotically χ²₁ for a pure-noise
/// candidate.
pub fn nonlin_statistic(state: &NonlinState, ss_nu: f64) -> Result<f64> {
    let gain = state.ss0 - ss_nu;
    if gain < -1e-12 * state.ss0.max(1e-300) {
        return Err(Error::Domain(format!("mean squared residual increased from {} to {ss_nu}", state.ss0)));
    }
    if state.sum_r2_g1_sq <= 0.0 {
        return Ok(if gain > 0.0 { f64::INFINITY } else { 0.0 });
    }
    let n = state.residuals.len() as f64;
    Ok(n * gain.max(0.0) * state.sum_g1_sq / state.sum_r2_g1_sq)
}

/// Asymptotic stepwise P-value of a candidate with mean squared residual `ss_nu`.
pub fn nonlin_pval(state: &NonlinState, ss_nu: f64, q: usize, k: usize) -> Result<f64> {
    chisq_pvalue(nonlin_statistic(state, ss_nu)?, k, q, 1, OuterLaw::Pool, Exponent::OnCdf)
}

/// Stepwise selection for `y ≈ g(Xβ)`. Candidates whose fit separates are
/// skipped with a warning.
pub fn nonlin_stepwise(x: &Design, y: &[f64], intercept: bool, link: Link, cfg: &SelectionConfig) -> Result<SelectionTrace> {
    cfg.validate()?;
    let (n, q) = (x.n(), x.q());
    if y.len() != n {
        return Err(Error::InvalidData("response length differs from the design".into()));
    }
    let n_eff = n - usize::from(intercept);
    let kmx = cfg.kmx.unwrap_or(usize::MAX).min(n_eff.saturating_sub(2)).min(q);
    let mut state = nonlin_fit(x, y, &[], intercept, link, None)?;
    let mut trace = empty_trace(true);
    let mut pool: Vec<usize> = (0..q).collect();
    let termination = loop {
        let k = state.subset.len();
        if k >= kmx {
            break Termination::MaxSize;
        }
        if pool.is_empty() {
            break Termination::PoolExhausted;
        }
        let start = start_vector(state.intercept, &state.coeffs, 1);
        let fits = par::map_slice(cfg.exec, &pool, |&c| {
            let mut s = state.subset.clone();
            s.push(c);
            nonlin_fit(x, y, &s, intercept, link, Some(&start)).ok()
        });
        let mut scores = Vec::with_capacity(pool.len());
        let mut separated = Vec::new();
        for (&c, f) in pool.iter().zip(&fits) {
            match f {
                Some(f) if f.separable => {
                    let msg = format!("covariate {} ({}) separates the response; skipped", c + 1, x.name(c));
                    warn!("{msg}");
                    trace.warnings.push(msg);
                    separated.push(c);
                    scores.push((c, None));
                }
                Some(f) => scores.push((c, Some(f.ss0))),
                None => scores.push((c, None)),
            }
        }
        pool.retain(|c| !separated.contains(c));
        let Some((b, ss_nu)) = argmin(&scores) else {
            break Termination::NoAdmissibleCandidate;
        };
        let stat = nonlin_statistic(&state, ss_nu.min(state.ss0))?;
        let pvalue = chisq_pvalue(stat, k, q, cfg.nu.min(q - k), cfg.outer_law, Exponent::OnCdf)?;
        let forced = k < cfg.kmn;
        if !forced && pvalue > cfg.alpha {
            break Termination::PvalueAboveAlpha { index: b, pvalue };
        }
        let mut subset = state.subset.clone();
        subset.push(b);
        state = nonlin_fit(x, y, &subset, intercept, link, Some(&start))?;
        pool.retain(|&c| c != b);
        trace.steps.push(Step {
            index: b,
            pvalue,
            rss: state.ss0 * n as f64,
            forced,
        });
    };
    trace.termination = termination;
    trace.chosen = state.subset.clone();
    trace.coeffs = state.coeffs.clone();
    trace.intercept = state.intercept;
    trace.rss = state.ss0 * n as f64;
    let k = trace.chosen.len();
    for pos in 0..k {
        let rest: Vec<usize> = trace.chosen.iter().enumerate().filter(|&(j, _)| j != pos).map(|(_, &c)| c).collect();
        let reduced = nonlin_fit(x, y, &rest, intercept, link, None)?;
        let stat = nonlin_statistic(&reduced, state.ss0.min(reduced.ss0))?;
        trace.final_pvalues.push(chisq_pvalue(stat, k - 1, q, 1, cfg.outer_law, Exponent::OnCdf)?);
    }
    Ok(trace)
}

/// Logistic stepwise selection with an intercept; `y` must be 0/1.
pub fn logistic_stepwise(x: &Design, y: &[f64], cfg: &SelectionConfig) -> Result<SelectionTrace> {
    if let Some(bad) = y.iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidData(format!("logistic response must be 0 or 1, found {bad}")));
    }
    nonlin_stepwise(x, y, true, Link::Logistic, cfg)
}
