//! Stepwise (`f1st`), repeated (`f2st`, `f3st`) and all-subsets (`fasb`)
//! selection.

use crate::error::{Error, Result};
use crate::par::{self, Exec};
use crate::pvalues::{pval_all_subset, pval_stepwise, OuterLaw};
use crate::regression::{fit_ls_strict, Dataset, Design, FitState, SubsetGram};
use log::warn;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Largest universe `fasb` enumerates exhaustively.
pub const FASB_CAP: usize = 25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub alpha: f64,
    pub nu: usize,
    /// Number of leading steps accepted without the α test.
    pub kmn: usize,
    /// Cap on the subset size; `None` means `min(n − 2, q)`.
    pub kmx: Option<usize>,
    pub final_pass: bool,
    pub final_pass_limit: usize,
    /// Exclusion depth for `f3st`.
    pub m: usize,
    pub outer_law: OuterLaw,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            alpha: 0.01,
            nu: 1,
            kmn: 0,
            kmx: None,
            final_pass: true,
            final_pass_limit: 20,
            m: 1,
            outer_law: OuterLaw::Pool,
            exec: Exec::default(),
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Domain(format!("alpha must lie in (0,1), got {}", self.alpha)));
        }
        if self.nu == 0 {
            return Err(Error::Domain("nu must be at least 1".into()));
        }
        if let Some(kmx) = self.kmx {
            if self.kmn > kmx {
                return Err(Error::Domain(format!("kmn={} exceeds kmx={kmx}", self.kmn)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Step {
    pub index: usize,
    pub pvalue: f64,
    pub rss: f64,
    pub forced: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum Termination {
    /// The best remaining candidate failed the α test.
    PvalueAboveAlpha { index: usize, pvalue: f64 },
    /// Every remaining candidate is collinear with the selected span.
    NoAdmissibleCandidate,
    /// The size cap `kmx` was reached.
    MaxSize,
    /// The residual vanished.
    PerfectFit,
    /// The candidate pool is empty.
    PoolExhausted,
    /// Stepwise found covariates but no subset of them passed the final pass.
    NoQualifyingSubset,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionTrace {
    pub steps: Vec<Step>,
    /// Final subset, in order of inclusion.
    pub chosen: Vec<usize>,
    /// All-subset P-value of each chosen covariate within the final set.
    pub final_pvalues: Vec<f64>,
    pub coeffs: Vec<f64>,
    pub intercept: Option<f64>,
    pub rss: f64,
    pub termination: Termination,
    pub final_pass_applied: bool,
    /// P-values are asymptotic rather than exact.
    pub asymptotic: bool,
    pub warnings: Vec<String>,
}

impl SelectionTrace {
    pub fn is_empty(&self) -> bool {
        self.chosen.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetApproximation {
    /// Column indices, ascending.
    pub indices: Vec<usize>,
    pub rss: f64,
    pub pvalues: Vec<f64>,
    pub coeffs: Vec<f64>,
}

/// Regression problem restricted to a pool of candidate columns.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub x: &'a Design,
    pub y: &'a [f64],
    /// Effective sample size for the Beta shapes.
    pub n: usize,
    pub pool: &'a [usize],
}

impl<'a> Problem<'a> {
    pub fn q(&self) -> usize {
        self.pool.len()
    }
}

/// Stepwise selection over all columns of `data`.
pub fn f1st(data: &Dataset, cfg: &SelectionConfig) -> Result<SelectionTrace> {
    let pool: Vec<usize> = (0..data.q()).collect();
    let mut trace = stepwise(&problem(data, &pool), cfg)?;
    trace.intercept = data.intercept_for(&trace.chosen, &trace.coeffs);
    Ok(trace)
}

fn problem<'a>(data: &'a Dataset, pool: &'a [usize]) -> Problem<'a> {
    Problem {
        x: data.x(),
        y: data.y(),
        n: data.dof(),
        pool,
    }
}

/// Stepwise selection on an explicit candidate pool.
pub fn stepwise(p: &Problem<'_>, cfg: &SelectionConfig) -> Result<SelectionTrace> {
    cfg.validate()?;
    let q = p.q();
    let mut warnings = Vec::new();
    let kmx_default = p.n.saturating_sub(2).min(q);
    let kmx = cfg.kmx.map_or(kmx_default, |k| k.min(kmx_default));
    let mut state = FitState::new(p.x, p.y, p.pool, cfg.exec);
    // Residual at rounding level: nothing left to explain.
    let rss_floor = 1e-24 * state.rss();
    let mut steps = Vec::new();
    let termination = loop {
        let k = state.k();
        if k >= kmx {
            break Termination::MaxSize;
        }
        if state.pool_size() == 0 {
            break Termination::PoolExhausted;
        }
        if state.rss() <= rss_floor {
            break Termination::PerfectFit;
        }
        let Some((b, rss_next)) = state.best_candidate() else {
            break Termination::NoAdmissibleCandidate;
        };
        let nu = cfg.nu.min(q - k);
        let pvalue = pval_stepwise(rss_next, state.rss(), p.n, k, q, nu, cfg.outer_law)?;
        let forced = k < cfg.kmn;
        if !forced && pvalue > cfg.alpha {
            break Termination::PvalueAboveAlpha { index: b, pvalue };
        }
        match state.advance(b) {
            Ok(()) => steps.push(Step {
                index: b,
                pvalue,
                rss: state.rss(),
                forced,
            }),
            Err(Error::Collinear { column }) => {
                state.drop_candidate(column);
            }
            Err(e) => return Err(e),
        }
    };
    if steps.len() < cfg.kmn.min(kmx) {
        let msg = format!(
            "only {} of the {} forced covariates could be included ({termination:?})",
            steps.len(),
            cfg.kmn
        );
        warn!("{msg}");
        warnings.push(msg);
    }

    let selected: Vec<usize> = steps.iter().map(|s| s.index).collect();
    let mut trace = SelectionTrace {
        steps,
        chosen: Vec::new(),
        final_pvalues: Vec::new(),
        coeffs: Vec::new(),
        intercept: None,
        rss: state.rss(),
        termination,
        final_pass_applied: false,
        asymptotic: false,
        warnings,
    };
    if selected.is_empty() {
        trace.rss = crate::regression::dot(p.y, p.y);
        return Ok(trace);
    }

    if cfg.final_pass && selected.len() <= cfg.final_pass_limit {
        trace.final_pass_applied = true;
        let gram = SubsetGram::new(p.x, p.y, &selected);
        match best_qualifying_subset(&gram, p.n, q, cfg.alpha, cfg.exec)? {
            Some(best) => {
                // Keep inclusion order.
                let order: Vec<usize> = (0..selected.len()).filter(|a| best.members.contains(a)).collect();
                trace.chosen = order.iter().map(|&a| selected[a]).collect();
                let pos = |a: usize| best.members.iter().position(|&m| m == a).unwrap();
                trace.coeffs = order.iter().map(|&a| best.coeffs[pos(a)]).collect();
                trace.final_pvalues = order.iter().map(|&a| best.pvalues[pos(a)]).collect();
                trace.rss = best.rss;
                // Refit through QR for the reported coefficients.
                let fit = fit_ls_strict(p.x, p.y, &trace.chosen)?;
                trace.coeffs = fit.coefficients();
                trace.rss = fit.rss();
            }
            None => {
                trace.termination = Termination::NoQualifyingSubset;
                trace.rss = crate::regression::dot(p.y, p.y);
            }
        }
    } else {
        trace.chosen = selected;
        trace.coeffs = state.coefficients();
        let k = trace.chosen.len();
        trace.final_pvalues = state
            .drop_one_rss()
            .iter()
            .map(|&d| final_pvalue(state.rss(), d, p.n, k, q))
            .collect::<Result<_>>()?;
    }
    Ok(trace)
}

fn final_pvalue(rss: f64, drop: f64, n: usize, k: usize, q: usize) -> Result<f64> {
    if k >= n {
        return Ok(1.0);
    }
    pval_all_subset(rss, drop.max(rss), n, k, q)
}

struct Scored {
    members: Vec<usize>,
    rss: f64,
    pvalues: Vec<f64>,
    coeffs: Vec<f64>,
}

/// Fit the subset given by bit mask; `Some` if every member has P-value ≤ α.
fn qualifying(gram: &SubsetGram, mask: u64, n: usize, q: usize, alpha: f64) -> Result<Option<Scored>> {
    let members: Vec<usize> = (0..gram.universe().len()).filter(|&a| mask >> a & 1 == 1).collect();
    let k = members.len();
    if k >= n {
        return Ok(None);
    }
    let Some(fit) = gram.fit(&members) else {
        return Ok(None);
    };
    let mut pvalues = Vec::with_capacity(k);
    for &d in &fit.drop_one {
        let pv = pval_all_subset(fit.rss, d.max(fit.rss), n, k, q)?;
        if pv > alpha {
            return Ok(None);
        }
        pvalues.push(pv);
    }
    Ok(Some(Scored {
        members,
        rss: fit.rss,
        pvalues,
        coeffs: fit.coeffs,
    }))
}

const MASK_CHUNK: u64 = 1 << 12;

/// All qualifying subsets of the universe, in mask order.
fn all_qualifying(gram: &SubsetGram, n: usize, q: usize, alpha: f64, exec: Exec) -> Result<Vec<(u64, Scored)>> {
    let total: u64 = 1 << gram.universe().len();
    let chunks = total.div_ceil(MASK_CHUNK) as usize;
    let per_chunk = par::map_indexed(exec, chunks, |c| -> Result<Vec<(u64, Scored)>> {
        let start = (c as u64 * MASK_CHUNK).max(1);
        let end = ((c as u64 + 1) * MASK_CHUNK).min(total);
        let mut out = Vec::new();
        for mask in start..end {
            if let Some(s) = qualifying(gram, mask, n, q, alpha)? {
                out.push((mask, s));
            }
        }
        Ok(out)
    });
    let mut all = Vec::new();
    for chunk in per_chunk {
        all.extend(chunk?);
    }
    Ok(all)
}

fn best_qualifying_subset(gram: &SubsetGram, n: usize, q: usize, alpha: f64, exec: Exec) -> Result<Option<Scored>> {
    let all = all_qualifying(gram, n, q, alpha, exec)?;
    // Smallest rss; ties to the smaller subset, then the lower mask.
    Ok(all
        .into_iter()
        .min_by(|(ma, a), (mb, b)| {
            a.rss
                .total_cmp(&b.rss)
                .then(a.members.len().cmp(&b.members.len()))
                .then(ma.cmp(mb))
        })
        .map(|(_, s)| s))
}

/// Repeated stepwise selection, removing each round's subset from the pool.
pub fn f2st(data: &Dataset, cfg: &SelectionConfig) -> Result<Vec<SelectionTrace>> {
    let pool: Vec<usize> = (0..data.q()).collect();
    let mut traces = repeated(&problem(data, &pool), cfg)?;
    for trace in &mut traces {
        trace.intercept = data.intercept_for(&trace.chosen, &trace.coeffs);
    }
    Ok(traces)
}

/// [`f2st`] on an explicit candidate pool.
pub fn repeated(p: &Problem<'_>, cfg: &SelectionConfig) -> Result<Vec<SelectionTrace>> {
    let mut pool: Vec<usize> = p.pool.to_vec();
    let mut traces = Vec::new();
    for _ in 0..p.q() {
        if pool.is_empty() {
            break;
        }
        let trace = stepwise(&Problem { pool: &pool, ..*p }, cfg)?;
        if trace.is_empty() {
            break;
        }
        let chosen: BTreeSet<usize> = trace.chosen.iter().copied().collect();
        // Stepwise covariates dropped by the final pass leave the pool too.
        pool.retain(|i| !chosen.contains(i) && !trace.steps.iter().any(|s| s.index == *i));
        traces.push(trace);
    }
    Ok(traces)
}

fn approximation(trace: &SelectionTrace) -> SubsetApproximation {
    let mut order: Vec<usize> = (0..trace.chosen.len()).collect();
    order.sort_by_key(|&a| trace.chosen[a]);
    SubsetApproximation {
        indices: order.iter().map(|&a| trace.chosen[a]).collect(),
        rss: trace.rss,
        pvalues: order.iter().map(|&a| trace.final_pvalues[a]).collect(),
        coeffs: order.iter().map(|&a| trace.coeffs[a]).collect(),
    }
}

fn sort_approximations(list: &mut [SubsetApproximation]) {
    list.sort_by(|a, b| a.rss.total_cmp(&b.rss).then_with(|| a.indices.cmp(&b.indices)));
}

/// Stepwise selection repeated with members of earlier selections excluded
/// one at a time, to depth `cfg.m`. Distinct subsets ordered by rss; a
/// subset contained in another reported subset is not a substitute and is
/// left out.
pub fn f3st(data: &Dataset, cfg: &SelectionConfig) -> Result<Vec<SubsetApproximation>> {
    let pool: Vec<usize> = (0..data.q()).collect();
    leave_one_out(&problem(data, &pool), cfg)
}

/// [`f3st`] on an explicit candidate pool.
pub fn leave_one_out(p: &Problem<'_>, cfg: &SelectionConfig) -> Result<Vec<SubsetApproximation>> {
    if cfg.m == 0 {
        return Err(Error::Domain("f3st needs m ≥ 1".into()));
    }
    let run = |excluded: &BTreeSet<usize>| -> Result<SelectionTrace> {
        let pool: Vec<usize> = p.pool.iter().copied().filter(|i| !excluded.contains(i)).collect();
        let mut inner = cfg.clone();
        // Branches already run in parallel.
        inner.exec = Exec::Sequential;
        stepwise(&Problem { pool: &pool, ..*p }, &inner)
    };

    let mut found: Vec<SubsetApproximation> = Vec::new();
    let mut seen_sets: BTreeSet<Vec<usize>> = BTreeSet::new();
    let mut seen_exclusions: BTreeSet<BTreeSet<usize>> = BTreeSet::new();
    let root = stepwise(p, cfg)?;
    if root.is_empty() {
        return Ok(found);
    }
    let mut frontier = vec![(BTreeSet::new(), root)];
    for depth in 1..=cfg.m {
        let mut next_exclusions = Vec::new();
        for (excluded, trace) in &frontier {
            let approx = approximation(trace);
            if seen_sets.insert(approx.indices.clone()) {
                found.push(approx);
            }
            for &c in &trace.chosen {
                let mut e = excluded.clone();
                e.insert(c);
                if seen_exclusions.insert(e.clone()) {
                    next_exclusions.push(e);
                }
            }
        }
        let results = par::map_slice(cfg.exec, &next_exclusions, |e| run(e));
        let mut next = Vec::new();
        for (e, r) in next_exclusions.into_iter().zip(results) {
            let trace = r?;
            if !trace.is_empty() {
                next.push((e, trace));
            }
        }
        if depth == cfg.m {
            for (_, trace) in &next {
                let approx = approximation(trace);
                if seen_sets.insert(approx.indices.clone()) {
                    found.push(approx);
                }
            }
        }
        frontier = next;
    }
    let sets: Vec<BTreeSet<usize>> = found.iter().map(|a| a.indices.iter().copied().collect()).collect();
    let mut keep = sets
        .iter()
        .map(|s| !sets.iter().any(|t| t.len() > s.len() && s.is_subset(t)));
    found.retain(|_| keep.next().unwrap());
    sort_approximations(&mut found);
    Ok(found)
}

/// All-subsets selection: maximal subsets whose members all have
/// P-value ≤ α, ordered by rss. `universe` defaults to every column and is
/// limited to [`FASB_CAP`] columns.
pub fn fasb(data: &Dataset, cfg: &SelectionConfig, universe: Option<&[usize]>) -> Result<Vec<SubsetApproximation>> {
    cfg.validate()?;
    let all: Vec<usize> = (0..data.q()).collect();
    let universe = universe.unwrap_or(&all);
    if universe.len() > FASB_CAP {
        return Err(Error::TooManyCovariates {
            q: universe.len(),
            cap: FASB_CAP,
        });
    }
    if let Some(&bad) = universe.iter().find(|&&i| i >= data.q()) {
        return Err(Error::Domain(format!("column index {} out of range", bad + 1)));
    }
    let gram = SubsetGram::new(data.x(), data.y(), universe);
    let mut qualifying = all_qualifying(&gram, data.dof(), data.q(), cfg.alpha, cfg.exec)?;
    // Maximal pruning: a subset of a qualifying set is contained in some
    // maximal one, so only the kept sets need checking.
    qualifying.sort_by(|(ma, _), (mb, _)| mb.count_ones().cmp(&ma.count_ones()).then(ma.cmp(mb)));
    let mut kept: Vec<(u64, Scored)> = Vec::new();
    for (mask, s) in qualifying {
        if !kept.iter().any(|(k, _)| k & mask == mask) {
            kept.push((mask, s));
        }
    }
    let mut out: Vec<SubsetApproximation> = kept
        .into_iter()
        .map(|(_, s)| {
            let mut order: Vec<usize> = (0..s.members.len()).collect();
            order.sort_by_key(|&a| universe[s.members[a]]);
            SubsetApproximation {
                indices: order.iter().map(|&a| universe[s.members[a]]).collect(),
                rss: s.rss,
                pvalues: order.iter().map(|&a| s.pvalues[a]).collect(),
                coeffs: order.iter().map(|&a| s.coeffs[a]).collect(),
            }
        })
        .collect();
    sort_approximations(&mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{normal_vec, substream};

    fn gaussian(n: usize, q: usize, seed: u64) -> Design {
        let mut rng = substream(seed, 0);
        Design::from_column_major(n, q, normal_vec(&mut rng, n * q), vec![]).unwrap()
    }

    #[test]
    fn response_equal_to_a_column_selects_it() {
        let x = gaussian(50, 10, 1);
        let y = x.column(2).to_vec();
        let data = Dataset::new(y, x, false).unwrap();
        let t = f1st(&data, &SelectionConfig::default()).unwrap();
        assert_eq!(t.chosen, vec![2]);
        assert_eq!(t.steps[0].pvalue, 0.0);
        assert_eq!(t.termination, Termination::PerfectFit);
    }

    #[test]
    fn kmn_forces_steps() {
        let x = gaussian(60, 20, 2);
        let mut rng = substream(3, 0);
        let y = normal_vec(&mut rng, 60);
        let data = Dataset::new(y, x, false).unwrap();
        let cfg = SelectionConfig {
            kmn: 4,
            final_pass: false,
            ..Default::default()
        };
        let t = f1st(&data, &cfg).unwrap();
        assert!(t.steps.len() >= 4);
        assert!(t.steps[..4].iter().all(|s| s.forced));
        assert!(t.steps.windows(2).all(|w| w[1].rss < w[0].rss));
    }

    #[test]
    fn kmx_caps_the_subset() {
        let x = gaussian(40, 10, 4);
        let y: Vec<f64> = (0..40)
            .map(|i| (0..10).map(|j| 2f64.powi(10 - j as i32) * x.column(j)[i]).sum())
            .collect();
        let data = Dataset::new(y, x, false).unwrap();
        let cfg = SelectionConfig {
            kmx: Some(3),
            final_pass: false,
            ..Default::default()
        };
        let t = f1st(&data, &cfg).unwrap();
        assert_eq!(t.chosen.len(), 3, "{t:?}");
        assert_eq!(t.termination, Termination::MaxSize);
    }

    #[test]
    fn invalid_config_rejected() {
        let bad = SelectionConfig {
            alpha: 1.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = SelectionConfig {
            kmn: 5,
            kmx: Some(2),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
