//! Simulation scenarios with known truth: the Toeplitz benchmark, null
//! designs, consistency on orthonormal designs and random graphs.

use crate::data::{gen_design, random_graph, RandomGraphSpec, SimDesign};
use crate::error::{Error, Result};
use crate::graph::{build_graph, GraphConfig};
use crate::par::{self, Exec};
use crate::pvalues::{pval_all_subset, pval_stepwise};
use crate::regression::{Dataset, Design};
use crate::rng::{fill_normal, substream};
use crate::selection::{f1st, SelectionConfig};
use rand_distr::{ChiSquared, Distribution};
use serde::Serialize;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Score {
    pub selected: usize,
    pub fp: usize,
    pub fn_: usize,
    pub seconds: f64,
}

/// `(fp, fn)` of `selected` against an ascending `truth`.
pub fn score(selected: &[usize], truth: &[usize]) -> (usize, usize) {
    let hits = selected.iter().filter(|i| truth.binary_search(i).is_ok()).count();
    (selected.len() - hits, truth.len() - hits)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub reps: usize,
    pub mean_fp: f64,
    pub mean_fn: f64,
    pub mean_selected: f64,
    pub mean_seconds: f64,
    pub runs: Vec<Score>,
}

impl Summary {
    fn new(runs: Vec<Score>) -> Self {
        let r = runs.len().max(1) as f64;
        let avg = |f: fn(&Score) -> f64| runs.iter().map(f).sum::<f64>() / r;
        Summary {
            reps: runs.len(),
            mean_fp: avg(|s| s.fp as f64),
            mean_fn: avg(|s| s.fn_ as f64),
            mean_selected: avg(|s| s.selected as f64),
            mean_seconds: avg(|s| s.seconds),
            runs,
        }
    }
}

/// Run stepwise selection on `reps` draws of `design`, the seed of draw r
/// being `substream(seed, r)`-derived.
pub fn design_study(design: &SimDesign, cfg: &SelectionConfig, reps: usize, seed: u64) -> Result<Summary> {
    let runs = par::map_indexed(cfg.exec, reps, |r| -> Result<Score> {
        let mut d = design.clone();
        d.seed = seed.wrapping_add(r as u64);
        let g = gen_design(&d)?;
        let mut inner = cfg.clone();
        inner.exec = Exec::Sequential;
        let t0 = Instant::now();
        let trace = f1st(&g.dataset, &inner)?;
        let seconds = t0.elapsed().as_secs_f64();
        let (fp, fn_) = score(&trace.chosen, &g.truth);
        Ok(Score {
            selected: trace.chosen.len(),
            fp,
            fn_,
            seconds,
        })
    });
    Ok(Summary::new(runs.into_iter().collect::<Result<_>>()?))
}

/// The Toeplitz benchmark: n = q = 1000, 60 active covariates of size
/// 4.5/√n, ρ = 0.25.
pub fn tutorial(cfg: &SelectionConfig, reps: usize, seed: u64) -> Result<Summary> {
    design_study(&SimDesign::tutorial(1000, 1000, seed), cfg, reps, seed)
}

/// Stepwise selection on an orthonormal design, given `z = Xᵀy` and the
/// squared norm `rem` of the part of y orthogonal to the columns. Returns
/// the final subset in inclusion order.
pub fn orthonormal_stepwise(z: &[f64], rem: f64, n: usize, cfg: &SelectionConfig) -> Result<Vec<usize>> {
    let q = z.len();
    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&a, &b| (z[b] * z[b]).total_cmp(&(z[a] * z[a])).then(a.cmp(&b)));
    let kmx = cfg.kmx.unwrap_or(usize::MAX).min(n.saturating_sub(2)).min(q);
    let mut rss = rem + z.iter().map(|v| v * v).sum::<f64>();
    let mut selected = Vec::new();
    for k in 0..kmx {
        let b = order[k];
        let next = (rss - z[b] * z[b]).max(0.0);
        let p = pval_stepwise(next, rss, n, k, q, cfg.nu.min(q - k), cfg.outer_law)?;
        if k >= cfg.kmn && p > cfg.alpha {
            break;
        }
        selected.push(b);
        rss = next;
    }
    if !cfg.final_pass || selected.is_empty() || selected.len() > cfg.final_pass_limit {
        return Ok(selected);
    }
    let t = selected.len();
    let mut best: Option<(f64, usize, u64)> = None;
    for mask in 1u64..(1 << t) {
        let k = mask.count_ones() as usize;
        if k >= n {
            continue;
        }
        let out: f64 = (0..t).filter(|a| mask >> a & 1 == 0).map(|a| z[selected[a]].powi(2)).sum();
        let rss_s = rss + out;
        let mut ok = true;
        for a in (0..t).filter(|a| mask >> a & 1 == 1) {
            let zi = z[selected[a]];
            if pval_all_subset(rss_s, rss_s + zi * zi, n, k, q)? > cfg.alpha {
                ok = false;
                break;
            }
        }
        if ok {
            let cand = (rss_s, k, mask);
            let better = match best {
                None => true,
                Some(b) => cand.0.total_cmp(&b.0).then(cand.1.cmp(&b.1)).then(cand.2.cmp(&b.2)).is_lt(),
            };
            if better {
                best = Some(cand);
            }
        }
    }
    Ok(match best {
        Some((_, _, mask)) => (0..t).filter(|a| mask >> a & 1 == 1).map(|a| selected[a]).collect(),
        None => Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NullSummary {
    pub reps: usize,
    pub nonempty: usize,
    pub rate: f64,
    /// `−log(1 − α)`.
    pub bound: f64,
    /// Binomial standard error of the rate at the bound.
    pub se_at_bound: f64,
}

impl NullSummary {
    fn new(flags: &[bool], alpha: f64) -> Self {
        let reps = flags.len();
        let nonempty = flags.iter().filter(|&&f| f).count();
        let bound = -(-alpha).ln_1p();
        NullSummary {
            reps,
            nonempty,
            rate: nonempty as f64 / reps as f64,
            bound,
            se_at_bound: (bound * (1.0 - bound) / reps as f64).sqrt(),
        }
    }
}

/// Pure-noise response on `q` independent Gaussian columns; counts runs
/// with a nonempty selection.
pub fn null_study(n: usize, q: usize, cfg: &SelectionConfig, reps: usize, seed: u64) -> Result<NullSummary> {
    let flags = par::map_indexed(cfg.exec, reps, |r| -> Result<bool> {
        let mut rng = substream(seed, r as u64);
        let mut x = vec![0.0; n * q];
        fill_normal(&mut rng, &mut x);
        let mut y = vec![0.0; n];
        fill_normal(&mut rng, &mut y);
        let data = Dataset::new(y, Design::from_column_major(n, q, x, Vec::new())?, false)?;
        let mut inner = cfg.clone();
        inner.exec = Exec::Sequential;
        Ok(!f1st(&data, &inner)?.is_empty())
    });
    Ok(NullSummary::new(&flags.into_iter().collect::<Result<Vec<_>>>()?, cfg.alpha))
}

/// [`null_study`] on an orthonormal design, where `Xᵀy` is `N(0, I_q)` and
/// the remainder is `χ²_{n−q}`.
pub fn orthonormal_null_study(n: usize, q: usize, cfg: &SelectionConfig, reps: usize, seed: u64) -> Result<NullSummary> {
    if q >= n {
        return Err(Error::Domain("orthonormal design needs q < n".into()));
    }
    let chi = ChiSquared::new((n - q) as f64).map_err(|e| Error::Domain(e.to_string()))?;
    let flags = par::map_indexed(cfg.exec, reps, |r| -> Result<bool> {
        let mut rng = substream(seed, r as u64);
        let mut z = vec![0.0; q];
        fill_normal(&mut rng, &mut z);
        let rem = chi.sample(&mut rng);
        Ok(!orthonormal_stepwise(&z, rem, n, cfg)?.is_empty())
    });
    Ok(NullSummary::new(&flags.into_iter().collect::<Result<Vec<_>>>()?, cfg.alpha))
}

/// Common coefficient on the active set that meets the signal condition of
/// the consistency condition with constant `tau`:
/// `b²/(σ² + k*b²/n) = (√(τ log q) + √(2 log k*))²`.
pub fn consistency_beta(n: usize, q: usize, kstar: usize, tau: f64, sigma: f64) -> f64 {
    let c = ((tau * (q as f64).ln()).sqrt() + (2.0 * (kstar as f64).ln()).sqrt()) / (n as f64).sqrt();
    let c2 = c * c;
    sigma * (c2 * n as f64 / (1.0 - kstar as f64 * c2)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencySummary {
    pub reps: usize,
    pub beta: f64,
    /// Runs with S* ⊆ Ŝ.
    pub contains: f64,
    /// Runs with Ŝ = S*.
    pub exact: f64,
    /// Runs with S* ⊊ Ŝ.
    pub strict_superset: f64,
}

/// Orthonormal design with `kstar` active columns of coefficient
/// [`consistency_beta`] and unit noise.
pub fn consistency_study(
    n: usize,
    q: usize,
    kstar: usize,
    tau: f64,
    cfg: &SelectionConfig,
    reps: usize,
    seed: u64,
) -> Result<ConsistencySummary> {
    if q >= n || kstar == 0 || kstar > q {
        return Err(Error::Domain(format!("invalid consistency setting n={n}, q={q}, k*={kstar}")));
    }
    let beta = consistency_beta(n, q, kstar, tau, 1.0);
    if !beta.is_finite() {
        return Err(Error::Domain("signal condition cannot be met at this n".into()));
    }
    let chi = ChiSquared::new((n - q) as f64).map_err(|e| Error::Domain(e.to_string()))?;
    let outcomes = par::map_indexed(cfg.exec, reps, |r| -> Result<(bool, bool)> {
        let mut rng = substream(seed, r as u64);
        let mut z = vec![0.0; q];
        fill_normal(&mut rng, &mut z);
        z[..kstar].iter_mut().for_each(|v| *v += beta);
        let rem = chi.sample(&mut rng);
        let sel = orthonormal_stepwise(&z, rem, n, cfg)?;
        let hits = sel.iter().filter(|&&i| i < kstar).count();
        Ok((hits == kstar, hits == kstar && sel.len() > kstar))
    });
    let outcomes: Vec<(bool, bool)> = outcomes.into_iter().collect::<Result<_>>()?;
    let frac = |f: &dyn Fn(&(bool, bool)) -> bool| outcomes.iter().filter(|o| f(o)).count() as f64 / reps as f64;
    Ok(ConsistencySummary {
        reps,
        beta,
        contains: frac(&|o| o.0),
        exact: frac(&|o| o.0 && !o.1),
        strict_superset: frac(&|o| o.1),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GraphScore {
    pub true_edges: usize,
    pub found: usize,
    pub fp: usize,
    pub fn_: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphSummary {
    pub reps: usize,
    pub mean_true_edges: f64,
    pub mean_found: f64,
    pub mean_fp: f64,
    pub mean_fn: f64,
    /// Pooled fraction of true edges recovered.
    pub recall: f64,
    pub runs: Vec<GraphScore>,
}

/// Random-graph data, then the per-node stepwise graph compared with the
/// generating graph on undirected edges.
pub fn graph_study(n: usize, q: usize, cfg: &GraphConfig, reps: usize, seed: u64) -> Result<GraphSummary> {
    let mut runs = Vec::with_capacity(reps);
    for r in 0..reps {
        let g = random_graph(&RandomGraphSpec::new(n, q, seed.wrapping_add(r as u64)))?;
        let t0 = Instant::now();
        let est = build_graph(&g.design, n, cfg)?;
        let seconds = t0.elapsed().as_secs_f64();
        let tp = est.undirected_edges.iter().filter(|e| g.edges.binary_search(e).is_ok()).count();
        runs.push(GraphScore {
            true_edges: g.edges.len(),
            found: est.undirected_edges.len(),
            fp: est.undirected_edges.len() - tp,
            fn_: g.edges.len() - tp,
            seconds,
        });
    }
    let rr = reps.max(1) as f64;
    let avg = |f: fn(&GraphScore) -> usize| runs.iter().map(|s| f(s) as f64).sum::<f64>() / rr;
    let total_true: usize = runs.iter().map(|s| s.true_edges).sum();
    let total_fn: usize = runs.iter().map(|s| s.fn_).sum();
    Ok(GraphSummary {
        reps,
        mean_true_edges: avg(|s| s.true_edges),
        mean_found: avg(|s| s.found),
        mean_fp: avg(|s| s.fp),
        mean_fn: avg(|s| s.fn_),
        recall: if total_true == 0 { 1.0 } else { 1.0 - total_fn as f64 / total_true as f64 },
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scoring() {
        assert_eq!(score(&[1, 5, 9], &[1, 2, 9]), (1, 1));
        assert_eq!(score(&[], &[3]), (0, 1));
    }

    #[test]
    fn orthonormal_stepwise_matches_regression_engine() {
        // X = first q unit vectors, y = (z, √rem, 0, ...).
        let (n, q) = (40, 6);
        let z = [0.3, 9.0, -0.2, -7.5, 0.1, 0.4];
        let rem: f64 = 30.0;
        let cols: Vec<Vec<f64>> = (0..q).map(|i| (0..n).map(|r| f64::from(u8::from(r == i))).collect()).collect();
        let mut y = vec![0.0; n];
        y[..q].copy_from_slice(&z);
        y[q] = rem.sqrt();
        let data = Dataset::new(y, Design::from_columns(cols, vec![]).unwrap(), false).unwrap();
        let cfg = SelectionConfig::default();
        let direct = f1st(&data, &cfg).unwrap().chosen;
        assert_eq!(orthonormal_stepwise(&z, rem, n, &cfg).unwrap(), direct);
        assert_eq!(direct, vec![1, 3]);
    }

    #[test]
    fn consistency_coefficient() {
        let b = consistency_beta(2000, 200, 5, 3.0, 1.0);
        assert!((b - 6.04).abs() < 0.01, "{b}");
    }
}
