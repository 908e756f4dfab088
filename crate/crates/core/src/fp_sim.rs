//! False-positive calibration by null simulation.
//!
//! Under the null every covariate is independent Gaussian noise, so each
//! selected covariate is a false positive. The greedy path does not depend on
//! ν or α, so one simulated path scores every `(α, ν)` pair at once; this also
//! couples the counts, making them monotone in ν on every path.
//!
//! Two engines produce the path:
//! * [`Engine::Direct`] draws the n×q design and runs the regression engine.
//! * [`Engine::Reduced`] tracks each column only through its coordinate on the
//!   residual direction and the squared norm of its remainder in the
//!   orthogonal complement. Selecting a column splits every other remainder
//!   by an exact `Beta(1/2, (d−1)/2)` draw, so a step costs O(q) instead of
//!   O(nq). Both engines sample the same law.

use crate::error::{Error, Result};
use crate::par::{self, Exec};
use crate::pvalues::{stepwise_inner, stepwise_outer, OuterLaw};
use crate::regression::{Design, FitState};
use crate::rng::{fill_normal, substream, SimRng};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Direct,
    #[default]
    Reduced,
}

/// One step of a greedy null path: `r = rss_{k+1}/rss_k` and `c = 1 − r`.
#[derive(Debug, Clone, Copy)]
struct PathStep {
    r: f64,
    c: f64,
}

/// Source of greedy null paths.
trait NullPath {
    /// Ratio for the next step, or `None` if the path cannot continue.
    fn next_step(&mut self) -> Option<PathStep>;
}

struct ReducedPath {
    n: usize,
    k: usize,
    t: Vec<f64>,
    rem: Vec<f64>,
    rng: SimRng,
}

impl ReducedPath {
    fn new(mut rng: SimRng, n: usize, q: usize) -> Self {
        let mut t = vec![0.0; q];
        fill_normal(&mut rng, &mut t);
        let chi = ChiSquared::new((n - 1) as f64).unwrap();
        let rem = (0..q).map(|_| chi.sample(&mut rng)).collect();
        ReducedPath { n, k: 0, t, rem, rng }
    }
}

impl NullPath for ReducedPath {
    fn next_step(&mut self) -> Option<PathStep> {
        if self.t.is_empty() || self.k + 2 > self.n {
            return None;
        }
        // Best column maximises t²/(t² + R).
        let mut best = 0;
        let mut best_score = -1.0;
        for (i, (&t, &r)) in self.t.iter().zip(&self.rem).enumerate() {
            let score = t * t / (t * t + r);
            if score > best_score {
                best_score = score;
                best = i;
            }
        }
        let (ts, rs) = (self.t[best], self.rem[best]);
        let total = ts * ts + rs;
        let step = PathStep {
            r: rs / total,
            c: ts * ts / total,
        };
        self.t.swap_remove(best);
        self.rem.swap_remove(best);
        // Complement dimension before the step is d = n − k − 1.
        let d = self.n - self.k - 1;
        let norm = total.sqrt();
        let sqrt_rs = rs.sqrt();
        let chi = (d > 1).then(|| ChiSquared::new((d - 1) as f64).unwrap());
        for (t, r) in self.t.iter_mut().zip(self.rem.iter_mut()) {
            let z: f64 = self.rng.sample(StandardNormal);
            let b = match &chi {
                Some(chi) => {
                    let c: f64 = chi.sample(&mut self.rng);
                    z * z / (z * z + c)
                }
                None => 1.0,
            };
            let zi = z.signum() * (*r * b).sqrt();
            *r *= 1.0 - b;
            *t = (sqrt_rs * *t - ts * zi) / norm;
        }
        self.k += 1;
        Some(step)
    }
}

struct DirectPath<'a> {
    state: FitState<'a>,
}

impl NullPath for DirectPath<'_> {
    fn next_step(&mut self) -> Option<PathStep> {
        let rss = self.state.rss();
        if rss <= 0.0 {
            return None;
        }
        let (b, rss_next) = self.state.best_candidate()?;
        let step = PathStep {
            r: rss_next / rss,
            c: (rss - rss_next) / rss,
        };
        self.state.advance(b).ok()?;
        Some(step)
    }
}

/// Number of accepted steps for each `(α, ν)` along one path.
fn score_path(path: &mut dyn NullPath, n: usize, q: usize, configs: &[(f64, usize)], law: OuterLaw) -> Result<Vec<usize>> {
    let kmx = n.saturating_sub(2).min(q);
    let mut counts = vec![0usize; configs.len()];
    let mut open = vec![true; configs.len()];
    for k in 0..kmx {
        if !open.iter().any(|&o| o) {
            break;
        }
        let Some(step) = path.next_step() else { break };
        let inner = stepwise_inner(step.r, step.c, n, k)?;
        for (j, &(alpha, nu)) in configs.iter().enumerate() {
            if !open[j] {
                continue;
            }
            let p = stepwise_outer(inner, k, q, nu.min(q - k), law)?;
            if p <= alpha {
                counts[j] += 1;
            } else {
                open[j] = false;
            }
        }
    }
    Ok(counts)
}

/// Response used by the direct engine; any nonzero vector gives the same law.
pub fn ramp(n: usize) -> Vec<f64> {
    (1..=n).map(|i| i as f64).collect()
}

#[derive(Debug, Clone)]
pub struct NullSimulation {
    pub n: usize,
    pub q: usize,
    pub nsim: usize,
    pub seed: u64,
    pub engine: Engine,
    pub law: OuterLaw,
    pub exec: Exec,
    /// Response for the direct engine; defaults to [`ramp`].
    pub response: Option<Vec<f64>>,
}

impl NullSimulation {
    pub fn new(n: usize, q: usize, nsim: usize, seed: u64) -> Self {
        NullSimulation {
            n,
            q,
            nsim,
            seed,
            engine: Engine::Reduced,
            law: OuterLaw::Pool,
            exec: Exec::default(),
            response: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n < 3 || self.q == 0 || self.nsim == 0 {
            return Err(Error::Domain(format!(
                "null simulation needs n ≥ 3, q ≥ 1, nsim ≥ 1 (n={}, q={}, nsim={})",
                self.n, self.q, self.nsim
            )));
        }
        if let Some(y) = &self.response {
            if y.len() != self.n || y.iter().all(|&v| v == 0.0) {
                return Err(Error::Domain("response must be a nonzero vector of length n".into()));
            }
        }
        Ok(())
    }

    /// False-positive counts per replication for each `(α, ν)`; the outer
    /// vector is indexed by replication.
    pub fn run_counts(&self, configs: &[(f64, usize)]) -> Result<Vec<Vec<usize>>> {
        self.validate()?;
        for &(alpha, nu) in configs {
            if !(alpha > 0.0 && alpha < 1.0) || nu == 0 {
                return Err(Error::Domain(format!("invalid (α, ν) = ({alpha}, {nu})")));
            }
        }
        let (n, q) = (self.n, self.q);
        let y = self.response.clone().unwrap_or_else(|| ramp(n));
        let results = par::map_indexed(self.exec, self.nsim, |rep| {
            let mut rng = substream(self.seed, rep as u64);
            match self.engine {
                Engine::Reduced => {
                    let mut path = ReducedPath::new(rng, n, q);
                    score_path(&mut path, n, q, configs, self.law)
                }
                Engine::Direct => {
                    let mut data = vec![0.0; n * q];
                    fill_normal(&mut rng, &mut data);
                    let x = Design::from_column_major(n, q, data, Vec::new())?;
                    let all: Vec<usize> = (0..q).collect();
                    let mut path = DirectPath {
                        state: FitState::new(&x, &y, &all, Exec::Sequential),
                    };
                    score_path(&mut path, n, q, configs, self.law)
                }
            }
        });
        results.into_iter().collect()
    }

    /// Histograms for each `(α, ν)`.
    pub fn run(&self, configs: &[(f64, usize)]) -> Result<Vec<FpHistogram>> {
        let counts = self.run_counts(configs)?;
        Ok(configs
            .iter()
            .enumerate()
            .map(|(j, &(alpha, nu))| {
                let column: Vec<usize> = counts.iter().map(|c| c[j]).collect();
                FpHistogram::from_counts(&column, self.n, self.q, alpha, nu, self.seed)
            })
            .collect())
    }
}

/// Convenience wrapper for a single `(α, ν)`.
pub fn simulate_fp(n: usize, q: usize, alpha: f64, nu: usize, nsim: usize, seed: u64) -> Result<FpHistogram> {
    let sim = NullSimulation::new(n, q, nsim, seed);
    Ok(sim.run(&[(alpha, nu)])?.remove(0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FpHistogram {
    /// Relative frequency of each false-positive count.
    pub counts: BTreeMap<usize, f64>,
    pub mean: f64,
    pub sd: f64,
    /// Mean false positives per covariate.
    pub per_covariate: f64,
    pub nsim: usize,
    pub n: usize,
    pub q: usize,
    pub alpha: f64,
    pub nu: usize,
    pub seed: u64,
}

impl FpHistogram {
    pub fn from_counts(counts: &[usize], n: usize, q: usize, alpha: f64, nu: usize, seed: u64) -> Self {
        let nsim = counts.len();
        let mut freq = BTreeMap::new();
        for &c in counts {
            *freq.entry(c).or_insert(0.0) += 1.0;
        }
        freq.values_mut().for_each(|v| *v /= nsim as f64);
        let mean = counts.iter().sum::<usize>() as f64 / nsim as f64;
        let var = if nsim > 1 {
            counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / (nsim - 1) as f64
        } else {
            0.0
        };
        FpHistogram {
            counts: freq,
            mean,
            sd: var.sqrt(),
            per_covariate: mean / q as f64,
            nsim,
            n,
            q,
            alpha,
            nu,
            seed,
        }
    }

    pub fn frequency(&self, count: usize) -> f64 {
        self.counts.get(&count).copied().unwrap_or(0.0)
    }

    /// Aligned text table: one row per false-positive count.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "n={} q={} alpha={} nu={} nsim={} seed={}",
            self.n, self.q, self.alpha, self.nu, self.nsim, self.seed
        );
        let _ = writeln!(s, "{:>4}  {:>9}", "fp", "frequency");
        for (c, f) in &self.counts {
            let _ = writeln!(s, "{c:>4}  {f:>9.4}");
        }
        let _ = writeln!(s, "mean {:.4}  sd {:.4}", self.mean, self.sd);
        s
    }
}

const TABLE_MAGIC: &str = "# covsel fp-table v1";

/// Mean false positives on a grid of `(α, n, q, ν)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FpTable {
    pub alphas: Vec<f64>,
    pub ns: Vec<usize>,
    pub qs: Vec<usize>,
    pub nus: Vec<usize>,
    pub seed: u64,
    /// Replications per `(n, q)` cell, indexed like `qs`.
    pub reps: Vec<usize>,
    /// Row-major over `[alpha][n][q][nu]`.
    pub means: Vec<f64>,
}

impl FpTable {
    /// The grid used for the shipped table.
    pub fn default_grid() -> (Vec<f64>, Vec<usize>, Vec<usize>, Vec<usize>) {
        (
            vec![0.01, 0.05],
            vec![50, 100, 200, 500, 1000, 2000, 5000],
            vec![25, 100, 500, 1000, 5000, 20_000, 50_000],
            (1..=10).collect(),
        )
    }

    fn offset(&self, a: usize, i: usize, j: usize) -> usize {
        ((a * self.ns.len() + i) * self.qs.len() + j) * self.nus.len()
    }

    pub fn value(&self, a: usize, i: usize, j: usize, v: usize) -> f64 {
        self.means[self.offset(a, i, j) + v]
    }

    /// Simulate every cell. `reps(q)` gives the replication count per cell.
    pub fn build(
        alphas: Vec<f64>,
        ns: Vec<usize>,
        qs: Vec<usize>,
        nus: Vec<usize>,
        reps: impl Fn(usize) -> usize,
        seed: u64,
        exec: Exec,
        mut progress: impl FnMut(usize, usize),
    ) -> Result<Self> {
        let configs: Vec<(f64, usize)> = alphas.iter().flat_map(|&a| nus.iter().map(move |&v| (a, v))).collect();
        let reps_q: Vec<usize> = qs.iter().map(|&q| reps(q)).collect();
        let mut means = vec![0.0; alphas.len() * ns.len() * qs.len() * nus.len()];
        let mut table = FpTable {
            alphas,
            ns,
            qs,
            nus,
            seed,
            reps: reps_q,
            means: Vec::new(),
        };
        for (i, &n) in table.ns.iter().enumerate() {
            for (j, &q) in table.qs.iter().enumerate() {
                // Distinct stream family per cell.
                let cell_seed = seed ^ ((n as u64) << 32 | q as u64);
                let mut sim = NullSimulation::new(n, q, table.reps[j], cell_seed);
                sim.exec = exec;
                let hists = sim.run(&configs)?;
                for a in 0..table.alphas.len() {
                    let mut running = 0.0f64;
                    for v in 0..table.nus.len() {
                        // Coupled paths are monotone in ν already; the running
                        // maximum only guards against rounding.
                        running = running.max(hists[a * table.nus.len() + v].mean);
                        let off = ((a * table.ns.len() + i) * table.qs.len() + j) * table.nus.len() + v;
                        means[off] = running;
                    }
                }
                progress(n, q);
            }
        }
        table.means = means;
        Ok(table)
    }

    pub fn to_text(&self) -> String {
        let join = |v: Vec<String>| v.join(" ");
        let mut s = String::new();
        let _ = writeln!(s, "{TABLE_MAGIC}");
        let _ = writeln!(s, "alpha {}", join(self.alphas.iter().map(|a| a.to_string()).collect()));
        let _ = writeln!(s, "n {}", join(self.ns.iter().map(|a| a.to_string()).collect()));
        let _ = writeln!(s, "q {}", join(self.qs.iter().map(|a| a.to_string()).collect()));
        let _ = writeln!(s, "nu {}", join(self.nus.iter().map(|a| a.to_string()).collect()));
        let _ = writeln!(s, "reps {}", join(self.reps.iter().map(|a| a.to_string()).collect()));
        let _ = writeln!(s, "seed {}", self.seed);
        let _ = writeln!(s, "data");
        for (a, alpha) in self.alphas.iter().enumerate() {
            for (i, n) in self.ns.iter().enumerate() {
                for (j, q) in self.qs.iter().enumerate() {
                    let off = self.offset(a, i, j);
                    let row: Vec<String> = self.means[off..off + self.nus.len()].iter().map(|m| format!("{m:.4}")).collect();
                    let _ = writeln!(s, "{alpha} {n} {q} {}", row.join(" "));
                }
            }
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |msg: &str| Error::InvalidData(format!("fp table: {msg}"));
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        if lines.next().map(str::trim) != Some(TABLE_MAGIC) {
            return Err(bad("missing version header"));
        }
        let mut header = BTreeMap::new();
        for line in lines.by_ref() {
            let line = line.trim();
            if line == "data" {
                break;
            }
            let (key, rest) = line.split_once(' ').ok_or_else(|| bad("malformed header line"))?;
            header.insert(key.to_string(), rest.to_string());
        }
        let field = |k: &str| header.get(k).ok_or_else(|| bad(&format!("missing `{k}`")));
        fn nums<T: std::str::FromStr>(s: &str) -> Option<Vec<T>> {
            s.split_whitespace().map(|t| t.parse().ok()).collect()
        }
        let alphas: Vec<f64> = nums(field("alpha")?).ok_or_else(|| bad("alpha"))?;
        let ns: Vec<usize> = nums(field("n")?).ok_or_else(|| bad("n"))?;
        let qs: Vec<usize> = nums(field("q")?).ok_or_else(|| bad("q"))?;
        let nus: Vec<usize> = nums(field("nu")?).ok_or_else(|| bad("nu"))?;
        let reps: Vec<usize> = nums(field("reps")?).ok_or_else(|| bad("reps"))?;
        let seed: u64 = field("seed")?.trim().parse().map_err(|_| bad("seed"))?;
        let mut table = FpTable {
            means: vec![f64::NAN; alphas.len() * ns.len() * qs.len() * nus.len()],
            alphas,
            ns,
            qs,
            nus,
            seed,
            reps,
        };
        for line in lines {
            let t: Vec<&str> = line.split_whitespace().collect();
            if t.len() != 3 + table.nus.len() {
                return Err(bad(&format!("row has {} fields", t.len())));
            }
            let alpha: f64 = t[0].parse().map_err(|_| bad("row alpha"))?;
            let n: usize = t[1].parse().map_err(|_| bad("row n"))?;
            let q: usize = t[2].parse().map_err(|_| bad("row q"))?;
            let a = table.alphas.iter().position(|&x| x == alpha).ok_or_else(|| bad("row alpha off grid"))?;
            let i = table.ns.iter().position(|&x| x == n).ok_or_else(|| bad("row n off grid"))?;
            let j = table.qs.iter().position(|&x| x == q).ok_or_else(|| bad("row q off grid"))?;
            let off = table.offset(a, i, j);
            for (v, tok) in t[3..].iter().enumerate() {
                table.means[off + v] = tok.parse().map_err(|_| bad("row value"))?;
            }
        }
        if table.means.iter().any(|m| m.is_nan()) {
            return Err(bad("incomplete grid"));
        }
        Ok(table)
    }

    /// Interpolated mean false positives, multilinear in `(log n, log q, ν)`.
    pub fn lookup(&self, n: f64, q: f64, alpha: f64, nu: f64) -> Result<f64> {
        let outside = |what: String| Error::OutsideTable(what);
        let a = self
            .alphas
            .iter()
            .position(|&x| (x - alpha).abs() < 1e-12)
            .ok_or_else(|| outside(format!("alpha {alpha} not in {:?}", self.alphas)))?;
        let ln: Vec<f64> = self.ns.iter().map(|&v| (v as f64).ln()).collect();
        let lq: Vec<f64> = self.qs.iter().map(|&v| (v as f64).ln()).collect();
        let nv: Vec<f64> = self.nus.iter().map(|&v| v as f64).collect();
        let (i0, wi) = bracket(&ln, n.ln()).ok_or_else(|| outside(format!("n = {n}")))?;
        let (j0, wj) = bracket(&lq, q.ln()).ok_or_else(|| outside(format!("q = {q}")))?;
        let (v0, wv) = bracket(&nv, nu).ok_or_else(|| outside(format!("nu = {nu}")))?;
        let mut total = 0.0;
        for (di, fi) in [(0, 1.0 - wi), (1, wi)] {
            for (dj, fj) in [(0, 1.0 - wj), (1, wj)] {
                for (dv, fv) in [(0, 1.0 - wv), (1, wv)] {
                    let w = fi * fj * fv;
                    if w != 0.0 {
                        total += w * self.value(a, i0 + di, j0 + dj, v0 + dv);
                    }
                }
            }
        }
        Ok(total)
    }
}

/// Lower grid index and weight of the upper neighbour; exact nodes get weight 0.
fn bracket(grid: &[f64], x: f64) -> Option<(usize, f64)> {
    let tol = 1e-9;
    let (first, last) = (*grid.first()?, *grid.last()?);
    if !(x >= first - tol && x <= last + tol) {
        return None;
    }
    if grid.len() == 1 {
        return Some((0, 0.0));
    }
    for i in 0..grid.len() - 1 {
        if x <= grid[i + 1] + tol {
            let w = ((x - grid[i]) / (grid[i + 1] - grid[i])).clamp(0.0, 1.0);
            if w < tol {
                return Some((i, 0.0));
            }
            if w > 1.0 - tol {
                // Exact upper node: step to it so the lookup reads one cell.
                return if i + 1 == grid.len() - 1 { Some((i, 1.0)) } else { Some((i + 1, 0.0)) };
            }
            return Some((i, w));
        }
    }
    None
}

static EMBEDDED_TABLE: &str = include_str!("../data/fp_table.txt");

/// The table shipped with the crate.
pub fn embedded_table() -> Result<FpTable> {
    FpTable::parse(EMBEDDED_TABLE)
}

/// Interpolated mean false positives from the shipped table.
pub fn lookup_fp(n: usize, q: usize, alpha: f64, nu: usize) -> Result<f64> {
    embedded_table()?.lookup(n as f64, q as f64, alpha, nu as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_statistics() {
        let h = FpHistogram::from_counts(&[0, 0, 1, 3], 10, 20, 0.01, 1, 0);
        assert_eq!(h.frequency(0), 0.5);
        assert_eq!(h.mean, 1.0);
        assert!((h.counts.values().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((h.sd - (((1.0 + 1.0 + 0.0 + 4.0) / 3.0) as f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn tiny_alpha_gives_no_false_positives() {
        let h = simulate_fp(100, 50, 1e-6, 1, 1000, 3).unwrap();
        assert_eq!(h.frequency(0), 1.0);
    }

    #[test]
    fn reproducible_and_thread_independent() {
        let mut sim = NullSimulation::new(60, 40, 200, 9);
        sim.exec = Exec::Sequential;
        let a = sim.run_counts(&[(0.05, 3)]).unwrap();
        sim.exec = Exec::Parallel;
        let b = sim.run_counts(&[(0.05, 3)]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn coupled_counts_are_monotone_in_nu() {
        let sim = NullSimulation::new(80, 100, 100, 4);
        let configs: Vec<(f64, usize)> = (1..=10).map(|v| (0.01, v)).collect();
        for row in sim.run_counts(&configs).unwrap() {
            assert!(row.windows(2).all(|w| w[0] <= w[1]), "{row:?}");
        }
    }

    fn toy_table() -> FpTable {
        FpTable {
            alphas: vec![0.01],
            ns: vec![100, 1000],
            qs: vec![100, 1000],
            nus: vec![1, 2],
            seed: 1,
            reps: vec![10, 10],
            means: vec![0.01, 0.1, 0.02, 0.2, 0.03, 0.3, 0.04, 0.4],
        }
    }

    #[test]
    fn table_text_round_trip_and_node_lookup() {
        let t = toy_table();
        let parsed = FpTable::parse(&t.to_text()).unwrap();
        assert_eq!(parsed, t);
        assert_eq!(t.lookup(1000.0, 100.0, 0.01, 2.0).unwrap(), 0.3);
        assert_eq!(t.lookup(100.0, 1000.0, 0.01, 1.0).unwrap(), 0.02);
    }

    #[test]
    fn midpoint_lookup_between_nodes() {
        let t = toy_table();
        let mid = t.lookup(100.0, 100.0, 0.01, 1.5).unwrap();
        assert!(mid > 0.01 && mid < 0.1);
        let geo = t.lookup((100.0f64 * 1000.0).sqrt(), 100.0, 0.01, 1.0).unwrap();
        assert!((geo - 0.02).abs() < 1e-12);
    }

    #[test]
    fn outside_grid_is_an_error() {
        let t = toy_table();
        assert!(matches!(t.lookup(50.0, 100.0, 0.01, 1.0), Err(Error::OutsideTable(_))));
        assert!(matches!(t.lookup(100.0, 100.0, 0.05, 1.0), Err(Error::OutsideTable(_))));
        assert!(FpTable::parse("nonsense").is_err());
    }
}
