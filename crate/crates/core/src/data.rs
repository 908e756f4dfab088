//! Ingestion, standardisation, lagged designs and synthetic generators.

use crate::error::{Error, Result};
use crate::regression::{mean, Dataset, Design};
use crate::rng::{fill_normal, substream};
use log::warn;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// A rectangular numeric table; `None` marks a missing cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub names: Vec<String>,
    pub columns: Vec<Vec<Option<f64>>>,
}

const MISSING: &[&str] = &["", "NA", "na", "N/A", "NaN", "nan", "null", "."];

impl Table {
    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    /// Parse comma-separated text with a header row; a header without commas
    /// switches to whitespace-delimited fields.
    pub fn parse(text: &str) -> Result<Table> {
        let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
        let records: Vec<Vec<String>> = if first.contains(',') || !first.trim().contains(char::is_whitespace) {
            let mut rdr = csv::ReaderBuilder::new()
                .has_headers(false)
                .trim(csv::Trim::All)
                .from_reader(text.as_bytes());
            rdr.records()
                .map(|r| r.map(|rec| rec.iter().map(str::to_string).collect()))
                .collect::<std::result::Result<_, _>>()?
        } else {
            text.lines()
                .filter(|l| !l.trim().is_empty())
                .map(|l| l.split_whitespace().map(str::to_string).collect())
                .collect()
        };
        let mut it = records.into_iter();
        let names: Vec<String> = it
            .next()
            .ok_or_else(|| Error::InvalidData("empty file: a header row is required".into()))?
            .into_iter()
            .map(|s| s.trim_matches('"').to_string())
            .collect();
        let mut columns = vec![Vec::new(); names.len()];
        for (r, rec) in it.enumerate() {
            if rec.len() != names.len() {
                return Err(Error::InvalidData(format!(
                    "row {} has {} fields, the header has {}",
                    r + 1,
                    rec.len(),
                    names.len()
                )));
            }
            for (c, cell) in rec.iter().enumerate() {
                let cell = cell.trim();
                let v = if MISSING.contains(&cell) {
                    None
                } else {
                    match cell.parse::<f64>() {
                        Ok(v) if v.is_finite() => Some(v),
                        _ => {
                            return Err(Error::Parse {
                                row: r + 1,
                                column: names[c].clone(),
                                value: cell.to_string(),
                            })
                        }
                    }
                };
                columns[c].push(v);
            }
        }
        Ok(Table { names, columns })
    }

    pub fn read(path: &Path) -> Result<Table> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
        Table::parse(&text)
    }

    /// Column position from a header name or a 1-based number.
    pub fn resolve(&self, key: &str) -> Result<usize> {
        if let Some(i) = self.names.iter().position(|n| n == key) {
            return Ok(i);
        }
        match key.parse::<usize>() {
            Ok(i) if i >= 1 && i <= self.names.len() => Ok(i - 1),
            _ => Err(Error::InvalidData(format!("no column `{key}`"))),
        }
    }

    /// Rows with no missing cell, or an error naming the first gap when
    /// `strict`.
    pub fn complete_rows(&self, strict: bool) -> Result<Vec<usize>> {
        let mut keep = Vec::with_capacity(self.rows());
        for r in 0..self.rows() {
            match self.columns.iter().position(|c| c[r].is_none()) {
                None => keep.push(r),
                Some(c) if strict => {
                    return Err(Error::Missing {
                        row: r + 1,
                        column: self.names[c].clone(),
                    })
                }
                Some(_) => {}
            }
        }
        Ok(keep)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Loaded {
    pub dataset: Dataset,
    pub dropped_rows: usize,
    pub warnings: Vec<String>,
}

/// Split a table into response `y_column` (name or 1-based number) and the
/// remaining columns as covariates. Incomplete rows are dropped unless
/// `strict`.
pub fn dataset_from_table(table: &Table, y_column: &str, intercept: bool, strict: bool) -> Result<Loaded> {
    let yi = table.resolve(y_column)?;
    let keep = table.complete_rows(strict)?;
    let dropped = table.rows() - keep.len();
    let mut warnings = Vec::new();
    if dropped > 0 {
        let msg = format!("dropped {dropped} row(s) with missing values");
        warn!("{msg}");
        warnings.push(msg);
    }
    let pick = |c: usize| -> Vec<f64> { keep.iter().map(|&r| table.columns[c][r].unwrap()).collect() };
    let y = pick(yi);
    let cols: Vec<usize> = (0..table.names.len()).filter(|&c| c != yi).collect();
    let x = Design::from_columns(
        cols.iter().map(|&c| pick(c)).collect(),
        cols.iter().map(|&c| table.names[c].clone()).collect(),
    )?;
    Ok(Loaded {
        dataset: Dataset::new(y, x, intercept)?,
        dropped_rows: dropped,
        warnings,
    })
}

pub fn load_csv(path: &Path, y_column: &str, intercept: bool, strict: bool) -> Result<Loaded> {
    dataset_from_table(&Table::read(path)?, y_column, intercept, strict)
}

/// Every column of `table` as a design, optionally centred. Returns the
/// design and the number of dropped rows.
pub fn design_from_table(table: &Table, center: bool, strict: bool) -> Result<(Design, usize)> {
    let keep = table.complete_rows(strict)?;
    let dropped = table.rows() - keep.len();
    if dropped > 0 {
        warn!("dropped {dropped} row(s) with missing values");
    }
    let columns = table
        .columns
        .iter()
        .map(|c| {
            let mut v: Vec<f64> = keep.iter().map(|&r| c[r].unwrap()).collect();
            if center && !v.is_empty() {
                let m = mean(&v);
                v.iter_mut().for_each(|x| *x -= m);
            }
            v
        })
        .collect();
    Ok((Design::from_columns(columns, table.names.clone())?, dropped))
}

/// Column shifts and scales applied by [`standardize`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scaling {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl Scaling {
    /// Coefficients on the original column scale.
    pub fn unscale(&self, cols: &[usize], beta: &[f64]) -> Vec<f64> {
        cols.iter().zip(beta).map(|(&c, b)| b / self.sds[c]).collect()
    }
}

/// Centre every column and scale it to unit sample variance.
pub fn standardize(data: &Dataset) -> Result<(Dataset, Scaling)> {
    let x = data.x();
    let n = x.n();
    if n < 2 {
        return Err(Error::InvalidData("need at least two rows to standardize".into()));
    }
    let mut cols = Vec::with_capacity(x.q());
    let mut means = Vec::with_capacity(x.q());
    let mut sds = Vec::with_capacity(x.q());
    for i in 0..x.q() {
        let c = x.column(i);
        let m = mean(c);
        let ss: f64 = c.iter().map(|v| (v - m) * (v - m)).sum();
        let sd = (ss / (n - 1) as f64).sqrt();
        if !(sd > 1e-12 * c.iter().fold(0.0f64, |a, v| a.max(v.abs()))) || sd == 0.0 {
            return Err(Error::ConstantColumn {
                column: i + 1,
                name: x.name(i).to_string(),
            });
        }
        cols.push(c.iter().map(|v| (v - m) / sd).collect());
        means.push(m);
        sds.push(sd);
    }
    let design = Design::from_columns(cols, x.names().to_vec())?;
    Ok((data.with_design(design)?, Scaling { means, sds }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagSpec {
    pub max_lag: usize,
    /// Series used as covariates, in block order; `None` means the target
    /// followed by every other column in file order.
    pub series: Option<Vec<String>>,
    pub target: String,
}

/// Covariate column (0-based) holding lag `lag` of block `block`.
pub fn lag_column(block: usize, lag: usize, max_lag: usize) -> usize {
    block * max_lag + lag - 1
}

/// Inverse of [`lag_column`]: `(block, lag)`.
pub fn lag_of_column(column: usize, max_lag: usize) -> (usize, usize) {
    (column / max_lag, column % max_lag + 1)
}

/// Design whose row for time t holds every series at t−1, …, t−L
/// (series-major, lag-minor) with the target at time t as response.
pub fn make_lags(table: &Table, spec: &LagSpec, intercept: bool) -> Result<Loaded> {
    let len = table.rows();
    if spec.max_lag == 0 || spec.max_lag >= len {
        return Err(Error::Domain(format!(
            "max lag {} must be between 1 and the series length − 1 = {}",
            spec.max_lag,
            len.saturating_sub(1)
        )));
    }
    let target = table.resolve(&spec.target)?;
    let blocks: Vec<usize> = match &spec.series {
        Some(list) => list.iter().map(|s| table.resolve(s)).collect::<Result<_>>()?,
        None => std::iter::once(target)
            .chain((0..table.names.len()).filter(|&c| c != target))
            .collect(),
    };
    let l = spec.max_lag;
    let mut names = Vec::with_capacity(blocks.len() * l);
    for &b in &blocks {
        for lag in 1..=l {
            names.push(format!("{}_lag{lag}", table.names[b]));
        }
    }
    let mut y = Vec::new();
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); blocks.len() * l];
    let mut dropped = 0;
    for t in l..len {
        let row: Option<Vec<f64>> = blocks
            .iter()
            .flat_map(|&b| (1..=l).map(move |lag| table.columns[b][t - lag]))
            .collect();
        match (table.columns[target][t], row) {
            (Some(yt), Some(row)) => {
                y.push(yt);
                for (c, v) in cols.iter_mut().zip(row) {
                    c.push(v);
                }
            }
            _ => dropped += 1,
        }
    }
    let mut warnings = Vec::new();
    if dropped > 0 {
        let msg = format!("dropped {dropped} lagged row(s) with missing values");
        warn!("{msg}");
        warnings.push(msg);
    }
    let x = Design::from_columns(cols, names)?;
    Ok(Loaded {
        dataset: Dataset::new(y, x, intercept)?,
        dropped_rows: dropped,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignKind {
    /// Rows with covariance `ρ^{|i−j|}`.
    Toeplitz,
    /// Independent columns and a pure-noise response.
    Null,
    /// Orthonormal columns.
    Orthonormal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimDesign {
    pub kind: DesignKind,
    pub n: usize,
    pub q: usize,
    pub rho: f64,
    pub p_active: usize,
    /// Active coefficients are `amplitude / √n`.
    pub amplitude: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

impl SimDesign {
    /// The Toeplitz benchmark design with 60 active covariates.
    pub fn tutorial(n: usize, q: usize, seed: u64) -> Self {
        SimDesign {
            kind: DesignKind::Toeplitz,
            n,
            q,
            rho: 0.25,
            p_active: 60,
            amplitude: 4.5,
            noise_sd: 1.0,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub dataset: Dataset,
    /// Active columns, ascending.
    pub truth: Vec<usize>,
    pub beta: Vec<f64>,
}

/// Draw a design, active set and response. Deterministic in `seed`.
pub fn gen_design(d: &SimDesign) -> Result<Generated> {
    if d.n < 2 || d.q == 0 || !(d.rho.abs() < 1.0) || d.p_active > d.q {
        return Err(Error::Domain(format!("invalid simulation design {d:?}")));
    }
    if d.kind == DesignKind::Orthonormal && d.q > d.n {
        return Err(Error::Domain("orthonormal design needs q ≤ n".into()));
    }
    let mut rng = substream(d.seed, 0);
    let (n, q) = (d.n, d.q);
    let mut data = vec![0.0; n * q];
    fill_normal(&mut rng, &mut data);
    match d.kind {
        DesignKind::Toeplitz if d.rho != 0.0 => {
            // AR(1) across columns: exact for Σ_ij = ρ^{|i−j|}.
            let s = (1.0 - d.rho * d.rho).sqrt();
            for j in 1..q {
                let (prev, cur) = data.split_at_mut(j * n);
                let prev = &prev[(j - 1) * n..];
                for (c, p) in cur[..n].iter_mut().zip(prev) {
                    *c = d.rho * p + s * *c;
                }
            }
        }
        DesignKind::Orthonormal => {
            let m = DMatrix::from_column_slice(n, q, &data);
            let qr = m.qr();
            data = qr.q().as_slice().to_vec();
        }
        _ => {}
    }
    let truth = if d.kind == DesignKind::Null {
        Vec::new()
    } else {
        let mut t = sample(&mut rng, q, d.p_active).into_vec();
        t.sort_unstable();
        t
    };
    let mut beta = vec![0.0; q];
    let b = d.amplitude / (n as f64).sqrt();
    for &i in &truth {
        beta[i] = b;
    }
    let x = Design::from_column_major(n, q, data, Vec::new())?;
    let mut y = vec![0.0; n];
    fill_normal(&mut rng, &mut y);
    y.iter_mut().for_each(|v| *v *= d.noise_sd);
    for &i in &truth {
        for (yv, xv) in y.iter_mut().zip(x.column(i)) {
            *yv += beta[i] * xv;
        }
    }
    Ok(Generated {
        dataset: Dataset::new(y, x, false)?,
        truth,
        beta,
    })
}

/// Edge probability as a function of the scaled distance `u = scale·d`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeKernel {
    /// `exp(−u²/2)`, the normal density rescaled to peak 1.
    #[default]
    Gaussian,
    /// The standard normal density `exp(−u²/2)/√(2π)`.
    Density,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomGraphSpec {
    pub n: usize,
    pub q: usize,
    pub scale: f64,
    pub kernel: EdgeKernel,
    /// Off-diagonal precision entry on each edge (negated).
    pub strength: f64,
    pub seed: u64,
}

impl RandomGraphSpec {
    pub fn new(n: usize, q: usize, seed: u64) -> Self {
        RandomGraphSpec {
            n,
            q,
            scale: 23.5,
            kernel: EdgeKernel::Gaussian,
            strength: 0.245,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomGraph {
    pub design: Design,
    /// Undirected pairs `(a, b)`, `a < b`, sorted.
    pub edges: Vec<(usize, usize)>,
    pub positions: Vec<(f64, f64)>,
    /// Common diagonal of the precision matrix after any shift.
    pub diagonal: f64,
}

/// Nodes uniform on the unit square, edges with probability
/// `kernel(scale·distance)`, and rows drawn from `N(0, Θ^{-1})` with
/// `Θ = diag + (−strength)·adjacency`. The diagonal starts at 1 and is raised
/// just enough to keep Θ positive definite.
pub fn random_graph(spec: &RandomGraphSpec) -> Result<RandomGraph> {
    let (n, q) = (spec.n, spec.q);
    if n < 2 || q < 2 || !(spec.scale > 0.0) {
        return Err(Error::Domain(format!("invalid random graph {spec:?}")));
    }
    let mut rng = substream(spec.seed, 0);
    let positions: Vec<(f64, f64)> = (0..q).map(|_| (rng.random::<f64>(), rng.random::<f64>())).collect();
    let norm = match spec.kernel {
        EdgeKernel::Gaussian => 1.0,
        EdgeKernel::Density => 1.0 / (2.0 * std::f64::consts::PI).sqrt(),
    };
    let mut edges = Vec::new();
    for a in 0..q {
        for b in a + 1..q {
            let (dx, dy) = (positions[a].0 - positions[b].0, positions[a].1 - positions[b].1);
            let u = spec.scale * (dx * dx + dy * dy).sqrt();
            let p = norm * (-0.5 * u * u).exp();
            if rng.random::<f64>() < p {
                edges.push((a, b));
            }
        }
    }
    let mut theta = DMatrix::<f64>::identity(q, q);
    for &(a, b) in &edges {
        theta[(a, b)] = -spec.strength;
        theta[(b, a)] = -spec.strength;
    }
    let mut diagonal = 1.0;
    if theta.clone().cholesky().is_none() {
        let min_eig = SymmetricEigen::new(theta.clone()).eigenvalues.min();
        let shift = 0.05 - min_eig;
        diagonal += shift;
        for i in 0..q {
            theta[(i, i)] = diagonal;
        }
    }
    let chol = theta
        .cholesky()
        .ok_or_else(|| Error::NoConvergence("random graph precision factorisation".into()))?;
    let mut z = vec![0.0; q * n];
    fill_normal(&mut rng, &mut z);
    // Columns of Z are observations; Lᵀx = z gives Cov(x) = Θ^{-1}.
    let z = DMatrix::from_column_slice(q, n, &z);
    let xt = chol
        .l()
        .transpose()
        .solve_upper_triangular(&z)
        .ok_or_else(|| Error::NoConvergence("random graph triangular solve".into()))?;
    let x = xt.transpose();
    let design = Design::from_column_major(n, q, x.as_slice().to_vec(), Vec::new())?;
    Ok(RandomGraph {
        design,
        edges,
        positions,
        diagonal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_split_by_name_and_position() {
        let t = Table::parse("y,a,b\n1,2,3\n4,5,7\n7,8,8\n").unwrap();
        let by_name = dataset_from_table(&t, "y", false, false).unwrap();
        let by_pos = dataset_from_table(&t, "1", false, false).unwrap();
        assert_eq!(by_name.dataset, by_pos.dataset);
        assert_eq!((by_name.dataset.n(), by_name.dataset.q()), (3, 2));
        let mid = dataset_from_table(&t, "a", false, false).unwrap();
        assert_eq!(mid.dataset.y(), &[2.0, 5.0, 8.0]);
        assert_eq!(mid.dataset.x().names(), &["y".to_string(), "b".to_string()]);
    }

    #[test]
    fn missing_rows_dropped_or_rejected() {
        let t = Table::parse("y,a\n1,2\nNA,3\n4,5\n6,1\n").unwrap();
        let l = dataset_from_table(&t, "y", false, false).unwrap();
        assert_eq!((l.dataset.n(), l.dropped_rows), (3, 1));
        assert!(matches!(
            dataset_from_table(&t, "y", false, true),
            Err(Error::Missing { row: 2, .. })
        ));
    }

    #[test]
    fn non_numeric_cell_reports_coordinates() {
        match Table::parse("y,a\n1,2\n3,abc\n") {
            Err(Error::Parse { row, column, value }) => {
                assert_eq!((row, column.as_str(), value.as_str()), (2, "a", "abc"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn whitespace_delimited_fallback() {
        let t = Table::parse("y a\n1 2\n3\t4\n").unwrap();
        assert_eq!(t.columns[1], vec![Some(2.0), Some(4.0)]);
    }

    #[test]
    fn lag_indexing_convention() {
        // Column 18 (1-based) with 16 lags per series: second series, lag 2.
        assert_eq!(lag_of_column(17, 16), (1, 2));
        assert_eq!(lag_of_column(179, 16), (11, 4));
        assert_eq!(lag_column(11, 4, 16), 179);
    }

    #[test]
    fn single_series_lag_one() {
        let t = Table::parse("s\n1\n2\n4\n8\n").unwrap();
        let spec = LagSpec { max_lag: 1, series: None, target: "s".into() };
        let l = make_lags(&t, &spec, false).unwrap();
        assert_eq!(l.dataset.y(), &[2.0, 4.0, 8.0]);
        assert_eq!(l.dataset.x().column(0), &[1.0, 2.0, 4.0]);
        assert_eq!(l.dataset.x().name(0), "s_lag1");
        assert!(make_lags(&t, &LagSpec { max_lag: 4, ..spec }, false).is_err());
    }

    #[test]
    fn standardize_is_affine_invariant() {
        let x = vec![1.0, 3.0, 2.0, 7.0, 5.0];
        let x2: Vec<f64> = x.iter().map(|v| 2.0 * v + 3.0).collect();
        let y = vec![1.0, 0.0, 2.0, 1.0, 3.0];
        let d = Dataset::new(y, Design::from_columns(vec![x, x2], vec![]).unwrap(), false).unwrap();
        let (s, scaling) = standardize(&d).unwrap();
        for (a, b) in s.x().column(0).iter().zip(s.x().column(1)) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((scaling.sds[1] / scaling.sds[0] - 2.0).abs() < 1e-12);
        let c = s.x().column(0);
        assert!(mean(c).abs() < 1e-14);
        assert!((c.iter().map(|v| v * v).sum::<f64>() / 4.0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_column_named() {
        let d = Dataset::new(
            vec![1.0, 2.0, 3.0],
            Design::from_columns(vec![vec![1.0, 2.0, 4.0], vec![5.0, 5.0, 5.0]], vec!["a".into(), "c".into()]).unwrap(),
            false,
        )
        .unwrap();
        assert!(matches!(standardize(&d), Err(Error::ConstantColumn { column: 2, .. })));
    }

    #[test]
    fn generator_is_deterministic() {
        let d = SimDesign::tutorial(50, 80, 3);
        let a = gen_design(&d).unwrap();
        let b = gen_design(&d).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.truth.len(), 60);
        assert!(a.truth.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn orthonormal_columns() {
        let d = SimDesign {
            kind: DesignKind::Orthonormal,
            n: 30,
            q: 5,
            rho: 0.0,
            p_active: 2,
            amplitude: 1.0,
            noise_sd: 1.0,
            seed: 1,
        };
        let g = gen_design(&d).unwrap();
        let x = g.dataset.x();
        for i in 0..5 {
            for j in 0..5 {
                let ip = crate::regression::dot(x.column(i), x.column(j));
                assert!((ip - f64::from(u8::from(i == j))).abs() < 1e-12);
            }
        }
    }
}
