//! Least-squares engine.
//!
//! [`FitState`] grows a subset one column at a time. The selected columns are
//! orthonormalised by Gram–Schmidt (with one reorthogonalisation pass) and,
//! for every remaining candidate `i`, the state keeps `x_iᵀr` and
//! `‖x̃_i‖²`, where `x̃_i` is the part of `x_i` orthogonal to the current
//! span. Scoring all candidates is then O(q) and each step costs one O(nq)
//! sweep, which is the part that runs on the worker pool.

use crate::error::{Error, Result};
use crate::par::{self, Exec};
use nalgebra::DMatrix;
use serde::Serialize;

/// Relative squared-norm threshold below which a column counts as dependent.
pub const COLLINEAR_TOL: f64 = 1e-10;

/// Dense column-major design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    n: usize,
    q: usize,
    data: Vec<f64>,
    names: Vec<String>,
}

impl Design {
    /// Build from column-major storage. `names` may be empty, in which case
    /// columns are labelled `x1, x2, ...`.
    pub fn from_column_major(n: usize, q: usize, data: Vec<f64>, names: Vec<String>) -> Result<Self> {
        if data.len() != n * q {
            return Err(Error::InvalidData(format!(
                "design storage has {} entries, expected {n}×{q}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("design contains non-finite entries".into()));
        }
        let names = if names.is_empty() {
            (1..=q).map(|i| format!("x{i}")).collect()
        } else if names.len() == q {
            names
        } else {
            return Err(Error::InvalidData(format!("{} names for {q} columns", names.len())));
        };
        Ok(Design { n, q, data, names })
    }

    pub fn from_columns(columns: Vec<Vec<f64>>, names: Vec<String>) -> Result<Self> {
        let q = columns.len();
        let n = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::InvalidData("columns have different lengths".into()));
        }
        Self::from_column_major(n, q, columns.concat(), names)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn column(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn column_mut(&mut self, i: usize) -> &mut [f64] {
        let n = self.n;
        &mut self.data[i * n..(i + 1) * n]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Copy of the selected columns, in the given order.
    pub fn select(&self, cols: &[usize]) -> Design {
        let mut data = Vec::with_capacity(self.n * cols.len());
        for &c in cols {
            data.extend_from_slice(self.column(c));
        }
        Design {
            n: self.n,
            q: cols.len(),
            data,
            names: cols.iter().map(|&c| self.names[c].clone()).collect(),
        }
    }

    /// `Σ_j β_j x_{cols[j]}`.
    pub fn combine(&self, cols: &[usize], beta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (&c, &b) in cols.iter().zip(beta) {
            axpy(b, self.column(c), &mut out);
        }
        out
    }
}

/// Column means removed when the model carries an intercept.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Centering {
    pub y_mean: f64,
    pub x_means: Vec<f64>,
}

/// Response plus design. With an intercept, `y` and every column are centred
/// once on construction and one degree of freedom is set aside.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: Vec<f64>,
    x: Design,
    centering: Option<Centering>,
}

impl Dataset {
    pub fn new(y: Vec<f64>, x: Design, intercept: bool) -> Result<Self> {
        if y.len() != x.n() {
            return Err(Error::InvalidData(format!(
                "response has {} rows but the design has {}",
                y.len(),
                x.n()
            )));
        }
        if y.len() < 2 {
            return Err(Error::InvalidData("need at least two observations".into()));
        }
        if x.q() == 0 {
            return Err(Error::InvalidData("need at least one covariate".into()));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("response contains non-finite entries".into()));
        }
        let mut data = Dataset { y, x, centering: None };
        if intercept {
            data.center();
        }
        for i in 0..data.x.q() {
            if data.x.column(i).iter().all(|&v| v == 0.0) {
                return Err(Error::ConstantColumn {
                    column: i + 1,
                    name: data.x.name(i).to_string(),
                });
            }
        }
        Ok(data)
    }

    /// Same response and centring record with a replacement design.
    pub(crate) fn with_design(&self, x: Design) -> Result<Dataset> {
        if x.n() != self.n() {
            return Err(Error::InvalidData("replacement design has the wrong row count".into()));
        }
        Ok(Dataset {
            y: self.y.clone(),
            x,
            centering: self.centering.clone(),
        })
    }

    fn center(&mut self) {
        let y_mean = mean(&self.y);
        self.y.iter_mut().for_each(|v| *v -= y_mean);
        let mut x_means = Vec::with_capacity(self.x.q());
        for i in 0..self.x.q() {
            let col = self.x.column_mut(i);
            let m = mean(col);
            col.iter_mut().for_each(|v| *v -= m);
            x_means.push(m);
        }
        self.centering = Some(Centering { y_mean, x_means });
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x(&self) -> &Design {
        &self.x
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn q(&self) -> usize {
        self.x.q()
    }

    pub fn has_intercept(&self) -> bool {
        self.centering.is_some()
    }

    pub fn centering(&self) -> Option<&Centering> {
        self.centering.as_ref()
    }

    /// Effective sample size entering the Beta shapes: n, or n − 1 after centring.
    pub fn dof(&self) -> usize {
        self.n() - usize::from(self.has_intercept())
    }

    /// Intercept belonging to coefficients `beta` on `cols`, if any.
    pub fn intercept_for(&self, cols: &[usize], beta: &[f64]) -> Option<f64> {
        self.centering.as_ref().map(|c| {
            c.y_mean - cols.iter().zip(beta).map(|(&i, b)| c.x_means[i] * b).sum::<f64>()
        })
    }
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four accumulators: lets the compiler vectorise and is slightly more accurate.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `(x_iᵀu, x_iᵀr)` in one pass over the column.
#[inline]
fn dot2(x: &[f64], u: &[f64], r: &[f64]) -> (f64, f64) {
    let (mut a0, mut a1, mut b0, mut b1) = (0.0, 0.0, 0.0, 0.0);
    let chunks = x.len() / 2;
    for c in 0..chunks {
        let i = 2 * c;
        a0 += x[i] * u[i];
        b0 += x[i] * r[i];
        a1 += x[i + 1] * u[i + 1];
        b1 += x[i + 1] * r[i + 1];
    }
    if x.len() % 2 == 1 {
        let i = x.len() - 1;
        a0 += x[i] * u[i];
        b0 += x[i] * r[i];
    }
    (a0 + a1, b0 + b1)
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    index: usize,
    norm0_sq: f64,
    norm_sq: f64,
    dot: f64,
}

impl Candidate {
    fn admissible(&self) -> bool {
        self.norm0_sq > 0.0 && self.norm_sq > COLLINEAR_TOL * self.norm0_sq
    }

    fn reduction(&self) -> f64 {
        self.dot * self.dot / self.norm_sq
    }
}

/// Incremental least-squares fit on a growing subset.
#[derive(Debug, Clone)]
pub struct FitState<'a> {
    x: &'a Design,
    y: &'a [f64],
    exec: Exec,
    selected: Vec<usize>,
    basis: Vec<Vec<f64>>,
    // r_cols[j] holds the coordinates of the j-th selected column in basis[0..=j].
    r_cols: Vec<Vec<f64>>,
    qty: Vec<f64>,
    residual: Vec<f64>,
    rss: f64,
    candidates: Vec<Candidate>,
}

impl<'a> FitState<'a> {
    /// Empty fit whose candidate pool is `candidates` (column indices).
    pub fn new(x: &'a Design, y: &'a [f64], candidates: &[usize], exec: Exec) -> Self {
        let residual = y.to_vec();
        let rss = dot(&residual, &residual);
        let candidates = par::map_slice(exec, candidates, |&i| {
            let col = x.column(i);
            let norm0_sq = dot(col, col);
            Candidate {
                index: i,
                norm0_sq,
                norm_sq: norm0_sq,
                dot: dot(col, y),
            }
        });
        FitState {
            x,
            y,
            exec,
            selected: Vec::new(),
            basis: Vec::new(),
            r_cols: Vec::new(),
            qty: Vec::new(),
            residual,
            rss,
            candidates,
        }
    }

    /// Empty fit with every column as a candidate.
    pub fn full(x: &'a Design, y: &'a [f64], exec: Exec) -> Self {
        let all: Vec<usize> = (0..x.q()).collect();
        Self::new(x, y, &all, exec)
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn k(&self) -> usize {
        self.selected.len()
    }

    pub fn rss(&self) -> f64 {
        self.rss
    }

    pub fn residual(&self) -> &[f64] {
        &self.residual
    }

    /// Number of candidates still in the pool (selected ones are removed).
    pub fn pool_size(&self) -> usize {
        self.candidates.len()
    }

    /// Remaining candidates as `(index, x_iᵀr, ‖x̃_i‖²)`.
    pub fn candidate_projections(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.candidates.iter().map(|c| (c.index, c.dot, c.norm_sq))
    }

    /// `rss_{k,+i}` for a candidate still in the pool.
    pub fn rss_with(&self, index: usize) -> Option<f64> {
        self.candidates
            .iter()
            .find(|c| c.index == index && c.admissible())
            .map(|c| (self.rss - c.reduction()).max(0.0))
    }

    /// Candidate with the smallest `rss_{k,+i}`; ties go to the lowest index.
    /// `None` when every remaining candidate is collinear with the span.
    pub fn best_candidate(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for c in self.candidates.iter().filter(|c| c.admissible()) {
            let red = c.reduction();
            match best {
                Some((bi, br)) if red < br || (red == br && c.index > bi) => {}
                _ => best = Some((c.index, red)),
            }
        }
        best.map(|(i, red)| (i, (self.rss - red).max(0.0)))
    }

    /// Remove a candidate from the pool without selecting it.
    pub fn drop_candidate(&mut self, index: usize) {
        self.candidates.retain(|c| c.index != index);
    }

    /// Add column `index` to the subset.
    pub fn advance(&mut self, index: usize) -> Result<()> {
        let col = self.x.column(index);
        let norm0_sq = dot(col, col);
        let mut v = col.to_vec();
        let mut coords = vec![0.0; self.basis.len() + 1];
        for _ in 0..2 {
            for (j, u) in self.basis.iter().enumerate() {
                let c = dot(u, &v);
                coords[j] += c;
                axpy(-c, u, &mut v);
            }
        }
        let norm_sq = dot(&v, &v);
        if norm0_sq == 0.0 || norm_sq <= COLLINEAR_TOL * norm0_sq {
            return Err(Error::Collinear { column: index });
        }
        let norm = norm_sq.sqrt();
        v.iter_mut().for_each(|e| *e /= norm);
        *coords.last_mut().unwrap() = norm;

        let ur = dot(&v, &self.residual);
        axpy(-ur, &v, &mut self.residual);
        self.rss = dot(&self.residual, &self.residual);
        self.qty.push(dot(&v, self.y));

        self.candidates.retain(|c| c.index != index);
        let (x, u, r) = (self.x, &v, &self.residual);
        par::for_each_mut(self.exec, &mut self.candidates, |_, c| {
            let (cu, cr) = dot2(x.column(c.index), u, r);
            c.norm_sq = (c.norm_sq - cu * cu).max(0.0);
            c.dot = cr;
        });

        self.basis.push(v);
        self.r_cols.push(coords);
        self.selected.push(index);
        Ok(())
    }

    /// Least-squares coefficients, in the order of [`Self::selected`].
    pub fn coefficients(&self) -> Vec<f64> {
        let k = self.k();
        let mut beta = self.qty.clone();
        for j in (0..k).rev() {
            beta[j] /= self.r_cols[j][j];
            let bj = beta[j];
            for (i, b) in beta.iter_mut().enumerate().take(j) {
                *b -= self.r_cols[j][i] * bj;
            }
        }
        beta
    }

    /// Diagonal of `(X_SᵀX_S)^{-1}`, i.e. `1/‖x_j − Proj_{S∖j} x_j‖²`.
    pub fn inverse_gram_diag(&self) -> Vec<f64> {
        let k = self.k();
        // Invert the upper-triangular R column by column; row i of R^{-1}
        // gives (G^{-1})_ii = ‖row i‖².
        let r = |i: usize, j: usize| self.r_cols[j][i];
        let mut rinv = vec![vec![0.0; k]; k];
        for j in 0..k {
            rinv[j][j] = 1.0 / r(j, j);
            for i in (0..j).rev() {
                let s: f64 = (i + 1..=j).map(|l| r(i, l) * rinv[l][j]).sum();
                rinv[i][j] = -s / r(i, i);
            }
        }
        rinv.iter().map(|row| row.iter().map(|v| v * v).sum()).collect()
    }

    /// `rss_{k,−i}` for every selected column, via `rss + β_i² / (G^{-1})_ii`.
    pub fn drop_one_rss(&self) -> Vec<f64> {
        let beta = self.coefficients();
        self.inverse_gram_diag()
            .iter()
            .zip(&beta)
            .map(|(g, b)| self.rss + b * b / g)
            .collect()
    }
}

/// Result of a direct least-squares fit on a prescribed subset.
#[derive(Debug, Clone)]
pub struct LsFit<'a> {
    pub state: FitState<'a>,
    /// Columns of the requested subset skipped as linearly dependent.
    pub dependent: Vec<usize>,
}

impl LsFit<'_> {
    pub fn rss(&self) -> f64 {
        self.state.rss()
    }

    pub fn subset(&self) -> &[usize] {
        self.state.selected()
    }

    pub fn coefficients(&self) -> Vec<f64> {
        self.state.coefficients()
    }
}

/// Regress `y` on the columns `subset`. Dependent columns are skipped and
/// reported in [`LsFit::dependent`].
pub fn fit_ls<'a>(x: &'a Design, y: &'a [f64], subset: &[usize]) -> Result<LsFit<'a>> {
    check_subset(x, subset)?;
    if subset.len() >= x.n() {
        return Err(Error::Domain(format!(
            "subset of size {} needs more than {} observations",
            subset.len(),
            x.n()
        )));
    }
    let mut state = FitState::new(x, y, &[], Exec::Sequential);
    let mut dependent = Vec::new();
    for &i in subset {
        match state.advance(i) {
            Ok(()) => {}
            Err(Error::Collinear { column }) => dependent.push(column),
            Err(e) => return Err(e),
        }
    }
    Ok(LsFit { state, dependent })
}

/// Like [`fit_ls`] but treats a dependent column as an error.
pub fn fit_ls_strict<'a>(x: &'a Design, y: &'a [f64], subset: &[usize]) -> Result<LsFit<'a>> {
    let fit = fit_ls(x, y, subset)?;
    match fit.dependent.first() {
        Some(&column) => Err(Error::Collinear { column }),
        None => Ok(fit),
    }
}

fn check_subset(x: &Design, subset: &[usize]) -> Result<()> {
    let mut seen = vec![false; x.q()];
    for &i in subset {
        if i >= x.q() {
            return Err(Error::Domain(format!("column index {} out of range (q = {})", i + 1, x.q())));
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::Domain(format!("column {} listed twice", i + 1)));
        }
    }
    Ok(())
}

/// `rss` of `subset` with member `i` removed.
pub fn rss_drop_one(x: &Design, y: &[f64], subset: &[usize], i: usize) -> Result<f64> {
    if !subset.contains(&i) {
        return Err(Error::Domain(format!("column {} is not in the subset", i + 1)));
    }
    let rest: Vec<usize> = subset.iter().copied().filter(|&j| j != i).collect();
    Ok(fit_ls(x, y, &rest)?.rss())
}

/// Gram matrix of a small column universe plus `y`, for evaluating many
/// subsets of that universe cheaply.
#[derive(Debug, Clone)]
pub struct SubsetGram {
    universe: Vec<usize>,
    gram: DMatrix<f64>,
    xty: Vec<f64>,
    yty: f64,
}

/// Fit of one subset of a [`SubsetGram`] universe.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetFit {
    /// Positions within the universe.
    pub members: Vec<usize>,
    pub rss: f64,
    pub coeffs: Vec<f64>,
    /// `rss_{−i}` for each member, same order.
    pub drop_one: Vec<f64>,
}

impl SubsetGram {
    pub fn new(x: &Design, y: &[f64], universe: &[usize]) -> Self {
        let m = universe.len();
        let mut gram = DMatrix::zeros(m, m);
        for a in 0..m {
            for b in 0..=a {
                let g = dot(x.column(universe[a]), x.column(universe[b]));
                gram[(a, b)] = g;
                gram[(b, a)] = g;
            }
        }
        SubsetGram {
            universe: universe.to_vec(),
            gram,
            xty: universe.iter().map(|&c| dot(x.column(c), y)).collect(),
            yty: dot(y, y),
        }
    }

    pub fn universe(&self) -> &[usize] {
        &self.universe
    }

    pub fn yty(&self) -> f64 {
        self.yty
    }

    /// Fit the subset given by universe positions; `None` if it is singular.
    pub fn fit(&self, members: &[usize]) -> Option<SubsetFit> {
        let k = members.len();
        if k == 0 {
            return Some(SubsetFit {
                members: Vec::new(),
                rss: self.yty,
                coeffs: Vec::new(),
                drop_one: Vec::new(),
            });
        }
        let g = DMatrix::from_fn(k, k, |a, b| self.gram[(members[a], members[b])]);
        if members.iter().any(|&m| self.gram[(m, m)] <= 0.0) {
            return None;
        }
        let chol = g.clone().cholesky()?;
        let l = chol.l_dirty();
        for a in 0..k {
            if l[(a, a)] * l[(a, a)] <= COLLINEAR_TOL * g[(a, a)] {
                return None;
            }
        }
        let b = nalgebra::DVector::from_iterator(k, members.iter().map(|&m| self.xty[m]));
        let beta = chol.solve(&b);
        let rss = (self.yty - beta.dot(&b)).max(0.0);
        let inv = chol.inverse();
        let drop_one = (0..k).map(|a| rss + beta[a] * beta[a] / inv[(a, a)]).collect();
        Some(SubsetFit {
            members: members.to_vec(),
            rss,
            coeffs: beta.iter().copied().collect(),
            drop_one,
        })
    }
}
