//! Dependency graphs from per-node stepwise regressions.
//!
//! Each covariate is regressed on all the others with cut-off α/q; an arrow
//! `j → i` records that the regression of `x_i` selected `x_j`.

use crate::error::{Error, Result};
use crate::par::{self, Exec};
use crate::regression::Design;
use crate::selection::{leave_one_out, repeated, stepwise, Problem, SelectionConfig};
use log::warn;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphMethod {
    #[default]
    F1st,
    F2st,
    F3st,
}

impl FromStr for GraphMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f1st" => Ok(GraphMethod::F1st),
            "f2st" => Ok(GraphMethod::F2st),
            "f3st" => Ok(GraphMethod::F3st),
            _ => Err(Error::Domain(format!("unknown graph method `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub pvalue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DependencyGraph {
    pub nodes: Vec<String>,
    /// Sorted by target, then source.
    pub directed_edges: Vec<Edge>,
    /// Pairs `(a, b)` with `a < b`, sorted.
    pub undirected_edges: Vec<(usize, usize)>,
    /// Nodes whose regression failed; left isolated.
    pub failed_nodes: Vec<usize>,
    pub warnings: Vec<String>,
}

impl DependencyGraph {
    pub fn from_directed(nodes: Vec<String>, mut directed: Vec<Edge>) -> Self {
        directed.sort_by_key(|e| (e.target, e.source));
        let mut undirected: Vec<(usize, usize)> = directed
            .iter()
            .map(|e| (e.source.min(e.target), e.source.max(e.target)))
            .collect();
        undirected.sort_unstable();
        undirected.dedup();
        DependencyGraph {
            nodes,
            directed_edges: directed,
            undirected_edges: undirected,
            failed_nodes: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.undirected_edges.binary_search(&(a.min(b), a.max(b))).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphConfig {
    pub alpha: f64,
    pub method: GraphMethod,
    /// Divide α by q before each regression.
    pub bonferroni: bool,
    pub selection: SelectionConfig,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig {
            alpha: 0.01,
            method: GraphMethod::F1st,
            bonferroni: true,
            selection: SelectionConfig::default(),
        }
    }
}

/// Regress every column on the others. Columns are used as given; centre
/// them beforehand if an intercept is wanted and pass `n_eff = n − 1`.
pub fn build_graph(x: &Design, n_eff: usize, cfg: &GraphConfig) -> Result<DependencyGraph> {
    let q = x.q();
    if q < 2 || x.n() < 3 {
        return Err(Error::Domain(format!("graph needs q ≥ 2 and n ≥ 3 (n={}, q={q})", x.n())));
    }
    let mut sel = cfg.selection.clone();
    sel.alpha = if cfg.bonferroni { cfg.alpha / q as f64 } else { cfg.alpha };
    sel.validate()?;
    // Nodes run in parallel; each regression is sequential.
    let outer = sel.exec;
    sel.exec = Exec::Sequential;
    let per_node = par::map_indexed(outer, q, |i| node_edges(x, n_eff, i, cfg.method, &sel));
    let mut edges = Vec::new();
    let mut failed = Vec::new();
    let mut warnings = Vec::new();
    for (i, r) in per_node.into_iter().enumerate() {
        match r {
            Ok(e) => edges.extend(e),
            Err(e) => {
                let msg = format!("regression of node {} ({}) failed: {e}", i + 1, x.name(i));
                warn!("{msg}");
                warnings.push(msg);
                failed.push(i);
            }
        }
    }
    let mut g = DependencyGraph::from_directed(x.names().to_vec(), edges);
    g.failed_nodes = failed;
    g.warnings = warnings;
    Ok(g)
}

fn node_edges(x: &Design, n_eff: usize, target: usize, method: GraphMethod, cfg: &SelectionConfig) -> Result<Vec<Edge>> {
    let y = x.column(target);
    let pool: Vec<usize> = (0..x.q()).filter(|&j| j != target).collect();
    let p = Problem { x, y, n: n_eff, pool: &pool };
    let edge = |source, pvalue| Edge { source, target, pvalue };
    let mut best: BTreeMap<usize, f64> = BTreeMap::new();
    let mut note = |j: usize, pv: f64| {
        let e = best.entry(j).or_insert(pv);
        *e = e.min(pv);
    };
    match method {
        GraphMethod::F1st => {
            let t = stepwise(&p, cfg)?;
            for (j, pv) in t.chosen.iter().zip(&t.final_pvalues) {
                note(*j, *pv);
            }
        }
        GraphMethod::F2st => {
            for t in repeated(&p, cfg)? {
                for (j, pv) in t.chosen.iter().zip(&t.final_pvalues) {
                    note(*j, *pv);
                }
            }
        }
        GraphMethod::F3st => {
            for a in leave_one_out(&p, cfg)? {
                for (j, pv) in a.indices.iter().zip(&a.pvalues) {
                    note(*j, *pv);
                }
            }
        }
    }
    Ok(best.into_iter().map(|(j, pv)| edge(j, pv)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphFormat {
    EdgeList,
    Dot,
}

/// Tab-separated `source target pvalue` with 1-based node numbers, or DOT.
pub fn export_graph(g: &DependencyGraph, format: GraphFormat, directed: bool) -> String {
    let mut s = String::new();
    match format {
        GraphFormat::EdgeList => {
            let _ = writeln!(s, "source\ttarget\tpvalue");
            if directed {
                for e in &g.directed_edges {
                    let _ = writeln!(s, "{}\t{}\t{:e}", e.source + 1, e.target + 1, e.pvalue);
                }
            } else {
                for (a, b, pv) in undirected_with_pvalues(g) {
                    let _ = writeln!(s, "{}\t{}\t{pv:e}", a + 1, b + 1);
                }
            }
        }
        GraphFormat::Dot => {
            let (kw, arrow) = if directed { ("digraph", "->") } else { ("graph", "--") };
            let _ = writeln!(s, "{kw} dependencies {{");
            for (i, name) in g.nodes.iter().enumerate() {
                let _ = writeln!(s, "  {} [label=\"{}\"];", i + 1, name.replace('"', "\\\""));
            }
            if directed {
                for e in &g.directed_edges {
                    let _ = writeln!(s, "  {} {arrow} {};", e.source + 1, e.target + 1);
                }
            } else {
                for &(a, b) in &g.undirected_edges {
                    let _ = writeln!(s, "  {} {arrow} {};", a + 1, b + 1);
                }
            }
            let _ = writeln!(s, "}}");
        }
    }
    s
}

/// Undirected pairs with the smaller P-value of their two directions.
fn undirected_with_pvalues(g: &DependencyGraph) -> Vec<(usize, usize, f64)> {
    let mut m: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for e in &g.directed_edges {
        let key = (e.source.min(e.target), e.source.max(e.target));
        let v = m.entry(key).or_insert(e.pvalue);
        *v = v.min(e.pvalue);
    }
    m.into_iter().map(|((a, b), p)| (a, b, p)).collect()
}

/// Parse the edge-list format back into 0-based `(source, target, pvalue)`.
pub fn parse_edge_list(text: &str) -> Result<Vec<(usize, usize, f64)>> {
    let mut out = Vec::new();
    for (line_no, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        let bad = || Error::InvalidData(format!("edge list line {}: `{line}`", line_no + 1));
        if f.len() != 3 {
            return Err(bad());
        }
        let a: usize = f[0].parse().map_err(|_| bad())?;
        let b: usize = f[1].parse().map_err(|_| bad())?;
        let p: f64 = f[2].parse().map_err(|_| bad())?;
        if a == 0 || b == 0 {
            return Err(bad());
        }
        out.push((a - 1, b - 1, p));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(edges: &[(usize, usize)]) -> DependencyGraph {
        let nodes = (1..=4).map(|i| format!("x{i}")).collect();
        DependencyGraph::from_directed(
            nodes,
            edges.iter().map(|&(s, t)| Edge { source: s, target: t, pvalue: 1e-5 }).collect(),
        )
    }

    #[test]
    fn symmetrization() {
        let g = graph(&[(1, 0), (0, 1), (2, 3)]);
        assert_eq!(g.undirected_edges, vec![(0, 1), (2, 3)]);
        assert!(g.has_edge(3, 2));
        assert!(!g.has_edge(0, 2));
    }

    #[test]
    fn dot_output() {
        let g = graph(&[(1, 0)]);
        let dot = export_graph(&g, GraphFormat::Dot, true);
        assert!(dot.starts_with("digraph"));
        assert!(dot.contains("  2 -> 1;"));
        let und = export_graph(&g, GraphFormat::Dot, false);
        assert!(und.starts_with("graph") && und.contains("1 -- 2"));
    }

    #[test]
    fn empty_graph_is_header_only() {
        let g = graph(&[]);
        assert_eq!(export_graph(&g, GraphFormat::EdgeList, true), "source\ttarget\tpvalue\n");
    }

    #[test]
    fn edge_list_round_trip() {
        let g = graph(&[(1, 0), (3, 2), (0, 3)]);
        let parsed = parse_edge_list(&export_graph(&g, GraphFormat::EdgeList, true)).unwrap();
        let pairs: Vec<(usize, usize)> = parsed.iter().map(|&(a, b, _)| (a, b)).collect();
        let expected: Vec<(usize, usize)> = g.directed_edges.iter().map(|e| (e.source, e.target)).collect();
        assert_eq!(pairs, expected);
    }
}
