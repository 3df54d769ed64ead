//! Covariance-threshold rewiring: drop edges whose endpoints are weakly
//! correlated under a graph kernel and connect strongly correlated non-edges.

use std::collections::BTreeSet;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{edge_homophily, label_informativeness};
use crate::graph::Graph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewireSpec {
    /// Edges with covariance strictly below this percentile of the edge
    /// covariances are removed.
    pub prune_percentile: f64,
    /// Non-edges with covariance strictly above this percentile of the
    /// non-edge covariances are added.
    pub add_percentile: f64,
    pub max_added_edges: usize,
    /// Candidates per node when the graph is too large for a full scan.
    pub candidate_top_k: usize,
    /// Largest node count for which every non-edge is a candidate.
    pub full_scan_limit: usize,
}

impl Default for RewireSpec {
    fn default() -> Self {
        Self {
            prune_percentile: 10.0,
            add_percentile: 99.0,
            max_added_edges: 1000,
            candidate_top_k: 32,
            full_scan_limit: 2000,
        }
    }
}

impl RewireSpec {
    /// Thresholds that keep every edge and add none.
    pub fn identity() -> Self {
        Self {
            prune_percentile: 0.0,
            add_percentile: 100.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("prune", self.prune_percentile), ("add", self.add_percentile)] {
            if !(0.0..=100.0).contains(&p) {
                return Err(Error::InvalidParameter(format!("{name} percentile {p} outside [0, 100]")));
            }
        }
        Ok(())
    }
}

/// Percentile with linear interpolation between order statistics.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (rank - lo as f64)
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

/// Non-edge candidate pairs `(i, j)`, `i < j`.
fn candidates(g: &Graph, k: &Array2<f64>, spec: &RewireSpec) -> Vec<(usize, usize)> {
    let n = g.num_nodes();
    if n <= spec.full_scan_limit {
        return (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| !g.has_edge(i, j))
            .collect();
    }
    let mut set = BTreeSet::new();
    for i in 0..n {
        let mut row: Vec<usize> = (0..n).filter(|&j| j != i && !g.has_edge(i, j)).collect();
        row.sort_by(|&a, &b| k[[i, b]].total_cmp(&k[[i, a]]).then(a.cmp(&b)));
        for &j in row.iter().take(spec.candidate_top_k) {
            set.insert((i.min(j), i.max(j)));
        }
    }
    set.into_iter().collect()
}

pub fn rewire_by_covariance(g: &Graph, k: &Array2<f64>, spec: &RewireSpec) -> Result<Graph> {
    spec.validate()?;
    let n = g.num_nodes();
    if k.dim() != (n, n) {
        return Err(Error::DimensionMismatch(format!("kernel is {:?}, graph has {n} nodes", k.dim())));
    }
    let edges: Vec<(usize, usize)> = g.edges().collect();
    let mut kept: Vec<(usize, usize)> = if edges.is_empty() {
        Vec::new()
    } else {
        let pool = sorted(edges.iter().map(|&(i, j)| k[[i, j]]).collect());
        let cut = percentile(&pool, spec.prune_percentile);
        edges.iter().copied().filter(|&(i, j)| k[[i, j]] >= cut).collect()
    };
    let cands = candidates(g, k, spec);
    if !cands.is_empty() && spec.max_added_edges > 0 {
        let pool = sorted(cands.iter().map(|&(i, j)| k[[i, j]]).collect());
        let cut = percentile(&pool, spec.add_percentile);
        let mut add: Vec<(usize, usize)> = cands.into_iter().filter(|&(i, j)| k[[i, j]] > cut).collect();
        add.sort_by(|a, b| k[[b.0, b.1]].total_cmp(&k[[a.0, a.1]]).then(a.cmp(b)));
        add.truncate(spec.max_added_edges);
        kept.extend(add);
    }
    let mut out = Graph::from_edges(n, &kept)?;
    if let Some(x) = g.features() {
        out = out.with_features(x.clone())?;
    }
    if let Some(y) = g.labels() {
        out = out.with_labels(y.to_vec())?;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewireReport {
    pub edges_before: usize,
    pub edges_after: usize,
    pub edges_removed: usize,
    pub edges_added: usize,
    /// `None` where the metric is undefined (no edges or a single class).
    pub li_before: Option<f64>,
    pub li_after: Option<f64>,
    pub homophily_before: Option<f64>,
    pub homophily_after: Option<f64>,
}

pub fn rewire_report(g: &Graph, rewired: &Graph, labels: &[usize]) -> Result<RewireReport> {
    if g.num_nodes() != rewired.num_nodes() || labels.len() != g.num_nodes() {
        return Err(Error::DimensionMismatch("graphs and labels must share a node set".into()));
    }
    let before: BTreeSet<(usize, usize)> = g.edges().collect();
    let after: BTreeSet<(usize, usize)> = rewired.edges().collect();
    Ok(RewireReport {
        edges_before: before.len(),
        edges_after: after.len(),
        edges_removed: before.difference(&after).count(),
        edges_added: after.difference(&before).count(),
        li_before: label_informativeness(g, labels).ok(),
        li_after: label_informativeness(rewired, labels).ok(),
        homophily_before: edge_homophily(g, labels).ok(),
        homophily_after: edge_homophily(rewired, labels).ok(),
    })
}
