//! Undirected simple graphs in CSR form, Laplacians and generators.

mod generate;
mod io;

pub use generate::{class_gaussian_features, sbm_generate};
pub use io::{load_dataset, save_dataset, EDGES_FILE, FEATURES_FILE, LABELS_FILE};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;

/// Which Laplacian a spectral object is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LaplacianKind {
    /// `D - A`
    #[default]
    Combinatorial,
    /// `I - D^{-1/2} A D^{-1/2}`
    Normalized,
}

impl std::str::FromStr for LaplacianKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "combinatorial" => Ok(Self::Combinatorial),
            "normalized" | "symmetric-normalized" => Ok(Self::Normalized),
            other => Err(Error::InvalidParameter(format!("unknown laplacian kind `{other}`"))),
        }
    }
}

/// Immutable undirected graph without self-loops or parallel edges.
///
/// Adjacency is stored symmetrically: every edge `{u, v}` appears in the
/// neighbor lists of both endpoints, sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    num_nodes: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    features: Option<Array2<f64>>,
    labels: Option<Vec<usize>>,
}

impl Graph {
    /// Symmetrize and deduplicate an edge list.
    pub fn from_edges(num_nodes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); num_nodes];
        for &(u, v) in edges {
            for id in [u, v] {
                if id >= num_nodes {
                    return Err(Error::NodeOutOfRange { id, num_nodes });
                }
            }
            if u == v {
                return Err(Error::SelfLoop(u));
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        let mut indptr = Vec::with_capacity(num_nodes + 1);
        let mut indices = Vec::with_capacity(2 * edges.len());
        indptr.push(0);
        for mut nbrs in adj {
            nbrs.sort_unstable();
            nbrs.dedup();
            indices.extend(nbrs);
            indptr.push(indices.len());
        }
        Ok(Self {
            num_nodes,
            indptr,
            indices,
            features: None,
            labels: None,
        })
    }

    pub fn with_features(mut self, features: Array2<f64>) -> Result<Self> {
        if features.nrows() != self.num_nodes {
            return Err(Error::DimensionMismatch(format!(
                "feature matrix has {} rows, graph has {} nodes",
                features.nrows(),
                self.num_nodes
            )));
        }
        self.features = Some(features);
        Ok(self)
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.num_nodes {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for a graph with {} nodes",
                labels.len(),
                self.num_nodes
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn without_features(mut self) -> Self {
        self.features = None;
        self
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.indices.len() / 2
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.indices[self.indptr[node]..self.indptr[node + 1]]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.indptr[node + 1] - self.indptr[node]
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.num_nodes).map(|i| self.degree(i)).collect()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.num_nodes).map(|i| self.degree(i)).max().unwrap_or(0)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.num_nodes && self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Undirected edges as `(u, v)` with `u < v`, sorted lexicographically.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_nodes).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .copied()
                .filter(move |&v| v > u)
                .map(move |v| (u, v))
        })
    }

    pub fn features(&self) -> Option<&Array2<f64>> {
        self.features.as_ref()
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// `max(label) + 1`, or 0 without labels.
    pub fn num_classes(&self) -> usize {
        self.labels
            .as_ref()
            .and_then(|l| l.iter().max())
            .map_or(0, |m| m + 1)
    }

    pub fn connected_components(&self) -> usize {
        let mut seen = vec![false; self.num_nodes];
        let mut stack = Vec::new();
        let mut count = 0;
        for start in 0..self.num_nodes {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(u) = stack.pop() {
                for &v in self.neighbors(u) {
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
        }
        count
    }

    /// Laplacian as a sparse symmetric matrix with explicit diagonal.
    pub fn laplacian(&self, kind: LaplacianKind) -> CsrMatrix {
        let deg = self.degrees();
        let inv_sqrt: Vec<f64> = deg
            .iter()
            .map(|&d| if d == 0 { 0.0 } else { 1.0 / (d as f64).sqrt() })
            .collect();
        let rows = (0..self.num_nodes)
            .map(|i| {
                let mut row: Vec<(usize, f64)> = Vec::with_capacity(self.degree(i) + 1);
                let diag = match kind {
                    LaplacianKind::Combinatorial => deg[i] as f64,
                    LaplacianKind::Normalized => 1.0,
                };
                let mut diag_pushed = false;
                for &j in self.neighbors(i) {
                    if !diag_pushed && j > i {
                        row.push((i, diag));
                        diag_pushed = true;
                    }
                    let w = match kind {
                        LaplacianKind::Combinatorial => -1.0,
                        LaplacianKind::Normalized => -inv_sqrt[i] * inv_sqrt[j],
                    };
                    row.push((j, w));
                }
                if !diag_pushed {
                    row.push((i, diag));
                }
                row
            })
            .collect();
        CsrMatrix::from_rows(rows)
    }

    /// `D̃^{-1/2} (A + I) D̃^{-1/2}`, the propagation operator of a graph
    /// convolution layer.
    pub fn gcn_operator(&self) -> CsrMatrix {
        let inv_sqrt: Vec<f64> = (0..self.num_nodes)
            .map(|i| 1.0 / ((self.degree(i) + 1) as f64).sqrt())
            .collect();
        let rows = (0..self.num_nodes)
            .map(|i| {
                let mut row: Vec<(usize, f64)> = self
                    .neighbors(i)
                    .iter()
                    .map(|&j| (j, inv_sqrt[i] * inv_sqrt[j]))
                    .collect();
                let pos = row.partition_point(|&(j, _)| j < i);
                row.insert(pos, (i, inv_sqrt[i] * inv_sqrt[i]));
                row
            })
            .collect();
        CsrMatrix::from_rows(rows)
    }

    /// Disjoint union; node ids of `other` are shifted by `self.num_nodes()`.
    /// Features and labels are kept only when both graphs carry them.
    pub fn disjoint_union(&self, other: &Graph) -> Result<Graph> {
        let offset = self.num_nodes;
        let edges: Vec<(usize, usize)> = self
            .edges()
            .chain(other.edges().map(|(u, v)| (u + offset, v + offset)))
            .collect();
        let mut g = Graph::from_edges(offset + other.num_nodes, &edges)?;
        if let (Some(a), Some(b)) = (&self.features, &other.features) {
            let stacked = ndarray::concatenate(ndarray::Axis(0), &[a.view(), b.view()])
                .map_err(|e| Error::DimensionMismatch(e.to_string()))?;
            g = g.with_features(stacked)?;
        }
        if let (Some(a), Some(b)) = (&self.labels, &other.labels) {
            g = g.with_labels(a.iter().chain(b).copied().collect())?;
        }
        Ok(g)
    }
}

/// Convenience wrapper over [`Graph::from_edges`].
pub fn build_graph(edges: &[(usize, usize)], num_nodes: usize) -> Result<Graph> {
    Graph::from_edges(num_nodes, edges)
}
