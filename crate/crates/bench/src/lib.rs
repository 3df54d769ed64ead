//! Shared fixtures for the criterion benchmarks.

use graphspde_core::bench::random_graph;
use graphspde_core::graph::class_gaussian_features;
use graphspde_core::linalg::CsrMatrix;
use graphspde_core::{Graph, LaplacianKind};

/// Combinatorial Laplacian of a uniform random graph.
pub fn random_laplacian(nodes: usize, avg_degree: f64, seed: u64) -> CsrMatrix {
    random_graph(nodes, avg_degree, seed)
        .expect("valid size")
        .laplacian(LaplacianKind::Combinatorial)
}

/// Two-block labeled graph with Gaussian class features.
pub fn labeled_graph(block: usize, feature_dim: usize, seed: u64) -> Graph {
    let g = graphspde_core::graph::sbm_generate(&[block, block], 0.1, 0.01, seed).expect("valid blocks");
    let x = class_gaussian_features(g.labels().expect("labeled"), feature_dim, 1.0, 0.5, seed + 1);
    g.with_features(x).expect("matching rows")
}
