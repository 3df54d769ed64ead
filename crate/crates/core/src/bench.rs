//! Wall-clock scaling of the Chebyshev filter in its order and edge count.

use std::time::{Duration, Instant};

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiment::BenchConfig;
use crate::graph::{Graph, LaplacianKind};
use crate::kernels::{chebyshev_apply, chebyshev_fit, lambda_max_bound, KernelSpec, LambdaBound};
use crate::linalg::CsrMatrix;
use crate::rng;

/// Each timing repeats the filter until at least this much time has passed.
const MIN_TIMING: Duration = Duration::from_millis(20);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    /// `"order"` or `"edges"`.
    pub sweep: String,
    pub degree: usize,
    pub nodes: usize,
    pub edges: usize,
    /// Fastest observed time for one filter application.
    pub seconds: f64,
}

/// Uniform random graph with `round(n · avg_degree / 2)` distinct edges.
pub fn random_graph(n: usize, avg_degree: f64, seed: u64) -> Result<Graph> {
    if n < 2 {
        return Err(Error::InvalidParameter("random graph needs at least 2 nodes".into()));
    }
    let target = ((n as f64 * avg_degree / 2.0).round() as usize).min(n * (n - 1) / 2);
    let mut r = rng::rng_from_seed(seed);
    let mut seen = std::collections::HashSet::with_capacity(target);
    let mut edges = Vec::with_capacity(target);
    while edges.len() < target {
        let u = r.random_range(0..n);
        let v = r.random_range(0..n);
        if u != v && seen.insert((u.min(v), u.max(v))) {
            edges.push((u.min(v), u.max(v)));
        }
    }
    Graph::from_edges(n, &edges)
}

/// Fastest per-application time of a degree-`degree` Matérn filter on `l`.
pub fn time_chebyshev(l: &CsrMatrix, degree: usize, repeats: usize, seed: u64) -> Result<f64> {
    let bound = lambda_max_bound(l, LambdaBound::Gershgorin);
    let filter = chebyshev_fit(&KernelSpec::matern(2.5, 1.0), degree, bound)?;
    let mut r = rng::rng_from_seed(seed);
    let v = rng::normal_vec(&mut r, l.dim());
    let mut best = f64::INFINITY;
    for _ in 0..repeats.max(1) {
        let start = Instant::now();
        let mut calls = 0u32;
        while start.elapsed() < MIN_TIMING {
            std::hint::black_box(chebyshev_apply(l, &filter, std::hint::black_box(&v))?);
            calls += 1;
        }
        best = best.min(start.elapsed().as_secs_f64() / calls as f64);
    }
    Ok(best)
}

/// Order sweep on one graph, then an edge sweep at fixed order and average
/// degree.
pub fn bench_sweeps(cfg: &BenchConfig, seed: u64) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    let g = random_graph(cfg.sweep_nodes, cfg.avg_degree, rng::derive_seed(seed, 0))?;
    let l = g.laplacian(LaplacianKind::Combinatorial);
    for &m in &cfg.degrees {
        rows.push(BenchRow {
            sweep: "order".into(),
            degree: m,
            nodes: g.num_nodes(),
            edges: g.num_edges(),
            seconds: time_chebyshev(&l, m, cfg.repeats, seed)?,
        });
    }
    for (k, &n) in cfg.nodes.iter().enumerate() {
        let g = random_graph(n, cfg.avg_degree, rng::derive_seed(seed, 1 + k as u64))?;
        let l = g.laplacian(LaplacianKind::Combinatorial);
        rows.push(BenchRow {
            sweep: "edges".into(),
            degree: cfg.sweep_degree,
            nodes: n,
            edges: g.num_edges(),
            seconds: time_chebyshev(&l, cfg.sweep_degree, cfg.repeats, seed)?,
        });
    }
    Ok(rows)
}

/// Least-squares slope of `ln y` against `ln x`. Linear scaling gives 1.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    cov / var
}

/// Slopes of the order and edge sweeps in `rows`.
pub fn scaling_slopes(rows: &[BenchRow]) -> (f64, f64) {
    let pick = |sweep: &str, x: fn(&BenchRow) -> f64| {
        let sel: Vec<&BenchRow> = rows.iter().filter(|r| r.sweep == sweep).collect();
        let xs: Vec<f64> = sel.iter().map(|r| x(r)).collect();
        let ys: Vec<f64> = sel.iter().map(|r| r.seconds).collect();
        loglog_slope(&xs, &ys)
    };
    (pick("order", |r| r.degree as f64), pick("edges", |r| r.edges as f64))
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("sweep,degree,nodes,edges,seconds\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{},{:e}\n", r.sweep, r.degree, r.nodes, r.edges, r.seconds));
    }
    out
}
