use ndarray::Array2;
use rand::Rng;

use super::Graph;
use crate::error::{Error, Result};
use crate::rng;

/// Stochastic block model. Every unordered pair is connected independently
/// with `p_in` inside a block and `p_out` across blocks; pairs are visited in
/// lexicographic order so the output is a pure function of the arguments.
///
/// Labels are set to block ids.
pub fn sbm_generate(block_sizes: &[usize], p_in: f64, p_out: f64, seed: u64) -> Result<Graph> {
    for (name, p) in [("p_in", p_in), ("p_out", p_out)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("{name} = {p} is not a probability")));
        }
    }
    let block: Vec<usize> = block_sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &size)| std::iter::repeat(b).take(size))
        .collect();
    let n = block.len();
    let mut rng = rng::rng_from_seed(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let p = if block[u] == block[v] { p_in } else { p_out };
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edges(n, &edges)?.with_labels(block)
}

/// Class-conditional Gaussian node features: each class gets a random mean
/// direction of norm `separation`, and every node adds isotropic noise with
/// standard deviation `noise`.
pub fn class_gaussian_features(
    labels: &[usize],
    dim: usize,
    separation: f64,
    noise: f64,
    seed: u64,
) -> Array2<f64> {
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut rng = rng::rng_from_seed(seed);
    let means: Vec<Vec<f64>> = (0..classes)
        .map(|_| {
            let mut m = rng::normal_vec(&mut rng, dim);
            let norm = m.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            m.iter_mut().for_each(|x| *x *= separation / norm);
            m
        })
        .collect();
    let mut x = Array2::zeros((labels.len(), dim));
    for (i, &y) in labels.iter().enumerate() {
        for d in 0..dim {
            x[[i, d]] = means[y][d] + noise * rng::standard_normal(&mut rng);
        }
    }
    x
}
