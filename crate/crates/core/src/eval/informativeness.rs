use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::graph::Graph;

fn check(g: &Graph, labels: &[usize]) -> Result<()> {
    if labels.len() != g.num_nodes() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} nodes",
            labels.len(),
            g.num_nodes()
        )));
    }
    if g.num_edges() == 0 {
        return Err(Error::Degenerate("graph has no edges".into()));
    }
    Ok(())
}

/// Counts are summed in sorted order so the result does not depend on how
/// class ids are numbered.
fn plug_in_entropy<'a>(counts: impl Iterator<Item = &'a usize>, total: f64) -> f64 {
    let mut counts: Vec<usize> = counts.copied().collect();
    counts.sort_unstable();
    -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            p * p.ln()
        })
        .sum::<f64>()
}

/// `I(y_u; y_v) / H(y_u)` over uniformly random ordered edge endpoints
/// `(u, v)`. Each undirected edge contributes both orientations.
pub fn label_informativeness(g: &Graph, labels: &[usize]) -> Result<f64> {
    check(g, labels)?;
    let mut joint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut marginal: HashMap<usize, usize> = HashMap::new();
    for (u, v) in g.edges() {
        let (a, b) = (labels[u], labels[v]);
        *joint.entry((a, b)).or_default() += 1;
        *joint.entry((b, a)).or_default() += 1;
        *marginal.entry(a).or_default() += 1;
        *marginal.entry(b).or_default() += 1;
    }
    let total = 2.0 * g.num_edges() as f64;
    let h_marginal = plug_in_entropy(marginal.values(), total);
    if h_marginal <= 0.0 {
        return Err(Error::UndefinedInformativeness);
    }
    let h_joint = plug_in_entropy(joint.values(), total);
    // Both endpoint marginals are equal because every edge appears twice.
    let mutual = 2.0 * h_marginal - h_joint;
    Ok((mutual / h_marginal).clamp(0.0, 1.0))
}

/// Fraction of edges whose endpoints share a label.
pub fn edge_homophily(g: &Graph, labels: &[usize]) -> Result<f64> {
    check(g, labels)?;
    let same = g.edges().filter(|&(u, v)| labels[u] == labels[v]).count();
    Ok(same as f64 / g.num_edges() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, sbm_generate};

    /// Independent oracle: entropies from an explicit list of ordered pairs.
    fn brute_force_li(g: &Graph, labels: &[usize]) -> f64 {
        let mut pairs = Vec::new();
        for u in 0..g.num_nodes() {
            for &v in g.neighbors(u) {
                pairs.push((labels[u], labels[v]));
            }
        }
        let m = pairs.len() as f64;
        let classes = labels.iter().max().unwrap() + 1;
        let mut pxy = vec![vec![0.0; classes]; classes];
        for &(a, b) in &pairs {
            pxy[a][b] += 1.0 / m;
        }
        let px: Vec<f64> = (0..classes).map(|a| pxy[a].iter().sum()).collect();
        let py: Vec<f64> = (0..classes).map(|b| (0..classes).map(|a| pxy[a][b]).sum()).collect();
        let mut mi = 0.0;
        for a in 0..classes {
            for b in 0..classes {
                if pxy[a][b] > 0.0 {
                    mi += pxy[a][b] * (pxy[a][b] / (px[a] * py[b])).ln();
                }
            }
        }
        let h: f64 = -px.iter().filter(|&&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>();
        mi / h
    }

    fn two_cliques() -> (Graph, Vec<usize>) {
        let g = build_graph(&[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)], 6).unwrap();
        (g, vec![0, 0, 0, 1, 1, 1])
    }

    #[test]
    fn two_cliques_fully_informative() {
        let (g, y) = two_cliques();
        assert_eq!(label_informativeness(&g, &y).unwrap(), 1.0);
        assert_eq!(edge_homophily(&g, &y).unwrap(), 1.0);
    }

    #[test]
    fn complete_bipartite_is_informative_but_heterophilic() {
        let g = build_graph(&[(0, 2), (0, 3), (1, 2), (1, 3)], 4).unwrap();
        let y = [0, 0, 1, 1];
        assert_eq!(label_informativeness(&g, &y).unwrap(), 1.0);
        assert_eq!(edge_homophily(&g, &y).unwrap(), 0.0);
    }

    #[test]
    fn four_cycle_matches_oracle() {
        let g = build_graph(&[(0, 1), (1, 2), (2, 3), (3, 0)], 4).unwrap();
        let y = [0, 0, 1, 1];
        let li = label_informativeness(&g, &y).unwrap();
        assert!((li - brute_force_li(&g, &y)).abs() < 1e-12);
        // Joint is uniform over the four ordered label pairs: no information.
        assert!(li.abs() < 1e-12);
    }

    #[test]
    fn random_graphs_match_oracle() {
        for seed in 0..5 {
            let g = sbm_generate(&[10, 12, 8], 0.4, 0.1, seed).unwrap();
            let y = g.labels().unwrap().to_vec();
            let li = label_informativeness(&g, &y).unwrap();
            assert!((li - brute_force_li(&g, &y)).abs() < 1e-12);
            assert!((0.0..=1.0).contains(&li));
        }
    }

    #[test]
    fn single_class_is_undefined() {
        let (g, _) = two_cliques();
        assert!(matches!(label_informativeness(&g, &[2; 6]), Err(Error::UndefinedInformativeness)));
    }

    #[test]
    fn relabeling_invariance() {
        let g = sbm_generate(&[10, 10, 10], 0.5, 0.1, 3).unwrap();
        let y = g.labels().unwrap().to_vec();
        let perm = [7usize, 2, 40];
        let z: Vec<usize> = y.iter().map(|&c| perm[c]).collect();
        assert_eq!(label_informativeness(&g, &y).unwrap(), label_informativeness(&g, &z).unwrap());
        assert_eq!(edge_homophily(&g, &y).unwrap(), edge_homophily(&g, &z).unwrap());
    }

    #[test]
    fn edgeless_graph_rejected() {
        let g = build_graph(&[], 3).unwrap();
        assert!(edge_homophily(&g, &[0, 1, 0]).is_err());
    }
}
