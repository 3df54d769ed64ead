use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{sbm_generate, Graph};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShiftKind {
    LabelLeaveout,
    Structure,
    Feature,
}

/// Fractions of in-distribution nodes used for training and validation; the
/// rest is the in-distribution test set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self { train: 0.6, val: 0.2 }
    }
}

impl SplitFractions {
    fn validate(&self) -> Result<()> {
        if !(self.train > 0.0 && self.val >= 0.0 && self.train + self.val <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "split fractions train={} val={} must be positive and sum to at most 1",
                self.train, self.val
            )));
        }
        Ok(())
    }
}

/// A train-on-one-graph, score-on-another OOD scenario.
#[derive(Debug, Clone)]
pub struct OODSplit {
    pub kind: ShiftKind,
    /// Graph the model is fitted on. Labels are re-indexed to the
    /// in-distribution classes.
    pub train_graph: Graph,
    /// Graph the uncertainty scores are computed on. Its first
    /// `train_graph.num_nodes()` nodes correspond to the training graph.
    pub eval_graph: Graph,
    /// One flag per `eval_graph` node.
    pub is_ood: Vec<bool>,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    /// In-distribution test nodes.
    pub test: Vec<usize>,
    /// Nodes the detection metrics are computed on: `test` followed by every
    /// OOD node, ascending.
    pub eval_nodes: Vec<usize>,
}

impl OODSplit {
    pub fn ood_nodes(&self) -> Vec<usize> {
        (0..self.is_ood.len()).filter(|&i| self.is_ood[i]).collect()
    }

    fn finish(kind: ShiftKind, train_graph: Graph, eval_graph: Graph, is_ood: Vec<bool>, split: SplitFractions, seed: u64) -> Self {
        let ind: Vec<usize> = (0..train_graph.num_nodes()).filter(|&i| !is_ood[i]).collect();
        let mut r = rng::stream(seed, 0);
        let order = rng::permutation(&mut r, ind.len());
        let n_train = ((split.train * ind.len() as f64).round() as usize).max(1).min(ind.len());
        let n_val = ((split.val * ind.len() as f64).round() as usize).min(ind.len() - n_train);
        let pick = |range: std::ops::Range<usize>| {
            let mut v: Vec<usize> = order[range].iter().map(|&k| ind[k]).collect();
            v.sort_unstable();
            v
        };
        let train = pick(0..n_train);
        let val = pick(n_train..n_train + n_val);
        let test = pick(n_train + n_val..ind.len());
        let mut eval_nodes: Vec<usize> = test.clone();
        eval_nodes.extend((0..is_ood.len()).filter(|&i| is_ood[i]));
        eval_nodes.sort_unstable();
        Self {
            kind,
            train_graph,
            eval_graph,
            is_ood,
            train,
            val,
            test,
            eval_nodes,
        }
    }
}

/// Classes held out as OOD for the standard benchmark graphs.
pub fn default_ood_classes(dataset: &str) -> Option<Vec<usize>> {
    let classes: Vec<usize> = match dataset.to_ascii_lowercase().replace(['_', ' '], "-").as_str() {
        "cora" => vec![0, 1, 2, 3],
        "citeseer" => vec![0, 1, 2],
        "pubmed" => vec![0],
        "tolokers" => vec![1],
        "roman-empire" => (9..=17).collect(),
        "amazon-ratings" => vec![3, 4, 5],
        "minesweeper" => vec![1],
        "questions" => vec![1],
        _ => return None,
    };
    Some(classes)
}

/// Nodes whose class is in `ood_classes` become OOD; the remaining classes are
/// renumbered `0..k` in increasing order.
pub fn make_label_leaveout(g: &Graph, ood_classes: &[usize], split: SplitFractions, seed: u64) -> Result<OODSplit> {
    split.validate()?;
    let labels = g.labels().ok_or_else(|| Error::Missing("node labels".into()))?;
    if ood_classes.is_empty() {
        return Err(Error::InvalidParameter("no OOD classes given".into()));
    }
    let num_classes = g.num_classes();
    let mut present = vec![false; num_classes];
    for &y in labels {
        present[y] = true;
    }
    if let Some(&c) = ood_classes.iter().find(|&&c| c >= num_classes || !present[c]) {
        return Err(Error::InvalidParameter(format!("OOD class {c} does not occur in the labels")));
    }
    let mut remap = vec![usize::MAX; num_classes];
    let mut next = 0;
    for c in 0..num_classes {
        if present[c] && !ood_classes.contains(&c) {
            remap[c] = next;
            next += 1;
        }
    }
    if next == 0 {
        return Err(Error::InvalidParameter("every class is marked OOD".into()));
    }
    let is_ood: Vec<bool> = labels.iter().map(|&y| remap[y] == usize::MAX).collect();
    // OOD nodes stay in the graph as unlabeled context; their placeholder label
    // is never read because they are excluded from every mask.
    let relabeled: Vec<usize> = labels.iter().map(|&y| if remap[y] == usize::MAX { 0 } else { remap[y] }).collect();
    let train_graph = g.clone().with_labels(relabeled)?;
    let eval_graph = train_graph.clone();
    Ok(OODSplit::finish(ShiftKind::LabelLeaveout, train_graph, eval_graph, is_ood, split, seed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StructureShift {
    pub ood_nodes: usize,
    pub blocks: usize,
    pub p_in: f64,
    pub p_out: f64,
}

impl Default for StructureShift {
    fn default() -> Self {
        Self {
            ood_nodes: 100,
            blocks: 2,
            p_in: 0.1,
            p_out: 0.01,
        }
    }
}

/// Append an SBM-generated component of OOD nodes. Their features are drawn
/// independently per dimension from the empirical marginals of the original
/// features. Scores are computed on the combined graph.
pub fn make_structure_shift(g: &Graph, shift: &StructureShift, split: SplitFractions, seed: u64) -> Result<OODSplit> {
    split.validate()?;
    if shift.ood_nodes == 0 || shift.blocks == 0 {
        return Err(Error::InvalidParameter("structure shift needs at least one OOD node and block".into()));
    }
    let x = g.features().ok_or_else(|| Error::Missing("node features".into()))?;
    let labels = g.labels().ok_or_else(|| Error::Missing("node labels".into()))?;
    let blocks = shift.blocks.min(shift.ood_nodes);
    let sizes: Vec<usize> = (0..blocks)
        .map(|b| shift.ood_nodes / blocks + usize::from(b < shift.ood_nodes % blocks))
        .collect();
    let sbm = sbm_generate(&sizes, shift.p_in, shift.p_out, rng::derive_seed(seed, 1))?;
    let n = g.num_nodes();
    let mut r = rng::stream(seed, 2);
    let fx = Array2::from_shape_fn((shift.ood_nodes, x.ncols()), |(_, d)| x[[r.random_range(0..n), d]]);
    let sbm = sbm.with_features(fx)?.with_labels(vec![0; shift.ood_nodes])?;
    let train_graph = g.clone().with_labels(labels.to_vec())?;
    let eval_graph = train_graph.disjoint_union(&sbm)?;
    let is_ood: Vec<bool> = (0..eval_graph.num_nodes()).map(|i| i >= n).collect();
    Ok(OODSplit::finish(ShiftKind::Structure, train_graph, eval_graph, is_ood, split, rng::derive_seed(seed, 0)))
}

/// Add `N(0, σ²)` noise to the features of `round(fraction · n)` random nodes
/// and flag them OOD. The structure is unchanged.
pub fn make_feature_shift(g: &Graph, sigma: f64, fraction: f64, split: SplitFractions, seed: u64) -> Result<OODSplit> {
    split.validate()?;
    let x = g.features().ok_or_else(|| Error::Missing("node features".into()))?;
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidParameter(format!("OOD fraction must be in (0, 1), got {fraction}")));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise scale must be >= 0, got {sigma}")));
    }
    let n = g.num_nodes();
    let count = (fraction * n as f64).round() as usize;
    let mut r = rng::stream(seed, 1);
    let order = rng::permutation(&mut r, n);
    let mut is_ood = vec![false; n];
    for &i in &order[..count] {
        is_ood[i] = true;
    }
    let mut noise_rng = rng::stream(seed, 2);
    let mut shifted = x.clone();
    for i in 0..n {
        if is_ood[i] {
            for v in shifted.row_mut(i) {
                *v += sigma * rng::standard_normal(&mut noise_rng);
            }
        }
    }
    let eval_graph = g.clone().with_features(shifted)?;
    Ok(OODSplit::finish(ShiftKind::Feature, g.clone(), eval_graph, is_ood, split, rng::derive_seed(seed, 0)))
}

/// Detection quality of `scores` (higher = more OOD).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OODReport {
    pub scores: Vec<f64>,
    pub is_ood: Vec<bool>,
    pub auc: f64,
    pub fpr95: f64,
    pub det_acc: f64,
}

/// AUC by the rank statistic with ties counted ½, FPR at the operating point
/// where OOD recall first reaches 95% when sweeping the threshold downward,
/// and the best balanced accuracy over all thresholds.
pub fn ood_metrics(scores: &[f64], is_ood: &[bool]) -> Result<OODReport> {
    if scores.len() != is_ood.len() {
        return Err(Error::DimensionMismatch(format!("{} scores, {} flags", scores.len(), is_ood.len())));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidParameter("non-finite OOD score".into()));
    }
    let pos = is_ood.iter().filter(|&&b| b).count();
    let neg = is_ood.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Degenerate("OOD metrics need both OOD and in-distribution nodes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    // Sweep thresholds from high to low, one tie group at a time.
    let (p, q) = (pos as f64, neg as f64);
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut auc_num = 0.0;
    let mut fpr95 = None;
    let mut det_acc: f64 = 0.5;
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        let (mut gp, mut gn) = (0usize, 0usize);
        while k < order.len() && scores[order[k]] == s {
            if is_ood[order[k]] {
                gp += 1;
            } else {
                gn += 1;
            }
            k += 1;
        }
        // Each new IND node in the group is beaten by every OOD node above it
        // and ties with the group's OOD nodes.
        auc_num += gn as f64 * (tp as f64 + 0.5 * gp as f64);
        tp += gp;
        fp += gn;
        let tpr = tp as f64 / p;
        let fpr = fp as f64 / q;
        if fpr95.is_none() && tpr >= 0.95 {
            fpr95 = Some(fpr);
        }
        det_acc = det_acc.max(0.5 * (tpr + 1.0 - fpr));
    }
    Ok(OODReport {
        scores: scores.to_vec(),
        is_ood: is_ood.to_vec(),
        auc: auc_num / (p * q),
        fpr95: fpr95.unwrap_or(1.0),
        det_acc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::class_gaussian_features;

    fn brute_auc(scores: &[f64], is_ood: &[bool]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if is_ood[i] && !is_ood[j] {
                    den += 1.0;
                    num += if scores[i] > scores[j] {
                        1.0
                    } else if scores[i] == scores[j] {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        num / den
    }

    fn labelled_sbm() -> Graph {
        let g = sbm_generate(&[30, 30, 40], 0.3, 0.02, 2).unwrap();
        let x = class_gaussian_features(g.labels().unwrap(), 3, 1.0, 1.0, 4);
        g.with_features(x).unwrap()
    }

    #[test]
    fn perfect_separation() {
        let r = ood_metrics(&[0.9, 0.8, 0.1, 0.2], &[true, true, false, false]).unwrap();
        assert_eq!((r.auc, r.fpr95, r.det_acc), (1.0, 0.0, 1.0));
    }

    #[test]
    fn all_ties() {
        let r = ood_metrics(&[0.3; 6], &[true, false, true, false, false, true]).unwrap();
        assert_eq!(r.auc, 0.5);
        assert_eq!(r.fpr95, 1.0);
        assert_eq!(r.det_acc, 0.5);
    }

    #[test]
    fn pair_counting_example() {
        let r = ood_metrics(&[0.9, 0.8, 0.7, 0.6], &[true, false, true, false]).unwrap();
        assert_eq!(r.auc, 0.75);
    }

    #[test]
    fn auc_matches_brute_force_with_ties() {
        let mut r = rng::rng_from_seed(3);
        for _ in 0..20 {
            let scores: Vec<f64> = (0..40).map(|_| (r.random_range(0..8) as f64) / 4.0).collect();
            let mut flags: Vec<bool> = (0..40).map(|_| r.random_bool(0.4)).collect();
            flags[0] = true;
            flags[1] = false;
            let rep = ood_metrics(&scores, &flags).unwrap();
            assert!((rep.auc - brute_auc(&scores, &flags)).abs() < 1e-12);
            assert!((0.0..=1.0).contains(&rep.fpr95) && (0.5..=1.0).contains(&rep.det_acc));
        }
    }

    #[test]
    fn single_class_rejected() {
        assert!(matches!(ood_metrics(&[0.1, 0.2], &[true, true]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn label_leaveout_flags_and_reindexes() {
        let g = labelled_sbm();
        let s = make_label_leaveout(&g, &[1], SplitFractions::default(), 5).unwrap();
        let y = g.labels().unwrap();
        for i in 0..g.num_nodes() {
            assert_eq!(s.is_ood[i], y[i] == 1);
        }
        let relabeled = s.train_graph.labels().unwrap();
        assert!(s.train.iter().all(|&i| relabeled[i] == if y[i] == 2 { 1 } else { 0 }));
        assert!(s.train.iter().chain(&s.val).all(|&i| !s.is_ood[i]));
        let again = make_label_leaveout(&g, &[1], SplitFractions::default(), 5).unwrap();
        assert_eq!((s.train, s.val, s.test), (again.train, again.val, again.test));
    }

    #[test]
    fn label_leaveout_errors() {
        let g = labelled_sbm();
        assert!(make_label_leaveout(&g, &[0, 1, 2], SplitFractions::default(), 0).is_err());
        assert!(make_label_leaveout(&g, &[], SplitFractions::default(), 0).is_err());
        assert!(make_label_leaveout(&g, &[9], SplitFractions::default(), 0).is_err());
    }

    #[test]
    fn default_class_table() {
        assert_eq!(default_ood_classes("Cora"), Some(vec![0, 1, 2, 3]));
        assert_eq!(default_ood_classes("roman_empire").unwrap().len(), 9);
        assert_eq!(default_ood_classes("unknown"), None);
    }

    #[test]
    fn feature_shift_counts_and_variance() {
        let g = sbm_generate(&[50, 50], 0.1, 0.01, 1).unwrap();
        let x = class_gaussian_features(g.labels().unwrap(), 400, 1.0, 1.0, 2);
        let g = g.with_features(x).unwrap();
        let s = make_feature_shift(&g, 1.5, 0.5, SplitFractions::default(), 3).unwrap();
        assert_eq!(s.is_ood.iter().filter(|&&b| b).count(), 50);
        let diff = s.eval_graph.features().unwrap() - g.features().unwrap();
        let d: Vec<f64> = s
            .ood_nodes()
            .iter()
            .flat_map(|&i| diff.row(i).to_vec())
            .collect();
        let m = d.len() as f64;
        let var = d.iter().map(|v| v * v).sum::<f64>() / m;
        // Var of v² for Gaussian v is 2σ⁴.
        let se = (2.0 * 1.5f64.powi(4) / m).sqrt();
        assert!((var - 2.25).abs() < 3.0 * se, "{var}");
        assert_eq!(s.eval_graph.num_edges(), g.num_edges());
        let zero = make_feature_shift(&g, 0.0, 0.5, SplitFractions::default(), 3).unwrap();
        assert_eq!(zero.eval_graph.features(), g.features());
    }

    #[test]
    fn feature_shift_needs_features() {
        let g = sbm_generate(&[5, 5], 0.5, 0.1, 1).unwrap();
        assert!(matches!(
            make_feature_shift(&g, 1.0, 0.3, SplitFractions::default(), 0),
            Err(Error::Missing(_))
        ));
    }

    #[test]
    fn structure_shift_isolated_and_sized() {
        let g = labelled_sbm();
        let shift = StructureShift {
            ood_nodes: 37,
            blocks: 3,
            p_in: 0.0,
            p_out: 0.0,
        };
        let s = make_structure_shift(&g, &shift, SplitFractions::default(), 1).unwrap();
        assert_eq!(s.eval_graph.num_nodes(), g.num_nodes() + 37);
        assert_eq!(s.ood_nodes().len(), 37);
        assert!(s.ood_nodes().iter().all(|&i| s.eval_graph.degree(i) == 0));
        assert_eq!(s.eval_graph.num_edges(), g.num_edges());
    }

    #[test]
    fn structure_shift_degrees_binomial() {
        let g = labelled_sbm();
        let shift = StructureShift {
            ood_nodes: 200,
            blocks: 1,
            p_in: 0.05,
            p_out: 0.0,
        };
        let s = make_structure_shift(&g, &shift, SplitFractions::default(), 9).unwrap();
        let degs: Vec<f64> = s.ood_nodes().iter().map(|&i| s.eval_graph.degree(i) as f64).collect();
        let mean = degs.iter().sum::<f64>() / 200.0;
        let expected = 199.0 * 0.05;
        // Degrees share edges, so the sample mean's variance is 2·Var/n.
        let sd = (2.0f64 * 199.0 * 0.05 * 0.95 / 200.0).sqrt();
        assert!((mean - expected).abs() < 4.0 * sd, "{mean}");
    }
}
