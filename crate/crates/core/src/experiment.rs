//! End-to-end OOD experiments: build or load a graph, apply a distribution
//! shift, train, score and aggregate over seeds.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{
    default_ood_classes, make_feature_shift, make_label_leaveout, make_structure_shift, ood_metrics, OODSplit,
    ShiftKind, SplitFractions, StructureShift,
};
use crate::graph::{class_gaussian_features, load_dataset, sbm_generate, Graph, LaplacianKind};
use crate::kernels::{KernelFamily, KernelSpec, LambdaBound};
use crate::model::{predict, train_with_context, uncertainty_scores, HistoryEntry, ModelConfig, OptimizerConfig, SdeContext};
use crate::rewire::RewireSpec;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticGraph {
    pub block_sizes: Vec<usize>,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    /// Norm of each class mean.
    pub separation: f64,
    /// Per-coordinate feature noise.
    pub noise: f64,
}

impl Default for SyntheticGraph {
    fn default() -> Self {
        Self {
            block_sizes: vec![200, 200],
            p_in: 0.05,
            p_out: 0.005,
            feature_dim: 16,
            separation: 1.0,
            noise: 0.5,
        }
    }
}

impl SyntheticGraph {
    pub fn generate(&self, seed: u64) -> Result<Graph> {
        let g = sbm_generate(&self.block_sizes, self.p_in, self.p_out, rng::derive_seed(seed, 0))?;
        let x = class_gaussian_features(
            g.labels().expect("SBM graphs are labeled"),
            self.feature_dim,
            self.separation,
            self.noise,
            rng::derive_seed(seed, 1),
        );
        g.with_features(x)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Dataset directory (`edges.txt`, `labels.txt`, `features.csv`). When
    /// absent a synthetic SBM is generated per seed.
    pub dataset: Option<PathBuf>,
    /// Dataset name used to look up default OOD classes; defaults to the
    /// directory name.
    pub name: Option<String>,
    pub synthetic: SyntheticGraph,
}

impl DataConfig {
    pub fn dataset_name(&self) -> Option<String> {
        self.name.clone().or_else(|| {
            self.dataset
                .as_ref()
                .and_then(|p| p.file_name())
                .map(|s| s.to_string_lossy().into_owned())
        })
    }

    pub fn load(&self, seed: u64) -> Result<Graph> {
        match &self.dataset {
            Some(dir) => load_dataset(dir),
            None => self.synthetic.generate(seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShiftConfig {
    pub kind: ShiftKind,
    /// Feature shift noise scale.
    pub sigma: f64,
    /// Feature shift OOD fraction.
    pub fraction: f64,
    /// Label leave-out classes; defaults to the table entry for the dataset.
    pub ood_classes: Option<Vec<usize>>,
    pub structure: StructureShift,
    pub split: SplitFractions,
}

impl Default for ShiftConfig {
    fn default() -> Self {
        Self {
            kind: ShiftKind::Feature,
            sigma: 1.0,
            fraction: 0.3,
            ood_classes: None,
            structure: StructureShift::default(),
            split: SplitFractions::default(),
        }
    }
}

impl ShiftConfig {
    pub fn apply(&self, g: &Graph, dataset: Option<&str>, seed: u64) -> Result<OODSplit> {
        match self.kind {
            ShiftKind::Feature => make_feature_shift(g, self.sigma, self.fraction, self.split, seed),
            ShiftKind::Structure => make_structure_shift(g, &self.structure, self.split, seed),
            ShiftKind::LabelLeaveout => {
                let classes = match (&self.ood_classes, dataset.and_then(default_ood_classes)) {
                    (Some(c), _) => c.clone(),
                    (None, Some(c)) => c,
                    (None, None) => vec![g.num_classes().saturating_sub(1)],
                };
                make_label_leaveout(g, &classes, self.split, seed)
            }
        }
    }
}

/// Which uncertainty is used as the OOD score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreKind {
    #[default]
    Total,
    Aleatoric,
    Epistemic,
}

/// Kernel settings for the `kernel`, `sample` and `rewire` commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSection {
    pub family: KernelFamily,
    pub nu: f64,
    pub kappa: f64,
    pub normalize: bool,
    pub laplacian: LaplacianKind,
    pub cheb_degree: usize,
    pub lambda_bound: LambdaBound,
    /// Sample draws for the `sample` command.
    pub samples: usize,
    /// Time grid for Wiener paths; must start at 0.
    pub times: Vec<f64>,
}

impl Default for KernelSection {
    fn default() -> Self {
        Self {
            family: KernelFamily::Matern,
            nu: 2.5,
            kappa: 1.0,
            normalize: false,
            laplacian: LaplacianKind::Combinatorial,
            cheb_degree: 100,
            lambda_bound: LambdaBound::Auto,
            samples: 10,
            times: vec![0.0, 0.5, 1.0],
        }
    }
}

impl KernelSection {
    pub fn spec(&self) -> KernelSpec {
        let spec = match self.family {
            KernelFamily::Matern => KernelSpec::matern(self.nu, self.kappa),
            KernelFamily::Rbf => KernelSpec::rbf(self.kappa),
            KernelFamily::Laplacian => KernelSpec::laplacian(),
        };
        if self.normalize {
            spec.normalized()
        } else {
            spec
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// Chebyshev orders for the order sweep.
    pub degrees: Vec<usize>,
    /// Graph sizes for the edge sweep, at fixed average degree.
    pub nodes: Vec<usize>,
    pub avg_degree: f64,
    /// Order used during the edge sweep.
    pub sweep_degree: usize,
    /// Node count used during the order sweep.
    pub sweep_nodes: usize,
    /// Each point reports the fastest of this many runs.
    pub repeats: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            degrees: vec![25, 50, 100, 200],
            nodes: vec![2000, 4000, 8000, 16000],
            avg_degree: 10.0,
            sweep_degree: 50,
            sweep_nodes: 4000,
            repeats: 5,
        }
    }
}

/// Everything a run needs. Every field has a default so a config file only
/// lists what it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seeds: Vec<u64>,
    /// Directory the command-line driver writes its outputs to.
    pub output: PathBuf,
    /// Run seeds on separate threads. Results are identical either way.
    pub parallel_seeds: bool,
    pub score: ScoreKind,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub optimizer: OptimizerConfig,
    pub shift: ShiftConfig,
    pub kernel: KernelSection,
    pub rewire: RewireSpec,
    pub bench: BenchConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seeds: vec![0],
            output: PathBuf::from("graphspde-out"),
            parallel_seeds: false,
            score: ScoreKind::Total,
            data: DataConfig::default(),
            model: ModelConfig::default(),
            optimizer: OptimizerConfig::default(),
            shift: ShiftConfig::default(),
            kernel: KernelSection::default(),
            rewire: RewireSpec::default(),
            bench: BenchConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedReport {
    pub seed: u64,
    pub auc: f64,
    pub fpr95: f64,
    pub det_acc: f64,
    /// Accuracy on in-distribution test nodes.
    pub test_accuracy: f64,
    pub best_epoch: usize,
    pub history: Vec<HistoryEntry>,
    /// `(node, score, is_ood)` for every evaluated node.
    pub scores: Vec<(usize, f64, bool)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single seed.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub auc: MeanStd,
    pub fpr95: MeanStd,
    pub det_acc: MeanStd,
    pub test_accuracy: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub per_seed: Vec<SeedReport>,
    pub aggregate: Aggregate,
}

impl ExperimentReport {
    /// Histogram of scores over all seeds, split by IND/OOD, as CSV rows
    /// `bin_lo,bin_hi,ind_count,ood_count`.
    pub fn histogram_csv(&self, bins: usize) -> String {
        let all: Vec<(f64, bool)> = self
            .per_seed
            .iter()
            .flat_map(|r| r.scores.iter().map(|&(_, s, o)| (s, o)))
            .collect();
        let mut out = String::from("bin_lo,bin_hi,ind_count,ood_count\n");
        if all.is_empty() || bins == 0 {
            return out;
        }
        let lo = all.iter().map(|a| a.0).fold(f64::INFINITY, f64::min);
        let hi = all.iter().map(|a| a.0).fold(f64::NEG_INFINITY, f64::max);
        let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
        let mut counts = vec![(0usize, 0usize); bins];
        for (s, ood) in all {
            let b = (((s - lo) / width) as usize).min(bins - 1);
            if ood {
                counts[b].1 += 1;
            } else {
                counts[b].0 += 1;
            }
        }
        for (b, (ind, ood)) in counts.iter().enumerate() {
            let a = lo + b as f64 * width;
            out.push_str(&format!("{a},{},{ind},{ood}\n", a + width));
        }
        out
    }
}

/// Train on the split's training graph and score its evaluation graph.
pub fn run_seed(cfg: &RunConfig, seed: u64) -> Result<SeedReport> {
    let g = cfg.data.load(seed)?;
    let name = cfg.data.dataset_name();
    let split = cfg.shift.apply(&g, name.as_deref(), rng::derive_seed(seed, 10))?;
    let train_seed = rng::derive_seed(seed, 11);
    let train_ctx = SdeContext::new(&split.train_graph, &cfg.model)?;
    let outcome = train_with_context(
        &split.train_graph,
        &train_ctx,
        &cfg.model,
        &cfg.optimizer,
        &split.train,
        &split.val,
        train_seed,
    )?;
    let eval_ctx = if split.eval_graph.num_nodes() == split.train_graph.num_nodes() {
        train_ctx
    } else {
        SdeContext::new(&split.eval_graph, &cfg.model)?
    };
    let x = split
        .eval_graph
        .features()
        .ok_or_else(|| Error::Missing("features on the evaluation graph".into()))?;
    let integ = &cfg.model.integrator;
    let samples = predict(
        &outcome.params,
        &eval_ctx,
        integ,
        x.view(),
        integ.eval_samples,
        rng::derive_seed(seed, 12),
    )?;
    let u = uncertainty_scores(&samples);
    let per_node = match cfg.score {
        ScoreKind::Total => &u.total,
        ScoreKind::Aleatoric => &u.aleatoric,
        ScoreKind::Epistemic => &u.epistemic,
    };
    let scores: Vec<f64> = split.eval_nodes.iter().map(|&i| per_node[i]).collect();
    let flags: Vec<bool> = split.eval_nodes.iter().map(|&i| split.is_ood[i]).collect();
    let report = ood_metrics(&scores, &flags)?;

    let predicted = samples.predicted_classes();
    let labels = split.train_graph.labels().expect("split graphs carry labels");
    let correct = split.test.iter().filter(|&&i| predicted[i] == labels[i]).count();
    let test_accuracy = if split.test.is_empty() {
        f64::NAN
    } else {
        correct as f64 / split.test.len() as f64
    };
    Ok(SeedReport {
        seed,
        auc: report.auc,
        fpr95: report.fpr95,
        det_acc: report.det_acc,
        test_accuracy,
        best_epoch: outcome.best_epoch,
        history: outcome.history,
        scores: split
            .eval_nodes
            .iter()
            .zip(scores.iter().zip(&flags))
            .map(|(&i, (&s, &o))| (i, s, o))
            .collect(),
    })
}

/// Run every seed and aggregate. Per-seed reports are ordered by position in
/// `cfg.seeds` regardless of scheduling.
pub fn run_experiment(cfg: &RunConfig) -> Result<ExperimentReport> {
    if cfg.seeds.is_empty() {
        return Err(Error::InvalidParameter("no seeds configured".into()));
    }
    let per_seed: Vec<SeedReport> = if cfg.parallel_seeds && cfg.seeds.len() > 1 {
        std::thread::scope(|scope| {
            let handles: Vec<_> = cfg.seeds.iter().map(|&s| scope.spawn(move || run_seed(cfg, s))).collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("seed worker panicked"))
                .collect::<Result<Vec<_>>>()
        })?
    } else {
        cfg.seeds.iter().map(|&s| run_seed(cfg, s)).collect::<Result<Vec<_>>>()?
    };
    let col = |f: fn(&SeedReport) -> f64| MeanStd::of(&per_seed.iter().map(f).collect::<Vec<_>>());
    let aggregate = Aggregate {
        auc: col(|r| r.auc),
        fpr95: col(|r| r.fpr95),
        det_acc: col(|r| r.det_acc),
        test_accuracy: col(|r| r.test_accuracy),
    };
    Ok(ExperimentReport { per_seed, aggregate })
}
