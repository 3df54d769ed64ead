use std::fmt::Write as _;

use anyhow::{Context, Result};
use graphspde_core::bench::{bench_csv, bench_sweeps, scaling_slopes};
use graphspde_core::eval::{edge_homophily, label_informativeness};
use graphspde_core::experiment::{run_experiment, ScoreKind};
use graphspde_core::graph::save_dataset;
use graphspde_core::kernels::{lambda_max_bound, spectral_kernel};
use graphspde_core::model::{predict, save_checkpoint, train_with_context, SdeContext, AUTO_DENSE_LIMIT};
use graphspde_core::noise::{sample_grf, GrfSampler, PhiWiener};
use graphspde_core::rewire::{rewire_by_covariance, rewire_report};
use graphspde_core::rng::derive_seed;
use graphspde_core::{Graph, SpectralBasis};
use serde_json::json;

use crate::run::{ensure_finite, Run};
use crate::Common;

/// Seed streams shared with the experiment runner so `train` reproduces the
/// training half of `eval-ood`.
const SPLIT_STREAM: u64 = 10;
const TRAIN_STREAM: u64 = 11;

fn load_graph(run: &Run) -> Result<Graph> {
    run.config.data.load(run.seed).context("loading graph")
}

fn csv_row(values: impl IntoIterator<Item = f64>) -> String {
    let mut line = String::new();
    for (i, v) in values.into_iter().enumerate() {
        if i > 0 {
            line.push(',');
        }
        let _ = write!(line, "{v}");
    }
    line.push('\n');
    line
}

pub fn kernel(common: &Common) -> Result<()> {
    let mut run = Run::start("kernel", common)?;
    let g = load_graph(&run)?;
    let section = &run.config.kernel;
    let spec = section.spec();
    let basis = SpectralBasis::from_graph(&g, section.laplacian)?;
    let k = spectral_kernel(&basis, &spec)?;
    ensure_finite("kernel", k.matrix.iter().copied())?;
    let csv: String = k.matrix.rows().into_iter().map(|r| csv_row(r.iter().copied())).collect();
    let weights: Vec<f64> = basis.eigenvalues.iter().map(|&l| spec.spectral_value(l)).collect();
    let metrics = json!({
        "nodes": g.num_nodes(),
        "edges": g.num_edges(),
        "mean_diagonal": k.mean_diagonal(),
        "min_spectral_weight": weights.iter().copied().fold(f64::INFINITY, f64::min),
        "max_spectral_weight": weights.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    });
    run.write("kernel.csv", csv)?;
    run.write_json("metrics.json", &metrics)?;
    println!("kernel {}x{} mean diagonal {}", g.num_nodes(), g.num_nodes(), k.mean_diagonal());
    run.finish()
}

pub fn sample(common: &Common) -> Result<()> {
    let mut run = Run::start("sample", common)?;
    let g = load_graph(&run)?;
    let section = run.config.kernel.clone();
    let spec = section.spec();
    let dense = g.num_nodes() <= AUTO_DENSE_LIMIT;
    let basis = if dense {
        Some(SpectralBasis::from_graph(&g, section.laplacian)?)
    } else {
        None
    };
    let sampler = match &basis {
        Some(b) => GrfSampler::spectral(b, &spec)?,
        None => {
            let l = g.laplacian(section.laplacian);
            let bound = lambda_max_bound(&l, section.lambda_bound);
            GrfSampler::chebyshev(l, &spec, section.cheb_degree, bound)?
        }
    };
    let mut csv = String::new();
    for s in 0..section.samples {
        let draw = sample_grf(&sampler, 1.0, derive_seed(run.seed, s as u64))?;
        ensure_finite("field sample", draw.iter().copied())?;
        csv.push_str(&csv_row(draw));
    }
    run.write("samples.csv", csv)?;
    if let Some(b) = &basis {
        let path = PhiWiener::new(b, &spec)?.simulate(&section.times, derive_seed(run.seed, section.samples as u64))?;
        let mut csv = String::new();
        for (t, v) in path.times.iter().zip(&path.values) {
            ensure_finite("Wiener path", v.iter().copied())?;
            csv.push_str(&csv_row(std::iter::once(*t).chain(v.iter().copied())));
        }
        run.write("wiener.csv", csv)?;
    }
    let metrics = json!({
        "nodes": g.num_nodes(),
        "samples": section.samples,
        "sampler": if dense { "spectral" } else { "chebyshev" },
        "wiener_path": dense,
    });
    run.write_json("metrics.json", &metrics)?;
    println!("{} field samples on {} nodes", section.samples, g.num_nodes());
    run.finish()
}

pub fn train(common: &Common) -> Result<()> {
    let mut run = Run::start("train", common)?;
    let g = load_graph(&run)?;
    let cfg = run.config.clone();
    let name = cfg.data.dataset_name();
    let split = cfg
        .shift
        .apply(&g, name.as_deref(), derive_seed(run.seed, SPLIT_STREAM))?;
    let graph = &split.train_graph;
    let ctx = SdeContext::new(graph, &cfg.model)?;
    let outcome = train_with_context(
        graph,
        &ctx,
        &cfg.model,
        &cfg.optimizer,
        &split.train,
        &split.val,
        derive_seed(run.seed, TRAIN_STREAM),
    )?;
    let x = graph.features().context("graph has no features")?;
    let integ = &cfg.model.integrator;
    let samples = predict(&outcome.params, &ctx, integ, x.view(), integ.eval_samples, run.seed)?;
    let predicted = samples.predicted_classes();
    let labels = graph.labels().context("graph has no labels")?;
    let correct = split.test.iter().filter(|&&i| predicted[i] == labels[i]).count();
    let accuracy = correct as f64 / split.test.len().max(1) as f64;

    let mut history = String::from("epoch,train_loss,val_loss\n");
    for h in &outcome.history {
        ensure_finite("training history", [h.train_loss, h.val_loss])?;
        let _ = writeln!(history, "{},{},{}", h.epoch, h.train_loss, h.val_loss);
    }
    let best = &outcome.history[outcome.best_epoch];
    let metrics = json!({
        "epochs_run": outcome.history.len(),
        "best_epoch": outcome.best_epoch,
        "best_val_loss": best.val_loss,
        "best_train_loss": best.train_loss,
        "test_accuracy": accuracy,
        "parameters": outcome.params.num_parameters(),
    });
    ensure_finite("test accuracy", [accuracy])?;
    run.write("history.csv", history)?;
    save_checkpoint(&outcome.params, run.out.join("model.ckpt"))?;
    run.record("model.ckpt");
    run.write_json("metrics.json", &metrics)?;
    println!(
        "best epoch {} val loss {:.6} test accuracy {:.4}",
        outcome.best_epoch, best.val_loss, accuracy
    );
    run.finish()
}

pub fn eval_ood(common: &Common) -> Result<()> {
    let mut run = Run::start("eval-ood", common)?;
    let report = run_experiment(&run.config)?;
    let mut scores = String::from("seed,node,score,is_ood\n");
    let mut history = String::from("seed,epoch,train_loss,val_loss\n");
    let mut per_seed = Vec::new();
    for r in &report.per_seed {
        ensure_finite("OOD metrics", [r.auc, r.fpr95, r.det_acc, r.test_accuracy])?;
        for &(node, s, ood) in &r.scores {
            ensure_finite("OOD scores", [s])?;
            let _ = writeln!(scores, "{},{node},{s},{}", r.seed, u8::from(ood));
        }
        for h in &r.history {
            ensure_finite("training history", [h.train_loss, h.val_loss])?;
            let _ = writeln!(history, "{},{},{},{}", r.seed, h.epoch, h.train_loss, h.val_loss);
        }
        per_seed.push(json!({
            "seed": r.seed,
            "auc": r.auc,
            "fpr95": r.fpr95,
            "det_acc": r.det_acc,
            "test_accuracy": r.test_accuracy,
            "best_epoch": r.best_epoch,
        }));
    }
    let score = match run.config.score {
        ScoreKind::Total => "total",
        ScoreKind::Aleatoric => "aleatoric",
        ScoreKind::Epistemic => "epistemic",
    };
    let metrics = json!({
        "score": score,
        "noise_mode": run.config.model.integrator.noise_mode.as_str(),
        "per_seed": per_seed,
        "aggregate": serde_json::to_value(&report.aggregate)?,
    });
    run.write("scores.csv", scores)?;
    run.write("history.csv", history)?;
    run.write("histogram.csv", report.histogram_csv(20))?;
    run.write_json("metrics.json", &metrics)?;
    let a = &report.aggregate;
    println!(
        "AUC {:.4} ± {:.4}  FPR95 {:.4} ± {:.4}  DET-ACC {:.4} ± {:.4}",
        a.auc.mean, a.auc.std, a.fpr95.mean, a.fpr95.std, a.det_acc.mean, a.det_acc.std
    );
    run.finish()
}

pub fn li(common: &Common) -> Result<()> {
    let mut run = Run::start("li", common)?;
    let g = load_graph(&run)?;
    let labels = g.labels().context("graph has no labels")?;
    let li = label_informativeness(&g, labels)?;
    let h = edge_homophily(&g, labels)?;
    let metrics = json!({
        "nodes": g.num_nodes(),
        "edges": g.num_edges(),
        "label_informativeness": li,
        "edge_homophily": h,
    });
    run.write_json("metrics.json", &metrics)?;
    println!("label_informativeness: {li:?}");
    println!("edge_homophily: {h:?}");
    run.finish()
}

pub fn rewire(common: &Common) -> Result<()> {
    let mut run = Run::start("rewire", common)?;
    let g = load_graph(&run)?;
    let section = &run.config.kernel;
    let basis = SpectralBasis::from_graph(&g, section.laplacian)?;
    let k = spectral_kernel(&basis, &section.spec())?;
    let rewired = rewire_by_covariance(&g, &k.matrix, &run.config.rewire)?;
    let metrics = match g.labels() {
        Some(labels) => serde_json::to_value(rewire_report(&g, &rewired, labels)?)?,
        None => json!({ "edges_before": g.num_edges(), "edges_after": rewired.num_edges() }),
    };
    for path in save_dataset(&rewired, run.out.join("rewired"))? {
        let rel = path.strip_prefix(&run.out).unwrap_or(&path).to_path_buf();
        run.record(rel);
    }
    run.write_json("metrics.json", &metrics)?;
    println!("{} edges -> {} edges", g.num_edges(), rewired.num_edges());
    run.finish()
}

pub fn bench(common: &Common) -> Result<()> {
    let mut run = Run::start("bench", common)?;
    let rows = bench_sweeps(&run.config.bench, run.seed)?;
    ensure_finite("timings", rows.iter().map(|r| r.seconds))?;
    let (order, edges) = scaling_slopes(&rows);
    let metrics = json!({
        "order_slope": order,
        "edge_slope": edges,
        "rows": serde_json::to_value(&rows)?,
    });
    run.write("bench.csv", bench_csv(&rows))?;
    run.write_json("metrics.json", &metrics)?;
    println!("log-log slope in order {order:.3}, in edges {edges:.3}");
    run.finish()
}
