use ndarray::ArrayView1;

use super::PredictiveSamples;

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn entropy(p: ArrayView1<'_, f64>) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}

/// Per-node predictive uncertainty.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyScores {
    /// Entropy of the mean prediction.
    pub total: Vec<f64>,
    /// Mean entropy of the individual predictions.
    pub aleatoric: Vec<f64>,
    /// `total - aleatoric`, clamped at zero against roundoff.
    pub epistemic: Vec<f64>,
}

pub fn uncertainty_scores(samples: &PredictiveSamples) -> UncertaintyScores {
    let mean = samples.mean();
    let s = samples.num_samples() as f64;
    let n = samples.num_nodes();
    let mut out = UncertaintyScores {
        total: Vec::with_capacity(n),
        aleatoric: Vec::with_capacity(n),
        epistemic: Vec::with_capacity(n),
    };
    for i in 0..n {
        let total = entropy(mean.row(i));
        let aleatoric = samples.probs.iter().map(|p| entropy(p.row(i))).sum::<f64>() / s;
        out.total.push(total);
        out.aleatoric.push(aleatoric);
        out.epistemic.push((total - aleatoric).max(0.0));
    }
    out
}
