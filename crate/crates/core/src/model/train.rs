use serde::{Deserialize, Serialize};

use super::{loss, loss_and_gradients, predict, ModelConfig, ModelParams, SdeContext};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    /// L2 penalty added to the gradient.
    pub weight_decay: f64,
    pub epochs: usize,
    /// Stop after this many epochs without a validation improvement.
    pub patience: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-2,
            weight_decay: 1e-3,
            epochs: 200,
            patience: 20,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::InvalidParameter("learning rate and weight decay must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.eps > 0.0) {
            return Err(Error::InvalidParameter("Adam needs beta in [0, 1) and eps > 0".into()));
        }
        Ok(())
    }
}

/// Adam over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    cfg: OptimizerConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(cfg: OptimizerConfig, num_params: usize) -> Self {
        Self {
            cfg,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c = &self.cfg;
        let bc1 = 1.0 - c.beta1.powi(self.t);
        let bc2 = 1.0 - c.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i] + c.weight_decay * params[i];
            self.m[i] = c.beta1 * self.m[i] + (1.0 - c.beta1) * g;
            self.v[i] = c.beta2 * self.v[i] + (1.0 - c.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= c.learning_rate * m_hat / (v_hat.sqrt() + c.eps);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters at the epoch with the lowest validation loss.
    pub params: ModelParams,
    pub history: Vec<HistoryEntry>,
    pub best_epoch: usize,
}

const INIT_STREAM: u64 = 0;
const EPOCH_STREAM: u64 = 1;
const VAL_STREAM: u64 = 2;

/// Full-batch training on `g`'s features and labels.
pub fn train(
    g: &Graph,
    cfg: &ModelConfig,
    opt: &OptimizerConfig,
    train_nodes: &[usize],
    val_nodes: &[usize],
    seed: u64,
) -> Result<TrainOutcome> {
    let ctx = SdeContext::new(g, cfg)?;
    train_with_context(g, &ctx, cfg, opt, train_nodes, val_nodes, seed)
}

/// [`train`] with a prebuilt context, so the noise sampler can be shared.
pub fn train_with_context(
    g: &Graph,
    ctx: &SdeContext,
    cfg: &ModelConfig,
    opt: &OptimizerConfig,
    train_nodes: &[usize],
    val_nodes: &[usize],
    seed: u64,
) -> Result<TrainOutcome> {
    opt.validate()?;
    let x = g.features().ok_or_else(|| Error::Missing("node features".into()))?;
    let labels = g.labels().ok_or_else(|| Error::Missing("node labels".into()))?;
    let mut seen = vec![false; g.num_nodes()];
    for &i in train_nodes {
        if i < seen.len() {
            seen[i] = true;
        }
    }
    if val_nodes.iter().any(|&i| i < seen.len() && seen[i]) {
        return Err(Error::InvalidParameter("train and validation nodes overlap".into()));
    }

    let mut params = ModelParams::init(x.ncols(), g.num_classes(), cfg, rng::derive_seed(seed, INIT_STREAM))?;
    let mut adam = Adam::new(opt.clone(), params.num_parameters());
    let epoch_seed = rng::derive_seed(seed, EPOCH_STREAM);
    let val_seed = rng::derive_seed(seed, VAL_STREAM);
    let integ = &cfg.integrator;

    let mut history = Vec::new();
    let mut best = (f64::INFINITY, 0, params.clone());
    for epoch in 0..opt.epochs {
        let (train_loss, grad) = loss_and_gradients(
            &params,
            ctx,
            integ,
            x.view(),
            labels,
            train_nodes,
            rng::derive_seed(epoch_seed, epoch as u64),
        )?;
        let val_loss = if val_nodes.is_empty() {
            train_loss
        } else {
            let s = predict(&params, ctx, integ, x.view(), integ.train_samples, val_seed)?;
            loss(&s, labels, val_nodes)?
        };
        history.push(HistoryEntry {
            epoch,
            train_loss,
            val_loss,
        });
        if val_loss < best.0 {
            best = (val_loss, epoch, params.clone());
        } else if epoch - best.1 >= opt.patience {
            break;
        }
        let mut flat = params.flatten();
        adam.step(&mut flat, &grad.flatten());
        params.assign_flat(&flat)?;
        if let Some(name) = params.first_non_finite() {
            return Err(Error::NonFiniteGradient(name));
        }
    }
    let (_, best_epoch, params) = best;
    Ok(TrainOutcome {
        params,
        history,
        best_epoch,
    })
}
