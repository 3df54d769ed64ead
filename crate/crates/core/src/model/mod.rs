//! Graph neural SDE classifier.
//!
//! The hidden state follows a randomly forced graph ODE
//!
//! ```text
//! H(0)     = GNN(encoder(X))
//! H ← H + GNN(Δt·F(H) + G(H) ⊙ ΔW),   ΔW ~ N(0, Δt·K) per hidden channel
//! p(y | H) = softmax(decoder(H(T)))
//! ```
//!
//! `GNN` is a chain of linear graph convolutions `Â Y W_l`, `F` and `G` are
//! two-layer tanh perceptrons and `K` is a spectral kernel of the Laplacian.
//! Gradients are computed by hand-written reverse mode through the unrolled
//! integrator with the noise held fixed.

mod checkpoint;
mod params;
mod sde;
mod train;
mod uncertainty;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use params::{Dense, Mlp, ModelParams};
pub use sde::{
    gcn_forward, gradients, integrate, integrate_with_increments, loss, loss_and_gradients, predict,
    PredictiveSamples, SdeContext,
};
pub use train::{train, train_with_context, Adam, HistoryEntry, OptimizerConfig, TrainOutcome};
pub use uncertainty::{entropy, uncertainty_scores, UncertaintyScores};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::LaplacianKind;
use crate::kernels::{KernelSpec, LambdaBound};

/// Source of the stochastic forcing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMode {
    /// Φ-Wiener forcing with a Matérn kernel.
    #[default]
    SispdeMatern,
    /// Φ-Wiener forcing with the heat kernel.
    SispdeRbf,
    /// Q-Wiener forcing whose spatial covariance is the Laplacian.
    GnsdQwiener,
    /// No forcing; the model is a discretized graph diffusion.
    Deterministic,
}

impl NoiseMode {
    pub const ALL: [NoiseMode; 4] = [
        NoiseMode::SispdeMatern,
        NoiseMode::SispdeRbf,
        NoiseMode::GnsdQwiener,
        NoiseMode::Deterministic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NoiseMode::SispdeMatern => "sispde-matern",
            NoiseMode::SispdeRbf => "sispde-rbf",
            NoiseMode::GnsdQwiener => "gnsd-qwiener",
            NoiseMode::Deterministic => "deterministic",
        }
    }

    /// Spectral description of the noise covariance, `None` when deterministic.
    pub fn kernel_spec(self, k: &NoiseKernelConfig) -> Option<KernelSpec> {
        let spec = match self {
            NoiseMode::SispdeMatern => KernelSpec::matern(k.nu, k.kappa),
            NoiseMode::SispdeRbf => KernelSpec::rbf(k.kappa),
            NoiseMode::GnsdQwiener => KernelSpec::laplacian(),
            NoiseMode::Deterministic => return None,
        };
        Some(if k.normalize { spec.normalized() } else { spec })
    }
}

impl fmt::Display for NoiseMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NoiseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NoiseMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown noise mode '{s}'")))
    }
}

/// How noise increments are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    /// Dense spectral sampler up to [`AUTO_DENSE_LIMIT`] nodes, Chebyshev above.
    #[default]
    Auto,
    Dense,
    Chebyshev,
}

pub const AUTO_DENSE_LIMIT: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseKernelConfig {
    pub nu: f64,
    pub kappa: f64,
    /// Scale the kernel to unit mean variance so noise modes are comparable.
    pub normalize: bool,
    pub laplacian: LaplacianKind,
    pub sampler: SamplerKind,
    pub cheb_order: usize,
    pub lambda_bound: LambdaBound,
}

impl Default for NoiseKernelConfig {
    fn default() -> Self {
        Self {
            nu: 0.5,
            kappa: 1.0,
            normalize: true,
            laplacian: LaplacianKind::Combinatorial,
            sampler: SamplerKind::Auto,
            cheb_order: 50,
            lambda_bound: LambdaBound::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub horizon: f64,
    pub steps: usize,
    /// Noise realizations per loss evaluation.
    pub train_samples: usize,
    /// Noise realizations at prediction time.
    pub eval_samples: usize,
    pub noise_mode: NoiseMode,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            horizon: 1.0,
            steps: 8,
            train_samples: 3,
            eval_samples: 10,
            noise_mode: NoiseMode::SispdeMatern,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!("horizon must be > 0, got {}", self.horizon)));
        }
        if self.steps < 1 {
            return Err(Error::InvalidParameter("steps must be >= 1".into()));
        }
        if self.train_samples < 1 || self.eval_samples < 1 {
            return Err(Error::InvalidParameter("sample counts must be >= 1".into()));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden: usize,
    pub gcn_layers: usize,
    /// Reserved. Only 0 is accepted.
    pub dropout: f64,
    /// Initial bias of the diffusion head, so the noise gate starts open.
    pub diffusion_bias_init: f64,
    pub integrator: IntegratorConfig,
    pub kernel: NoiseKernelConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden: 32,
            gcn_layers: 1,
            dropout: 0.0,
            diffusion_bias_init: 1.0,
            integrator: IntegratorConfig::default(),
            kernel: NoiseKernelConfig::default(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden < 1 {
            return Err(Error::InvalidParameter("hidden dimension must be >= 1".into()));
        }
        if self.dropout != 0.0 {
            return Err(Error::InvalidParameter("dropout is not implemented; set it to 0".into()));
        }
        if self.kernel.cheb_order < 1 {
            return Err(Error::InvalidParameter("cheb_order must be >= 1".into()));
        }
        self.integrator.validate()?;
        if let Some(spec) = self.integrator.noise_mode.kernel_spec(&self.kernel) {
            spec.validate()?;
        }
        Ok(())
    }
}
