use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use super::ModelConfig;
use crate::error::{Error, Result};
use crate::rng;

/// Affine map `Y = X W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    fn glorot<R: Rng + ?Sized>(rng: &mut R, fan_in: usize, fan_out: usize) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        Self {
            weight: Array2::from_shape_fn((fan_in, fan_out), |_| rng.random_range(-limit..=limit)),
            bias: Array1::zeros(fan_out),
        }
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        x.dot(&self.weight) + &self.bias
    }

    /// Accumulate parameter gradients into `grad` and return the input gradient.
    pub(crate) fn backward(&self, x: ArrayView2<'_, f64>, dy: &Array2<f64>, grad: &mut Dense) -> Array2<f64> {
        grad.weight += &x.t().dot(dy);
        grad.bias += &dy.sum_axis(Axis(0));
        dy.dot(&self.weight.t())
    }

    fn zeros_like(&self) -> Self {
        Self {
            weight: Array2::zeros(self.weight.dim()),
            bias: Array1::zeros(self.bias.len()),
        }
    }
}

/// `tanh(X W₁ + b₁) W₂ + b₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub hidden: Dense,
    pub output: Dense,
}

impl Mlp {
    /// Returns `(activation, output)`.
    pub(crate) fn forward(&self, x: ArrayView2<'_, f64>) -> (Array2<f64>, Array2<f64>) {
        let act = self.hidden.forward(x).mapv(f64::tanh);
        let out = self.output.forward(act.view());
        (act, out)
    }

    pub(crate) fn backward(&self, x: ArrayView2<'_, f64>, act: &Array2<f64>, dy: &Array2<f64>, grad: &mut Mlp) -> Array2<f64> {
        let dact = self.output.backward(act.view(), dy, &mut grad.output);
        let dz = dact * &act.mapv(|a| 1.0 - a * a);
        self.hidden.backward(x, &dz, &mut grad.hidden)
    }

    fn zeros_like(&self) -> Self {
        Self {
            hidden: self.hidden.zeros_like(),
            output: self.output.zeros_like(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub encoder: Dense,
    /// Square `hidden × hidden` weights, one per graph convolution.
    pub gcn_weights: Vec<Array2<f64>>,
    pub f_mlp: Mlp,
    pub g_mlp: Mlp,
    pub decoder: Dense,
}

impl ModelParams {
    /// Glorot-uniform weights, zero biases except the diffusion head's output
    /// bias which is set to `cfg.diffusion_bias_init`.
    pub fn init(feature_dim: usize, num_classes: usize, cfg: &ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if feature_dim == 0 || num_classes == 0 {
            return Err(Error::InvalidParameter("feature and class counts must be positive".into()));
        }
        let h = cfg.hidden;
        let mut r = rng::rng_from_seed(seed);
        let encoder = Dense::glorot(&mut r, feature_dim, h);
        let gcn_weights = (0..cfg.gcn_layers).map(|_| Dense::glorot(&mut r, h, h).weight).collect();
        let f_mlp = Mlp {
            hidden: Dense::glorot(&mut r, h, h),
            output: Dense::glorot(&mut r, h, h),
        };
        let mut g_mlp = Mlp {
            hidden: Dense::glorot(&mut r, h, h),
            output: Dense::glorot(&mut r, h, h),
        };
        g_mlp.output.bias.fill(cfg.diffusion_bias_init);
        let decoder = Dense::glorot(&mut r, h, num_classes);
        Ok(Self {
            encoder,
            gcn_weights,
            f_mlp,
            g_mlp,
            decoder,
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            encoder: self.encoder.zeros_like(),
            gcn_weights: self.gcn_weights.iter().map(|w| Array2::zeros(w.dim())).collect(),
            f_mlp: self.f_mlp.zeros_like(),
            g_mlp: self.g_mlp.zeros_like(),
            decoder: self.decoder.zeros_like(),
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.encoder.weight.nrows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.encoder.weight.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.decoder.weight.ncols()
    }

    /// Named tensors with their shapes, in a fixed order.
    pub fn tensors(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        let mut out: Vec<(String, Vec<usize>, &[f64])> = Vec::new();
        fn push_dense<'a>(out: &mut Vec<(String, Vec<usize>, &'a [f64])>, name: &str, d: &'a Dense) {
            out.push((
                format!("{name}.weight"),
                d.weight.shape().to_vec(),
                d.weight.as_slice().expect("standard layout"),
            ));
            out.push((
                format!("{name}.bias"),
                d.bias.shape().to_vec(),
                d.bias.as_slice().expect("standard layout"),
            ));
        }
        push_dense(&mut out, "encoder", &self.encoder);
        for (l, w) in self.gcn_weights.iter().enumerate() {
            out.push((format!("gcn.{l}"), w.shape().to_vec(), w.as_slice().expect("standard layout")));
        }
        push_dense(&mut out, "f_mlp.hidden", &self.f_mlp.hidden);
        push_dense(&mut out, "f_mlp.output", &self.f_mlp.output);
        push_dense(&mut out, "g_mlp.hidden", &self.g_mlp.hidden);
        push_dense(&mut out, "g_mlp.output", &self.g_mlp.output);
        push_dense(&mut out, "decoder", &self.decoder);
        out
    }

    /// Mutable slices in the same order as [`ModelParams::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        fn push<'a>(out: &mut Vec<&'a mut [f64]>, d: &'a mut Dense) {
            out.push(d.weight.as_slice_mut().expect("standard layout"));
            out.push(d.bias.as_slice_mut().expect("standard layout"));
        }
        let Self {
            encoder,
            gcn_weights,
            f_mlp,
            g_mlp,
            decoder,
        } = self;
        push(&mut out, encoder);
        for w in gcn_weights.iter_mut() {
            out.push(w.as_slice_mut().expect("standard layout"));
        }
        push(&mut out, &mut f_mlp.hidden);
        push(&mut out, &mut f_mlp.output);
        push(&mut out, &mut g_mlp.hidden);
        push(&mut out, &mut g_mlp.output);
        push(&mut out, decoder);
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.2.len()).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensors().into_iter().flat_map(|t| t.2.iter().copied()).collect()
    }

    /// Overwrite all parameters from a flat vector produced by [`ModelParams::flatten`].
    pub fn assign_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_parameters() {
            return Err(Error::DimensionMismatch(format!(
                "flat vector has {} entries, model has {}",
                flat.len(),
                self.num_parameters()
            )));
        }
        let mut offset = 0;
        for t in self.tensors_mut() {
            let len = t.len();
            t.copy_from_slice(&flat[offset..offset + len]);
            offset += len;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.2.iter().all(|x| x.is_finite()))
    }

    /// Name of the first tensor holding a non-finite value.
    pub fn first_non_finite(&self) -> Option<String> {
        self.tensors()
            .into_iter()
            .find(|t| t.2.iter().any(|x| !x.is_finite()))
            .map(|t| t.0)
    }

    pub(crate) fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= factor);
        }
    }

    pub(crate) fn add_assign(&mut self, other: &ModelParams) {
        let src = other.flatten();
        let mut offset = 0;
        for t in self.tensors_mut() {
            for x in t.iter_mut() {
                *x += src[offset];
                offset += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flatten_round_trip() {
        let cfg = ModelConfig {
            hidden: 3,
            gcn_layers: 2,
            ..Default::default()
        };
        let p = ModelParams::init(4, 2, &cfg, 1).unwrap();
        let flat = p.flatten();
        assert_eq!(flat.len(), p.num_parameters());
        let mut q = p.zeros_like();
        q.assign_flat(&flat).unwrap();
        assert_eq!(p, q);
        assert!(q.assign_flat(&flat[1..]).is_err());
    }

    #[test]
    fn glorot_limits_and_bias_init() {
        let cfg = ModelConfig {
            hidden: 8,
            diffusion_bias_init: 0.7,
            ..Default::default()
        };
        let p = ModelParams::init(5, 3, &cfg, 9).unwrap();
        let lim = (6.0f64 / 13.0).sqrt();
        assert!(p.encoder.weight.iter().all(|w| w.abs() <= lim));
        assert!(p.g_mlp.output.bias.iter().all(|&b| b == 0.7));
        assert!(p.f_mlp.output.bias.iter().all(|&b| b == 0.0));
        assert_eq!(p, ModelParams::init(5, 3, &cfg, 9).unwrap());
    }

    #[test]
    fn dropout_rejected() {
        let cfg = ModelConfig {
            dropout: 0.5,
            ..Default::default()
        };
        assert!(ModelParams::init(2, 2, &cfg, 0).is_err());
    }
}
