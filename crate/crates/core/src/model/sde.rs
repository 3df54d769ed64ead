use ndarray::{Array2, ArrayView2};

use super::{IntegratorConfig, ModelConfig, ModelParams, NoiseMode, SamplerKind, AUTO_DENSE_LIMIT};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::kernels::lambda_max_bound;
use crate::linalg::CsrMatrix;
use crate::noise::GrfSampler;
use crate::rng;
use crate::spectral::SpectralBasis;

const PROB_FLOOR: f64 = 1e-12;
/// Below this many state entries the per-sample work is too small to thread.
const PARALLEL_MIN_ENTRIES: usize = 4096;

/// Graph-dependent pieces of the model: the convolution operator and the
/// noise sampler.
#[derive(Debug, Clone)]
pub struct SdeContext {
    pub gcn: CsrMatrix,
    pub noise: Option<GrfSampler>,
}

impl SdeContext {
    pub fn new(g: &Graph, cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let noise = match cfg.integrator.noise_mode.kernel_spec(&cfg.kernel) {
            None => None,
            Some(spec) => {
                let k = &cfg.kernel;
                let dense = match k.sampler {
                    SamplerKind::Dense => true,
                    SamplerKind::Chebyshev => false,
                    SamplerKind::Auto => g.num_nodes() <= AUTO_DENSE_LIMIT,
                };
                let sampler = if dense || g.num_edges() == 0 {
                    let basis = SpectralBasis::from_graph(g, k.laplacian)?;
                    GrfSampler::spectral(&basis, &spec)?
                } else {
                    let l = g.laplacian(k.laplacian);
                    let bound = lambda_max_bound(&l, k.lambda_bound);
                    GrfSampler::chebyshev(l, &spec, k.cheb_order, bound)?
                };
                Some(sampler)
            }
        };
        Ok(Self {
            gcn: g.gcn_operator(),
            noise,
        })
    }

    pub fn with_sampler(g: &Graph, noise: Option<GrfSampler>) -> Self {
        Self {
            gcn: g.gcn_operator(),
            noise,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.gcn.dim()
    }
}

fn check_gcn_shapes(n: usize, h: ArrayView2<'_, f64>, weights: &[Array2<f64>]) -> Result<()> {
    if h.nrows() != n {
        return Err(Error::DimensionMismatch(format!("state has {} rows, graph has {n} nodes", h.nrows())));
    }
    let mut width = h.ncols();
    for (l, w) in weights.iter().enumerate() {
        if w.nrows() != width {
            return Err(Error::DimensionMismatch(format!(
                "layer {l} expects {} input channels, got {width}",
                w.nrows()
            )));
        }
        width = w.ncols();
    }
    Ok(())
}

/// `Â (… (Â H W₁) …) W_L` with `Â = D̃^{-1/2}(A+I)D̃^{-1/2}`.
pub fn gcn_forward(g: &Graph, h: ArrayView2<'_, f64>, weights: &[Array2<f64>]) -> Result<Array2<f64>> {
    check_gcn_shapes(g.num_nodes(), h, weights)?;
    Ok(gnn(&g.gcn_operator(), weights, h.to_owned(), None))
}

/// Chain of graph convolutions. When `cache` is given it receives `Â Y_{l-1}`
/// for each layer.
fn gnn(op: &CsrMatrix, weights: &[Array2<f64>], mut y: Array2<f64>, mut cache: Option<&mut Vec<Array2<f64>>>) -> Array2<f64> {
    for w in weights {
        let a = op.matmul_dense(y.view());
        y = a.dot(w);
        if let Some(c) = cache.as_deref_mut() {
            c.push(a);
        }
    }
    y
}

/// Reverse of [`gnn`]. `Â` is symmetric so it is its own adjoint.
fn gnn_backward(
    op: &CsrMatrix,
    weights: &[Array2<f64>],
    cache: &[Array2<f64>],
    mut dy: Array2<f64>,
    dweights: &mut [Array2<f64>],
) -> Array2<f64> {
    for l in (0..weights.len()).rev() {
        dweights[l] += &cache[l].t().dot(&dy);
        let da = dy.dot(&weights[l].t());
        dy = op.matmul_dense(da.view());
    }
    dy
}

struct StepTrace {
    h: Array2<f64>,
    f_act: Array2<f64>,
    g_act: Option<Array2<f64>>,
    gnn_inputs: Vec<Array2<f64>>,
}

#[derive(Default)]
struct Trace {
    steps: Vec<StepTrace>,
}

/// Encoder followed by the initial graph convolution: `H(0) = GNN(encoder(X))`.
fn initial_state(params: &ModelParams, op: &CsrMatrix, x: ArrayView2<'_, f64>, cache: Option<&mut Vec<Array2<f64>>>) -> Array2<f64> {
    gnn(op, &params.gcn_weights, params.encoder.forward(x), cache)
}

fn euler(
    params: &ModelParams,
    op: &CsrMatrix,
    h0: Array2<f64>,
    dt: f64,
    steps: usize,
    increments: Option<&[Array2<f64>]>,
    mut trace: Option<&mut Trace>,
) -> Result<Array2<f64>> {
    let mut h = h0;
    for k in 0..steps {
        let (f_act, f_out) = params.f_mlp.forward(h.view());
        let mut u = f_out * dt;
        let mut g_act = None;
        if let Some(inc) = increments {
            let (act, g_out) = params.g_mlp.forward(h.view());
            u += &(g_out * &inc[k]);
            g_act = Some(act);
        }
        let mut gnn_inputs = Vec::new();
        let delta = gnn(
            op,
            &params.gcn_weights,
            u,
            trace.as_ref().map(|_| &mut gnn_inputs),
        );
        let next = &h + &delta;
        if next.iter().any(|x| !x.is_finite()) {
            return Err(Error::Divergence { step: k + 1 });
        }
        if let Some(t) = trace.as_deref_mut() {
            t.steps.push(StepTrace {
                h,
                f_act,
                g_act,
                gnn_inputs,
            });
        }
        h = next;
    }
    Ok(h)
}

fn check_increments(h0: ArrayView2<'_, f64>, steps: usize, inc: Option<&[Array2<f64>]>) -> Result<()> {
    if let Some(inc) = inc {
        if inc.len() != steps {
            return Err(Error::DimensionMismatch(format!("{} increments for {steps} steps", inc.len())));
        }
        if let Some(bad) = inc.iter().position(|w| w.dim() != h0.dim()) {
            return Err(Error::DimensionMismatch(format!(
                "increment {bad} has shape {:?}, state has {:?}",
                inc[bad].dim(),
                h0.dim()
            )));
        }
    }
    Ok(())
}

/// Explicit Euler on `[0, steps·dt]` with caller-supplied noise increments.
/// `None` integrates the deterministic system.
pub fn integrate_with_increments(
    params: &ModelParams,
    ctx: &SdeContext,
    h0: ArrayView2<'_, f64>,
    dt: f64,
    steps: usize,
    increments: Option<&[Array2<f64>]>,
) -> Result<Array2<f64>> {
    check_gcn_shapes(ctx.num_nodes(), h0, &params.gcn_weights)?;
    check_increments(h0, steps, increments)?;
    euler(params, &ctx.gcn, h0.to_owned(), dt, steps, increments, None)
}

/// `ΔW_k ~ N(0, Δt·K)` independently per step and per hidden channel.
fn draw_increments(ctx: &SdeContext, integ: &IntegratorConfig, channels: usize, seed: u64) -> Result<Option<Vec<Array2<f64>>>> {
    if integ.noise_mode == NoiseMode::Deterministic {
        return Ok(None);
    }
    let sampler = ctx
        .noise
        .as_ref()
        .ok_or_else(|| Error::Missing(format!("noise sampler for mode {}", integ.noise_mode)))?;
    let mut r = rng::rng_from_seed(seed);
    let dt = integ.dt();
    (0..integ.steps)
        .map(|_| sampler.sample_block(&mut r, channels, dt))
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

/// `H(T)` for one noise realization drawn from `seed`.
pub fn integrate(params: &ModelParams, ctx: &SdeContext, integ: &IntegratorConfig, h0: ArrayView2<'_, f64>, seed: u64) -> Result<Array2<f64>> {
    integ.validate()?;
    let inc = draw_increments(ctx, integ, h0.ncols(), seed)?;
    integrate_with_increments(params, ctx, h0, integ.dt(), integ.steps, inc.as_deref())
}

fn softmax_rows(mut logits: Array2<f64>) -> Array2<f64> {
    for mut row in logits.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|x| (x - m).exp());
        let s = row.sum();
        row /= s;
    }
    logits
}

/// `S` class-probability matrices, each `n × C`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveSamples {
    pub probs: Vec<Array2<f64>>,
}

impl PredictiveSamples {
    pub fn new(probs: Vec<Array2<f64>>) -> Result<Self> {
        let first = probs
            .first()
            .ok_or_else(|| Error::InvalidParameter("need at least one predictive sample".into()))?;
        let dim = first.dim();
        for (s, p) in probs.iter().enumerate() {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch(format!("sample {s} has shape {:?}, expected {dim:?}", p.dim())));
            }
            if p.iter().any(|&x| !(x >= 0.0)) {
                return Err(Error::InvalidParameter(format!("sample {s} has a negative or NaN probability")));
            }
            if let Some(i) = p.rows().into_iter().position(|r| (r.sum() - 1.0).abs() > 1e-6) {
                return Err(Error::InvalidParameter(format!("sample {s}, node {i}: row does not sum to 1")));
            }
        }
        Ok(Self { probs })
    }

    pub fn num_samples(&self) -> usize {
        self.probs.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.probs[0].nrows()
    }

    pub fn num_classes(&self) -> usize {
        self.probs[0].ncols()
    }

    /// Mean over samples.
    pub fn mean(&self) -> Array2<f64> {
        let mut m = Array2::zeros(self.probs[0].dim());
        for p in &self.probs {
            m += p;
        }
        m / self.probs.len() as f64
    }

    /// Arg-max class of the mean prediction.
    pub fn predicted_classes(&self) -> Vec<usize> {
        self.mean()
            .rows()
            .into_iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (c, &p)| if p > best.1 { (c, p) } else { best })
                    .0
            })
            .collect()
    }
}

fn check_inputs(params: &ModelParams, ctx: &SdeContext, x: ArrayView2<'_, f64>) -> Result<()> {
    if x.nrows() != ctx.num_nodes() || x.ncols() != params.feature_dim() {
        return Err(Error::DimensionMismatch(format!(
            "features are {}x{}, expected {}x{}",
            x.nrows(),
            x.ncols(),
            ctx.num_nodes(),
            params.feature_dim()
        )));
    }
    Ok(())
}

/// Run `f(s)` for every sample index, threaded when the work is large enough.
/// Results come back in index order.
fn per_sample<T: Send>(count: usize, entries: usize, f: impl Fn(usize) -> Result<T> + Sync) -> Result<Vec<T>> {
    if count <= 1 || entries < PARALLEL_MIN_ENTRIES {
        return (0..count).map(&f).collect();
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..count).map(|s| scope.spawn({
            let f = &f;
            move || f(s)
        })).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sample worker panicked"))
            .collect()
    })
}

fn effective_samples(integ: &IntegratorConfig, requested: usize) -> usize {
    // Without noise every realization is identical.
    if integ.noise_mode == NoiseMode::Deterministic {
        1
    } else {
        requested
    }
}

/// `S` independent forward passes; sample `s` uses the noise stream derived
/// from `(seed, s)`.
pub fn predict(
    params: &ModelParams,
    ctx: &SdeContext,
    integ: &IntegratorConfig,
    x: ArrayView2<'_, f64>,
    samples: usize,
    seed: u64,
) -> Result<PredictiveSamples> {
    integ.validate()?;
    if samples < 1 {
        return Err(Error::InvalidParameter("need at least one sample".into()));
    }
    check_inputs(params, ctx, x)?;
    let h0 = initial_state(params, &ctx.gcn, x, None);
    let distinct = effective_samples(integ, samples);
    let mut probs = per_sample(distinct, h0.len(), |s| {
        let ht = integrate(params, ctx, integ, h0.view(), rng::derive_seed(seed, s as u64))?;
        Ok(softmax_rows(params.decoder.forward(ht.view())))
    })?;
    while probs.len() < samples {
        probs.push(probs[0].clone());
    }
    Ok(PredictiveSamples { probs })
}

fn check_mask(mask: &[usize], labels: &[usize], n: usize, classes: usize) -> Result<()> {
    if mask.is_empty() {
        return Err(Error::Degenerate("empty node mask".into()));
    }
    if labels.len() != n {
        return Err(Error::DimensionMismatch(format!("{} labels for {n} nodes", labels.len())));
    }
    for &i in mask {
        if i >= n {
            return Err(Error::NodeOutOfRange { id: i, num_nodes: n });
        }
        if labels[i] >= classes {
            return Err(Error::InvalidParameter(format!("label {} of node {i} exceeds {classes} classes", labels[i])));
        }
    }
    Ok(())
}

/// Mean over samples and masked nodes of `-ln max(p[label], 1e-12)`. Nodes
/// listed twice in `mask` count twice.
pub fn loss(samples: &PredictiveSamples, labels: &[usize], mask: &[usize]) -> Result<f64> {
    check_mask(mask, labels, samples.num_nodes(), samples.num_classes())?;
    let total: f64 = samples
        .probs
        .iter()
        .map(|p| mask.iter().map(|&i| -p[[i, labels[i]]].max(PROB_FLOOR).ln()).sum::<f64>())
        .sum();
    Ok(total / (samples.num_samples() * mask.len()) as f64)
}

/// Loss and its exact gradient for the noise realizations drawn from `seed`
/// (the same realizations [`predict`] uses with `integ.train_samples`).
#[allow(clippy::too_many_arguments)]
pub fn loss_and_gradients(
    params: &ModelParams,
    ctx: &SdeContext,
    integ: &IntegratorConfig,
    x: ArrayView2<'_, f64>,
    labels: &[usize],
    mask: &[usize],
    seed: u64,
) -> Result<(f64, ModelParams)> {
    integ.validate()?;
    check_inputs(params, ctx, x)?;
    check_mask(mask, labels, ctx.num_nodes(), params.num_classes())?;
    let op = &ctx.gcn;
    let distinct = effective_samples(integ, integ.train_samples);
    let weight = 1.0 / mask.len() as f64;

    let mut encoder_cache = Vec::new();
    let h0 = initial_state(params, op, x, Some(&mut encoder_cache));

    let results = per_sample(distinct, h0.len(), |s| {
        let inc = draw_increments(ctx, integ, h0.ncols(), rng::derive_seed(seed, s as u64))?;
        let mut trace = Trace::default();
        let ht = euler(params, op, h0.clone(), integ.dt(), integ.steps, inc.as_deref(), Some(&mut trace))?;
        let probs = softmax_rows(params.decoder.forward(ht.view()));

        let mut sample_loss = 0.0;
        let mut dlogits = Array2::zeros(probs.dim());
        for &i in mask {
            let p = probs[[i, labels[i]]];
            sample_loss -= p.max(PROB_FLOOR).ln();
            if p >= PROB_FLOOR {
                let mut row = dlogits.row_mut(i);
                row.scaled_add(weight, &probs.row(i));
                row[labels[i]] -= weight;
            }
        }
        let mut grad = params.zeros_like();
        let mut dh = params.decoder.backward(ht.view(), &dlogits, &mut grad.decoder);
        for (k, st) in trace.steps.iter().enumerate().rev() {
            let du = gnn_backward(op, &params.gcn_weights, &st.gnn_inputs, dh.clone(), &mut grad.gcn_weights);
            dh += &params.f_mlp.backward(st.h.view(), &st.f_act, &(&du * integ.dt()), &mut grad.f_mlp);
            if let (Some(act), Some(inc)) = (&st.g_act, inc.as_deref()) {
                let dg = &du * &inc[k];
                dh += &params.g_mlp.backward(st.h.view(), act, &dg, &mut grad.g_mlp);
            }
        }
        Ok((sample_loss * weight, grad, dh))
    })?;

    let scale = 1.0 / distinct as f64;
    let mut grad = params.zeros_like();
    let mut dh0 = Array2::zeros(h0.dim());
    let mut total = 0.0;
    for (l, g, dh) in &results {
        total += l;
        grad.add_assign(g);
        dh0 += dh;
    }
    grad.scale(scale);
    dh0 *= scale;
    let denc = gnn_backward(op, &params.gcn_weights, &encoder_cache, dh0, &mut grad.gcn_weights);
    params.encoder.backward(x, &denc, &mut grad.encoder);

    if let Some(name) = grad.first_non_finite() {
        return Err(Error::NonFiniteGradient(name));
    }
    Ok((total * scale, grad))
}

#[allow(clippy::too_many_arguments)]
pub fn gradients(
    params: &ModelParams,
    ctx: &SdeContext,
    integ: &IntegratorConfig,
    x: ArrayView2<'_, f64>,
    labels: &[usize],
    mask: &[usize],
    seed: u64,
) -> Result<ModelParams> {
    loss_and_gradients(params, ctx, integ, x, labels, mask, seed).map(|r| r.1)
}
