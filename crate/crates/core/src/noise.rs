//! Gaussian random fields and Wiener processes on graphs.
//!
//! A Φ-Wiener process is the truncated Karhunen-Loève sum
//! `W(t) = Σ_k sqrt(φ(λ_k)) u_k β_k(t)` over Laplacian eigenpairs, with
//! independent scalar Brownian motions `β_k`. Its covariance is
//! `Cov(W_i(t), W_j(s)) = min(t, s) K_ij` with `K = U φ(Λ) Uᵀ`. Choosing
//! `φ(λ) = λ` gives the spectral Q-Wiener process whose spatial covariance is
//! the Laplacian itself.

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;

use crate::error::{Error, Result};
use crate::kernels::{chebyshev_apply_block, chebyshev_fit_sqrt, ChebKernel, CovMatrix, KernelSpec};
use crate::linalg::CsrMatrix;
use crate::rng;
use crate::spectral::SpectralBasis;

/// Maps white noise to draws from `N(0, K)`.
#[derive(Debug, Clone)]
pub enum GrfSampler {
    /// `L z` with `L Lᵀ = K`.
    Cholesky { factor: Array2<f64> },
    /// `U sqrt(φ(Λ)) z`.
    Spectral { modes: Array2<f64> },
    /// `p(L) z` with `p ≈ sqrt(φ)`.
    Chebyshev { laplacian: CsrMatrix, filter: ChebKernel },
}

impl GrfSampler {
    pub fn cholesky(k: &CovMatrix) -> Result<Self> {
        let factor = match &k.cholesky {
            Some(f) => f.clone(),
            None => crate::kernels::cholesky(&k.matrix, 0.0)?.factor,
        };
        Ok(Self::Cholesky { factor })
    }

    pub fn spectral(basis: &SpectralBasis, spec: &KernelSpec) -> Result<Self> {
        spec.validate()?;
        let scale = spectral_normalizer(basis, spec);
        Ok(Self::Spectral {
            modes: basis.weighted_modes(|l| (scale * spec.spectral_value(l)).sqrt()),
        })
    }

    pub fn chebyshev(laplacian: CsrMatrix, spec: &KernelSpec, degree: usize, lambda_max_bound: f64) -> Result<Self> {
        let mut filter = chebyshev_fit_sqrt(spec, degree, lambda_max_bound)?;
        if spec.normalize {
            let plain = crate::kernels::chebyshev_fit(spec, degree, lambda_max_bound)?;
            let mean_diag = plain.mean_diagonal(&laplacian)?;
            if mean_diag > 0.0 {
                filter = filter.scaled(1.0 / mean_diag.sqrt());
            }
        }
        Ok(Self::Chebyshev { laplacian, filter })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Cholesky { factor } => factor.nrows(),
            Self::Spectral { modes } => modes.nrows(),
            Self::Chebyshev { laplacian, .. } => laplacian.dim(),
        }
    }

    /// Correlate each column of a white-noise block `z` (n × d).
    pub fn correlate(&self, z: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if z.nrows() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "noise block has {} rows, field has dimension {}",
                z.nrows(),
                self.dim()
            )));
        }
        match self {
            Self::Cholesky { factor } => Ok(factor.dot(&z)),
            Self::Spectral { modes } => Ok(modes.dot(&z)),
            Self::Chebyshev { laplacian, filter } => chebyshev_apply_block(laplacian, filter, z),
        }
    }

    /// `d` independent columns drawn from `N(0, scale · K)`.
    pub fn sample_block<R: Rng + ?Sized>(&self, rng: &mut R, columns: usize, scale: f64) -> Result<Array2<f64>> {
        if !(scale >= 0.0) {
            return Err(Error::InvalidParameter(format!("variance scale must be >= 0, got {scale}")));
        }
        let z = rng::normal_matrix(rng, self.dim(), columns);
        let mut out = self.correlate(z.view())?;
        out *= scale.sqrt();
        Ok(out)
    }
}

/// Mean diagonal of the unnormalized spectral kernel, inverted when the spec
/// asks for normalization.
fn spectral_normalizer(basis: &SpectralBasis, spec: &KernelSpec) -> f64 {
    if !spec.normalize || basis.dim() == 0 {
        return 1.0;
    }
    let u = &basis.eigenvectors;
    let n = basis.dim();
    let trace: f64 = basis
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(k, &l)| spec.spectral_value(l) * u.column(k).dot(&u.column(k)))
        .sum();
    let mean = trace / n as f64;
    if mean > 0.0 {
        1.0 / mean
    } else {
        1.0
    }
}

/// One draw from `N(0, scale · K)`.
pub fn sample_grf(sampler: &GrfSampler, scale: f64, seed: u64) -> Result<Vec<f64>> {
    let mut rng = rng::rng_from_seed(seed);
    let block = sampler.sample_block(&mut rng, 1, scale)?;
    Ok(block.column(0).to_vec())
}

/// Sampled path on a time grid. `values[k]` is the field at `times[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

fn validate_times(times: &[f64]) -> Result<()> {
    match times.first() {
        Some(&t0) if t0 == 0.0 => {}
        _ => {
            return Err(Error::InvalidParameter(
                "time grid must start at exactly 0".into(),
            ))
        }
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("time grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Φ-Wiener process `W(t) = Σ_k sqrt(φ(λ_k)) u_k β_k(t)`.
#[derive(Debug, Clone)]
pub struct PhiWiener {
    /// Columns `sqrt(φ(λ_k)) u_k`.
    modes: Array2<f64>,
}

impl PhiWiener {
    pub fn new(basis: &SpectralBasis, spec: &KernelSpec) -> Result<Self> {
        spec.validate()?;
        let scale = spectral_normalizer(basis, spec);
        Ok(Self {
            modes: basis.weighted_modes(|l| (scale * spec.spectral_value(l)).sqrt()),
        })
    }

    /// The Q-Wiener special case `φ(λ) = λ`.
    pub fn q_wiener(basis: &SpectralBasis) -> Self {
        Self::new(basis, &KernelSpec::laplacian()).expect("laplacian spec is always valid")
    }

    /// Keep only the `terms` modes with the largest spectral weight. The
    /// Brownian drivers of the dropped modes are still drawn, so truncated and
    /// full paths built from one seed are coupled draw-for-draw.
    pub fn truncated(&self, terms: usize) -> Self {
        let weights: Vec<f64> = self
            .modes
            .columns()
            .into_iter()
            .map(|c| c.dot(&c))
            .collect();
        let mut order: Vec<usize> = (0..weights.len()).collect();
        order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
        let mut modes = self.modes.clone();
        for &k in order.iter().skip(terms) {
            modes.column_mut(k).fill(0.0);
        }
        Self { modes }
    }

    pub fn dim(&self) -> usize {
        self.modes.nrows()
    }

    /// Spatial covariance `K = Σ_k φ(λ_k) u_k u_kᵀ` of the increments per unit time.
    pub fn covariance(&self) -> Array2<f64> {
        self.modes.dot(&self.modes.t())
    }

    pub fn simulate(&self, times: &[f64], seed: u64) -> Result<NoisePath> {
        validate_times(times)?;
        let mut rng = rng::rng_from_seed(seed);
        let terms = self.modes.ncols();
        let mut beta = vec![0.0; terms];
        let mut values = Vec::with_capacity(times.len());
        values.push(vec![0.0; self.dim()]);
        for w in times.windows(2) {
            let sd = (w[1] - w[0]).sqrt();
            for b in beta.iter_mut() {
                *b += sd * rng::standard_normal(&mut rng);
            }
            let beta_view = ndarray::ArrayView1::from(&beta);
            values.push(self.modes.dot(&beta_view).to_vec());
        }
        Ok(NoisePath {
            times: times.to_vec(),
            values,
        })
    }

    /// `count` independent paths; path `i` uses the stream derived from
    /// `(seed, i)`. Returns one `count × n` sample matrix per time point.
    pub fn monte_carlo(&self, times: &[f64], count: usize, seed: u64) -> Result<Vec<Array2<f64>>> {
        validate_times(times)?;
        let n = self.dim();
        let mut out = vec![Array2::zeros((count, n)); times.len()];
        for i in 0..count {
            let path = self.simulate(times, rng::derive_seed(seed, i as u64))?;
            for (t, v) in path.values.iter().enumerate() {
                out[t].row_mut(i).assign(&ndarray::ArrayView1::from(v));
            }
        }
        Ok(out)
    }
}

pub fn simulate_phi_wiener(basis: &SpectralBasis, spec: &KernelSpec, times: &[f64], seed: u64) -> Result<NoisePath> {
    PhiWiener::new(basis, spec)?.simulate(times, seed)
}

pub fn simulate_q_wiener(basis: &SpectralBasis, times: &[f64], seed: u64) -> Result<NoisePath> {
    PhiWiener::q_wiener(basis).simulate(times, seed)
}

/// Sample covariance and the standard error of each entry.
#[derive(Debug, Clone)]
pub struct CovEstimate {
    pub cov: Array2<f64>,
    pub se: Array2<f64>,
    pub samples: usize,
}

impl CovEstimate {
    /// `|cov - expected| / se` per entry. Entries with zero standard error get
    /// 0 when they match exactly and infinity otherwise.
    pub fn z_scores(&self, expected: &Array2<f64>) -> Array2<f64> {
        let mut z = Array2::zeros(self.cov.dim());
        ndarray::Zip::from(&mut z)
            .and(&self.cov)
            .and(&self.se)
            .and(expected)
            .for_each(|z, &c, &s, &e| {
                let d = (c - e).abs();
                *z = if s > 0.0 {
                    d / s
                } else if d == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                };
            });
        z
    }
}

/// Unbiased covariance of the rows of `samples` (N × n).
pub fn empirical_covariance(samples: ArrayView2<'_, f64>) -> Result<CovEstimate> {
    empirical_cross_covariance(samples, samples)
}

/// Unbiased cross-covariance `Cov(x_i, y_j)` from paired rows.
///
/// The standard error uses the asymptotic normal approximation: the sample
/// standard deviation of the centered products divided by `sqrt(N)`.
pub fn empirical_cross_covariance(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<CovEstimate> {
    let count = x.nrows();
    if count < 2 {
        return Err(Error::Degenerate(format!("need at least 2 samples, got {count}")));
    }
    if y.nrows() != count {
        return Err(Error::DimensionMismatch(format!(
            "{} x-samples vs {} y-samples",
            count,
            y.nrows()
        )));
    }
    let xc = &x - &x.mean_axis(Axis(0)).expect("non-empty");
    let yc = &y - &y.mean_axis(Axis(0)).expect("non-empty");
    let (p, q) = (x.ncols(), y.ncols());
    let mut cov = Array2::zeros((p, q));
    let mut se = Array2::zeros((p, q));
    let nf = count as f64;
    for i in 0..p {
        let xi = xc.column(i);
        for j in 0..q {
            let yj = yc.column(j);
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for (a, b) in xi.iter().zip(yj.iter()) {
                let prod = a * b;
                sum += prod;
                sum_sq += prod * prod;
            }
            let c = sum / (nf - 1.0);
            let mean_prod = sum / nf;
            let var_prod = ((sum_sq - nf * mean_prod * mean_prod) / (nf - 1.0)).max(0.0);
            cov[[i, j]] = c;
            se[[i, j]] = (var_prod / nf).sqrt();
        }
    }
    Ok(CovEstimate {
        cov,
        se,
        samples: count,
    })
}
