//! Chebyshev polynomial filters `p(L) ≈ φ(L)`.
//!
//! The spectrum `[0, b]` is mapped affinely onto `[-1, 1]` via
//! `x = 2λ/b - 1`, φ is interpolated at the `m + 1` Chebyshev points of the
//! first kind, and `p(L) v` is evaluated with the three-term recurrence
//! `T_{k+1} = 2 L̃ T_k - T_{k-1}`. Each term costs one sparse mat-vec, so the
//! whole filter is `O(m |E|)`.

use std::f64::consts::PI;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::KernelSpec;
use crate::error::{Error, Result};
use crate::linalg::{power_iteration, CsrMatrix};

/// How the upper end of the spectral interval is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaBound {
    /// `min(gershgorin, 1.01 · power-iteration estimate)`
    #[default]
    Auto,
    /// Gershgorin disc bound, `2 d_max` for the combinatorial Laplacian.
    Gershgorin,
    Fixed(f64),
}

const POWER_ITERS: usize = 1000;
const POWER_TOL: f64 = 1e-10;
const POWER_MARGIN: f64 = 1.01;

pub fn lambda_max_bound(l: &CsrMatrix, bound: LambdaBound) -> f64 {
    let gersh = l.gershgorin_bound();
    match bound {
        LambdaBound::Gershgorin => gersh,
        LambdaBound::Fixed(b) => b,
        LambdaBound::Auto => {
            let est = power_iteration(l, POWER_ITERS, POWER_TOL) * POWER_MARGIN;
            if est > 0.0 {
                gersh.min(est)
            } else {
                gersh
            }
        }
    }
}

/// Which function of the spectrum the coefficients interpolate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChebTarget {
    Kernel(KernelSpec),
    /// `sqrt(φ)`, used to draw samples with covariance `φ(L)`.
    SqrtKernel(KernelSpec),
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChebKernel {
    pub degree: usize,
    /// `c_0 … c_m`, with the usual halving of `c_0` already applied.
    pub coefficients: Vec<f64>,
    pub lambda_max_bound: f64,
    pub target: ChebTarget,
}

impl ChebKernel {
    /// Interpolate an arbitrary scalar function on `[0, lambda_max_bound]`.
    pub fn from_fn(f: impl Fn(f64) -> f64, degree: usize, lambda_max_bound: f64) -> Result<Self> {
        if degree < 1 {
            return Err(Error::InvalidParameter("Chebyshev degree must be at least 1".into()));
        }
        if !(lambda_max_bound > 0.0 && lambda_max_bound.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "spectral bound must be positive, got {lambda_max_bound}"
            )));
        }
        let nodes = degree + 1;
        let samples: Vec<f64> = (0..nodes)
            .map(|j| {
                let x = (PI * (j as f64 + 0.5) / nodes as f64).cos();
                f((x + 1.0) * lambda_max_bound / 2.0)
            })
            .collect();
        let coefficients: Vec<f64> = (0..=degree)
            .map(|k| {
                let s: f64 = samples
                    .iter()
                    .enumerate()
                    .map(|(j, fx)| fx * (PI * k as f64 * (j as f64 + 0.5) / nodes as f64).cos())
                    .sum();
                let c = 2.0 * s / nodes as f64;
                if k == 0 {
                    c / 2.0
                } else {
                    c
                }
            })
            .collect();
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("non-finite Chebyshev coefficient".into()));
        }
        Ok(Self {
            degree,
            coefficients,
            lambda_max_bound,
            target: ChebTarget::Custom,
        })
    }

    /// Multiply the filter by a constant.
    pub fn scaled(mut self, factor: f64) -> Self {
        self.coefficients.iter_mut().for_each(|c| *c *= factor);
        self
    }

    /// Scalar evaluation `p(λ)` by Clenshaw's recurrence.
    pub fn eval(&self, lambda: f64) -> f64 {
        let x = 2.0 * lambda / self.lambda_max_bound - 1.0;
        let (mut b1, mut b2) = (0.0, 0.0);
        for &c in self.coefficients.iter().skip(1).rev() {
            let b0 = 2.0 * x * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        x * b1 - b2 + self.coefficients[0]
    }

    /// Mean of the diagonal of `p(L)`, by applying the filter to unit vectors
    /// in blocks. Costs `n` filter applications.
    pub fn mean_diagonal(&self, l: &CsrMatrix) -> Result<f64> {
        let n = l.dim();
        if n == 0 {
            return Ok(0.0);
        }
        const BLOCK: usize = 64;
        let mut trace = 0.0;
        for start in (0..n).step_by(BLOCK) {
            let width = BLOCK.min(n - start);
            let mut e = Array2::zeros((n, width));
            for c in 0..width {
                e[[start + c, c]] = 1.0;
            }
            let out = chebyshev_apply_block(l, self, e.view())?;
            trace += (0..width).map(|c| out[[start + c, c]]).sum::<f64>();
        }
        Ok(trace / n as f64)
    }
}

/// Coefficients of `φ` for `spec` on `[0, lambda_max_bound]`.
pub fn chebyshev_fit(spec: &KernelSpec, degree: usize, lambda_max_bound: f64) -> Result<ChebKernel> {
    spec.validate()?;
    let mut k = ChebKernel::from_fn(|l| spec.spectral_value(l), degree, lambda_max_bound)?;
    k.target = ChebTarget::Kernel(*spec);
    Ok(k)
}

/// Coefficients of `sqrt(φ)`: applied to white noise this yields samples with
/// covariance `φ(L)` up to the interpolation error.
pub fn chebyshev_fit_sqrt(spec: &KernelSpec, degree: usize, lambda_max_bound: f64) -> Result<ChebKernel> {
    spec.validate()?;
    let mut k = ChebKernel::from_fn(|l| spec.spectral_value(l).max(0.0).sqrt(), degree, lambda_max_bound)?;
    k.target = ChebTarget::SqrtKernel(*spec);
    Ok(k)
}

/// `p(L) v`.
pub fn chebyshev_apply(l: &CsrMatrix, k: &ChebKernel, v: &[f64]) -> Result<Vec<f64>> {
    let n = l.dim();
    if v.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "vector of length {} for a {n}x{n} operator",
            v.len()
        )));
    }
    let scale = 2.0 / k.lambda_max_bound;
    // L̃ x = (2/b) L x - x
    let rescaled = |x: &[f64], out: &mut [f64]| {
        l.matvec_into(x, out);
        for (o, xi) in out.iter_mut().zip(x) {
            *o = scale * *o - xi;
        }
    };
    let c = &k.coefficients;
    let mut t_prev = v.to_vec();
    let mut t_cur = vec![0.0; n];
    rescaled(&t_prev, &mut t_cur);
    let mut y: Vec<f64> = t_prev
        .iter()
        .zip(&t_cur)
        .map(|(a, b)| c[0] * a + c[1] * b)
        .collect();
    let mut t_next = vec![0.0; n];
    for &ck in &c[2..] {
        rescaled(&t_cur, &mut t_next);
        for i in 0..n {
            t_next[i] = 2.0 * t_next[i] - t_prev[i];
            y[i] += ck * t_next[i];
        }
        std::mem::swap(&mut t_prev, &mut t_cur);
        std::mem::swap(&mut t_cur, &mut t_next);
    }
    Ok(y)
}

/// `p(L) V` for a block of column vectors.
pub fn chebyshev_apply_block(l: &CsrMatrix, k: &ChebKernel, v: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let n = l.dim();
    if v.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "block with {} rows for a {n}x{n} operator",
            v.nrows()
        )));
    }
    let scale = 2.0 / k.lambda_max_bound;
    let rescaled = |x: &Array2<f64>| -> Array2<f64> {
        let mut out = l.matmul_dense(x.view());
        out.zip_mut_with(x, |o, &xi| *o = scale * *o - xi);
        out
    };
    let c = &k.coefficients;
    let mut t_prev = v.to_owned();
    let mut t_cur = rescaled(&t_prev);
    let mut y = &t_prev * c[0] + &t_cur * c[1];
    for &ck in &c[2..] {
        let mut t_next = rescaled(&t_cur);
        t_next.zip_mut_with(&t_prev, |a, &b| *a = 2.0 * *a - b);
        y.scaled_add(ck, &t_next);
        t_prev = std::mem::replace(&mut t_cur, t_next);
    }
    Ok(y)
}

/// `ρ^{-m}` with `ρ = 16ν/(κ² d_max) + 1`: the asymptotic decay rate of the
/// Matérn Chebyshev approximation error, up to a constant.
pub fn cheb_error_bound(nu: f64, kappa: f64, d_max: f64, m: usize) -> f64 {
    bound_rate(nu, kappa, d_max).powi(-(m as i32))
}

/// `ρ = 16ν/(κ² d_max) + 1`.
pub fn bound_rate(nu: f64, kappa: f64, d_max: f64) -> f64 {
    16.0 * nu / (kappa * kappa * d_max) + 1.0
}
