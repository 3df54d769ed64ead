//! Covariance kernels defined through the spectrum of a graph Laplacian.
//!
//! A kernel is a scalar function φ applied to the Laplacian eigenvalues,
//! `K = U φ(Λ) Uᵀ`. Three families are supported:
//!
//! * Matérn: `φ(λ) = (2ν/κ² + λ)^{-ν}`
//! * RBF (heat kernel): `φ(λ) = exp(-κ² λ / 2)`
//! * Laplacian: `φ(λ) = λ`, i.e. `K` is the Laplacian itself. This is the
//!   spatial covariance of the spectral Q-Wiener process.
//!
//! Small graphs go through [`spectral_kernel`] (dense, exact); large graphs
//! use the Chebyshev filters in [`chebyshev`].

pub mod chebyshev;

pub use chebyshev::{
    bound_rate, cheb_error_bound, chebyshev_apply, chebyshev_apply_block, chebyshev_fit, chebyshev_fit_sqrt,
    lambda_max_bound, ChebKernel, LambdaBound,
};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_lower, jacobi_eigh};
use crate::spectral::SpectralBasis;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    Matern,
    Rbf,
    Laplacian,
}

impl std::str::FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "matern" => Ok(Self::Matern),
            "rbf" => Ok(Self::Rbf),
            "laplacian" | "identity" => Ok(Self::Laplacian),
            other => Err(Error::InvalidParameter(format!("unknown kernel family `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    /// Smoothness; only read by the Matérn family.
    pub nu: f64,
    /// Length-scale.
    pub kappa: f64,
    /// Rescale the exact kernel to unit mean diagonal.
    #[serde(default)]
    pub normalize: bool,
}

impl KernelSpec {
    pub fn matern(nu: f64, kappa: f64) -> Self {
        Self {
            family: KernelFamily::Matern,
            nu,
            kappa,
            normalize: false,
        }
    }

    pub fn rbf(kappa: f64) -> Self {
        Self {
            family: KernelFamily::Rbf,
            nu: f64::INFINITY,
            kappa,
            normalize: false,
        }
    }

    pub fn laplacian() -> Self {
        Self {
            family: KernelFamily::Laplacian,
            nu: 1.0,
            kappa: 1.0,
            normalize: false,
        }
    }

    pub fn normalized(mut self) -> Self {
        self.normalize = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.family {
            KernelFamily::Matern if !(self.nu > 0.0 && self.kappa > 0.0) => Err(Error::InvalidParameter(
                format!("Matérn kernel needs nu > 0 and kappa > 0 (got {}, {})", self.nu, self.kappa),
            )),
            KernelFamily::Rbf if !(self.kappa >= 0.0) => Err(Error::InvalidParameter(format!(
                "RBF kernel needs kappa >= 0 (got {})",
                self.kappa
            ))),
            _ => Ok(()),
        }
    }

    /// φ(λ). Negative inputs are clamped to 0.
    pub fn spectral_value(&self, lambda: f64) -> f64 {
        let lambda = lambda.max(0.0);
        match self.family {
            KernelFamily::Matern => {
                (2.0 * self.nu / (self.kappa * self.kappa) + lambda).powf(-self.nu)
            }
            KernelFamily::Rbf => (-0.5 * self.kappa * self.kappa * lambda).exp(),
            KernelFamily::Laplacian => lambda,
        }
    }
}

/// Dense symmetric positive semidefinite covariance with an optional lower
/// Cholesky factor.
#[derive(Debug, Clone)]
pub struct CovMatrix {
    pub matrix: Array2<f64>,
    pub cholesky: Option<Array2<f64>>,
}

impl CovMatrix {
    pub fn new(matrix: Array2<f64>) -> Self {
        Self {
            matrix,
            cholesky: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Compute and cache the Cholesky factor with the default jitter ladder.
    pub fn factorize(&mut self) -> Result<&Array2<f64>> {
        if self.cholesky.is_none() {
            self.cholesky = Some(cholesky(&self.matrix, 0.0)?.factor);
        }
        Ok(self.cholesky.as_ref().expect("just set"))
    }

    pub fn mean_diagonal(&self) -> f64 {
        let n = self.dim();
        if n == 0 {
            return 0.0;
        }
        self.matrix.diag().sum() / n as f64
    }

    /// Smallest eigenvalue, for PSD checks in tests and diagnostics.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let eig = jacobi_eigh(self.matrix.view(), 1e-12, 100)?;
        Ok(eig.values.into_iter().fold(f64::INFINITY, f64::min))
    }
}

/// Exact spectral kernel `U φ(Λ) Uᵀ`.
pub fn spectral_kernel(basis: &SpectralBasis, spec: &KernelSpec) -> Result<CovMatrix> {
    spec.validate()?;
    let mut k = basis.spectral_matrix(|l| spec.spectral_value(l));
    if spec.normalize {
        let n = k.nrows() as f64;
        let mean_diag = k.diag().sum() / n;
        if mean_diag > 0.0 {
            k /= mean_diag;
        }
    }
    Ok(CovMatrix::new(k))
}

/// `K = U (2ν/κ² + Λ)^{-ν} Uᵀ`.
pub fn matern_kernel_exact(basis: &SpectralBasis, nu: f64, kappa: f64, normalize: bool) -> Result<CovMatrix> {
    let mut spec = KernelSpec::matern(nu, kappa);
    spec.normalize = normalize;
    spectral_kernel(basis, &spec)
}

/// `K = U exp(-κ²Λ/2) Uᵀ`.
pub fn rbf_kernel_exact(basis: &SpectralBasis, kappa: f64, normalize: bool) -> Result<CovMatrix> {
    let mut spec = KernelSpec::rbf(kappa);
    spec.normalize = normalize;
    spectral_kernel(basis, &spec)
}

pub struct CholeskyFactor {
    pub factor: Array2<f64>,
    pub jitter: f64,
}

const MAX_JITTER: f64 = 1e-6;

/// Lower Cholesky factor of `k + jitter·I`.
///
/// Tries `initial_jitter` first, then escalates through 1e-12, 1e-11, ...,
/// 1e-6 until the factorization succeeds.
pub fn cholesky(k: &Array2<f64>, initial_jitter: f64) -> Result<CholeskyFactor> {
    if k.nrows() != k.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "Cholesky needs a square matrix, got {}x{}",
            k.nrows(),
            k.ncols()
        )));
    }
    let mut ladder = vec![initial_jitter];
    let mut j = 1e-12;
    while j <= MAX_JITTER * (1.0 + 1e-9) {
        if j > initial_jitter {
            ladder.push(j);
        }
        j *= 10.0;
    }
    for jitter in ladder {
        if let Some(factor) = cholesky_lower(k.view(), jitter) {
            return Ok(CholeskyFactor { factor, jitter });
        }
    }
    Err(Error::NotPositiveDefinite {
        max_jitter: MAX_JITTER,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, sbm_generate, LaplacianKind};
    use crate::linalg::frobenius;
    use ndarray::array;

    fn p2() -> SpectralBasis {
        let g = build_graph(&[(0, 1)], 2).unwrap();
        SpectralBasis::from_graph(&g, LaplacianKind::Combinatorial).unwrap()
    }

    #[test]
    fn single_node_matern_is_one() {
        let g = build_graph(&[], 1).unwrap();
        let b = SpectralBasis::from_graph(&g, LaplacianKind::Combinatorial).unwrap();
        // ν = 1, κ² = 2  ⇒  (2/2 + 0)^{-1} = 1
        let k = matern_kernel_exact(&b, 1.0, 2f64.sqrt(), false).unwrap();
        assert!((k.matrix[[0, 0]] - 1.0).abs() < 1e-14);
        let k = rbf_kernel_exact(&b, 3.0, false).unwrap();
        assert_eq!(k.matrix, array![[1.0]]);
    }

    #[test]
    fn p2_matern_by_hand() {
        // Eigenpairs of P2: 0 ↦ (1,1)/√2, 2 ↦ (1,-1)/√2.
        // φ(0) = 1, φ(2) = 1/3  ⇒  K = ½[[1+1/3, 1-1/3], [1-1/3, 1+1/3]].
        let k = matern_kernel_exact(&p2(), 1.0, 2f64.sqrt(), false).unwrap();
        let expected = array![[2.0 / 3.0, 1.0 / 3.0], [1.0 / 3.0, 2.0 / 3.0]];
        assert!(frobenius((&k.matrix - &expected).view()) < 1e-14);
    }

    #[test]
    fn rbf_at_zero_length_scale_is_identity() {
        let g = sbm_generate(&[4, 4], 0.8, 0.3, 2).unwrap();
        let b = SpectralBasis::from_graph(&g, LaplacianKind::Combinatorial).unwrap();
        let k = rbf_kernel_exact(&b, 0.0, false).unwrap();
        assert!(frobenius((&k.matrix - &Array2::<f64>::eye(8)).view()) < 1e-12);
    }

    #[test]
    fn kernels_are_symmetric_psd() {
        let g = sbm_generate(&[8, 7], 0.5, 0.2, 5).unwrap();
        let b = SpectralBasis::from_graph(&g, LaplacianKind::Combinatorial).unwrap();
        for spec in [
            KernelSpec::matern(0.5, 1.0),
            KernelSpec::matern(2.5, 0.7),
            KernelSpec::rbf(1.3),
            KernelSpec::laplacian(),
        ] {
            let k = spectral_kernel(&b, &spec).unwrap();
            assert_eq!(k.matrix, k.matrix.t());
            let scale = frobenius(k.matrix.view());
            assert!(k.min_eigenvalue().unwrap() >= -1e-8 * scale, "{spec:?}");
        }
    }

    #[test]
    fn normalization_gives_unit_mean_diagonal() {
        let g = sbm_generate(&[5, 5], 0.6, 0.2, 1).unwrap();
        let b = SpectralBasis::from_graph(&g, LaplacianKind::Combinatorial).unwrap();
        let k = spectral_kernel(&b, &KernelSpec::matern(3.0, 1.0).normalized()).unwrap();
        assert!((k.mean_diagonal() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(KernelSpec::matern(0.0, 1.0).validate().is_err());
        assert!(KernelSpec::matern(1.0, -1.0).validate().is_err());
        assert!(KernelSpec::rbf(-0.1).validate().is_err());
        assert!(KernelSpec::rbf(0.0).validate().is_ok());
    }

    #[test]
    fn cholesky_identity() {
        let f = cholesky(&Array2::eye(4), 0.0).unwrap();
        assert_eq!(f.factor, Array2::<f64>::eye(4));
        assert_eq!(f.jitter, 0.0);
    }

    #[test]
    fn cholesky_reconstructs_p2_kernel() {
        let k = matern_kernel_exact(&p2(), 1.0, 2f64.sqrt(), false).unwrap();
        let f = cholesky(&k.matrix, 0.0).unwrap();
        let recon = f.factor.dot(&f.factor.t());
        assert!(frobenius((&recon - &k.matrix).view()) < 1e-10);
    }

    #[test]
    fn cholesky_rejects_negative_eigenvalue() {
        let k = array![[2.0, 0.0], [0.0, -1.0]];
        assert!(matches!(cholesky(&k, 0.0), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn cholesky_escalates_jitter_on_singular_input() {
        let g = build_graph(&[(0, 1), (1, 2)], 3).unwrap();
        let l = g.laplacian(LaplacianKind::Combinatorial).to_dense();
        let f = cholesky(&l, 0.0).unwrap();
        assert!(f.jitter > 0.0 && f.jitter <= 1e-6);
        let recon = f.factor.dot(&f.factor.t());
        assert!(frobenius((&recon - &l).view()) < 1e-5);
    }
}
