//! Dense eigendecomposition of graph Laplacians.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::graph::{Graph, LaplacianKind};
use crate::linalg::{jacobi_eigh, CsrMatrix};

/// Largest graph handled by the dense path.
pub const DEFAULT_DENSE_CAP: usize = 2000;

const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Ascending eigenvalues and orthonormal eigenvectors (as columns) of a
/// Laplacian.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Array2<f64>,
    pub laplacian_kind: LaplacianKind,
}

impl SpectralBasis {
    pub fn from_graph(g: &Graph, kind: LaplacianKind) -> Result<Self> {
        eigendecompose(&g.laplacian(kind), kind)
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `U diag(f(λ)) Uᵀ`, symmetrized.
    pub fn spectral_matrix(&self, f: impl Fn(f64) -> f64) -> Array2<f64> {
        let weights: Array1<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        let scaled = &self.eigenvectors * &weights;
        let m = scaled.dot(&self.eigenvectors.t());
        (&m + &m.t()) * 0.5
    }

    /// `U diag(g(λ))`; columns are the weighted modes of a Karhunen-Loève sum.
    pub fn weighted_modes(&self, g: impl Fn(f64) -> f64) -> Array2<f64> {
        let weights: Array1<f64> = self.eigenvalues.iter().map(|&l| g(l)).collect();
        &self.eigenvectors * &weights
    }
}

pub fn eigendecompose(l: &CsrMatrix, kind: LaplacianKind) -> Result<SpectralBasis> {
    eigendecompose_with_cap(l, kind, DEFAULT_DENSE_CAP)
}

/// Cyclic-Jacobi eigendecomposition. Tiny negative eigenvalues from roundoff
/// are clamped to zero.
pub fn eigendecompose_with_cap(l: &CsrMatrix, kind: LaplacianKind, cap: usize) -> Result<SpectralBasis> {
    let n = l.dim();
    if n > cap {
        return Err(Error::TooLargeForDense { num_nodes: n, cap });
    }
    let eig = jacobi_eigh(l.to_dense().view(), JACOBI_TOL, JACOBI_MAX_SWEEPS)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.values[a].total_cmp(&eig.values[b]));
    let eigenvalues = order.iter().map(|&k| eig.values[k].max(0.0)).collect();
    let mut eigenvectors = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.column_mut(dst).assign(&eig.vectors.column(src));
    }
    Ok(SpectralBasis {
        eigenvalues,
        eigenvectors,
        laplacian_kind: kind,
    })
}
