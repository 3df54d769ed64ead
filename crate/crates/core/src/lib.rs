//! Spatially correlated stochastic diffusion on graphs.
//!
//! Graph Matérn kernels, Φ-Wiener noise processes, a randomly forced graph
//! neural ODE trained with a distributional loss, and the evaluation tools
//! around it: label informativeness, OOD shift generators, detection metrics
//! and covariance-driven rewiring.

pub mod bench;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod graph;
pub mod kernels;
pub mod linalg;
pub mod model;
pub mod noise;
pub mod rewire;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};
pub use graph::{build_graph, Graph, LaplacianKind};
pub use kernels::{ChebKernel, CovMatrix, KernelFamily, KernelSpec};
pub use spectral::SpectralBasis;
