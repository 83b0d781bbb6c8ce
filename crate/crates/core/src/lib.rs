//! Active community detection in large directed graphs.
//!
//! The pipeline has three stages:
//!
//! 1. rank vertices by their locality statistic (the number of edges inside
//!    the closed `k`-th order neighborhood) and keep the top `Q`, using a
//!    bound-based trimming search so that the exact statistic is computed on
//!    as few vertices as possible ([`trimming`]);
//! 2. build a Jaccard similarity matrix over the selected vertices
//!    ([`similarity`]);
//! 3. cluster them with normalized spectral clustering on an RBF kernel,
//!    choosing the cluster count from the eigengap ([`spectral`]).
//!
//! [`generators`] and [`eval`] provide the stochastic block model benchmark
//! and its ROC/AUC and ARI evaluation harness.
//!
//! Dense numeric code is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix it to `f64`, which is what the pipeline and CLI use.

pub mod error;
pub mod eval;
pub mod generators;
pub mod graph;
pub mod linalg;
pub mod locality;
pub mod pipeline;
pub mod scalar;
pub mod seed;
pub mod similarity;
pub mod spectral;
pub mod trimming;

pub use error::{Error, Result};
pub use graph::{Graph, LoadReport, VertexId};
pub use linalg::SymmetricMatrix;
pub use locality::LocalityScore;
pub use scalar::Scalar;
pub use similarity::{Jaccard, SimilarityMatrix};
pub use spectral::{ClusterAssignment, SpectralDiagnostics};
pub use trimming::{TopQResult, TrimOptions};

/// Dense symmetric matrix over `f64`.
pub type Matrix64 = SymmetricMatrix<f64>;
/// Dense symmetric matrix over `f32`.
pub type Matrix32 = SymmetricMatrix<f32>;
/// Jaccard similarity matrix over `f64`.
pub type Similarity64 = SimilarityMatrix<f64>;
/// Jaccard similarity matrix over `f32`.
pub type Similarity32 = SimilarityMatrix<f32>;
/// Spectral diagnostics over `f64`.
pub type Diagnostics64 = SpectralDiagnostics<f64>;
