//! Blog recommendation toolkit for follow graphs with app-usage side data.
//!
//! The crate is organized around four stages:
//!
//! * [`corpus`]: TSV ingestion into dense-indexed sparse matrices, plus
//!   descriptive statistics (degree histograms, app/blog similarity heatmaps).
//! * [`knn`]: item-based neighborhood models over blog and app columns, with
//!   an app/blog blend whose weight is learned on a holdout split.
//! * [`fm`]: second-order factorization machines trained by SGD on one-hot
//!   user/blog (and optionally app) encodings of the follow graph.
//! * [`eval`]: per-user train/test splitting with sampled candidates, ranking
//!   metrics bucketed by user activity, baselines, and a synthetic corpus
//!   generator with planted topic structure.
//!
//! Numeric kernels are generic over the scalar type through [`Real`], so
//! every model runs in either `f32` or `f64`. The aliases below pin the two
//! supported instantiations; the command-line front end uses the `f64` ones.

pub mod corpus;
pub mod eval;
pub mod fm;
pub mod knn;

mod sample;
mod scalar;

pub use scalar::Real;

/// Blog/blog or app/blog similarity matrix in single precision.
pub type SimMatrixF32 = knn::SimMatrix<f32>;
/// Blog/blog or app/blog similarity matrix in double precision.
pub type SimMatrixF64 = knn::SimMatrix<f64>;
/// Factorization machine with single-precision parameters.
pub type FmModelF32 = fm::FmModel<f32>;
/// Factorization machine with double-precision parameters.
pub type FmModelF64 = fm::FmModel<f64>;
