//! Similarity analysis of neural network checkpoints.
//!
//! Two complementary views are provided:
//!
//! * representational similarity: layer-wise canonical correlation analysis
//!   over subsampled activation dumps ([`engine`], built on [`linalg`],
//!   [`store`] and [`sampling`]);
//! * behavioural similarity: agreement of per-example mistakes against an
//!   independence baseline, plus AUC ([`prediction`]).
//!
//! Results are aggregated across folds and serialized by [`report`].

pub mod engine;
pub mod linalg;
pub mod prediction;
pub mod report;
pub mod sampling;
pub mod scalar;
pub mod store;

pub use scalar::Real;

pub type Matrix64 = linalg::Matrix<f64>;
pub type Matrix32 = linalg::Matrix<f32>;
pub type CcaResult64 = linalg::CcaResult<f64>;
pub type ActivationTensor32 = store::ActivationTensor<f32>;
pub type ActivationTensor64 = store::ActivationTensor<f64>;
