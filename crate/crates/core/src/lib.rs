//! Attentional matching of free-text diagnosis descriptions to ICD codes.

pub mod analysis;
pub mod corpus;
pub mod encoders;
pub mod error;
pub mod evaluation;
mod fsutil;
pub mod matcher;
pub mod model;
pub mod numerics;
pub mod training;

pub use error::{Error, Result};
pub use numerics::{Dd, Scalar};

/// The working-precision model.
pub type Model = model::AttentionModel<f64>;
/// Single-precision model for inference experiments.
pub type Model32 = model::AttentionModel<f32>;
pub type Vector = numerics::DenseVector<f64>;
pub type Matrix = numerics::DenseMatrix<f64>;
