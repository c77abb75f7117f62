//! Multilingual encoder–decoder toolkit with language-specific encoder
//! layers, a differentiable shared/source/target layer search, parameter
//! accounting, synthetic corpora and chrF evaluation.
//!
//! Numerics are generic over [`Scalar`]; the aliases below fix the common
//! precisions.

pub mod arch;
pub mod data;
pub mod eval;
mod error;
pub mod kv;
pub mod layers;
pub mod lsl;
mod scalar;
pub mod tensors;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Tensor64 = tensors::Tensor<f64>;
pub type Tensor32 = tensors::Tensor<f32>;
pub type ParamStore64 = tensors::ParamStore<f64>;
pub type ParamStore32 = tensors::ParamStore<f32>;
pub type Model64 = arch::Model<f64>;
pub type Model32 = arch::Model<f32>;
