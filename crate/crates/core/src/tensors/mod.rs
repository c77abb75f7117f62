//! Minimal reverse-mode automatic differentiation over dense arrays.

mod tape;
mod tensor;

pub use tape::{Gradients, Tape, Var};
pub use tensor::{Param, ParamId, ParamStore, Tensor};
