//! Architecture notation, model construction, parameter accounting,
//! argmax selection and dense pre-training initialisation.

mod count;
mod model;
mod pretrain;
mod select;
mod spec;

pub use count::{count_params, count_params_symbolic, ParamBreakdown, ParamReport};
pub use model::{DecoderStack, EncoderBlock, Encoded, Model};
pub use pretrain::dense_pretrain_init;
pub use select::{argmax_kind, average_weights, select_architecture, MixingRunResult};
pub use spec::{ArchitectureSpec, DecoderMode, LayerKind, ModelConfig};
