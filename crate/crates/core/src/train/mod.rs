//! Adam, the warmup plus inverse square-root schedule, single-direction
//! batching, the standard and search training drivers, and checkpoints.

mod batch;
mod checkpoint;
mod config;
mod driver;
mod optim;

pub use batch::{Batch, TrainData};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint};
pub use config::{lr_at, TrainConfig};
pub use driver::{batch_loss, corpus_loss, train_loop, LogRecord, TrainMode, TrainOutcome};
pub use optim::{adam_step, OptimizerState};
