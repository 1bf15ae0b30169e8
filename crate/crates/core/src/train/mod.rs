//! Loss, optimizer, scheduler, the truncated-BPTT training loop, model
//! selection, checkpoints and gradient diagnostics.

mod checkpoint;
mod data;
mod diag;
mod fit;
mod loss;
mod optim;
mod sched;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CheckpointHeader, CKPT_MAGIC, CKPT_VERSION};
pub use data::Sequence;
pub use diag::{layerwise_grad_norms, BlockNorm};
pub use fit::{
    batch_gradient, epoch_log_lines, fit, selection_split, write_epoch_log, EpochRecord, FitOutcome, TrainRunConfig,
};
pub use loss::{frobenius_loss, frobenius_sq};
pub use optim::AdamW;
pub use sched::Plateau;

#[cfg(test)]
mod tests;
