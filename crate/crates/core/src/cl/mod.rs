//! Continual-learning strategies and checkpoint persistence.

mod average;
mod checkpoint;
mod fisher;
mod objective;
mod strategies;

pub use average::{new_model_coefficient, weight_average};
pub use checkpoint::{
    load_checkpoint, read_checkpoint_file, save_checkpoint, write_checkpoint_file, Checkpoint, HistoryEntry,
    EXTENSION, FORMAT_VERSION, MAGIC,
};
pub(crate) use checkpoint::write_atomic;
pub use fisher::fisher_diag;
pub use objective::{ObjectiveKind, TrainingObjective};
pub use strategies::{
    ewc_run, finetune_run, mtl_run, replay_run, weaver_run, EwcOptions, GradientTrainer, ReplayBuffer,
    ReplayOptions, Trainer, WeaverOptions,
};
