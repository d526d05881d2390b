//! Synthetic tasks, maximum-likelihood training and gradient verification.

mod backprop;
mod data;
mod gradcheck;
mod tasks;
mod train;

pub use backprop::{clip_gradients, nll_loss, sequence_gradient, GradientBuffer};
pub use data::{format_pairs, parse_pairs, read_pairs, write_pairs, SequencePair};
pub use gradcheck::{compare_gradients, grad_check, GradCheckReport};
pub use tasks::{gen_splits, gen_task, lexicon, task_vocabs, TaskKind, TaskSpec};
pub use train::{
    loss_trace_csv, train, write_loss_trace, EpochStats, Optimizer, TrainConfig, TrainOutcome,
};
