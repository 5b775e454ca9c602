//! Gradients, Adam, the epoch loop, checkpoints and the gradient checker.

mod adam;
mod checkpoint;
mod gradcheck;
mod hyperparams;
mod objective;
mod trainer;

pub use adam::{adam_step, decay_learning_rate, OptimizerState, BETA1, BETA2, EPSILON};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint};
pub use gradcheck::{grad_check, relative_error, GradCheckReport, TermError};
pub use hyperparams::{parse_config_lines, DispMode, Hyperparams, SubviewMode, ViewKind, CONFIG_KEYS};
pub use objective::{compute_gradients, compute_gradients_for, compute_loss, GradientSet, StepDraws, Terms};
pub use trainer::{train, train_with_progress, HistoryRow, TrainOutcome, CHECKPOINT_FILE, HISTORY_FILE, HISTORY_HEADER};
