//! Dice + cross-entropy training with momentum SGD and an exponential
//! learning-rate schedule.

mod config;
mod fit;
mod loss;
mod optim;

pub use config::{lr_at, TrainConfig};
pub use fit::{fit, EpochRow, TrainReport, REPORT_COLUMNS};
pub use loss::{combined_loss, dice_loss, DICE_EPS};
pub use optim::{sgd_step, OptimizerState};
