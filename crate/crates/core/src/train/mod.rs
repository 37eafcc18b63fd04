//! Joint loss, Adam, step decay and the epoch loop.

mod adam;
mod loss;
mod schedule;
mod trainer;

pub use adam::{Adam, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use loss::{cross_entropy, joint_loss, log_softmax, softmax, JointLoss, JointLossValue};
pub use schedule::lr_schedule;
pub use trainer::{
    argmax, batch_tensor, evaluate, predict, train, EpochRecord, EvalSummary, LearningCurve,
    TrainConfig, TrainReport, CURVE_HEADER,
};
