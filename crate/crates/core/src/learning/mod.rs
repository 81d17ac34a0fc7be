//! Learning the score from clean samples by denoising: the logistic and
//! least-squares objectives, full-batch gradient descent with fresh noise,
//! and the file formats for datasets and checkpoints.

mod data;
mod model;
mod train;

pub use data::{read_dataset, write_dataset};
pub use model::{learned_score, Architecture, DenoiserModel};
pub use train::{
    least_squares_loss, logistic_loss, loss_and_gradient, loss_gradient, smoothness_bound, train,
    Batch, Objective, TrainConfig, TrainOutcome, TrainingData,
};
