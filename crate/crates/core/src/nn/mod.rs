//! Dense numerics and the autoencoder that produces hidden representations.

mod adam;
mod autoencoder;
mod gradcheck;
mod io;
mod matrix;
mod rng;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use autoencoder::{mse_loss, Autoencoder, Embedding, Gradients, HIDDEN_DIM, INPUT_DIM};
pub use gradcheck::{gradient_check, gradient_check_with, GradCheckConfig, GradCheckReport};
pub use io::{MODEL_MAGIC, MODEL_VERSION};
pub use matrix::Matrix;
pub use rng::Rng;
pub use train::{train, TrainConfig, TrainOutcome};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("{what}: expected length {expected}, got {actual}")]
    InputShape {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("training data is empty")]
    EmptyDataset,
    #[error("training diverged at epoch {epoch} (non-finite loss)")]
    Divergence { epoch: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("input value {value} at index {index} outside [0, 1]")]
    InputRange { index: usize, value: f64 },
    #[error("encoder produced an all-zero embedding for a nonzero input")]
    DeadEmbedding,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<(), NnError> {
    if expected == actual {
        Ok(())
    } else {
        Err(NnError::InputShape {
            what,
            expected,
            actual,
        })
    }
}
