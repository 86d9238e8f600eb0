//! Trainable token classifiers.

mod crf;
mod io;
mod logreg;
mod optim;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use crf::{
    crf_forward_backward, crf_log_partition, crf_loglik_grad, crf_train, crf_viterbi, CrfModel, ForwardBackward,
};
pub use io::{load_model, model_from_text, model_to_text, save_model, Model, ModelBundle, ModelKind, FORMAT_VERSION};
pub use logreg::{logreg_loss_grad, logreg_predict, logreg_train, LogRegModel};
pub use optim::Adagrad;

use crate::corpus::Label;
use crate::features::FeatureVector;

pub const NUM_LABELS: usize = Label::COUNT;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("no training data")]
    EmptyData,
    #[error("empty sequence")]
    EmptySequence,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("unsupported model file version {0:?}")]
    UnsupportedVersion(String),
    #[error("corrupt model file: {0}")]
    CorruptFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 5, batch_size: 8, learning_rate: 0.1, l2: 1e-4, seed: 0, shuffle: true }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.epochs < 1 {
            return Err(ModelError::InvalidConfig("epochs must be >= 1".into()));
        }
        if self.batch_size < 1 {
            return Err(ModelError::InvalidConfig("batch_size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ModelError::InvalidConfig("learning_rate must be > 0".into()));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(ModelError::InvalidConfig("l2 must be >= 0".into()));
        }
        Ok(())
    }
}

/// Per-epoch mean training objective (log-likelihood for the CRF, negative
/// cross-entropy for logistic regression), data term only.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub epoch_objective: Vec<f64>,
}

pub(crate) fn check_vector(v: &FeatureVector, num_features: usize) -> Result<(), ModelError> {
    match v.max_id() {
        Some(id) if id as usize >= num_features => Err(ModelError::DimensionMismatch(format!(
            "feature id {id} outside index of size {num_features}"
        ))),
        _ => Ok(()),
    }
}

/// Mini-batches of example indices for every epoch, shuffled by a generator
/// seeded from `config.seed` only.
pub(crate) fn epoch_batches(n: usize, config: &TrainConfig) -> Vec<Vec<Vec<usize>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    (0..config.epochs)
        .map(|_| {
            if config.shuffle {
                order.shuffle(&mut rng);
            }
            order.chunks(config.batch_size).map(<[usize]>::to_vec).collect()
        })
        .collect()
}
