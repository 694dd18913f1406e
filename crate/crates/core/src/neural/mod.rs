//! Self-contained numerical engine: dense tensors, GRU cells, maxout,
//! softmax cross-entropy with hand-written backward passes, Adadelta, beam
//! search and a recurrent language model.
//!
//! Everything is `f64`. Randomness comes from a ChaCha8 stream seeded with
//! [`seeded`], so a seed fixes initialization, shuffling and noise on every
//! platform.

pub mod adadelta;
pub mod beam;
pub mod gradcheck;
pub mod gru;
pub mod layers;
pub mod lm;
pub mod model;
pub mod seq2seq;
pub mod tensor;
pub mod train;

use rand::SeedableRng;

pub use adadelta::{AdadeltaConfig, AdadeltaState};
pub use beam::{beam_search, greedy_decode, BeamConfig, BeamHypothesis, Decoded, StepModel};
pub use gradcheck::{grad_check, GradCheckReport};
pub use gru::GruParams;
pub use layers::{log_softmax, maxout, softmax, Affine, Maxout};
pub use lm::{lm_perplexity, train_lm, LanguageModel, LmParams, SentenceScorer};
pub use model::{LossStat, Objective, Parameters};
pub use seq2seq::{Condition, ConditioningKind, Seq2SeqDims, Seq2SeqExample, Seq2SeqParams};
pub use tensor::Tensor;
pub use train::{fit, EpochRecord, TrainConfig, TrainingLog};

/// The engine's random stream.
pub type Rng = rand_chacha::ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Model sizes and training settings shared by the generators, the
/// language model and the classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuralConfig {
    pub embedding_dim: usize,
    pub hidden_dim: usize,
    pub maxout_pieces: usize,
    /// Parameters start from `uniform(-init_scale, init_scale)`.
    pub init_scale: f64,
    pub vocab_min_count: usize,
    pub beam: usize,
    pub train: TrainConfig,
}

impl Default for NeuralConfig {
    fn default() -> Self {
        NeuralConfig {
            embedding_dim: 128,
            hidden_dim: 512,
            maxout_pieces: 2,
            init_scale: 0.1,
            vocab_min_count: 5,
            beam: 10,
            train: TrainConfig::default(),
        }
    }
}

/// Decode budget for a content sequence of `content_len` tokens.
pub fn max_decode_len(content_len: usize) -> usize {
    2 * content_len + 8
}
