//! Learned rewards `R(document, summary)`.
//!
//! Two architectures are provided: an MLP over the concatenated document
//! and summary embeddings ([`mlp`]) and a similarity/redundancy reward over
//! sentence embeddings with a trainable square projection ([`simred`]).
//! Both are fitted with minibatch Adam on either the mean squared error
//! against human ratings or the pairwise-preference cross-entropy
//! ([`train`]).

pub mod adam;
pub mod loss;
pub mod mlp;
pub mod simred;
pub mod train;

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CorpusError;
use crate::embeddings::{EmbeddingError, PMeansConfig, TextEncoder};

pub use loss::{ce_loss, mse_loss, preference_probability, SummaryKey};
pub use mlp::{mlp_forward, MlpParams};
pub use simred::{simred_reward, SimRedConfig, SimRedModel};
pub use train::{train_reward_model, train_simred_model, EpochLog, LossKind, TrainConfig, TrainingReport};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RewardError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("inputs have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("non-finite value")]
    NonFinite,
    #[error("no score for summary {index} of article {article_id}")]
    MissingScore { article_id: String, index: usize },
    #[error("alpha must lie in [0, 1], got {0}")]
    BadAlpha(f64),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("training split is empty")]
    EmptyTrainingSet,
    #[error("no preference pairs in the training split (all ratings tied)")]
    NoPreferencePairs,
    #[error("encoder produces {found}-dimensional vectors but the model expects {expected}")]
    EncoderMismatch { expected: usize, found: usize },
    #[error("model parameters are malformed or non-finite")]
    InvalidParams,
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// A scalar model trainable by backpropagation.
pub trait Differentiable: Clone {
    type Input;

    fn forward(&self, x: &Self::Input) -> f64;

    /// Adds `dout · ∂forward/∂θ` into `grad`.
    fn backward(&self, x: &Self::Input, dout: f64, grad: &mut Self);

    /// Same shape, all parameters zero.
    fn zeroed(&self) -> Self;

    fn tensors(&self) -> Vec<&[f64]>;

    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;
}

/// Identifies the text encoder a model was trained with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EncoderSpec {
    /// Power means over a word-vector file.
    Pmeans {
        p_values: PMeansConfig,
        word_dim: usize,
        vectors_sha256: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        vectors_path: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        vocab_limit: Option<usize>,
    },
    /// Vectors read from a precomputed-embedding file.
    External {
        dim: usize,
        embeddings_sha256: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        embeddings_path: Option<String>,
    },
}

impl EncoderSpec {
    /// Length of one text embedding.
    pub fn dim(&self) -> usize {
        match self {
            EncoderSpec::Pmeans { p_values, word_dim, .. } => p_values.output_dim(*word_dim),
            EncoderSpec::External { dim, .. } => *dim,
        }
    }

    /// True when both describe the same encoder; file paths are ignored.
    pub fn same_encoder(&self, other: &EncoderSpec) -> bool {
        match (self, other) {
            (
                EncoderSpec::Pmeans { p_values: a, word_dim: da, vectors_sha256: ha, vocab_limit: la, .. },
                EncoderSpec::Pmeans { p_values: b, word_dim: db, vectors_sha256: hb, vocab_limit: lb, .. },
            ) => a == b && da == db && ha == hb && la == lb,
            (
                EncoderSpec::External { dim: da, embeddings_sha256: ha, .. },
                EncoderSpec::External { dim: db, embeddings_sha256: hb, .. },
            ) => da == db && ha == hb,
            _ => false,
        }
    }
}

/// Min-max range of a model's scores on its training summaries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub min: f64,
    pub max: f64,
}

impl Normalization {
    pub fn from_scores(scores: &[f64]) -> Option<Self> {
        let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (min.is_finite() && max.is_finite()).then_some(Self { min, max })
    }

    /// Maps the training range onto `[-1, 1]`; a degenerate range maps to 0.
    pub fn apply(&self, score: f64) -> f64 {
        let span = self.max - self.min;
        if span > 0.0 {
            2.0 * (score - self.min) / span - 1.0
        } else {
            0.0
        }
    }
}

/// A trained MLP reward bound to the encoder it was trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardModel {
    pub params: MlpParams,
    pub encoder_spec: EncoderSpec,
    pub normalization: Option<Normalization>,
}

impl RewardModel {
    pub fn new(params: MlpParams, encoder_spec: EncoderSpec) -> Result<Self, RewardError> {
        if !params.is_valid() {
            return Err(RewardError::InvalidParams);
        }
        let expected = 2 * encoder_spec.dim();
        if params.input_dim() != expected {
            return Err(RewardError::EncoderMismatch { expected: params.input_dim(), found: expected });
        }
        Ok(Self { params, encoder_spec, normalization: None })
    }

    pub fn embedding_dim(&self) -> usize {
        self.params.input_dim() / 2
    }

    pub fn score_embeddings(&self, doc_emb: &[f64], sum_emb: &[f64]) -> Result<f64, RewardError> {
        mlp_forward(doc_emb, sum_emb, &self.params)
    }

    fn check_encoder(&self, encoder: &dyn TextEncoder) -> Result<(), RewardError> {
        if encoder.dim() != self.embedding_dim() {
            return Err(RewardError::EncoderMismatch { expected: self.embedding_dim(), found: encoder.dim() });
        }
        Ok(())
    }

    /// Encodes both texts and runs the network.
    pub fn score(&self, encoder: &dyn TextEncoder, article_text: &str, summary_text: &str) -> Result<f64, RewardError> {
        self.check_encoder(encoder)?;
        let doc = encoder.encode_document("", article_text)?;
        let sum = encoder.encode_summary("", 0, summary_text)?;
        self.score_embeddings(&doc, &sum)
    }

    /// Scores a dataset summary; encoders keyed by id use these ids.
    pub fn score_summary(&self, encoder: &dyn TextEncoder, article_id: &str, article_text: &str, index: usize, summary_text: &str) -> Result<f64, RewardError> {
        self.check_encoder(encoder)?;
        let doc = encoder.encode_document(article_id, article_text)?;
        let sum = encoder.encode_summary(article_id, index, summary_text)?;
        self.score_embeddings(&doc, &sum)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::{EmbeddingTable, PMeansEncoder};

    fn spec(word_dim: usize) -> EncoderSpec {
        EncoderSpec::Pmeans {
            p_values: PMeansConfig::default(),
            word_dim,
            vectors_sha256: String::from("abc"),
            vectors_path: None,
            vocab_limit: None,
        }
    }

    #[test]
    fn zero_model_scores_zero_and_is_pure() {
        let table = EmbeddingTable::from_text("cat 1 2\ndog -1 0.5\n", None).unwrap();
        let enc = PMeansEncoder::new(&table, PMeansConfig::default());
        let model = RewardModel::new(MlpParams::zeros(16, 3), spec(2)).unwrap();
        assert_eq!(model.score(&enc, "The cat. The dog.", "A cat.").unwrap(), 0.0);

        let mut rng = crate::rng_from_seed(1);
        let model = RewardModel::new(MlpParams::init(16, 3, &mut rng), spec(2)).unwrap();
        let a = model.score(&enc, "The cat. The dog.", "A dog.").unwrap();
        let b = model.score(&enc, "The cat. The dog.", "A dog.").unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn encoder_mismatch_rejected() {
        let table = EmbeddingTable::from_text("cat 1 2 3\n", None).unwrap();
        let enc = PMeansEncoder::new(&table, PMeansConfig::default());
        let model = RewardModel::new(MlpParams::zeros(16, 3), spec(2)).unwrap();
        assert_eq!(model.score(&enc, "cat.", "cat."), Err(RewardError::EncoderMismatch { expected: 8, found: 12 }));
        assert!(matches!(RewardModel::new(MlpParams::zeros(10, 3), spec(2)), Err(RewardError::EncoderMismatch { .. })));
    }

    #[test]
    fn spec_comparison_ignores_paths() {
        let mut a = spec(2);
        let b = spec(2);
        if let EncoderSpec::Pmeans { vectors_path, .. } = &mut a {
            *vectors_path = Some(String::from("/tmp/x"));
        }
        assert!(a.same_encoder(&b));
        assert!(!a.same_encoder(&spec(3)));
    }

    #[test]
    fn normalization_maps_range() {
        let n = Normalization::from_scores(&[2.0, 4.0, 3.0]).unwrap();
        assert_eq!((n.apply(2.0), n.apply(3.0), n.apply(4.0)), (-1.0, 0.0, 1.0));
        assert!(Normalization::from_scores(&[]).is_none());
    }
}
