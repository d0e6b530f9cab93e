//! Reference-free summary rewards learned from human ratings.
//!
//! The crate is `no_std` (it needs `alloc`) and holds every algorithm:
//!
//! - [`corpus`]: rated-summary datasets, cross-validation folds and
//!   preference pairs.
//! - [`text`]: sentence splitting, tokenization, Porter stemming, n-grams.
//! - [`embeddings`]: word-vector tables, power-mean sentence encodings and
//!   precomputed external embeddings.
//! - [`metrics`]: ROUGE-N/L/SU4, smoothed BLEU and cosine similarity.
//! - [`reward`]: the MLP reward head trained with a regression or a
//!   pairwise-preference loss, and the similarity/redundancy reward.
//! - [`eval`]: correlation with human ratings, good-summary precision and
//!   recall, cross-validated reports.
//! - [`rl`]: an input-specific TD(0) extractive summarizer driven by any
//!   reward over sentence selections.
//!
//! File formats, the CLI and everything else touching the OS live in the
//! companion `sumreward` crate.

#![no_std]

extern crate alloc;

pub mod corpus;
pub mod embeddings;
pub mod eval;
pub mod linalg;
pub mod metrics;
pub mod reward;
pub mod rl;
pub mod text;

pub use corpus::{Dataset, FoldSplit, PreferencePair, RatedArticle, RatedSummary};
pub use embeddings::{EmbeddingTable, PMeansConfig, PValue, TextEmbedding};
pub use eval::EvalReport;
pub use metrics::MetricScore;
pub use reward::{MlpParams, RewardModel, TrainConfig};

/// Seeded generator used everywhere randomness is needed.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Creates the crate's deterministic generator from a seed.
pub fn rng_from_seed(seed: u64) -> Rng {
    <Rng as rand::SeedableRng>::seed_from_u64(seed)
}
