//! Preparing a document for the extractive agent and wiring up its reward.

use std::str::FromStr;
use std::path::PathBuf;

use sumreward_core::metrics::{rouge, RougeVariant};
use sumreward_core::reward::{simred_reward, SimRedConfig};
use sumreward_core::rl::{DraftReward, EncodedDocument};
use sumreward_core::text::{self, Preprocess, TokenizedText};

use crate::encoder::ActiveEncoder;
use crate::error::{Error, Result};
use crate::io::LoadedModel;

/// Width of the hashed bag-of-words sentence vectors used when no word
/// vectors are given.
pub const HASHED_DIM: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub enum RewardSpec {
    Learned(PathBuf),
    SimRed,
    Rouge(PathBuf),
}

impl FromStr for RewardSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.split_once(':') {
            Some(("learned", p)) if !p.is_empty() => Ok(RewardSpec::Learned(p.into())),
            Some(("rouge", p)) if !p.is_empty() => Ok(RewardSpec::Rouge(p.into())),
            None if s == "simred" => Ok(RewardSpec::SimRed),
            _ => Err(format!("unknown reward {s:?}; expected learned:<model-file>, simred or rouge:<reference-file>")),
        }
    }
}

/// Sentences of one document with everything the agent needs.
#[derive(Debug, Clone)]
pub struct PreparedDocument {
    pub sentences: Vec<String>,
    pub metric_tokens: Vec<Vec<String>>,
    /// Power-mean sentence vectors, when an encoder was given.
    pub pmeans: Option<Vec<Vec<f64>>>,
    pub encoded: EncodedDocument,
}

fn fnv1a(word: &str) -> u64 {
    word.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3))
}

/// Unit-length signed hashed counts of `tokens`.
pub fn hashed_vector(tokens: &[String], dim: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    for t in tokens {
        let h = fnv1a(t);
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        v[(h % dim as u64) as usize] += sign;
    }
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    v
}

/// Splits and encodes a document. Sentences without any word are dropped.
pub fn prepare(text_in: &str, encoder: Option<&ActiveEncoder<'_>>) -> Result<PreparedDocument> {
    let pmeans = match encoder {
        None => None,
        Some(ActiveEncoder::Pmeans(e)) => Some(e),
        Some(ActiveEncoder::External(_)) => {
            return Err(Error::Usage("summarize needs word vectors (--vectors); precomputed embeddings have no per-sentence entries".into()))
        }
    };
    let mut sentences = Vec::new();
    let mut counts = Vec::new();
    let mut metric_tokens = Vec::new();
    for s in text::split_sentences(text_in) {
        let n = text::tokenize_and_preprocess(&s, Preprocess::NONE).len();
        if n == 0 {
            continue;
        }
        counts.push(n);
        metric_tokens.push(text::tokenize_and_preprocess(&s, Preprocess::METRIC));
        sentences.push(s);
    }
    if sentences.is_empty() {
        return Err(Error::Data("document has no sentences".into()));
    }
    let pm: Option<Vec<Vec<f64>>> =
        pmeans.map(|e| sentences.iter().map(|s| e.encode_tokens(&text::tokenize_and_preprocess(s, Preprocess::ENCODER))).collect());
    let features = match &pm {
        Some(v) => v.clone(),
        None => metric_tokens.iter().map(|t| hashed_vector(t, HASHED_DIM)).collect(),
    };
    let encoded = EncodedDocument::new(features, counts)?;
    Ok(PreparedDocument { sentences, metric_tokens, pmeans: pm, encoded })
}

fn mean_of(vectors: &[Vec<f64>], selected: &[usize], dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    for &i in selected {
        out.iter_mut().zip(&vectors[i]).for_each(|(o, x)| *o += x);
    }
    if !selected.is_empty() {
        let k = selected.len() as f64;
        out.iter_mut().for_each(|o| *o /= k);
    }
    out
}

/// Mean ROUGE-1/2/L F1 against a reference text.
pub struct RougeReward<'a> {
    pub doc: &'a PreparedDocument,
    pub reference: TokenizedText,
}

impl DraftReward for RougeReward<'_> {
    fn reward(&self, selected: &[usize]) -> f64 {
        let cand = TokenizedText::from_sentences(selected.iter().map(|&i| self.doc.metric_tokens[i].clone()));
        let f = |v| rouge(&cand, &self.reference, v).f1;
        (f(RougeVariant::N(1)) + f(RougeVariant::N(2)) + f(RougeVariant::L)) / 3.0
    }
}

/// A trained model, or the untrained similarity/redundancy reward, over
/// power-mean sentence vectors. The empty draft is encoded as the zero vector
/// (MLP) or scores 0 (similarity/redundancy).
pub struct ModelReward<'a> {
    vectors: &'a [Vec<f64>],
    kind: ModelKind<'a>,
}

enum ModelKind<'a> {
    Mlp { model: &'a sumreward_core::RewardModel, doc: Vec<f64> },
    SimRed(SimRedConfig),
}

impl<'a> ModelReward<'a> {
    pub fn new(doc: &'a PreparedDocument, model: Option<&'a LoadedModel>) -> Result<Self> {
        let vectors = doc.pmeans.as_deref().ok_or_else(|| Error::Usage("this reward needs word vectors (--vectors)".into()))?;
        let dim = doc.encoded.embedding_dim();
        let all: Vec<usize> = (0..vectors.len()).collect();
        let kind = match model {
            Some(LoadedModel::Mlp(m)) => {
                if m.embedding_dim() != dim {
                    return Err(Error::Data(format!("model expects {}-dimensional embeddings, encoder gives {dim}", m.embedding_dim())));
                }
                ModelKind::Mlp { model: m, doc: mean_of(vectors, &all, dim) }
            }
            Some(LoadedModel::SimRed(m)) => ModelKind::SimRed(m.config.clone()),
            None => ModelKind::SimRed(SimRedConfig::default()),
        };
        Ok(Self { vectors, kind })
    }
}

impl DraftReward for ModelReward<'_> {
    fn reward(&self, selected: &[usize]) -> f64 {
        match &self.kind {
            ModelKind::Mlp { model, doc } => {
                let sum = mean_of(self.vectors, selected, doc.len());
                model.score_embeddings(doc, &sum).unwrap_or(0.0)
            }
            ModelKind::SimRed(cfg) => {
                if selected.is_empty() {
                    return 0.0;
                }
                let sum: Vec<Vec<f64>> = selected.iter().map(|&i| self.vectors[i].clone()).collect();
                simred_reward(&sum, self.vectors, cfg).unwrap_or(0.0)
            }
        }
    }
}
