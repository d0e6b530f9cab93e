//! Similarity/redundancy reward over sentence embeddings:
//!
//! `α/(NM) Σ_ij cos(P s_i, P d_j) − (1−α)/(N(N−1)/2) Σ_{k<l} cos(P s_k, P s_l)²`
//!
//! for summary sentences `s` (N of them), document sentences `d` (M) and a
//! square projection `P`. Single-sentence summaries have no redundancy term.

use alloc::rc::Rc;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{Differentiable, EncoderSpec, Normalization, RewardError};
use crate::embeddings::TextEncoder;
use crate::linalg::{self, Matrix};

pub const DEFAULT_ALPHA: f64 = 0.85;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRedConfig {
    pub alpha: f64,
    /// `None` means the identity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projection: Option<Matrix>,
}

impl Default for SimRedConfig {
    fn default() -> Self {
        Self { alpha: DEFAULT_ALPHA, projection: None }
    }
}

impl SimRedConfig {
    pub fn validate(&self, dim: Option<usize>) -> Result<(), RewardError> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(RewardError::BadAlpha(self.alpha));
        }
        if let Some(p) = &self.projection {
            if p.rows != p.cols || p.data.len() != p.rows * p.cols || !linalg::all_finite(&p.data) {
                return Err(RewardError::InvalidParams);
            }
            if let Some(d) = dim {
                if d != p.cols {
                    return Err(RewardError::DimensionMismatch { expected: p.cols, found: d });
                }
            }
        }
        Ok(())
    }
}

fn project(p: Option<&Matrix>, xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    match p {
        Some(p) => xs.iter().map(|x| p.matvec(x)).collect(),
        None => xs.to_vec(),
    }
}

fn check_dims(xs: &[Vec<f64>], dim: usize) -> Result<(), RewardError> {
    match xs.iter().find(|x| x.len() != dim) {
        Some(x) => Err(RewardError::DimensionMismatch { expected: dim, found: x.len() }),
        None => Ok(()),
    }
}

fn reward_projected(alpha: f64, u: &[Vec<f64>], v: &[Vec<f64>]) -> f64 {
    let (n, m) = (u.len(), v.len());
    let mut sim = 0.0;
    for ui in u {
        for vj in v {
            sim += linalg::cosine(ui, vj);
        }
    }
    let sim = sim / (n * m) as f64;
    let red = if n < 2 {
        0.0
    } else {
        let mut acc = 0.0;
        for k in 0..n {
            for l in k + 1..n {
                let c = linalg::cosine(&u[k], &u[l]);
                acc += c * c;
            }
        }
        acc / (n * (n - 1) / 2) as f64
    };
    alpha * sim - (1.0 - alpha) * red
}

pub fn simred_reward(summary_sents: &[Vec<f64>], doc_sents: &[Vec<f64>], cfg: &SimRedConfig) -> Result<f64, RewardError> {
    if summary_sents.is_empty() || doc_sents.is_empty() {
        return Err(RewardError::Empty);
    }
    let dim = summary_sents[0].len();
    cfg.validate(Some(dim))?;
    check_dims(summary_sents, dim)?;
    check_dims(doc_sents, dim)?;
    let p = cfg.projection.as_ref();
    Ok(reward_projected(cfg.alpha, &project(p, summary_sents), &project(p, doc_sents)))
}

/// Gradient of `cos(a, b)` with respect to `a`, scaled by `scale`, added to `out`.
fn add_cosine_grad(a: &[f64], b: &[f64], scale: f64, out: &mut [f64]) {
    let (na, nb) = (linalg::norm(a), linalg::norm(b));
    if na == 0.0 || nb == 0.0 || scale == 0.0 {
        return;
    }
    let c = linalg::dot(a, b) / (na * nb);
    for ((o, &ai), &bi) in out.iter_mut().zip(a).zip(b) {
        *o += scale * (bi / (na * nb) - c * ai / (na * na));
    }
}

/// Sentence embeddings of one document/summary pair.
#[derive(Debug, Clone)]
pub struct SimRedInput {
    pub doc: Rc<Vec<Vec<f64>>>,
    pub summary: Vec<Vec<f64>>,
}

/// Trainable state: the projection (alpha is held fixed).
#[derive(Debug, Clone, PartialEq)]
pub struct SimRedParams {
    pub alpha: f64,
    pub projection: Matrix,
}

impl SimRedParams {
    pub fn identity(dim: usize, alpha: f64) -> Result<Self, RewardError> {
        let p = Self { alpha, projection: Matrix::identity(dim) };
        p.to_config().validate(None)?;
        Ok(p)
    }

    pub fn to_config(&self) -> SimRedConfig {
        SimRedConfig { alpha: self.alpha, projection: Some(self.projection.clone()) }
    }

    pub fn into_config(self) -> SimRedConfig {
        SimRedConfig { alpha: self.alpha, projection: Some(self.projection) }
    }
}

impl Differentiable for SimRedParams {
    type Input = SimRedInput;

    fn forward(&self, x: &SimRedInput) -> f64 {
        let u = project(Some(&self.projection), &x.summary);
        let v = project(Some(&self.projection), &x.doc);
        reward_projected(self.alpha, &u, &v)
    }

    fn backward(&self, x: &SimRedInput, dout: f64, grad: &mut Self) {
        let u = project(Some(&self.projection), &x.summary);
        let v = project(Some(&self.projection), &x.doc);
        let (n, m) = (u.len(), v.len());
        if n == 0 || m == 0 {
            return;
        }
        let dim = self.projection.rows;
        let mut du = vec![vec![0.0; dim]; n];
        let mut dv = vec![vec![0.0; dim]; m];
        let ws = dout * self.alpha / (n * m) as f64;
        for i in 0..n {
            for j in 0..m {
                add_cosine_grad(&u[i], &v[j], ws, &mut du[i]);
                add_cosine_grad(&v[j], &u[i], ws, &mut dv[j]);
            }
        }
        if n >= 2 {
            let wr = -dout * (1.0 - self.alpha) / (n * (n - 1) / 2) as f64;
            for k in 0..n {
                for l in k + 1..n {
                    let c = linalg::cosine(&u[k], &u[l]);
                    let (uk, ul) = (u[k].clone(), u[l].clone());
                    add_cosine_grad(&uk, &ul, wr * 2.0 * c, &mut du[k]);
                    add_cosine_grad(&ul, &uk, wr * 2.0 * c, &mut du[l]);
                }
            }
        }
        for (g, s) in du.iter().zip(&x.summary) {
            grad.projection.add_outer(1.0, g, s);
        }
        for (g, d) in dv.iter().zip(x.doc.iter()) {
            grad.projection.add_outer(1.0, g, d);
        }
    }

    fn zeroed(&self) -> Self {
        Self { alpha: self.alpha, projection: Matrix::zeros(self.projection.rows, self.projection.cols) }
    }

    fn tensors(&self) -> Vec<&[f64]> {
        vec![&self.projection.data]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.projection.data]
    }
}

/// A similarity/redundancy reward bound to its sentence encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRedModel {
    pub config: SimRedConfig,
    pub encoder_spec: EncoderSpec,
    pub normalization: Option<Normalization>,
}

impl SimRedModel {
    pub fn new(config: SimRedConfig, encoder_spec: EncoderSpec) -> Result<Self, RewardError> {
        config.validate(Some(encoder_spec.dim()))?;
        Ok(Self { config, encoder_spec, normalization: None })
    }

    pub fn score(&self, encoder: &dyn TextEncoder, article_text: &str, summary_text: &str) -> Result<f64, RewardError> {
        if encoder.dim() != self.encoder_spec.dim() {
            return Err(RewardError::EncoderMismatch { expected: self.encoder_spec.dim(), found: encoder.dim() });
        }
        let doc = encoder.sentence_embeddings(article_text)?;
        let sum = encoder.sentence_embeddings(summary_text)?;
        simred_reward(&sum, &doc, &self.config)
    }
}
