//! Minibatch Adam training under either loss, with early stopping on the
//! validation Spearman correlation.

use alloc::rc::Rc;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::loss::{pair_loss, sigmoid};
use super::mlp::MlpParams;
use super::simred::{SimRedInput, SimRedModel, SimRedParams};
use super::{Differentiable, EncoderSpec, Normalization, RewardError, RewardModel};
use crate::corpus::{Dataset, FoldSplit, RatedArticle};
use crate::embeddings::TextEncoder;
use crate::eval;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// Mean squared error against the average rating.
    Mse,
    /// Cross-entropy of pairwise preferences.
    Preference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub hidden_dim: usize,
    /// Epochs without a better validation Spearman before stopping.
    pub early_stop_patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: LossKind::Preference,
            learning_rate: 1e-3,
            epochs: 50,
            batch_size: 32,
            seed: 0,
            hidden_dim: 100,
            early_stop_patience: 5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), RewardError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(RewardError::InvalidConfig("learning_rate must be positive"));
        }
        if self.epochs == 0 {
            return Err(RewardError::InvalidConfig("epochs must be positive"));
        }
        if self.batch_size == 0 {
            return Err(RewardError::InvalidConfig("batch_size must be positive"));
        }
        if self.hidden_dim == 0 {
            return Err(RewardError::InvalidConfig("hidden_dim must be positive"));
        }
        if self.early_stop_patience == 0 {
            return Err(RewardError::InvalidConfig("early_stop_patience must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_spearman: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub loss: LossKind,
    pub epochs: Vec<EpochLog>,
    /// Epoch whose parameters were kept, if validation selected one.
    pub best_epoch: Option<usize>,
    pub best_val_spearman: Option<f64>,
    pub stopped_early: bool,
    pub n_train_summaries: usize,
    pub n_train_pairs: usize,
}

/// Model inputs and human ratings for the summaries of one article.
#[derive(Debug, Clone)]
pub struct ArticleExamples<I> {
    pub article_id: String,
    pub inputs: Vec<I>,
    pub ratings: Vec<f64>,
}

/// Mean squared error over `(input, target)` and its parameter gradient.
pub fn mse_loss_and_grad<M: Differentiable>(model: &M, inputs: &[M::Input], targets: &[f64]) -> (f64, M) {
    let mut grad = model.zeroed();
    let n = inputs.len().max(1) as f64;
    let mut loss = 0.0;
    for (x, &t) in inputs.iter().zip(targets) {
        let p = model.forward(x);
        loss += (t - p) * (t - p);
        model.backward(x, 2.0 * (p - t) / n, &mut grad);
    }
    (loss / n, grad)
}

/// Mean preference cross-entropy over `(better, worse)` input pairs and its gradient.
pub fn preference_loss_and_grad<M: Differentiable>(model: &M, pairs: &[(&M::Input, &M::Input)]) -> (f64, M) {
    let mut grad = model.zeroed();
    let n = pairs.len().max(1) as f64;
    let mut loss = 0.0;
    for (better, worse) in pairs {
        let (rb, rw) = (model.forward(better), model.forward(worse));
        loss += pair_loss(rb, rw);
        // d/d(rb) softplus(rw - rb) = -sigmoid(rw - rb)
        let s = sigmoid(rw - rb);
        model.backward(better, -s / n, &mut grad);
        model.backward(worse, s / n, &mut grad);
    }
    (loss / n, grad)
}

fn apply<M: Differentiable>(adam: &mut Adam, model: &mut M, grad: &M) {
    adam.step(model.tensors_mut(), grad.tensors());
}

fn val_spearman<M: Differentiable>(model: &M, val: &[ArticleExamples<M::Input>]) -> Option<f64> {
    let mut preds = Vec::new();
    let mut ratings = Vec::new();
    for a in val {
        for (x, &r) in a.inputs.iter().zip(&a.ratings) {
            preds.push(model.forward(x));
            ratings.push(r);
        }
    }
    eval::spearman(&preds, &ratings).ok()
}

/// Fits `model` in place and returns the report. Parameters end at the best
/// validation epoch when any epoch had a defined validation correlation.
pub fn fit<M: Differentiable>(
    model: &mut M,
    train: &[ArticleExamples<M::Input>],
    val: &[ArticleExamples<M::Input>],
    cfg: &TrainConfig,
    rng: &mut crate::Rng,
) -> Result<TrainingReport, RewardError> {
    cfg.validate()?;
    let summaries: Vec<(usize, usize)> =
        train.iter().enumerate().flat_map(|(a, ex)| (0..ex.inputs.len()).map(move |s| (a, s))).collect();
    if summaries.is_empty() {
        return Err(RewardError::EmptyTrainingSet);
    }
    let mut pairs: Vec<(usize, usize, usize)> = Vec::new();
    for (a, ex) in train.iter().enumerate() {
        for i in 0..ex.ratings.len() {
            for j in i + 1..ex.ratings.len() {
                let (ri, rj) = (ex.ratings[i], ex.ratings[j]);
                if ri > rj {
                    pairs.push((a, i, j));
                } else if rj > ri {
                    pairs.push((a, j, i));
                }
            }
        }
    }
    if cfg.loss == LossKind::Preference && pairs.is_empty() {
        return Err(RewardError::NoPreferencePairs);
    }

    let mut adam = Adam::new(cfg.learning_rate);
    let mut report = TrainingReport {
        loss: cfg.loss,
        epochs: Vec::with_capacity(cfg.epochs),
        best_epoch: None,
        best_val_spearman: None,
        stopped_early: false,
        n_train_summaries: summaries.len(),
        n_train_pairs: pairs.len(),
    };
    let mut best: Option<M> = None;
    let mut since_best = 0usize;
    let mut order_s = summaries;
    let mut order_p = pairs;

    for epoch in 0..cfg.epochs {
        let mut loss_sum = 0.0;
        let mut count = 0usize;
        match cfg.loss {
            LossKind::Mse => {
                order_s.shuffle(rng);
                for batch in order_s.chunks(cfg.batch_size) {
                    let inputs: Vec<&M::Input> = batch.iter().map(|&(a, s)| &train[a].inputs[s]).collect();
                    let mut grad = model.zeroed();
                    let n = batch.len() as f64;
                    for (x, &(a, s)) in inputs.iter().zip(batch) {
                        let t = train[a].ratings[s];
                        let p = model.forward(x);
                        loss_sum += (t - p) * (t - p);
                        model.backward(x, 2.0 * (p - t) / n, &mut grad);
                    }
                    count += batch.len();
                    apply(&mut adam, model, &grad);
                }
            }
            LossKind::Preference => {
                order_p.shuffle(rng);
                for batch in order_p.chunks(cfg.batch_size) {
                    let refs: Vec<(&M::Input, &M::Input)> =
                        batch.iter().map(|&(a, b, w)| (&train[a].inputs[b], &train[a].inputs[w])).collect();
                    let (loss, grad) = preference_loss_and_grad(model, &refs);
                    loss_sum += loss * batch.len() as f64;
                    count += batch.len();
                    apply(&mut adam, model, &grad);
                }
            }
        }
        let rho = if val.is_empty() { None } else { val_spearman(model, val) };
        report.epochs.push(EpochLog { epoch, train_loss: loss_sum / count.max(1) as f64, val_spearman: rho });
        if val.is_empty() {
            continue;
        }
        match (rho, report.best_val_spearman) {
            (Some(r), best_r) if best_r.is_none_or(|b| r > b) => {
                report.best_val_spearman = Some(r);
                report.best_epoch = Some(epoch);
                best = Some(model.clone());
                since_best = 0;
            }
            _ => {
                since_best += 1;
                if since_best >= cfg.early_stop_patience {
                    report.stopped_early = epoch + 1 < cfg.epochs;
                    break;
                }
            }
        }
    }
    if let Some(b) = best {
        *model = b;
    }
    Ok(report)
}

fn select<'a>(dataset: &'a Dataset, ids: &[String]) -> Result<Vec<&'a RatedArticle>, RewardError> {
    Ok(dataset.select(ids)?)
}

/// Encodes articles into concatenated `[document; summary]` MLP inputs.
pub fn encode_for_mlp(articles: &[&RatedArticle], encoder: &dyn TextEncoder) -> Result<Vec<ArticleExamples<Vec<f64>>>, RewardError> {
    articles
        .iter()
        .map(|a| {
            let doc = encoder.encode_document(&a.article_id, &a.article_text)?;
            let inputs = a
                .summaries
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let mut x = doc.clone();
                    x.extend(encoder.encode_summary(&a.article_id, i, &s.text)?);
                    Ok(x)
                })
                .collect::<Result<Vec<_>, RewardError>>()?;
            Ok(ArticleExamples { article_id: a.article_id.clone(), inputs, ratings: a.avg_ratings() })
        })
        .collect()
}

/// Encodes articles into sentence-level inputs for the similarity/redundancy reward.
pub fn encode_for_simred(articles: &[&RatedArticle], encoder: &dyn TextEncoder) -> Result<Vec<ArticleExamples<SimRedInput>>, RewardError> {
    articles
        .iter()
        .map(|a| {
            let doc = Rc::new(encoder.sentence_embeddings(&a.article_text)?);
            let inputs = a
                .summaries
                .iter()
                .map(|s| Ok(SimRedInput { doc: Rc::clone(&doc), summary: encoder.sentence_embeddings(&s.text)? }))
                .collect::<Result<Vec<_>, RewardError>>()?;
            Ok(ArticleExamples { article_id: a.article_id.clone(), inputs, ratings: a.avg_ratings() })
        })
        .collect()
}

fn training_range<M: Differentiable>(model: &M, train: &[ArticleExamples<M::Input>]) -> Option<Normalization> {
    let scores: Vec<f64> = train.iter().flat_map(|a| a.inputs.iter().map(|x| model.forward(x))).collect();
    Normalization::from_scores(&scores)
}

/// Trains the MLP reward on a fold: gradient steps on the training ids,
/// model selection on the validation ids.
pub fn train_reward_model(
    dataset: &Dataset,
    split: &FoldSplit,
    encoder: &dyn TextEncoder,
    encoder_spec: EncoderSpec,
    cfg: &TrainConfig,
) -> Result<(RewardModel, TrainingReport), RewardError> {
    cfg.validate()?;
    if encoder.dim() != encoder_spec.dim() {
        return Err(RewardError::EncoderMismatch { expected: encoder_spec.dim(), found: encoder.dim() });
    }
    let train = encode_for_mlp(&select(dataset, &split.train_ids)?, encoder)?;
    let val = encode_for_mlp(&select(dataset, &split.val_ids)?, encoder)?;
    let mut rng = crate::rng_from_seed(cfg.seed);
    let mut params = MlpParams::init(2 * encoder.dim(), cfg.hidden_dim, &mut rng);
    let report = fit(&mut params, &train, &val, cfg, &mut rng)?;
    if !params.is_valid() {
        return Err(RewardError::NonFinite);
    }
    let normalization = training_range(&params, &train);
    let mut model = RewardModel::new(params, encoder_spec)?;
    model.normalization = normalization;
    Ok((model, report))
}

/// Trains the projection of the similarity/redundancy reward on a fold.
/// `cfg.hidden_dim` is unused; `alpha` stays fixed.
pub fn train_simred_model(
    dataset: &Dataset,
    split: &FoldSplit,
    encoder: &dyn TextEncoder,
    encoder_spec: EncoderSpec,
    alpha: f64,
    cfg: &TrainConfig,
) -> Result<(SimRedModel, TrainingReport), RewardError> {
    cfg.validate()?;
    let train = encode_for_simred(&select(dataset, &split.train_ids)?, encoder)?;
    let val = encode_for_simred(&select(dataset, &split.val_ids)?, encoder)?;
    let mut params = SimRedParams::identity(encoder.dim(), alpha)?;
    let mut rng = crate::rng_from_seed(cfg.seed);
    let report = fit(&mut params, &train, &val, cfg, &mut rng)?;
    let normalization = training_range(&params, &train);
    let mut model = SimRedModel::new(params.into_config(), encoder_spec)?;
    model.normalization = normalization;
    Ok((model, report))
}
