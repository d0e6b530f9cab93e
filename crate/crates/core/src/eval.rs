//! Agreement between a scorer and human ratings.
//!
//! Correlations are summary-level: all (score, rating) points of an
//! evaluation set are pooled across articles. A summary is *good* when its
//! rating reaches the threshold and fewer than two summaries of the same
//! article are rated strictly higher; G-Pre/G-Rec compare the good sets
//! induced by the (min-max normalized) scores and by the human ratings.

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{self, CorpusError, Dataset, FoldSplit, RatedArticle};

/// Default rating threshold for a good summary.
pub const GOOD_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("inputs have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("correlation undefined: zero variance")]
    ZeroVariance,
    #[error("non-finite input value")]
    NonFinite,
    #[error("per-article structure mismatch at article {0}")]
    StructureMismatch(usize),
}

fn check_pair(xs: &[f64], ys: &[f64]) -> Result<(), EvalError> {
    if xs.len() != ys.len() {
        return Err(EvalError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(EvalError::TooFewPoints(xs.len()));
    }
    if !xs.iter().chain(ys).all(|v| v.is_finite()) {
        return Err(EvalError::NonFinite);
    }
    Ok(())
}

/// Pearson product-moment correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, EvalError> {
    check_pair(xs, ys)?;
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(EvalError::ZeroVariance);
    }
    Ok((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the mean of their positions.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = alloc::vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman's rho: Pearson correlation of average ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64, EvalError> {
    check_pair(xs, ys)?;
    pearson(&average_ranks(xs), &average_ranks(ys))
}

/// Min-max maps onto `[-1, 1]`; a constant list maps to zeros.
pub fn normalize_scores(scores: &[f64]) -> Vec<f64> {
    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if !span.is_finite() || span <= 0.0 {
        return alloc::vec![0.0; scores.len()];
    }
    scores.iter().map(|s| 2.0 * (s - lo) / span - 1.0).collect()
}

/// Indices rated at least `threshold` with fewer than two strictly higher ratings.
pub fn good_summary_set(ratings: &[f64], threshold: f64) -> BTreeSet<usize> {
    ratings
        .iter()
        .enumerate()
        .filter(|&(_, &r)| r >= threshold && ratings.iter().filter(|&&o| o > r).count() < 2)
        .map(|(i, _)| i)
        .collect()
}

/// G-Pre and G-Rec over per-article parallel lists of metric scores and
/// human ratings. Metric scores are normalized over the whole set first.
/// An empty predicted (or actual) set gives a precision (or recall) of 0.
pub fn g_precision_recall(metric_scores: &[Vec<f64>], human_ratings: &[Vec<f64>], threshold: f64) -> Result<(f64, f64), EvalError> {
    if metric_scores.len() != human_ratings.len() {
        return Err(EvalError::LengthMismatch(metric_scores.len(), human_ratings.len()));
    }
    if let Some(i) = metric_scores.iter().zip(human_ratings).position(|(m, h)| m.len() != h.len()) {
        return Err(EvalError::StructureMismatch(i));
    }
    let flat: Vec<f64> = metric_scores.iter().flatten().copied().collect();
    let normalized = normalize_scores(&flat);
    let (mut predicted, mut actual, mut both) = (0usize, 0usize, 0usize);
    let mut offset = 0;
    for human in human_ratings {
        let norm = &normalized[offset..offset + human.len()];
        offset += human.len();
        let pred = good_summary_set(norm, threshold);
        let act = good_summary_set(human, threshold);
        predicted += pred.len();
        actual += act.len();
        both += pred.intersection(&act).count();
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    Ok((ratio(both, predicted), ratio(both, actual)))
}

/// Scores one summary of an article. `None` leaves the summary out of the
/// evaluation (e.g. the reference itself for a reference-based metric).
pub trait SummaryScorer {
    fn score(&self, article: &RatedArticle, index: usize) -> Option<f64>;
}

impl<F> SummaryScorer for F
where
    F: Fn(&RatedArticle, usize) -> Option<f64>,
{
    fn score(&self, article: &RatedArticle, index: usize) -> Option<f64> {
        self(article, index)
    }
}

/// Produces a scorer for one cross-validation fold.
pub trait ScorerFactory {
    type Error;

    fn fit<'a>(&'a self, dataset: &Dataset, split: &FoldSplit) -> Result<Box<dyn SummaryScorer + 'a>, Self::Error>;
}

/// A scorer that needs no training; the same one serves every fold.
pub struct Fixed<S>(pub S);

impl<S: SummaryScorer> ScorerFactory for Fixed<S> {
    type Error = core::convert::Infallible;

    fn fit<'a>(&'a self, _dataset: &Dataset, _split: &FoldSplit) -> Result<Box<dyn SummaryScorer + 'a>, Self::Error> {
        Ok(Box::new(|a: &RatedArticle, i: usize| self.0.score(a, i)))
    }
}

/// Correlation and good-summary figures for one evaluation set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fold: Option<usize>,
    pub spearman_rho: Option<f64>,
    pub pearson_r: Option<f64>,
    pub g_pre: f64,
    pub g_rec: f64,
    pub n_articles: usize,
    pub n_summaries: usize,
    /// Why a correlation is undefined, when it is.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub spearman_rho: Option<f64>,
    pub pearson_r: Option<f64>,
    pub g_pre: f64,
    pub g_rec: f64,
    pub n_articles: usize,
    pub n_summaries: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub per_fold: Option<Vec<FoldMetrics>>,
}

/// One scored summary, for dumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub id: String,
    pub score: f64,
    pub rating: f64,
}

/// Scores every summary of `articles`, dropping those the scorer skips.
pub fn score_records(articles: &[&RatedArticle], scorer: &dyn SummaryScorer) -> Vec<ScoreRecord> {
    let mut out = Vec::new();
    for a in articles {
        for (i, s) in a.summaries.iter().enumerate() {
            if let Some(score) = scorer.score(a, i) {
                out.push(ScoreRecord { id: crate::embeddings::summary_id(&a.article_id, i), score, rating: s.avg_rating });
            }
        }
    }
    out
}

/// Evaluates a scorer on a set of articles.
pub fn evaluate_articles(articles: &[&RatedArticle], scorer: &dyn SummaryScorer, threshold: f64) -> FoldMetrics {
    let mut metric = Vec::with_capacity(articles.len());
    let mut human = Vec::with_capacity(articles.len());
    for a in articles {
        let (mut m, mut h) = (Vec::new(), Vec::new());
        for (i, s) in a.summaries.iter().enumerate() {
            if let Some(score) = scorer.score(a, i) {
                m.push(score);
                h.push(s.avg_rating);
            }
        }
        if !m.is_empty() {
            metric.push(m);
            human.push(h);
        }
    }
    let xs: Vec<f64> = metric.iter().flatten().copied().collect();
    let ys: Vec<f64> = human.iter().flatten().copied().collect();
    let rho = spearman(&xs, &ys);
    let r = pearson(&xs, &ys);
    let error = rho.as_ref().err().or(r.as_ref().err()).map(ToString::to_string);
    // Lists are parallel by construction.
    let (g_pre, g_rec) = g_precision_recall(&metric, &human, threshold).unwrap_or((0.0, 0.0));
    FoldMetrics {
        fold: None,
        spearman_rho: rho.ok(),
        pearson_r: r.ok(),
        g_pre,
        g_rec,
        n_articles: metric.len(),
        n_summaries: xs.len(),
        error,
    }
}

/// Evaluates on a fold's test articles.
pub fn evaluate_fold(dataset: &Dataset, split: &FoldSplit, scorer: &dyn SummaryScorer, threshold: f64) -> Result<FoldMetrics, CorpusError> {
    let articles = dataset.select(&split.test_ids)?;
    let mut m = evaluate_articles(&articles, scorer, threshold);
    m.fold = Some(split.fold_index);
    Ok(m)
}

fn mean_defined<I: Iterator<Item = Option<f64>>>(values: I) -> Option<f64> {
    let defined: Vec<f64> = values.flatten().collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}

/// Unweighted mean over folds; a correlation is averaged over the folds
/// where it is defined and is `None` if it is undefined everywhere.
pub fn assemble_report(folds: Vec<FoldMetrics>) -> EvalReport {
    let k = folds.len().max(1) as f64;
    EvalReport {
        spearman_rho: mean_defined(folds.iter().map(|f| f.spearman_rho)),
        pearson_r: mean_defined(folds.iter().map(|f| f.pearson_r)),
        g_pre: folds.iter().map(|f| f.g_pre).sum::<f64>() / k,
        g_rec: folds.iter().map(|f| f.g_rec).sum::<f64>() / k,
        n_articles: folds.iter().map(|f| f.n_articles).sum(),
        n_summaries: folds.iter().map(|f| f.n_summaries).sum(),
        per_fold: Some(folds),
    }
}

/// Report over a single evaluation set, without folds.
pub fn report_for(metrics: FoldMetrics) -> EvalReport {
    EvalReport {
        spearman_rho: metrics.spearman_rho,
        pearson_r: metrics.pearson_r,
        g_pre: metrics.g_pre,
        g_rec: metrics.g_rec,
        n_articles: metrics.n_articles,
        n_summaries: metrics.n_summaries,
        per_fold: None,
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CrossValidationError<E> {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("fold {fold}: {source}")]
    Scorer { fold: usize, source: E },
}

/// k-fold cross-validation: each fold's scorer is fitted on its train and
/// validation ids and evaluated on its test ids.
pub fn cross_validate<F: ScorerFactory>(
    dataset: &Dataset,
    k: usize,
    seed: u64,
    factory: &F,
    threshold: f64,
) -> Result<EvalReport, CrossValidationError<F::Error>> {
    let splits = corpus::split_folds(dataset, k, seed)?;
    cross_validate_splits(dataset, &splits, factory, threshold)
}

/// As [`cross_validate`], over explicit splits.
pub fn cross_validate_splits<F: ScorerFactory>(
    dataset: &Dataset,
    splits: &[FoldSplit],
    factory: &F,
    threshold: f64,
) -> Result<EvalReport, CrossValidationError<F::Error>> {
    let mut folds = Vec::with_capacity(splits.len());
    for split in splits {
        let scorer = factory.fit(dataset, split).map_err(|source| CrossValidationError::Scorer { fold: split.fold_index, source })?;
        folds.push(evaluate_fold(dataset, split, scorer.as_ref(), threshold)?);
    }
    Ok(assemble_report(folds))
}
