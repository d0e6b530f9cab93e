//! Scorers for `eval-reward` and the worker pool that runs them.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Mutex;
use std::thread;

use sumreward_core::eval::{ScorerFactory, SummaryScorer};
use sumreward_core::linalg;
use sumreward_core::metrics::{bleu, rouge, RougeVariant};
use sumreward_core::reward::{simred_reward, SimRedConfig, TrainConfig, TrainingReport};
use sumreward_core::text::{Preprocess, TokenizedText};
use sumreward_core::embeddings::TextEncoder;
use sumreward_core::{Dataset, FoldSplit, RatedArticle};

use crate::encoder::ActiveEncoder;
use crate::error::{Error, Result};
use crate::io::{Arch, LoadedModel};

#[derive(Debug, Clone, PartialEq)]
pub enum ScorerSpec {
    /// A saved model file.
    Learned(PathBuf),
    /// A model trained per cross-validation fold.
    Trained(Arch),
    /// Untrained similarity/redundancy reward.
    SimRed,
    Rouge(RougeVariant),
    Bleu(usize),
    /// Embedding cosine between summary and reference summary.
    Cosine,
    /// Embedding cosine between summary and document.
    CosineDoc,
}

impl ScorerSpec {
    pub fn needs_reference(&self) -> bool {
        matches!(self, ScorerSpec::Rouge(_) | ScorerSpec::Bleu(_) | ScorerSpec::Cosine)
    }

    pub fn needs_encoder(&self) -> bool {
        matches!(self, ScorerSpec::Trained(_) | ScorerSpec::SimRed | ScorerSpec::Cosine | ScorerSpec::CosineDoc)
    }
}

impl FromStr for ScorerSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if let Some(path) = s.strip_prefix("learned:") {
            if path.is_empty() {
                return Err("learned:<model-file> needs a path".into());
            }
            return Ok(ScorerSpec::Learned(PathBuf::from(path)));
        }
        Ok(match s {
            "trained:mlp" => ScorerSpec::Trained(Arch::Mlp),
            "trained:simred" => ScorerSpec::Trained(Arch::Simred),
            "simred" => ScorerSpec::SimRed,
            "rouge1" => ScorerSpec::Rouge(RougeVariant::N(1)),
            "rouge2" => ScorerSpec::Rouge(RougeVariant::N(2)),
            "rougeL" => ScorerSpec::Rouge(RougeVariant::L),
            "rougeSU4" => ScorerSpec::Rouge(RougeVariant::SU4),
            "bleu1" | "bleu2" | "bleu3" | "bleu4" | "bleu5" => ScorerSpec::Bleu(usize::from(s.as_bytes()[4] - b'0')),
            "cosine" => ScorerSpec::Cosine,
            "cosine-doc" => ScorerSpec::CosineDoc,
            _ => {
                return Err(format!(
                    "unknown scorer {s:?}; expected learned:<file>, trained:mlp, trained:simred, simred, \
                     rouge1, rouge2, rougeL, rougeSU4, bleu1..bleu5, cosine or cosine-doc"
                ))
            }
        })
    }
}

/// Scores one summary; `Ok(None)` leaves it out of the evaluation.
pub type ScoreFn<'a> = dyn Fn(&RatedArticle, usize) -> Result<Option<f64>> + Sync + 'a;

/// Applies `f` to every item on up to `jobs` threads; results keep input order.
pub fn parallel_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let jobs = jobs.clamp(1, items.len().max(1));
    if jobs == 1 {
        return items.iter().map(f).collect();
    }
    let chunk = items.len().div_ceil(jobs);
    let f = &f;
    thread::scope(|s| {
        let handles: Vec<_> = items.chunks(chunk).map(|c| s.spawn(move || c.iter().map(f).collect::<Vec<R>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("scoring worker panicked")).collect()
    })
}

/// Summary scores keyed by `(article_id, index)`.
#[derive(Debug, Clone, Default)]
pub struct ScoreTable(BTreeMap<(String, usize), f64>);

impl ScoreTable {
    pub fn compute(articles: &[&RatedArticle], f: &ScoreFn<'_>, jobs: usize) -> Result<Self> {
        let per_article = parallel_map(articles, jobs, |a| {
            (0..a.summaries.len()).map(|i| Ok((i, f(a, i)?))).collect::<Result<Vec<(usize, Option<f64>)>>>()
        });
        let mut map = BTreeMap::new();
        for (a, scores) in articles.iter().zip(per_article) {
            for (i, s) in scores? {
                if let Some(s) = s {
                    if !s.is_finite() {
                        return Err(Error::Data(format!("non-finite score for summary {i} of article {}", a.article_id)));
                    }
                    map.insert((a.article_id.clone(), i), s);
                }
            }
        }
        Ok(Self(map))
    }

    pub fn extend(&mut self, other: ScoreTable) {
        self.0.extend(other.0);
    }
}

impl SummaryScorer for ScoreTable {
    fn score(&self, article: &RatedArticle, index: usize) -> Option<f64> {
        self.0.get(&(article.article_id.clone(), index)).copied()
    }
}

fn reference_index(article: &RatedArticle, reference_system: &str) -> Result<usize> {
    article
        .summaries
        .iter()
        .position(|s| s.system_id == reference_system)
        .ok_or_else(|| Error::Data(format!("article {} has no summary from system {reference_system:?}", article.article_id)))
}

/// A scorer that needs no per-fold training.
pub fn fixed_scorer<'a>(
    spec: &ScorerSpec,
    encoder: Option<&'a ActiveEncoder<'a>>,
    model: Option<&'a LoadedModel>,
    reference_system: &'a str,
) -> Result<Box<ScoreFn<'a>>> {
    let need_encoder = || encoder.ok_or_else(|| Error::Usage("this scorer needs an encoder (--vectors or --embeddings)".into()));
    let tokens = |text: &str| TokenizedText::from_text(text, Preprocess::METRIC);
    Ok(match spec.clone() {
        ScorerSpec::Learned(_) => {
            let model = model.expect("model loaded for learned scorer");
            let enc = need_encoder()?;
            match model {
                LoadedModel::Mlp(m) => Box::new(move |a: &RatedArticle, i: usize| {
                    Ok(Some(m.score_summary(enc, &a.article_id, &a.article_text, i, &a.summaries[i].text)?))
                }),
                LoadedModel::SimRed(m) => Box::new(move |a: &RatedArticle, i: usize| Ok(Some(m.score(enc, &a.article_text, &a.summaries[i].text)?))),
            }
        }
        ScorerSpec::Trained(_) => unreachable!("trained scorers are fitted per fold"),
        ScorerSpec::SimRed => {
            let enc = need_encoder()?;
            let cfg = SimRedConfig::default();
            Box::new(move |a: &RatedArticle, i: usize| {
                let doc = enc.sentence_embeddings(&a.article_text)?;
                let sum = enc.sentence_embeddings(&a.summaries[i].text)?;
                Ok(Some(simred_reward(&sum, &doc, &cfg)?))
            })
        }
        ScorerSpec::Rouge(variant) => Box::new(move |a: &RatedArticle, i: usize| {
            let r = reference_index(a, reference_system)?;
            if r == i {
                return Ok(None);
            }
            Ok(Some(rouge(&tokens(&a.summaries[i].text), &tokens(&a.summaries[r].text), variant).f1))
        }),
        ScorerSpec::Bleu(n) => Box::new(move |a: &RatedArticle, i: usize| {
            let r = reference_index(a, reference_system)?;
            if r == i {
                return Ok(None);
            }
            Ok(Some(bleu(tokens(&a.summaries[i].text).flat_tokens(), tokens(&a.summaries[r].text).flat_tokens(), n)))
        }),
        ScorerSpec::Cosine => {
            let enc = need_encoder()?;
            Box::new(move |a: &RatedArticle, i: usize| {
                let r = reference_index(a, reference_system)?;
                if r == i {
                    return Ok(None);
                }
                let s = enc.encode_summary(&a.article_id, i, &a.summaries[i].text)?;
                let rv = enc.encode_summary(&a.article_id, r, &a.summaries[r].text)?;
                Ok(Some(linalg::cosine(&s, &rv)))
            })
        }
        ScorerSpec::CosineDoc => {
            let enc = need_encoder()?;
            Box::new(move |a: &RatedArticle, i: usize| {
                let s = enc.encode_summary(&a.article_id, i, &a.summaries[i].text)?;
                let d = enc.encode_document(&a.article_id, &a.article_text)?;
                Ok(Some(linalg::cosine(&s, &d)))
            })
        }
    })
}

/// Trains a reward per fold and scores that fold's test articles.
pub struct TrainedFactory<'a> {
    pub encoder: &'a ActiveEncoder<'a>,
    pub encoder_spec: sumreward_core::reward::EncoderSpec,
    pub arch: Arch,
    pub alpha: f64,
    pub cfg: TrainConfig,
    pub jobs: usize,
    pub training: Mutex<Vec<(usize, TrainingReport)>>,
    /// Test-fold scores of every fold fitted so far.
    pub scores: Mutex<ScoreTable>,
}

impl ScorerFactory for TrainedFactory<'_> {
    type Error = Error;

    fn fit<'b>(&'b self, dataset: &Dataset, split: &FoldSplit) -> Result<Box<dyn SummaryScorer + 'b>> {
        let test = dataset.select(&split.test_ids)?;
        let table = match self.arch {
            Arch::Mlp => {
                let (model, report) = sumreward_core::reward::train_reward_model(dataset, split, self.encoder, self.encoder_spec.clone(), &self.cfg)?;
                self.training.lock().expect("no poisoned lock").push((split.fold_index, report));
                let model = LoadedModel::Mlp(model);
                let f = fixed_scorer(&ScorerSpec::Learned(PathBuf::new()), Some(self.encoder), Some(&model), "")?;
                ScoreTable::compute(&test, f.as_ref(), self.jobs)?
            }
            Arch::Simred => {
                let (model, report) =
                    sumreward_core::reward::train_simred_model(dataset, split, self.encoder, self.encoder_spec.clone(), self.alpha, &self.cfg)?;
                self.training.lock().expect("no poisoned lock").push((split.fold_index, report));
                let model = LoadedModel::SimRed(model);
                let f = fixed_scorer(&ScorerSpec::Learned(PathBuf::new()), Some(self.encoder), Some(&model), "")?;
                ScoreTable::compute(&test, f.as_ref(), self.jobs)?
            }
        };
        self.scores.lock().expect("no poisoned lock").extend(table.clone());
        Ok(Box::new(table))
    }
}

