//! Rated-summary datasets, cross-validation folds and preference pairs.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance when checking a stored average against the ratings' mean.
pub const AVERAGE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CorpusError {
    #[error("rating out of range [-1, 1] in article {article_id}: {value}")]
    RatingOutOfRange { article_id: String, value: f64 },
    #[error("avg_rating {stored} of article {article_id} summary {index} does not match the mean rating {mean}")]
    AverageMismatch { article_id: String, index: usize, stored: f64, mean: f64 },
    #[error("summary {index} of article {article_id} has neither ratings nor avg_rating")]
    MissingRating { article_id: String, index: usize },
    #[error("summary {index} of article {article_id} has empty text")]
    EmptySummaryText { article_id: String, index: usize },
    #[error("article {0} has an empty summaries list")]
    EmptySummaries(String),
    #[error("article id must not be empty")]
    EmptyArticleId,
    #[error("duplicate article_id {0}")]
    DuplicateArticle(String),
    #[error("unknown article_id {0}")]
    UnknownArticle(String),
    #[error("need at least 2 folds, got {0}")]
    TooFewFolds(usize),
    #[error("cannot split {articles} articles into {folds} folds")]
    TooFewArticles { articles: usize, folds: usize },
    #[error("article {article_id} has {count} summaries; preference pairs need at least 2")]
    TooFewSummaries { article_id: String, count: usize },
}

/// One system summary with its per-rater scores and their mean.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatedSummary {
    #[serde(rename = "system")]
    pub system_id: String,
    pub text: String,
    pub ratings: Vec<f64>,
    pub avg_rating: f64,
}

/// A source document with all of its rated summaries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatedArticle {
    pub article_id: String,
    #[serde(rename = "article")]
    pub article_text: String,
    pub summaries: Vec<RatedSummary>,
}

/// Summary record as it appears in a dataset file, before validation.
#[derive(Debug, Clone, Deserialize)]
pub struct RawSummary {
    pub system: String,
    pub text: String,
    #[serde(default)]
    pub ratings: Vec<f64>,
    #[serde(default)]
    pub avg_rating: Option<f64>,
}

/// Article record as it appears in a dataset file, before validation.
#[derive(Debug, Clone, Deserialize)]
pub struct RawArticle {
    pub article_id: String,
    pub article: String,
    pub summaries: Vec<RawSummary>,
}

fn check_range(article_id: &str, value: f64) -> Result<(), CorpusError> {
    if (-1.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(CorpusError::RatingOutOfRange { article_id: String::from(article_id), value })
    }
}

impl RawArticle {
    /// Validates ratings and computes any missing averages.
    pub fn validate(self) -> Result<RatedArticle, CorpusError> {
        if self.article_id.is_empty() {
            return Err(CorpusError::EmptyArticleId);
        }
        if self.summaries.is_empty() {
            return Err(CorpusError::EmptySummaries(self.article_id));
        }
        let id = self.article_id;
        let mut summaries = Vec::with_capacity(self.summaries.len());
        for (index, raw) in self.summaries.into_iter().enumerate() {
            if raw.text.trim().is_empty() {
                return Err(CorpusError::EmptySummaryText { article_id: id, index });
            }
            for &r in &raw.ratings {
                check_range(&id, r)?;
            }
            let avg_rating = match (raw.ratings.is_empty(), raw.avg_rating) {
                (true, None) => return Err(CorpusError::MissingRating { article_id: id, index }),
                (true, Some(stored)) => stored,
                (false, stored) => {
                    let mean = raw.ratings.iter().sum::<f64>() / raw.ratings.len() as f64;
                    if let Some(stored) = stored {
                        check_range(&id, stored)?;
                        if (stored - mean).abs() > AVERAGE_TOLERANCE {
                            return Err(CorpusError::AverageMismatch { article_id: id, index, stored, mean });
                        }
                        stored
                    } else {
                        mean
                    }
                }
            };
            check_range(&id, avg_rating)?;
            summaries.push(RatedSummary { system_id: raw.system, text: raw.text, ratings: raw.ratings, avg_rating });
        }
        Ok(RatedArticle { article_id: id, article_text: self.article, summaries })
    }
}

impl RatedArticle {
    pub fn avg_ratings(&self) -> Vec<f64> {
        self.summaries.iter().map(|s| s.avg_rating).collect()
    }
}

/// A validated collection of rated articles with unique ids.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    articles: Vec<RatedArticle>,
    index: BTreeMap<String, usize>,
}

impl Dataset {
    pub fn new(articles: Vec<RatedArticle>) -> Result<Self, CorpusError> {
        let mut ds = Self::default();
        for a in articles {
            ds.push(a)?;
        }
        Ok(ds)
    }

    pub fn push(&mut self, article: RatedArticle) -> Result<(), CorpusError> {
        if article.summaries.is_empty() {
            return Err(CorpusError::EmptySummaries(article.article_id));
        }
        if self.index.contains_key(&article.article_id) {
            return Err(CorpusError::DuplicateArticle(article.article_id));
        }
        self.index.insert(article.article_id.clone(), self.articles.len());
        self.articles.push(article);
        Ok(())
    }

    pub fn articles(&self) -> &[RatedArticle] {
        &self.articles
    }

    pub fn len(&self) -> usize {
        self.articles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.articles.is_empty()
    }

    pub fn n_summaries(&self) -> usize {
        self.articles.iter().map(|a| a.summaries.len()).sum()
    }

    pub fn get(&self, article_id: &str) -> Option<&RatedArticle> {
        self.index.get(article_id).map(|&i| &self.articles[i])
    }

    /// Looks up every id, failing on the first unknown one.
    pub fn select<'a, I>(&self, ids: I) -> Result<Vec<&RatedArticle>, CorpusError>
    where
        I: IntoIterator<Item = &'a String>,
    {
        ids.into_iter()
            .map(|id| self.get(id).ok_or_else(|| CorpusError::UnknownArticle(id.clone())))
            .collect()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.articles.iter().map(|a| a.article_id.as_str())
    }
}

/// Train/validation/test partition of article ids for one fold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    #[serde(rename = "fold")]
    pub fold_index: usize,
    #[serde(rename = "train")]
    pub train_ids: Vec<String>,
    #[serde(rename = "val")]
    pub val_ids: Vec<String>,
    #[serde(rename = "test")]
    pub test_ids: Vec<String>,
}

impl FoldSplit {
    /// Checks disjointness and that the union is exactly `dataset`'s ids.
    pub fn check_against(&self, dataset: &Dataset) -> Result<(), CorpusError> {
        let mut seen = BTreeSet::new();
        for id in self.train_ids.iter().chain(&self.val_ids).chain(&self.test_ids) {
            if dataset.get(id).is_none() {
                return Err(CorpusError::UnknownArticle(id.clone()));
            }
            if !seen.insert(id.as_str()) {
                return Err(CorpusError::DuplicateArticle(id.clone()));
            }
        }
        if let Some(missing) = dataset.ids().find(|id| !seen.contains(id)) {
            return Err(CorpusError::UnknownArticle(String::from(missing)));
        }
        Ok(())
    }
}

/// Shuffles the article ids once and cuts them into `k` folds.
///
/// Fold `i` tests on the `i`-th contiguous chunk (the first `n mod k`
/// chunks are one longer). The rest, read cyclically from the end of the
/// test chunk, gives `floor(remainder / 5)` validation ids and the
/// remaining training ids, which reproduces 320/80/100 at 500 articles.
pub fn split_folds(dataset: &Dataset, k: usize, seed: u64) -> Result<Vec<FoldSplit>, CorpusError> {
    if k < 2 {
        return Err(CorpusError::TooFewFolds(k));
    }
    let n = dataset.len();
    if n < k {
        return Err(CorpusError::TooFewArticles { articles: n, folds: k });
    }
    let mut ids: Vec<String> = dataset.ids().map(String::from).collect();
    let mut rng = crate::rng_from_seed(seed);
    ids.shuffle(&mut rng);

    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for fold_index in 0..k {
        let size = base + usize::from(fold_index < extra);
        let end = start + size;
        let test_ids = ids[start..end].to_vec();
        let rest: Vec<String> = ids[end..].iter().chain(&ids[..start]).cloned().collect();
        let n_val = rest.len() / 5;
        folds.push(FoldSplit {
            fold_index,
            train_ids: rest[n_val..].to_vec(),
            val_ids: rest[..n_val].to_vec(),
            test_ids,
        });
        start = end;
    }
    Ok(folds)
}

/// `better` has a strictly higher average rating than `worse`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub article_id: String,
    pub better_index: usize,
    pub worse_index: usize,
}

/// One pair per unordered pair of summaries with distinct average ratings,
/// oriented better-first. Ties carry no preference and are skipped.
pub fn enumerate_preference_pairs(article: &RatedArticle) -> Result<Vec<PreferencePair>, CorpusError> {
    let n = article.summaries.len();
    if n < 2 {
        return Err(CorpusError::TooFewSummaries { article_id: article.article_id.clone(), count: n });
    }
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let (ri, rj) = (article.summaries[i].avg_rating, article.summaries[j].avg_rating);
            let (better_index, worse_index) = if ri > rj {
                (i, j)
            } else if rj > ri {
                (j, i)
            } else {
                continue;
            };
            pairs.push(PreferencePair { article_id: article.article_id.clone(), better_index, worse_index });
        }
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::vec;

    pub(crate) fn article(id: &str, ratings: &[f64]) -> RatedArticle {
        RatedArticle {
            article_id: String::from(id),
            article_text: String::from("Some text."),
            summaries: ratings
                .iter()
                .enumerate()
                .map(|(i, &r)| RatedSummary {
                    system_id: format!("sys{i}"),
                    text: format!("summary {i}"),
                    ratings: vec![r],
                    avg_rating: r,
                })
                .collect(),
        }
    }

    fn dataset(n: usize) -> Dataset {
        Dataset::new((0..n).map(|i| article(&format!("a{i}"), &[0.0, 1.0])).collect()).unwrap()
    }

    #[test]
    fn validate_computes_and_checks_average() {
        let raw = RawArticle {
            article_id: "x".into(),
            article: "doc".into(),
            summaries: vec![RawSummary { system: "s".into(), text: "t".into(), ratings: vec![1.0, 0.0], avg_rating: None }],
        };
        assert_eq!(raw.clone().validate().unwrap().summaries[0].avg_rating, 0.5);

        let mut bad = raw.clone();
        bad.summaries[0].avg_rating = Some(0.7);
        assert!(matches!(bad.validate(), Err(CorpusError::AverageMismatch { .. })));

        let mut out = raw.clone();
        out.summaries[0].ratings = vec![];
        out.summaries[0].avg_rating = Some(1.7);
        assert!(matches!(out.validate(), Err(CorpusError::RatingOutOfRange { .. })));

        let mut empty = raw;
        empty.summaries.clear();
        assert!(matches!(empty.validate(), Err(CorpusError::EmptySummaries(_))));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = Dataset::new(vec![article("a", &[0.0]), article("a", &[1.0])]).unwrap_err();
        assert_eq!(err, CorpusError::DuplicateArticle("a".into()));
    }

    #[test]
    fn fold_sizes() {
        for (n, test, val, train) in [(500, 100, 80, 320), (10, 2, 1, 7)] {
            let folds = split_folds(&dataset(n), 5, 7).unwrap();
            assert_eq!(folds.len(), 5);
            for f in &folds {
                assert_eq!((f.test_ids.len(), f.val_ids.len(), f.train_ids.len()), (test, val, train));
            }
        }
        let folds = split_folds(&dataset(11), 5, 1).unwrap();
        let sizes: Vec<usize> = folds.iter().map(|f| f.test_ids.len()).collect();
        assert_eq!(sizes, vec![3, 2, 2, 2, 2]);
    }

    #[test]
    fn fold_errors_and_determinism() {
        assert_eq!(split_folds(&dataset(10), 1, 0), Err(CorpusError::TooFewFolds(1)));
        assert_eq!(split_folds(&dataset(3), 5, 0), Err(CorpusError::TooFewArticles { articles: 3, folds: 5 }));
        let ds = dataset(37);
        assert_eq!(split_folds(&ds, 5, 9).unwrap(), split_folds(&ds, 5, 9).unwrap());
        assert_ne!(split_folds(&ds, 5, 9).unwrap(), split_folds(&ds, 5, 10).unwrap());
    }

    #[test]
    fn pair_enumeration() {
        let pairs = enumerate_preference_pairs(&article("a", &[0.1, 0.2, 0.3, 0.4, 0.5])).unwrap();
        assert_eq!(pairs.len(), 10);
        assert!(enumerate_preference_pairs(&article("a", &[0.5, 0.5])).unwrap().is_empty());
        let pairs = enumerate_preference_pairs(&article("a", &[1.0, 0.5, 0.5])).unwrap();
        assert_eq!(
            pairs.iter().map(|p| (p.better_index, p.worse_index)).collect::<Vec<_>>(),
            vec![(0, 1), (0, 2)]
        );
        let pairs = enumerate_preference_pairs(&article("a", &[-1.0, 1.0])).unwrap();
        assert_eq!((pairs[0].better_index, pairs[0].worse_index), (1, 0));
        assert!(matches!(
            enumerate_preference_pairs(&article("a", &[1.0])),
            Err(CorpusError::TooFewSummaries { count: 1, .. })
        ));
    }
}
