//! Reference-based baselines: ROUGE-N, summary-level ROUGE-L, ROUGE-SU4,
//! add-one smoothed BLEU and cosine similarity.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;
use crate::text::{self, TokenizedText};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("vector lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

/// Precision, recall and their harmonic mean.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl MetricScore {
    pub fn from_pr(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        Self { precision, recall, f1 }
    }

    fn from_counts(hits: usize, cand_total: usize, ref_total: usize) -> Self {
        if cand_total == 0 || ref_total == 0 {
            return Self::default();
        }
        Self::from_pr(hits as f64 / cand_total as f64, hits as f64 / ref_total as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RougeVariant {
    /// Clipped n-gram overlap of the given order.
    N(usize),
    /// Summary-level union LCS.
    L,
    /// Skip-bigrams with gap at most 4, pooled with unigrams.
    SU4,
}

pub fn rouge(candidate: &TokenizedText, reference: &TokenizedText, variant: RougeVariant) -> MetricScore {
    if candidate.is_empty() || reference.is_empty() {
        return MetricScore::default();
    }
    match variant {
        RougeVariant::N(0) => MetricScore::default(),
        RougeVariant::N(n) => rouge_n(candidate.flat_tokens(), reference.flat_tokens(), n),
        RougeVariant::L => rouge_l(candidate.sentences(), reference.sentences()),
        RougeVariant::SU4 => rouge_su(candidate, reference, 4),
    }
}

fn rouge_n(cand: &[String], reference: &[String], n: usize) -> MetricScore {
    // n >= 1 here, so ngrams cannot fail.
    let (Ok(c), Ok(r)) = (text::ngrams(cand, n), text::ngrams(reference, n)) else {
        return MetricScore::default();
    };
    MetricScore::from_counts(c.clipped_overlap(&r), c.total(), r.total())
}

fn rouge_su(cand: &TokenizedText, reference: &TokenizedText, max_gap: usize) -> MetricScore {
    let bag = |t: &TokenizedText| {
        let mut skip = text::NGramBag::new(2);
        for s in t.sentences() {
            skip.merge(text::skip_bigrams(s, max_gap));
        }
        let uni = text::ngrams(t.flat_tokens(), 1).unwrap_or_else(|_| text::NGramBag::new(1));
        (skip, uni)
    };
    let (cs, cu) = bag(cand);
    let (rs, ru) = bag(reference);
    let hits = cs.clipped_overlap(&rs) + cu.clipped_overlap(&ru);
    MetricScore::from_counts(hits, cs.total() + cu.total(), rs.total() + ru.total())
}

/// LCS dynamic-programming table, `(a.len()+1) x (b.len()+1)`.
fn lcs_table(a: &[String], b: &[String]) -> Vec<Vec<usize>> {
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            t[i][j] = if a[i - 1] == b[j - 1] { t[i - 1][j - 1] + 1 } else { t[i - 1][j].max(t[i][j - 1]) };
        }
    }
    t
}

pub fn lcs_length(a: &[String], b: &[String]) -> usize {
    lcs_table(a, b)[a.len()][b.len()]
}

/// Positions in `reference` of one longest common subsequence with `candidate`.
fn lcs_reference_positions(candidate: &[String], reference: &[String]) -> Vec<usize> {
    let t = lcs_table(candidate, reference);
    let (mut i, mut j) = (candidate.len(), reference.len());
    let mut out = Vec::new();
    while i > 0 && j > 0 {
        if candidate[i - 1] == reference[j - 1] {
            out.push(j - 1);
            i -= 1;
            j -= 1;
        } else if t[i - 1][j] >= t[i][j - 1] {
            i -= 1;
        } else {
            j -= 1;
        }
    }
    out.reverse();
    out
}

/// Summary-level ROUGE-L: for each reference sentence, the union of its LCS
/// positions against every candidate sentence; hits are clipped by the
/// remaining token counts on both sides.
fn rouge_l(cand: &[Vec<String>], reference: &[Vec<String>]) -> MetricScore {
    fn count(sents: &[Vec<String>]) -> BTreeMap<&str, usize> {
        let mut m = BTreeMap::new();
        for t in sents.iter().flatten() {
            *m.entry(t.as_str()).or_insert(0) += 1;
        }
        m
    }
    let mut cand_left = count(cand);
    let mut ref_left = count(reference);
    let mut hits = 0usize;
    for r in reference {
        let mut union: Vec<usize> = cand.iter().flat_map(|c| lcs_reference_positions(c, r)).collect();
        union.sort_unstable();
        union.dedup();
        for pos in union {
            let tok = r[pos].as_str();
            let (Some(c), Some(rl)) = (cand_left.get_mut(tok), ref_left.get_mut(tok)) else {
                continue;
            };
            if *c > 0 && *rl > 0 {
                *c -= 1;
                *rl -= 1;
                hits += 1;
            }
        }
    }
    let cand_total = cand.iter().map(Vec::len).sum();
    let ref_total = reference.iter().map(Vec::len).sum();
    MetricScore::from_counts(hits, cand_total, ref_total)
}

/// Smoothed sentence BLEU: geometric mean of `(matches+1)/(total+1)` for
/// orders `1..=max_n`, times the brevity penalty `exp(min(0, 1 - |ref|/|cand|))`.
pub fn bleu(candidate: &[String], reference: &[String], max_n: usize) -> f64 {
    if candidate.is_empty() || max_n == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let (Ok(c), Ok(r)) = (text::ngrams(candidate, n), text::ngrams(reference, n)) else {
            return 0.0;
        };
        let p = (c.clipped_overlap(&r) as f64 + 1.0) / (c.total() as f64 + 1.0);
        log_sum += libm::log(p);
    }
    let ratio = reference.len() as f64 / candidate.len() as f64;
    let bp = libm::exp(f64::min(0.0, 1.0 - ratio));
    (bp * libm::exp(log_sum / max_n as f64)).clamp(0.0, 1.0)
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::LengthMismatch(a.len(), b.len()));
    }
    Ok(linalg::cosine(a, b))
}

/// Every baseline the CLI reports for one candidate/reference pair (F1 for ROUGE).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSuite {
    pub rouge1: f64,
    pub rouge2: f64,
    #[serde(rename = "rougeL")]
    pub rouge_l: f64,
    #[serde(rename = "rougeSU4")]
    pub rouge_su4: f64,
    pub bleu1: f64,
    pub bleu2: f64,
    pub bleu3: f64,
    pub bleu4: f64,
    pub bleu5: f64,
}

impl MetricSuite {
    pub fn compute(candidate: &TokenizedText, reference: &TokenizedText) -> Self {
        let (c, r) = (candidate.flat_tokens(), reference.flat_tokens());
        Self {
            rouge1: rouge(candidate, reference, RougeVariant::N(1)).f1,
            rouge2: rouge(candidate, reference, RougeVariant::N(2)).f1,
            rouge_l: rouge(candidate, reference, RougeVariant::L).f1,
            rouge_su4: rouge(candidate, reference, RougeVariant::SU4).f1,
            bleu1: bleu(c, r, 1),
            bleu2: bleu(c, r, 2),
            bleu3: bleu(c, r, 3),
            bleu4: bleu(c, r, 4),
            bleu5: bleu(c, r, 5),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::Preprocess;

    fn tt(s: &str) -> TokenizedText {
        TokenizedText::from_text(s, Preprocess::NONE)
    }

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    const ALL: [RougeVariant; 5] = [RougeVariant::N(1), RougeVariant::N(2), RougeVariant::N(3), RougeVariant::L, RougeVariant::SU4];

    #[test]
    fn identity_and_disjoint() {
        let a = tt("The cat sat on the mat. It was happy.");
        let b = tt("Dogs bark loudly.");
        for v in ALL {
            assert_eq!(rouge(&a, &a, v).f1, 1.0, "{v:?}");
            assert_eq!(rouge(&a, &b, v).f1, 0.0, "{v:?}");
            assert_eq!(rouge(&TokenizedText::default(), &a, v), MetricScore::default());
        }
    }

    #[test]
    fn rouge1_hand_count() {
        let s = rouge(&tt("the cat sat"), &tt("the cat ate"), RougeVariant::N(1));
        for x in [s.precision, s.recall, s.f1] {
            assert!((x - 2.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn overlap_is_clipped() {
        let r = tt("cat dog");
        let once = rouge(&tt("cat"), &r, RougeVariant::N(1));
        let many = rouge(&tt("cat cat cat"), &r, RougeVariant::N(1));
        assert_eq!(once.recall, many.recall);
        assert!(many.precision < once.precision);
    }

    #[test]
    fn summary_level_lcs_union() {
        // Reference sentence "w1 w2 w3 w4 w5", candidates "w1 w2 w6 w7 w8" and
        // "w1 w3 w8 w9 w5": union LCS is w1 w2 w3 w5 (4 of 5 words).
        let reference = TokenizedText::from_sentences([toks("w1 w2 w3 w4 w5")]);
        let cand = TokenizedText::from_sentences([toks("w1 w2 w6 w7 w8"), toks("w1 w3 w8 w9 w5")]);
        let s = rouge(&cand, &reference, RougeVariant::L);
        assert!((s.recall - 4.0 / 5.0).abs() < 1e-15);
        assert!((s.precision - 4.0 / 10.0).abs() < 1e-15);
        // Duplicated reference sentences cannot push precision above one.
        let dup_ref = TokenizedText::from_sentences([toks("a b"), toks("a b")]);
        let s = rouge(&TokenizedText::from_sentences([toks("a b")]), &dup_ref, RougeVariant::L);
        assert_eq!(s.precision, 1.0);
        assert_eq!(s.recall, 0.5);
    }

    #[test]
    fn su4_hand_count() {
        // cand: a b c -> skip {ab, ac, bc}, unigrams {a, b, c}; ref: a c -> {ac}, {a, c}.
        let s = rouge(&tt("a b c"), &tt("a c"), RougeVariant::SU4);
        assert!((s.precision - 3.0 / 6.0).abs() < 1e-15);
        assert!((s.recall - 3.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn bleu_cases() {
        let a = toks("the quick brown fox jumps");
        for n in 1..=5 {
            assert!((bleu(&a, &a, n) - 1.0).abs() < 1e-15);
        }
        let d = bleu(&toks("a b c d"), &toks("e f g h"), 1);
        assert!((d - 0.2).abs() < 1e-15);
        assert_eq!(bleu(&[], &a, 4), 0.0);
        // Short candidate is penalised: exp(1 - 5/1) * (1+1)/(1+1).
        let short = bleu(&toks("the"), &a, 1);
        assert!((short - libm::exp(-4.0)).abs() < 1e-15);
    }

    #[test]
    fn cosine_cases() {
        assert!((cosine_similarity(&[1.0, 1.0], &[1.0, 0.0]).unwrap() - core::f64::consts::SQRT_2 / 2.0).abs() < 1e-15);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 3.0]).unwrap(), 0.0);
        assert!((cosine_similarity(&[2.0, -1.0], &[2.0, -1.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine_similarity(&[1.0], &[1.0, 2.0]), Err(MetricError::LengthMismatch(1, 2)));
    }

    #[test]
    fn suite_identity() {
        let a = tt("Officials said the bridge will reopen. Traffic resumed.");
        let s = MetricSuite::compute(&a, &a);
        for v in [s.rouge1, s.rouge2, s.rouge_l, s.rouge_su4, s.bleu1, s.bleu2, s.bleu3, s.bleu4, s.bleu5] {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }
}
