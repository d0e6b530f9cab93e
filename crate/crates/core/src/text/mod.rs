//! Sentence splitting, tokenization and n-gram extraction.
//!
//! Everything here is deterministic and rule-based. The stopword and
//! abbreviation lists ship as plain-text resources, one entry per line.

pub mod porter;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

static STOPWORDS_TXT: &str = include_str!("../../resources/stopwords.txt");
static ABBREVIATIONS_TXT: &str = include_str!("../../resources/abbreviations.txt");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TextError {
    #[error("n-gram order must be at least 1")]
    ZeroOrder,
}

fn resource_lines(text: &'static str) -> impl Iterator<Item = &'static str> {
    text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'))
}

/// The bundled English stopword list.
pub fn stopwords() -> impl Iterator<Item = &'static str> {
    resource_lines(STOPWORDS_TXT)
}

/// Abbreviations (lowercase, without the final period) that never end a sentence.
pub fn abbreviations() -> impl Iterator<Item = &'static str> {
    resource_lines(ABBREVIATIONS_TXT)
}

pub fn is_stopword(word: &str) -> bool {
    let lower = word.to_lowercase();
    stopwords().any(|s| s == lower)
}

fn is_abbreviation(word: &str) -> bool {
    let lower = word.to_lowercase();
    abbreviations().any(|a| a == lower)
}

/// Preprocessing switches, applied in the order lowercase, stopword
/// removal, stemming.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Preprocess {
    pub lowercase: bool,
    pub stem: bool,
    pub drop_stopwords: bool,
}

impl Preprocess {
    /// Lowercase, stem and drop stopwords: the defaults for metrics.
    pub const METRIC: Self = Self { lowercase: true, stem: true, drop_stopwords: true };
    /// Lowercase only: the defaults for word-vector encoders.
    pub const ENCODER: Self = Self { lowercase: true, stem: false, drop_stopwords: false };
    pub const NONE: Self = Self { lowercase: false, stem: false, drop_stopwords: false };
}

/// Splits running text into sentences.
///
/// A boundary is a `.`, `!` or `?` (optionally followed by closing quotes or
/// brackets) that is followed by whitespace and then an uppercase letter,
/// or by the end of the text. A period ending a known abbreviation or a
/// single-letter initial is not a boundary.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        let (_, c) = chars[i];
        if !matches!(c, '.' | '!' | '?') {
            i += 1;
            continue;
        }
        let mut end = i + 1;
        while end < chars.len() && matches!(chars[end].1, '.' | '!' | '?') {
            end += 1;
        }
        while end < chars.len() && matches!(chars[end].1, '"' | '\'' | ')' | ']' | '\u{201d}' | '\u{2019}') {
            end += 1;
        }
        let end_byte = chars.get(end).map_or(text.len(), |&(b, _)| b);
        let boundary = if end == chars.len() {
            true
        } else if chars[end].1.is_whitespace() {
            let mut j = end;
            while j < chars.len() && chars[j].1.is_whitespace() {
                j += 1;
            }
            while j < chars.len() && matches!(chars[j].1, '"' | '\'' | '(' | '[' | '\u{201c}' | '\u{2018}') {
                j += 1;
            }
            j == chars.len() || chars[j].1.is_uppercase()
        } else {
            false
        };
        if boundary && c == '.' && ends_with_abbreviation(&text[start..chars[i].0]) {
            i = end;
            continue;
        }
        if boundary {
            let sentence = text[start..end_byte].trim();
            if !sentence.is_empty() {
                out.push(String::from(sentence));
            }
            start = end_byte;
        }
        i = end;
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(String::from(tail));
    }
    out
}

fn ends_with_abbreviation(before_period: &str) -> bool {
    let word = before_period
        .rsplit(|c: char| c.is_whitespace() || matches!(c, '"' | '(' | '['))
        .next()
        .unwrap_or("");
    if word.is_empty() {
        return false;
    }
    let mut letters = word.chars();
    let single_initial = matches!((letters.next(), letters.next()), (Some(c), None) if c.is_uppercase());
    single_initial || is_abbreviation(word)
}

/// Splits on whitespace and punctuation, keeping alphanumeric runs
/// (apostrophes are treated as separators), then applies `prep`.
pub fn tokenize_and_preprocess(sentence: &str, prep: Preprocess) -> Vec<String> {
    sentence
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .filter_map(|raw| {
            let tok = if prep.lowercase { raw.to_lowercase() } else { String::from(raw) };
            if prep.drop_stopwords && is_stopword(&tok) {
                return None;
            }
            Some(if prep.stem { porter::stem(&tok) } else { tok })
        })
        .collect()
}

/// A text as a list of non-empty token lists, one per sentence.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenizedText {
    sentences: Vec<Vec<String>>,
    flat: Vec<String>,
}

impl TokenizedText {
    pub fn from_text(text: &str, prep: Preprocess) -> Self {
        Self::from_sentences(split_sentences(text).iter().map(|s| tokenize_and_preprocess(s, prep)))
    }

    /// Builds from already-tokenized sentences; empty sentences are dropped.
    pub fn from_sentences<I>(sentences: I) -> Self
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let sentences: Vec<Vec<String>> = sentences.into_iter().filter(|s| !s.is_empty()).collect();
        let flat = sentences.iter().flatten().cloned().collect();
        Self { sentences, flat }
    }

    pub fn sentences(&self) -> &[Vec<String>] {
        &self.sentences
    }

    pub fn flat_tokens(&self) -> &[String] {
        &self.flat
    }

    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }
}

/// A multiset of n-grams of a single order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NGramBag {
    n: usize,
    counts: BTreeMap<Vec<String>, usize>,
}

impl NGramBag {
    pub fn new(n: usize) -> Self {
        Self { n, counts: BTreeMap::new() }
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn add(&mut self, gram: Vec<String>) {
        debug_assert_eq!(gram.len(), self.n);
        *self.counts.entry(gram).or_insert(0) += 1;
    }

    /// Adds every count from `other` into `self`.
    pub fn merge(&mut self, other: NGramBag) {
        for (k, v) in other.counts {
            *self.counts.entry(k).or_insert(0) += v;
        }
    }

    pub fn count(&self, gram: &[String]) -> usize {
        self.counts.get(gram).copied().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[String], usize)> {
        self.counts.iter().map(|(k, &v)| (k.as_slice(), v))
    }

    /// Size of the multiset intersection (sum of per-gram minimum counts).
    pub fn clipped_overlap(&self, other: &NGramBag) -> usize {
        self.counts.iter().map(|(k, &v)| v.min(other.counts.get(k).copied().unwrap_or(0))).sum()
    }

    pub fn distinct(&self) -> BTreeSet<&[String]> {
        self.counts.keys().map(Vec::as_slice).collect()
    }
}

/// Sliding-window n-grams; fewer than `n` tokens gives an empty bag.
pub fn ngrams(tokens: &[String], n: usize) -> Result<NGramBag, TextError> {
    if n == 0 {
        return Err(TextError::ZeroOrder);
    }
    let mut bag = NGramBag::new(n);
    for w in tokens.windows(n) {
        bag.add(w.to_vec());
    }
    Ok(bag)
}

/// Ordered token pairs `(t_i, t_j)`, `i < j`, with at most `max_gap` tokens between them.
pub fn skip_bigrams(tokens: &[String], max_gap: usize) -> NGramBag {
    let mut bag = NGramBag::new(2);
    for i in 0..tokens.len() {
        let last = tokens.len().min(i.saturating_add(max_gap).saturating_add(2));
        for j in i + 1..last {
            bag.add(alloc::vec![tokens[i].clone(), tokens[j].clone()]);
        }
    }
    bag
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn splits_plain_sentences() {
        assert_eq!(split_sentences("A cat sat. It slept."), vec!["A cat sat.", "It slept."]);
        assert!(split_sentences("").is_empty());
        assert!(split_sentences("   \n ").is_empty());
    }

    #[test]
    fn abbreviation_does_not_split() {
        assert_eq!(split_sentences("Mr. Smith left. He returned."), vec!["Mr. Smith left.", "He returned."]);
        assert_eq!(split_sentences("J. R. Smith won! Then? Yes."), vec!["J. R. Smith won!", "Then?", "Yes."]);
    }

    #[test]
    fn lowercase_continuation_and_quotes() {
        assert_eq!(split_sentences("It cost 3.5 dollars. ok then."), vec!["It cost 3.5 dollars. ok then."]);
        assert_eq!(split_sentences("He said \"stop.\" Then he left."), vec!["He said \"stop.\"", "Then he left."]);
    }

    #[test]
    fn preprocessing_pipeline() {
        assert_eq!(tokenize_and_preprocess("The cats are running", Preprocess::METRIC), vec!["cat", "run"]);
        assert_eq!(tokenize_and_preprocess("hello", Preprocess::NONE), vec!["hello"]);
        let only_stop = Preprocess { lowercase: false, stem: false, drop_stopwords: true };
        assert!(tokenize_and_preprocess("the of and", only_stop).is_empty());
        assert_eq!(tokenize_and_preprocess("Hi, there!  U.S.", Preprocess::NONE), vec!["Hi", "there", "U", "S"]);
    }

    #[test]
    fn ngram_counts() {
        let bag = ngrams(&toks("a b a b"), 2).unwrap();
        assert_eq!(bag.count(&toks("a b")), 2);
        assert_eq!(bag.count(&toks("b a")), 1);
        assert_eq!(bag.distinct().len(), 2);
        assert!(ngrams(&toks("a"), 2).unwrap().is_empty());
        assert_eq!(ngrams(&toks("x y z x"), 1).unwrap().total(), 4);
        assert_eq!(ngrams(&toks("a"), 0), Err(TextError::ZeroOrder));
    }

    #[test]
    fn skip_bigram_gaps() {
        let bag = skip_bigrams(&toks("a b c"), 4);
        assert_eq!(bag.total(), 3);
        for p in ["a b", "a c", "b c"] {
            assert_eq!(bag.count(&toks(p)), 1);
        }
        let adj = skip_bigrams(&toks("a b c"), 0);
        assert_eq!(adj.total(), 2);
        assert_eq!(adj.count(&toks("a c")), 0);
        assert!(skip_bigrams(&toks("a"), 3).is_empty());
    }

    #[test]
    fn tokenized_text_drops_empty_sentences() {
        let t = TokenizedText::from_text("The of. Cats ran.", Preprocess::METRIC);
        assert_eq!(t.sentences().len(), 1);
        assert_eq!(t.flat_tokens(), &toks("cat ran")[..]);
    }
}
