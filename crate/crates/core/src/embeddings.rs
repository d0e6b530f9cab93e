//! Word vectors, power-mean sentence encodings and precomputed embeddings.
//!
//! A sentence is encoded by the elementwise power means of its in-vocabulary
//! word vectors, one mean per configured `p`, concatenated in order. A text
//! is the arithmetic mean of its sentence encodings, so it has no trainable
//! parameters and does not depend on sentence order.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;
use core::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;
use crate::text::{self, Preprocess};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmbeddingError {
    #[error("embedding dimension must be at least 1")]
    ZeroDimension,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("unparsable float {0:?}")]
    BadFloat(String),
    #[error("word {0:?} has no vector components")]
    MissingVector(String),
    #[error("vector for {0:?} contains a non-finite value")]
    NonFinite(String),
    #[error("duplicate embedding id {0:?}")]
    DuplicateId(String),
    #[error("no embedding for id {0:?}")]
    MissingId(String),
    #[error("power mean of an empty list")]
    EmptyInput,
    #[error("text has no sentences")]
    EmptyText,
    #[error("invalid p value {0:?}")]
    BadPValue(String),
    #[error("p values must be a nonempty list without duplicates")]
    BadPValueList,
    #[error("this encoder cannot {0}")]
    Unsupported(&'static str),
    #[error("line {line}: {source}")]
    Line {
        line: usize,
        #[source]
        source: Box<EmbeddingError>,
    },
}

impl EmbeddingError {
    pub fn at_line(self, line: usize) -> Self {
        EmbeddingError::Line { line, source: Box::new(self) }
    }
}

/// Word to vector lookup with a fixed dimension.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

/// Parses a `word v1 ... vd` line. Blank lines yield `None`.
pub fn parse_word_vector_line(line: &str) -> Result<Option<(&str, Vec<f64>)>, EmbeddingError> {
    let mut fields = line.split_whitespace();
    let Some(word) = fields.next() else {
        return Ok(None);
    };
    let vector = fields
        .map(|f| f.parse::<f64>().map_err(|_| EmbeddingError::BadFloat(String::from(f))))
        .collect::<Result<Vec<f64>, _>>()?;
    if vector.is_empty() {
        return Err(EmbeddingError::MissingVector(String::from(word)));
    }
    if !linalg::all_finite(&vector) {
        return Err(EmbeddingError::NonFinite(String::from(word)));
    }
    Ok(Some((word, vector)))
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Result<Self, EmbeddingError> {
        if dim == 0 {
            return Err(EmbeddingError::ZeroDimension);
        }
        Ok(Self { dim, vectors: BTreeMap::new() })
    }

    /// Parses a whole word-vector text; the first line fixes the dimension.
    pub fn from_text(text: &str, vocab_limit: Option<usize>) -> Result<Self, EmbeddingError> {
        let mut table: Option<Self> = None;
        for (i, line) in text.lines().enumerate() {
            if vocab_limit.is_some_and(|cap| table.as_ref().map_or(0, Self::len) >= cap) {
                break;
            }
            let Some((word, vector)) = parse_word_vector_line(line).map_err(|e| e.at_line(i + 1))? else {
                continue;
            };
            let t = match table.as_mut() {
                Some(t) => t,
                None => table.insert(Self::new(vector.len())?),
            };
            t.insert(word, vector).map_err(|e| e.at_line(i + 1))?;
        }
        Ok(table.unwrap_or_default())
    }

    /// Inserts a vector; the first occurrence of a word wins.
    /// Returns whether the word was new.
    pub fn insert(&mut self, word: &str, vector: Vec<f64>) -> Result<bool, EmbeddingError> {
        if vector.len() != self.dim {
            return Err(EmbeddingError::DimensionMismatch { expected: self.dim, found: vector.len() });
        }
        if !linalg::all_finite(&vector) {
            return Err(EmbeddingError::NonFinite(String::from(word)));
        }
        if self.vectors.contains_key(word) {
            return Ok(false);
        }
        self.vectors.insert(String::from(word), vector);
        Ok(true)
    }

    /// Zero for an empty table that was never given a vector.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(word).map(Vec::as_slice)
    }
}

/// Exponent of a power mean: `-inf` (min), `+inf` (max) or a finite real.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PValue {
    NegInf,
    PosInf,
    Finite(f64),
}

impl fmt::Display for PValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PValue::NegInf => f.write_str("-inf"),
            PValue::PosInf => f.write_str("inf"),
            PValue::Finite(p) => write!(f, "{p}"),
        }
    }
}

impl FromStr for PValue {
    type Err = EmbeddingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        match t.to_ascii_lowercase().as_str() {
            "-inf" | "-infinity" => return Ok(PValue::NegInf),
            "inf" | "+inf" | "infinity" | "+infinity" => return Ok(PValue::PosInf),
            _ => {}
        }
        match t.parse::<f64>() {
            Ok(p) if p.is_finite() => Ok(PValue::Finite(p)),
            _ => Err(EmbeddingError::BadPValue(String::from(s))),
        }
    }
}

impl Serialize for PValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PValue {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Ordered, duplicate-free list of power-mean exponents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<PValue>", into = "Vec<PValue>")]
pub struct PMeansConfig {
    p_values: Vec<PValue>,
}

impl PMeansConfig {
    pub fn new(p_values: Vec<PValue>) -> Result<Self, EmbeddingError> {
        let dup = p_values.iter().enumerate().any(|(i, p)| p_values[..i].contains(p));
        if p_values.is_empty() || dup {
            return Err(EmbeddingError::BadPValueList);
        }
        Ok(Self { p_values })
    }

    /// Parses a comma-separated list such as `-inf,inf,1,2`.
    pub fn parse(list: &str) -> Result<Self, EmbeddingError> {
        Self::new(list.split(',').map(str::parse).collect::<Result<_, _>>()?)
    }

    pub fn p_values(&self) -> &[PValue] {
        &self.p_values
    }

    /// Length of a sentence encoding for word vectors of dimension `dim`.
    pub fn output_dim(&self, dim: usize) -> usize {
        dim * self.p_values.len()
    }
}

impl Default for PMeansConfig {
    fn default() -> Self {
        Self { p_values: vec![PValue::NegInf, PValue::PosInf, PValue::Finite(1.0), PValue::Finite(2.0)] }
    }
}

impl TryFrom<Vec<PValue>> for PMeansConfig {
    type Error = EmbeddingError;

    fn try_from(v: Vec<PValue>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<PMeansConfig> for Vec<PValue> {
    fn from(c: PMeansConfig) -> Self {
        c.p_values
    }
}

impl fmt::Display for PMeansConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.p_values.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

/// Elementwise power mean of equal-length vectors.
///
/// `p = 1` is the signed arithmetic mean and `±inf` the elementwise
/// max/min. Any other finite `p` is taken over magnitudes,
/// `(mean |z|^p)^(1/p)`, which makes `p = 2` the root mean square; `p = 0`
/// is the geometric mean of magnitudes.
pub fn power_mean<V: AsRef<[f64]>>(vectors: &[V], p: PValue) -> Result<Vec<f64>, EmbeddingError> {
    let first = vectors.first().ok_or(EmbeddingError::EmptyInput)?.as_ref();
    let dim = first.len();
    if let Some(bad) = vectors.iter().find(|v| v.as_ref().len() != dim) {
        return Err(EmbeddingError::DimensionMismatch { expected: dim, found: bad.as_ref().len() });
    }
    let n = vectors.len() as f64;
    let column = |j: usize| vectors.iter().map(move |v| v.as_ref()[j]);
    let out = (0..dim)
        .map(|j| match p {
            PValue::NegInf => column(j).fold(f64::INFINITY, f64::min),
            PValue::PosInf => column(j).fold(f64::NEG_INFINITY, f64::max),
            PValue::Finite(1.0) => column(j).sum::<f64>() / n,
            PValue::Finite(2.0) => libm::sqrt(column(j).map(|z| z * z).sum::<f64>() / n),
            PValue::Finite(0.0) => libm::exp(column(j).map(|z| libm::log(libm::fabs(z))).sum::<f64>() / n),
            PValue::Finite(q) => {
                let m = column(j).map(|z| libm::pow(libm::fabs(z), q)).sum::<f64>() / n;
                libm::pow(m, 1.0 / q)
            }
        })
        .map(|x| if x.is_finite() { x } else { 0.0 })
        .collect();
    Ok(out)
}

/// Where an embedding came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingSource {
    Pmeans,
    External,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextEmbedding {
    pub vector: Vec<f64>,
    pub source: EmbeddingSource,
}

/// Encodes one tokenized sentence. Out-of-vocabulary tokens are skipped;
/// the second value is `false` when nothing was in vocabulary, in which
/// case the embedding is all zeros.
pub fn encode_sentence_checked(tokens: &[String], table: &EmbeddingTable, cfg: &PMeansConfig) -> (TextEmbedding, bool) {
    let words: Vec<&[f64]> = tokens.iter().filter_map(|t| table.get(t)).collect();
    if words.is_empty() {
        let vector = vec![0.0; cfg.output_dim(table.dim())];
        return (TextEmbedding { vector, source: EmbeddingSource::Pmeans }, false);
    }
    let mut vector = Vec::with_capacity(cfg.output_dim(table.dim()));
    for &p in cfg.p_values() {
        // Inputs are non-empty and share the table dimension.
        vector.extend(power_mean(&words, p).unwrap_or_default());
    }
    (TextEmbedding { vector, source: EmbeddingSource::Pmeans }, true)
}

pub fn encode_sentence(tokens: &[String], table: &EmbeddingTable, cfg: &PMeansConfig) -> TextEmbedding {
    encode_sentence_checked(tokens, table, cfg).0
}

/// Mean of the sentence encodings of a text.
pub fn encode_text(sentences: &[Vec<String>], table: &EmbeddingTable, cfg: &PMeansConfig) -> Result<TextEmbedding, EmbeddingError> {
    let encoded: Vec<Vec<f64>> = sentences.iter().map(|s| encode_sentence(s, table, cfg).vector).collect();
    let vector = linalg::mean_vector(encoded.iter().map(Vec::as_slice)).ok_or(EmbeddingError::EmptyText)?;
    Ok(TextEmbedding { vector, source: EmbeddingSource::Pmeans })
}

/// Id of a document in a precomputed-embedding file.
pub fn document_id(article_id: &str) -> String {
    String::from(article_id)
}

/// Id of a summary in a precomputed-embedding file.
pub fn summary_id(article_id: &str, index: usize) -> String {
    format!("{article_id}#{index}")
}

/// Embeddings produced by an external encoder, keyed by id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PrecomputedEmbeddings {
    dim: usize,
    map: BTreeMap<String, TextEmbedding>,
}

impl PrecomputedEmbeddings {
    pub fn insert(&mut self, id: String, vector: Vec<f64>) -> Result<(), EmbeddingError> {
        if vector.is_empty() {
            return Err(EmbeddingError::ZeroDimension);
        }
        if !linalg::all_finite(&vector) {
            return Err(EmbeddingError::NonFinite(id));
        }
        if self.map.is_empty() {
            self.dim = vector.len();
        } else if vector.len() != self.dim {
            return Err(EmbeddingError::DimensionMismatch { expected: self.dim, found: vector.len() });
        }
        if self.map.contains_key(&id) {
            return Err(EmbeddingError::DuplicateId(id));
        }
        self.map.insert(id, TextEmbedding { vector, source: EmbeddingSource::External });
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&TextEmbedding> {
        self.map.get(id)
    }

    fn lookup(&self, id: String) -> Result<Vec<f64>, EmbeddingError> {
        match self.map.get(&id) {
            Some(e) => Ok(e.vector.clone()),
            None => Err(EmbeddingError::MissingId(id)),
        }
    }
}

/// Anything that can turn documents and summaries into fixed-size vectors.
pub trait TextEncoder {
    /// Length of every vector this encoder returns.
    fn dim(&self) -> usize;

    fn encode_document(&self, article_id: &str, text: &str) -> Result<Vec<f64>, EmbeddingError>;

    fn encode_summary(&self, article_id: &str, index: usize, text: &str) -> Result<Vec<f64>, EmbeddingError>;

    /// Per-sentence vectors of a text, for rewards that look inside texts.
    fn sentence_embeddings(&self, _text: &str) -> Result<Vec<Vec<f64>>, EmbeddingError> {
        Err(EmbeddingError::Unsupported("produce sentence embeddings"))
    }
}

/// Power-mean encoder over a word-vector table.
///
/// Counts sentences that had no in-vocabulary word.
#[derive(Debug)]
pub struct PMeansEncoder<'a> {
    table: &'a EmbeddingTable,
    cfg: PMeansConfig,
    prep: Preprocess,
    oov_sentences: AtomicUsize,
}

impl<'a> PMeansEncoder<'a> {
    pub fn new(table: &'a EmbeddingTable, cfg: PMeansConfig) -> Self {
        Self { table, cfg, prep: Preprocess::ENCODER, oov_sentences: AtomicUsize::new(0) }
    }

    pub fn with_preprocess(mut self, prep: Preprocess) -> Self {
        self.prep = prep;
        self
    }

    pub fn config(&self) -> &PMeansConfig {
        &self.cfg
    }

    pub fn table(&self) -> &EmbeddingTable {
        self.table
    }

    /// Number of all-OOV sentences encoded so far.
    pub fn oov_sentences(&self) -> usize {
        self.oov_sentences.load(Ordering::Relaxed)
    }

    pub fn tokenize(&self, text: &str) -> Vec<Vec<String>> {
        text::split_sentences(text)
            .iter()
            .map(|s| text::tokenize_and_preprocess(s, self.prep))
            .filter(|t| !t.is_empty())
            .collect()
    }

    pub fn encode_tokens(&self, tokens: &[String]) -> Vec<f64> {
        let (emb, any_known) = encode_sentence_checked(tokens, self.table, &self.cfg);
        if !any_known {
            self.oov_sentences.fetch_add(1, Ordering::Relaxed);
        }
        emb.vector
    }

    fn encode(&self, text: &str) -> Result<Vec<f64>, EmbeddingError> {
        let sents = self.sentence_embeddings(text)?;
        linalg::mean_vector(sents.iter().map(Vec::as_slice)).ok_or(EmbeddingError::EmptyText)
    }
}

impl TextEncoder for PMeansEncoder<'_> {
    fn dim(&self) -> usize {
        self.cfg.output_dim(self.table.dim())
    }

    fn encode_document(&self, _article_id: &str, text: &str) -> Result<Vec<f64>, EmbeddingError> {
        self.encode(text)
    }

    fn encode_summary(&self, _article_id: &str, _index: usize, text: &str) -> Result<Vec<f64>, EmbeddingError> {
        self.encode(text)
    }

    fn sentence_embeddings(&self, text: &str) -> Result<Vec<Vec<f64>>, EmbeddingError> {
        let sents: Vec<Vec<f64>> = self.tokenize(text).iter().map(|t| self.encode_tokens(t)).collect();
        if sents.is_empty() {
            return Err(EmbeddingError::EmptyText);
        }
        Ok(sents)
    }
}

impl TextEncoder for PrecomputedEmbeddings {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encode_document(&self, article_id: &str, _text: &str) -> Result<Vec<f64>, EmbeddingError> {
        self.lookup(document_id(article_id))
    }

    fn encode_summary(&self, article_id: &str, index: usize, _text: &str) -> Result<Vec<f64>, EmbeddingError> {
        self.lookup(summary_id(article_id, index))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> EmbeddingTable {
        EmbeddingTable::from_text("cat 1 -2 3\ndog 0.5 0.5 -1\n", None).unwrap()
    }

    #[test]
    fn table_loading() {
        let t = table();
        assert_eq!((t.len(), t.dim()), (2, 3));
        let capped = EmbeddingTable::from_text("cat 1 2 3\ndog 4 5 6\n", Some(1)).unwrap();
        assert_eq!(capped.len(), 1);
        assert!(capped.get("cat").is_some());
        let err = EmbeddingTable::from_text("a 1 2 3 4\nb 1 2 3\n", None).unwrap_err();
        assert_eq!(err, EmbeddingError::DimensionMismatch { expected: 4, found: 3 }.at_line(2));
        assert!(matches!(EmbeddingTable::from_text("a 1 x\n", None), Err(EmbeddingError::Line { line: 1, .. })));
        let dup = EmbeddingTable::from_text("a 1\na 2\n", None).unwrap();
        assert_eq!(dup.get("a"), Some(&[1.0][..]));
    }

    #[test]
    fn power_mean_closed_forms() {
        let v = [vec![1.0, 3.0], vec![3.0, 1.0]];
        assert_eq!(power_mean(&v, PValue::Finite(1.0)).unwrap(), vec![2.0, 2.0]);
        assert_eq!(power_mean(&v, PValue::PosInf).unwrap(), vec![3.0, 3.0]);
        assert_eq!(power_mean(&v, PValue::NegInf).unwrap(), vec![1.0, 1.0]);
        assert_eq!(power_mean(&[vec![1.0], vec![-1.0]], PValue::Finite(2.0)).unwrap(), vec![1.0]);
        let three = power_mean(&[vec![1.0], vec![2.0]], PValue::Finite(3.0)).unwrap()[0];
        assert!((three - libm::cbrt(4.5)).abs() < 1e-12);
        assert_eq!(power_mean::<Vec<f64>>(&[], PValue::PosInf), Err(EmbeddingError::EmptyInput));
        assert!(matches!(power_mean(&[vec![1.0], vec![1.0, 2.0]], PValue::PosInf), Err(EmbeddingError::DimensionMismatch { .. })));
    }

    #[test]
    fn p_value_parsing() {
        let cfg = PMeansConfig::parse("-inf,inf,1,2").unwrap();
        assert_eq!(cfg, PMeansConfig::default());
        assert_eq!(cfg.to_string(), "-inf,inf,1,2");
        assert_eq!(PMeansConfig::parse("1,1"), Err(EmbeddingError::BadPValueList));
        assert!(PMeansConfig::parse("1,x").is_err());
        assert!(PMeansConfig::new(vec![]).is_err());
    }

    #[test]
    fn single_word_sentence() {
        let t = table();
        let cfg = PMeansConfig::default();
        let e = encode_sentence(&[String::from("cat")], &t, &cfg);
        // min, max, mean repeat the vector; RMS gives its magnitudes.
        assert_eq!(e.vector, vec![1.0, -2.0, 3.0, 1.0, -2.0, 3.0, 1.0, -2.0, 3.0, 1.0, 2.0, 3.0]);
        assert_eq!(e.source, EmbeddingSource::Pmeans);
    }

    #[test]
    fn all_oov_is_zero_and_counted() {
        let t = table();
        let enc = PMeansEncoder::new(&t, PMeansConfig::default());
        let v = enc.encode_document("d", "Unknown words here.").unwrap();
        assert_eq!(v, vec![0.0; 12]);
        assert_eq!(enc.oov_sentences(), 1);
        assert_eq!(enc.encode_document("d", "  "), Err(EmbeddingError::EmptyText));
    }

    #[test]
    fn text_is_mean_of_sentences() {
        let t = table();
        let cfg = PMeansConfig::default();
        let s1 = vec![String::from("cat")];
        let s2 = vec![String::from("dog"), String::from("cat")];
        let u = encode_sentence(&s1, &t, &cfg).vector;
        let v = encode_sentence(&s2, &t, &cfg).vector;
        let both = encode_text(&[s1.clone(), s2.clone()], &t, &cfg).unwrap().vector;
        let swapped = encode_text(&[s2, s1.clone()], &t, &cfg).unwrap().vector;
        for i in 0..u.len() {
            assert!((both[i] - (u[i] + v[i]) / 2.0).abs() < 1e-15);
        }
        assert_eq!(both, swapped);
        assert_eq!(encode_text(&[s1], &t, &cfg).unwrap().vector, u);
        assert_eq!(encode_text(&[], &t, &cfg), Err(EmbeddingError::EmptyText));
    }

    #[test]
    fn precomputed_rules() {
        let mut p = PrecomputedEmbeddings::default();
        p.insert("a".into(), vec![1.0, 2.0]).unwrap();
        p.insert("a#0".into(), vec![0.0, 1.0]).unwrap();
        assert_eq!(p.insert("a".into(), vec![1.0, 2.0]), Err(EmbeddingError::DuplicateId("a".into())));
        assert!(matches!(p.insert("b".into(), vec![1.0]), Err(EmbeddingError::DimensionMismatch { .. })));
        assert!(matches!(p.insert("c".into(), vec![f64::NAN, 1.0]), Err(EmbeddingError::NonFinite(_))));
        assert_eq!(p.encode_summary("a", 0, "").unwrap(), vec![0.0, 1.0]);
        assert_eq!(p.encode_summary("a", 1, ""), Err(EmbeddingError::MissingId("a#1".into())));
        assert!(p.sentence_embeddings("x").is_err());
    }
}
