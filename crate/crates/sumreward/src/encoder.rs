//! Encoder selection shared by the subcommands.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Serialize;
use sumreward_core::embeddings::{EmbeddingError, PMeansEncoder, PrecomputedEmbeddings, TextEncoder};
use sumreward_core::reward::EncoderSpec;
use sumreward_core::{EmbeddingTable, PMeansConfig};

use crate::error::{Error, Result};
use crate::io;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    Pmeans,
    External,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EncoderArgs {
    /// Text encoder; inferred from --vectors / --embeddings when omitted.
    #[arg(long, value_enum)]
    pub encoder: Option<EncoderKind>,
    /// Word-vector file (`word v1 ... vd` per line).
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    /// Power-mean exponents, e.g. "-inf,inf,1,2".
    #[arg(long, default_value = "-inf,inf,1,2", allow_hyphen_values = true)]
    pub pvalues: String,
    /// Read at most this many word vectors, in file order.
    #[arg(long)]
    pub vocab_limit: Option<usize>,
    /// Precomputed embeddings (`{"id", "vector"}` JSON lines).
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
}

impl EncoderArgs {
    pub fn is_empty(&self) -> bool {
        self.encoder.is_none() && self.vectors.is_none() && self.embeddings.is_none()
    }

    /// Input files named by these flags.
    pub fn inputs(&self) -> Vec<PathBuf> {
        self.vectors.iter().chain(&self.embeddings).cloned().collect()
    }

    fn kind(&self) -> Result<EncoderKind> {
        match (self.encoder, &self.vectors, &self.embeddings) {
            (_, Some(_), Some(_)) => Err(Error::Usage("--vectors and --embeddings are mutually exclusive".into())),
            (Some(EncoderKind::Pmeans), None, _) => Err(Error::Usage("--encoder pmeans needs --vectors".into())),
            (Some(EncoderKind::External), _, None) => Err(Error::Usage("--encoder external needs --embeddings".into())),
            (Some(EncoderKind::Pmeans), Some(_), None) | (None, Some(_), None) => Ok(EncoderKind::Pmeans),
            (Some(EncoderKind::External), None, Some(_)) | (None, None, Some(_)) => Ok(EncoderKind::External),
            (None, None, None) => Err(Error::Usage("an encoder is required: pass --vectors or --embeddings".into())),
        }
    }

    pub fn load(&self) -> Result<LoadedEncoder> {
        match self.kind()? {
            EncoderKind::Pmeans => {
                let path = self.vectors.as_deref().expect("checked by kind");
                let cfg = PMeansConfig::parse(&self.pvalues).map_err(|e| Error::Usage(format!("--pvalues: {e}")))?;
                LoadedEncoder::pmeans(path, cfg, self.vocab_limit)
            }
            EncoderKind::External => LoadedEncoder::external(self.embeddings.as_deref().expect("checked by kind")),
        }
    }
}

#[derive(Debug)]
pub enum LoadedEncoder {
    Pmeans { table: EmbeddingTable, cfg: PMeansConfig, spec: EncoderSpec },
    External { embeddings: PrecomputedEmbeddings, spec: EncoderSpec },
}

impl LoadedEncoder {
    pub fn pmeans(path: &Path, cfg: PMeansConfig, vocab_limit: Option<usize>) -> Result<Self> {
        let table = io::load_word_vectors(path, vocab_limit)?;
        let spec = EncoderSpec::Pmeans {
            p_values: cfg.clone(),
            word_dim: table.dim(),
            vectors_sha256: io::sha256_file(path)?,
            vectors_path: Some(path.display().to_string()),
            vocab_limit,
        };
        Ok(LoadedEncoder::Pmeans { table, cfg, spec })
    }

    pub fn external(path: &Path) -> Result<Self> {
        let embeddings = io::load_precomputed(path)?;
        let spec = EncoderSpec::External {
            dim: embeddings.dim(),
            embeddings_sha256: io::sha256_file(path)?,
            embeddings_path: Some(path.display().to_string()),
        };
        Ok(LoadedEncoder::External { embeddings, spec })
    }

    /// Loads the encoder a model was trained with. Flags override the
    /// stored file path; the file must hash to the stored digest.
    pub fn for_spec(spec: &EncoderSpec, args: &EncoderArgs) -> Result<Self> {
        let loaded = match spec {
            EncoderSpec::Pmeans { p_values, vectors_path, vocab_limit, .. } => {
                let path = args.vectors.clone().or_else(|| vectors_path.as_ref().map(PathBuf::from));
                let path = path.ok_or_else(|| Error::Usage("the model's word-vector file is unknown; pass --vectors".into()))?;
                Self::pmeans(&path, p_values.clone(), *vocab_limit)?
            }
            EncoderSpec::External { embeddings_path, .. } => {
                let path = args.embeddings.clone().or_else(|| embeddings_path.as_ref().map(PathBuf::from));
                let path = path.ok_or_else(|| Error::Usage("the model's embedding file is unknown; pass --embeddings".into()))?;
                Self::external(&path)?
            }
        };
        if !loaded.spec().same_encoder(spec) {
            return Err(Error::Data("encoder files differ from the ones the model was trained with".into()));
        }
        Ok(loaded)
    }

    pub fn spec(&self) -> &EncoderSpec {
        match self {
            LoadedEncoder::Pmeans { spec, .. } | LoadedEncoder::External { spec, .. } => spec,
        }
    }

    pub fn encoder(&self) -> ActiveEncoder<'_> {
        match self {
            LoadedEncoder::Pmeans { table, cfg, .. } => ActiveEncoder::Pmeans(PMeansEncoder::new(table, cfg.clone())),
            LoadedEncoder::External { embeddings, .. } => ActiveEncoder::External(embeddings),
        }
    }
}

/// Borrowing view of a [`LoadedEncoder`].
#[derive(Debug)]
pub enum ActiveEncoder<'a> {
    Pmeans(PMeansEncoder<'a>),
    External(&'a PrecomputedEmbeddings),
}

impl ActiveEncoder<'_> {
    fn inner(&self) -> &(dyn TextEncoder + Sync) {
        match self {
            ActiveEncoder::Pmeans(e) => e,
            ActiveEncoder::External(e) => *e,
        }
    }

    /// Sentences whose words all missed the vocabulary, so far.
    pub fn oov_sentences(&self) -> usize {
        match self {
            ActiveEncoder::Pmeans(e) => e.oov_sentences(),
            ActiveEncoder::External(_) => 0,
        }
    }
}

impl TextEncoder for ActiveEncoder<'_> {
    fn dim(&self) -> usize {
        self.inner().dim()
    }

    fn encode_document(&self, article_id: &str, text: &str) -> Result<Vec<f64>, EmbeddingError> {
        self.inner().encode_document(article_id, text)
    }

    fn encode_summary(&self, article_id: &str, index: usize, text: &str) -> Result<Vec<f64>, EmbeddingError> {
        self.inner().encode_summary(article_id, index, text)
    }

    fn sentence_embeddings(&self, text: &str) -> Result<Vec<Vec<f64>>, EmbeddingError> {
        self.inner().sentence_embeddings(text)
    }
}
