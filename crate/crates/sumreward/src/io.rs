//! Reading and writing the on-disk formats.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sumreward_core::corpus::RawArticle;
use sumreward_core::embeddings::{parse_word_vector_line, EmbeddingError, PrecomputedEmbeddings};
use sumreward_core::linalg::Matrix;
use sumreward_core::reward::simred::SimRedConfig;
use sumreward_core::reward::{EncoderSpec, Normalization, SimRedModel};
use sumreward_core::{Dataset, EmbeddingTable, FoldSplit, MlpParams, RewardModel};

use crate::error::{Error, Result};

pub const MODEL_VERSION: u32 = 1;

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json_pretty(value))
}

fn lines(path: &Path) -> Result<impl Iterator<Item = (usize, std::io::Result<String>)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(BufReader::new(file).lines().enumerate().map(|(i, l)| (i + 1, l)))
}

/// Lowercase hex SHA-256 of a file's bytes.
pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Reads a JSON-lines dataset. Blank lines are ignored; every error names
/// its line.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let mut ds = Dataset::default();
    for (no, line) in lines(path)? {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawArticle = serde_json::from_str(&line).map_err(|e| Error::line(path, no, e))?;
        let article = raw.validate().map_err(|e| Error::line(path, no, e))?;
        ds.push(article).map_err(|e| Error::line(path, no, e))?;
    }
    Ok(ds)
}

/// One JSON object per article, in dataset order.
pub fn dataset_to_jsonl(ds: &Dataset) -> String {
    let mut out = String::new();
    for a in ds.articles() {
        out.push_str(&serde_json::to_string(a).expect("serializable article"));
        out.push('\n');
    }
    out
}

pub fn load_folds(path: &Path) -> Result<Vec<FoldSplit>> {
    let folds: Vec<FoldSplit> = serde_json::from_str(&read_text(path)?).map_err(|e| Error::file(path, e))?;
    if folds.is_empty() {
        return Err(Error::file(path, "no folds"));
    }
    Ok(folds)
}

/// Checks every fold against the dataset.
pub fn check_folds(path: &Path, folds: &[FoldSplit], ds: &Dataset) -> Result<()> {
    for f in folds {
        f.check_against(ds).map_err(|e| Error::file(path, format!("fold {}: {e}", f.fold_index)))?;
    }
    Ok(())
}

fn is_count_header(line: &str) -> bool {
    let mut f = line.split_whitespace();
    matches!((f.next(), f.next(), f.next()), (Some(a), Some(b), None) if a.parse::<u64>().is_ok() && b.parse::<u64>().is_ok())
}

/// Streams a `word v1 ... vd` file. A leading `<count> <dim>` header line
/// is skipped.
pub fn load_word_vectors(path: &Path, vocab_limit: Option<usize>) -> Result<EmbeddingTable> {
    let mut table: Option<EmbeddingTable> = None;
    for (no, line) in lines(path)? {
        if vocab_limit.is_some_and(|cap| table.as_ref().map_or(0, EmbeddingTable::len) >= cap) {
            break;
        }
        let line = line.map_err(|e| Error::io(path, e))?;
        if no == 1 && is_count_header(&line) {
            continue;
        }
        let Some((word, vector)) = parse_word_vector_line(&line).map_err(|e| Error::line(path, no, e))? else {
            continue;
        };
        let t = match table.as_mut() {
            Some(t) => t,
            None => table.insert(EmbeddingTable::new(vector.len())?),
        };
        t.insert(word, vector).map_err(|e| Error::line(path, no, e))?;
    }
    match table {
        Some(t) => Ok(t),
        None => Err(Error::file(path, "no word vectors")),
    }
}

#[derive(Deserialize)]
struct PrecomputedLine {
    id: String,
    vector: Vec<f64>,
}

/// Reads `{"id": ..., "vector": [...]}` lines.
pub fn load_precomputed(path: &Path) -> Result<PrecomputedEmbeddings> {
    let mut out = PrecomputedEmbeddings::default();
    for (no, line) in lines(path)? {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PrecomputedLine = serde_json::from_str(&line).map_err(|e| Error::line(path, no, e))?;
        out.insert(rec.id, rec.vector).map_err(|e| Error::line(path, no, e))?;
    }
    if out.is_empty() {
        return Err(Error::file(path, EmbeddingError::EmptyInput));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    #[default]
    Mlp,
    Simred,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MlpFile {
    version: u32,
    #[serde(default)]
    arch: Arch,
    encoder_spec: EncoderSpec,
    hidden_dim: usize,
    #[serde(rename = "W1")]
    w1: Vec<Vec<f64>>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
    normalization: Option<Normalization>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimRedFile {
    version: u32,
    arch: Arch,
    encoder_spec: EncoderSpec,
    alpha: f64,
    projection: Vec<Vec<f64>>,
    normalization: Option<Normalization>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LoadedModel {
    Mlp(RewardModel),
    SimRed(SimRedModel),
}

impl LoadedModel {
    pub fn encoder_spec(&self) -> &EncoderSpec {
        match self {
            LoadedModel::Mlp(m) => &m.encoder_spec,
            LoadedModel::SimRed(m) => &m.encoder_spec,
        }
    }

    pub fn normalization(&self) -> Option<Normalization> {
        match self {
            LoadedModel::Mlp(m) => m.normalization,
            LoadedModel::SimRed(m) => m.normalization,
        }
    }
}

pub fn model_to_json(model: &LoadedModel) -> String {
    match model {
        LoadedModel::Mlp(m) => to_json_pretty(&MlpFile {
            version: MODEL_VERSION,
            arch: Arch::Mlp,
            encoder_spec: m.encoder_spec.clone(),
            hidden_dim: m.params.hidden_dim(),
            w1: m.params.w1.to_rows(),
            b1: m.params.b1.clone(),
            w2: m.params.w2.clone(),
            b2: m.params.b2,
            normalization: m.normalization,
        }),
        LoadedModel::SimRed(m) => {
            let dim = m.encoder_spec.dim();
            let projection = m.config.projection.clone().unwrap_or_else(|| Matrix::identity(dim));
            to_json_pretty(&SimRedFile {
                version: MODEL_VERSION,
                arch: Arch::Simred,
                encoder_spec: m.encoder_spec.clone(),
                alpha: m.config.alpha,
                projection: projection.to_rows(),
                normalization: m.normalization,
            })
        }
    }
}

pub fn model_from_json(text: &str) -> std::result::Result<LoadedModel, String> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let arch = match value.get("arch") {
        None => Arch::Mlp,
        Some(a) => Arch::deserialize(a).map_err(|e| format!("arch: {e}"))?,
    };
    let version = value.get("version").and_then(serde_json::Value::as_u64);
    if version != Some(u64::from(MODEL_VERSION)) {
        return Err(format!("unsupported model version {version:?}"));
    }
    match arch {
        Arch::Mlp => {
            let f: MlpFile = serde_json::from_value(value).map_err(|e| e.to_string())?;
            let w1 = Matrix::from_rows(&f.w1).ok_or("W1 rows differ in length")?;
            if w1.rows != f.hidden_dim {
                return Err(format!("hidden_dim {} but W1 has {} rows", f.hidden_dim, w1.rows));
            }
            let params = MlpParams { w1, b1: f.b1, w2: f.w2, b2: f.b2 };
            let mut model = RewardModel::new(params, f.encoder_spec).map_err(|e| e.to_string())?;
            model.normalization = f.normalization;
            Ok(LoadedModel::Mlp(model))
        }
        Arch::Simred => {
            let f: SimRedFile = serde_json::from_value(value).map_err(|e| e.to_string())?;
            let projection = Matrix::from_rows(&f.projection).ok_or("projection rows differ in length")?;
            let config = SimRedConfig { alpha: f.alpha, projection: Some(projection) };
            let mut model = SimRedModel::new(config, f.encoder_spec).map_err(|e| e.to_string())?;
            model.normalization = f.normalization;
            Ok(LoadedModel::SimRed(model))
        }
    }
}

pub fn load_model(path: &Path) -> Result<LoadedModel> {
    model_from_json(&read_text(path)?).map_err(|e| Error::file(path, e))
}

pub fn save_model(path: &Path, model: &LoadedModel) -> Result<()> {
    write_text(path, &model_to_json(model))
}
