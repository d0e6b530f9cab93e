//! Command-line interface.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sumreward_core::corpus::split_folds;
use sumreward_core::eval::{self, EvalReport, FoldMetrics, SummaryScorer};
use sumreward_core::metrics::MetricSuite;
use sumreward_core::reward::simred::DEFAULT_ALPHA;
use sumreward_core::reward::{train_reward_model, train_simred_model, LossKind, TrainConfig, TrainingReport};
use sumreward_core::rl::{self, EpisodeConfig, RewardScheme};
use sumreward_core::text::{Preprocess, TokenizedText};
use sumreward_core::{Dataset, FoldSplit, RatedArticle};

use crate::encoder::{EncoderArgs, LoadedEncoder};
use crate::error::{Error, Result};
use crate::io::{self, Arch, LoadedModel};
use crate::manifest::RunManifest;
use crate::scoring::{self, ScoreTable, ScorerSpec, TrainedFactory};
use crate::summarize::{self, ModelReward, RewardSpec, RougeReward};

#[derive(Debug, Parser)]
#[command(name = "sumreward", version, about = "Learn, evaluate and use reference-free summary rewards")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split a dataset into cross-validation folds.
    MakeFolds(MakeFoldsArgs),
    /// Train a reward on one fold.
    TrainReward(TrainRewardArgs),
    /// Correlate a scorer with the human ratings.
    EvalReward(EvalRewardArgs),
    /// Score one summary of one article with a trained model.
    Score(ScoreArgs),
    /// Extract a summary of one document with a per-document RL agent.
    Summarize(SummarizeArgs),
    /// ROUGE and BLEU between two text files.
    Rouge(RougeArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct MakeFoldsArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LossArg {
    Mse,
    Preference,
}

impl From<LossArg> for LossKind {
    fn from(l: LossArg) -> Self {
        match l {
            LossArg::Mse => LossKind::Mse,
            LossArg::Preference => LossKind::Preference,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ArchArg {
    Mlp,
    Simred,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long, value_enum, default_value_t = LossArg::Preference)]
    pub loss: LossArg,
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 100)]
    pub hidden_dim: usize,
    /// Epochs without a better validation Spearman before stopping.
    #[arg(long, default_value_t = 5)]
    pub patience: usize,
    /// Similarity weight of the similarity/redundancy reward.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
}

impl TrainArgs {
    fn config(&self, seed: u64) -> Result<TrainConfig> {
        let cfg = TrainConfig {
            loss: self.loss.into(),
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed,
            hidden_dim: self.hidden_dim,
            early_stop_patience: self.patience,
        };
        cfg.validate().map_err(|e| Error::Usage(e.to_string()))?;
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Usage(format!("--alpha must lie in [0, 1], got {}", self.alpha)));
        }
        Ok(cfg)
    }
}

#[derive(Debug, Args, Serialize)]
pub struct TrainRewardArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Fold file written by make-folds.
    #[arg(long)]
    pub folds: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub fold: usize,
    #[arg(long, value_enum, default_value_t = ArchArg::Mlp)]
    pub arch: ArchArg,
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub encoder: EncoderArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Model file to write.
    #[arg(long)]
    pub output: PathBuf,
    /// Training report; defaults to `<output>.report.json`.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalRewardArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// learned:<model>, trained:mlp, trained:simred, simred, rouge1, rouge2,
    /// rougeL, rougeSU4, bleu1..bleu5, cosine or cosine-doc.
    #[arg(long)]
    pub scorer: String,
    /// Evaluate per fold of this fold file.
    #[arg(long, conflicts_with = "cv")]
    pub folds: Option<PathBuf>,
    /// Evaluate with k freshly drawn folds.
    #[arg(long)]
    pub cv: Option<usize>,
    /// Seed for --cv folds and for training.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub encoder: EncoderArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long, default_value_t = eval::GOOD_THRESHOLD)]
    pub threshold: f64,
    /// System id of the human reference summary.
    #[arg(long, default_value = "reference")]
    pub reference_system: String,
    /// Report file; printed to standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Per-summary scores as JSON lines.
    #[arg(long)]
    pub dump: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct ScoreArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// File holding the article text.
    #[arg(long)]
    pub article: PathBuf,
    /// File holding the summary text.
    #[arg(long)]
    pub summary: PathBuf,
    /// Ids to look up in precomputed embeddings.
    #[arg(long)]
    pub article_id: Option<String>,
    #[arg(long)]
    pub summary_index: Option<usize>,
    /// Map onto [-1, 1] with the model's training range.
    #[arg(long)]
    pub normalized: bool,
    #[command(flatten)]
    pub encoder: EncoderArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeArg {
    Delayed,
    Stepwise,
}

#[derive(Debug, Args, Serialize)]
pub struct SummarizeArgs {
    /// File holding the document text.
    #[arg(long)]
    pub article: PathBuf,
    /// learned:<model-file>, simred or rouge:<reference-file>.
    #[arg(long)]
    pub reward: String,
    #[command(flatten)]
    pub encoder: EncoderArgs,
    #[arg(long, default_value_t = 85)]
    pub budget: usize,
    #[arg(long, default_value_t = 3000)]
    pub episodes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = SchemeArg::Delayed)]
    pub scheme: SchemeArg,
    #[arg(long, default_value_t = 0.5)]
    pub lead_bonus: f64,
    #[arg(long, default_value_t = 3)]
    pub lead_k: usize,
    #[arg(long, default_value_t = 0.01)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    /// Summary file; printed to standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Per-episode terminal rewards as JSON lines.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct RougeArgs {
    #[arg(long)]
    pub candidate: PathBuf,
    #[arg(long)]
    pub reference: PathBuf,
    /// Keep word forms instead of stemming.
    #[arg(long)]
    pub no_stem: bool,
    #[arg(long)]
    pub keep_stopwords: bool,
    /// Metric file; printed to standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code. Output goes to `out`, diagnostics to `err`.
pub fn run<I, T>(argv: I, out: &mut dyn std::io::Write, err: &mut dyn std::io::Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{}", e.render());
                return 0;
            }
            let _ = write!(err, "{}", e.render());
            return 1;
        }
    };
    match execute(cli.command, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn emit(out: &mut dyn std::io::Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|e| Error::io(Path::new("<stdout>"), e))
}

fn execute(cmd: Command, out: &mut dyn std::io::Write, err: &mut dyn std::io::Write) -> Result<()> {
    match cmd {
        Command::MakeFolds(a) => make_folds(&a),
        Command::TrainReward(a) => train_reward(&a, err),
        Command::EvalReward(a) => eval_reward(&a, out),
        Command::Score(a) => score(&a, out),
        Command::Summarize(a) => summarize_cmd(&a, out),
        Command::Rouge(a) => rouge_cmd(&a, out),
    }
}

fn make_folds(a: &MakeFoldsArgs) -> Result<()> {
    let ds = io::load_dataset(&a.dataset)?;
    let folds = split_folds(&ds, a.k, a.seed)?;
    io::write_json(&a.output, &folds)?;
    RunManifest::new("make-folds", a, Some(a.seed)).input(&a.dataset).output(&a.output).write_next_to(&a.output)?;
    Ok(())
}

#[derive(Serialize)]
struct TrainOutput<'a> {
    fold: usize,
    arch: ArchArg,
    training: &'a TrainingReport,
    validation: FoldMetrics,
    test: FoldMetrics,
}

fn evaluate_ids(ds: &Dataset, ids: &[String], scorer: &dyn SummaryScorer, fold: usize) -> Result<FoldMetrics> {
    let articles = ds.select(ids)?;
    let mut m = eval::evaluate_articles(&articles, scorer, eval::GOOD_THRESHOLD);
    m.fold = Some(fold);
    Ok(m)
}

fn train_reward(a: &TrainRewardArgs, err: &mut dyn std::io::Write) -> Result<()> {
    let cfg = a.train.config(a.seed)?;
    let ds = io::load_dataset(&a.dataset)?;
    let folds = io::load_folds(&a.folds)?;
    io::check_folds(&a.folds, &folds, &ds)?;
    let split = folds
        .iter()
        .find(|f| f.fold_index == a.fold)
        .ok_or_else(|| Error::Usage(format!("fold {} is not in {}", a.fold, a.folds.display())))?;
    let loaded = a.encoder.load()?;
    let encoder = loaded.encoder();
    if a.arch == ArchArg::Simred && matches!(loaded, LoadedEncoder::External { .. }) {
        return Err(Error::Usage("--arch simred needs word vectors (--vectors)".into()));
    }
    let (model, report) = match a.arch {
        ArchArg::Mlp => {
            let (m, r) = train_reward_model(&ds, split, &encoder, loaded.spec().clone(), &cfg)?;
            (LoadedModel::Mlp(m), r)
        }
        ArchArg::Simred => {
            let (m, r) = train_simred_model(&ds, split, &encoder, loaded.spec().clone(), a.train.alpha, &cfg)?;
            (LoadedModel::SimRed(m), r)
        }
    };
    if encoder.oov_sentences() > 0 {
        let _ = writeln!(err, "warning: {} sentences had no in-vocabulary word and were encoded as zero", encoder.oov_sentences());
    }
    let spec = ScorerSpec::Learned(a.output.clone());
    let f = scoring::fixed_scorer(&spec, Some(&encoder), Some(&model), "")?;
    let val_scores = ScoreTable::compute(&ds.select(&split.val_ids)?, f.as_ref(), 1)?;
    let test_scores = ScoreTable::compute(&ds.select(&split.test_ids)?, f.as_ref(), 1)?;
    let output = TrainOutput {
        fold: split.fold_index,
        arch: a.arch,
        training: &report,
        validation: evaluate_ids(&ds, &split.val_ids, &val_scores, split.fold_index)?,
        test: evaluate_ids(&ds, &split.test_ids, &test_scores, split.fold_index)?,
    };
    io::save_model(&a.output, &model)?;
    let report_path = a.report.clone().unwrap_or_else(|| suffixed(&a.output, ".report.json"));
    io::write_json(&report_path, &output)?;
    RunManifest::new("train-reward", a, Some(a.seed))
        .input(&a.dataset)
        .input(&a.folds)
        .inputs(a.encoder.inputs())
        .output(&a.output)
        .output(&report_path)
        .write_next_to(&a.output)?;
    Ok(())
}

fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(suffix);
    path.with_file_name(name)
}

fn eval_reward(a: &EvalRewardArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let spec: ScorerSpec = a.scorer.parse().map_err(Error::Usage)?;
    if a.jobs == 0 {
        return Err(Error::Usage("--jobs must be at least 1".into()));
    }
    let cfg = a.train.config(a.seed)?;
    let ds = io::load_dataset(&a.dataset)?;
    let splits: Option<Vec<FoldSplit>> = match (&a.folds, a.cv) {
        (Some(p), _) => {
            let f = io::load_folds(p)?;
            io::check_folds(p, &f, &ds)?;
            Some(f)
        }
        (None, Some(k)) => Some(split_folds(&ds, k, a.seed)?),
        (None, None) => None,
    };
    let model = match &spec {
        ScorerSpec::Learned(p) => Some(io::load_model(p)?),
        _ => None,
    };
    let loaded = match (&model, spec.needs_encoder(), a.encoder.is_empty()) {
        (Some(m), _, _) => Some(LoadedEncoder::for_spec(m.encoder_spec(), &a.encoder)?),
        (None, true, _) | (None, false, false) => Some(a.encoder.load()?),
        (None, false, true) => None,
    };
    let encoder = loaded.as_ref().map(LoadedEncoder::encoder);
    let all: Vec<&RatedArticle> = ds.articles().iter().collect();

    let (report, dump) = if let ScorerSpec::Trained(arch) = spec {
        let splits = splits.ok_or_else(|| Error::Usage("trained scorers need --folds or --cv".into()))?;
        let loaded = loaded.as_ref().expect("encoder loaded for trained scorer");
        if arch == Arch::Simred && matches!(loaded, LoadedEncoder::External { .. }) {
            return Err(Error::Usage("trained:simred needs word vectors (--vectors)".into()));
        }
        let factory = TrainedFactory {
            encoder: encoder.as_ref().expect("encoder loaded"),
            encoder_spec: loaded.spec().clone(),
            arch,
            alpha: a.train.alpha,
            cfg,
            jobs: a.jobs,
            training: Mutex::new(Vec::new()),
            scores: Mutex::new(ScoreTable::default()),
        };
        let report = eval::cross_validate_splits(&ds, &splits, &factory, a.threshold).map_err(|e| match e {
            eval::CrossValidationError::Corpus(c) => Error::Corpus(c),
            eval::CrossValidationError::Scorer { fold, source } => Error::Data(format!("fold {fold}: {source}")),
        })?;
        let table = factory.scores.into_inner().expect("no poisoned lock");
        (report, eval::score_records(&all, &table))
    } else {
        let f = scoring::fixed_scorer(&spec, encoder.as_ref(), model.as_ref(), &a.reference_system)?;
        let table = ScoreTable::compute(&all, f.as_ref(), a.jobs)?;
        let report = match &splits {
            Some(splits) => {
                let folds = splits
                    .iter()
                    .map(|s| eval::evaluate_fold(&ds, s, &table, a.threshold))
                    .collect::<std::result::Result<Vec<_>, _>>()?;
                eval::assemble_report(folds)
            }
            None => eval::report_for(eval::evaluate_articles(&all, &table, a.threshold)),
        };
        (report, eval::score_records(&all, &table))
    };

    if let Some(p) = &a.dump {
        let mut s = String::new();
        for r in &dump {
            s.push_str(&serde_json::to_string(r).expect("serializable record"));
            s.push('\n');
        }
        io::write_text(p, &s)?;
    }
    write_report(a, &spec, &report, out)
}

fn write_report(a: &EvalRewardArgs, spec: &ScorerSpec, report: &EvalReport, out: &mut dyn std::io::Write) -> Result<()> {
    let text = io::to_json_pretty(report);
    match &a.output {
        Some(p) => {
            io::write_text(p, &text)?;
            let mut m = RunManifest::new("eval-reward", a, Some(a.seed)).input(&a.dataset).inputs(a.encoder.inputs()).output(p);
            if let Some(f) = &a.folds {
                m = m.input(f);
            }
            if let ScorerSpec::Learned(model) = spec {
                m = m.input(model);
            }
            if let Some(d) = &a.dump {
                m = m.output(d);
            }
            m.write_next_to(p)?;
            Ok(())
        }
        None => emit(out, &text),
    }
}

fn score(a: &ScoreArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let model = io::load_model(&a.model)?;
    let loaded = LoadedEncoder::for_spec(model.encoder_spec(), &a.encoder)?;
    let encoder = loaded.encoder();
    let article = io::read_text(&a.article)?;
    let summary = io::read_text(&a.summary)?;
    let value = match &model {
        LoadedModel::Mlp(m) => {
            let id = a.article_id.as_deref().unwrap_or("");
            m.score_summary(&encoder, id, &article, a.summary_index.unwrap_or(0), &summary)?
        }
        LoadedModel::SimRed(m) => m.score(&encoder, &article, &summary)?,
    };
    let value = match (a.normalized, model.normalization()) {
        (false, _) => value,
        (true, Some(n)) => n.apply(value),
        (true, None) => return Err(Error::Data("the model has no stored training range".into())),
    };
    emit(out, &format!("{value}\n"))
}

fn summarize_cmd(a: &SummarizeArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let reward: RewardSpec = a.reward.parse().map_err(Error::Usage)?;
    let cfg = EpisodeConfig {
        token_budget: a.budget,
        lead_bonus: a.lead_bonus,
        lead_k: a.lead_k,
        episodes: a.episodes,
        learning_rate: a.learning_rate,
        seed: a.seed,
        reward_scheme: match a.scheme {
            SchemeArg::Delayed => RewardScheme::Delayed,
            SchemeArg::Stepwise => RewardScheme::Stepwise,
        },
        gamma: a.gamma,
        ..EpisodeConfig::default()
    };
    cfg.validate().map_err(|e| Error::Usage(e.to_string()))?;
    let text = io::read_text(&a.article)?;
    let model = match &reward {
        RewardSpec::Learned(p) => Some(io::load_model(p)?),
        _ => None,
    };
    let loaded = match (&model, a.encoder.is_empty()) {
        (Some(m), _) => Some(LoadedEncoder::for_spec(m.encoder_spec(), &a.encoder)?),
        (None, false) => Some(a.encoder.load()?),
        (None, true) => None,
    };
    let encoder = loaded.as_ref().map(LoadedEncoder::encoder);
    let doc = summarize::prepare(&text, encoder.as_ref())?;
    let outcome = match &reward {
        RewardSpec::Rouge(p) => {
            let reference = TokenizedText::from_text(&io::read_text(p)?, Preprocess::METRIC);
            rl::train_policy_for_document(&doc.encoded, &RougeReward { doc: &doc, reference }, &cfg)?
        }
        RewardSpec::Learned(_) | RewardSpec::SimRed => {
            let r = ModelReward::new(&doc, model.as_ref())?;
            rl::train_policy_for_document(&doc.encoded, &r, &cfg)?
        }
    };
    let mut summary = String::new();
    for i in outcome.best.in_document_order() {
        summary.push_str(&doc.sentences[i]);
        summary.push('\n');
    }
    if let Some(p) = &a.trace {
        let mut s = String::new();
        for t in &outcome.trace {
            s.push_str(&serde_json::to_string(t).expect("serializable trace"));
            s.push('\n');
        }
        io::write_text(p, &s)?;
    }
    match &a.output {
        Some(p) => {
            io::write_text(p, &summary)?;
            let mut m = RunManifest::new("summarize", a, Some(a.seed)).input(&a.article).inputs(a.encoder.inputs()).output(p);
            match &reward {
                RewardSpec::Learned(f) | RewardSpec::Rouge(f) => m = m.input(f),
                RewardSpec::SimRed => {}
            }
            if let Some(t) = &a.trace {
                m = m.output(t);
            }
            m.write_next_to(p)?;
            Ok(())
        }
        None => emit(out, &summary),
    }
}

fn rouge_cmd(a: &RougeArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let prep = Preprocess { lowercase: true, stem: !a.no_stem, drop_stopwords: !a.keep_stopwords };
    let cand = TokenizedText::from_text(&io::read_text(&a.candidate)?, prep);
    let reference = TokenizedText::from_text(&io::read_text(&a.reference)?, prep);
    let text = io::to_json_pretty(&MetricSuite::compute(&cand, &reference));
    match &a.output {
        Some(p) => {
            io::write_text(p, &text)?;
            RunManifest::new("rouge", a, None).input(&a.candidate).input(&a.reference).output(p).write_next_to(p)?;
            Ok(())
        }
        None => emit(out, &text),
    }
}
