//! Input-specific extractive summarization by TD(0) value learning.
//!
//! For one document, a small value network `V(draft)` is trained over
//! sampled episodes. The policy is a softmax over `V` of every one-step
//! extension of the current draft, plus STOP, which scores the current
//! draft itself. Sentences that would overflow the token budget are never
//! candidates. The best draft sampled in any episode is returned.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::cell::RefCell;
use core::fmt;
use core::str::FromStr;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, Matrix};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RlError {
    #[error("document has no sentences")]
    EmptyDocument,
    #[error("sentence index {0} is out of range")]
    InvalidIndex(usize),
    #[error("sentence {0} selected twice")]
    DuplicateIndex(usize),
    #[error("sentence embeddings and token counts disagree in length or dimension")]
    MalformedDocument,
    #[error("invalid episode configuration: {0}")]
    InvalidConfig(&'static str),
}

/// Per-sentence vectors and token counts of one document.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedDocument {
    pub sentence_embeddings: Vec<Vec<f64>>,
    pub token_counts: Vec<usize>,
}

impl EncodedDocument {
    pub fn new(sentence_embeddings: Vec<Vec<f64>>, token_counts: Vec<usize>) -> Result<Self, RlError> {
        if sentence_embeddings.is_empty() {
            return Err(RlError::EmptyDocument);
        }
        let dim = sentence_embeddings[0].len();
        if token_counts.len() != sentence_embeddings.len() || sentence_embeddings.iter().any(|e| e.len() != dim) {
            return Err(RlError::MalformedDocument);
        }
        Ok(Self { sentence_embeddings, token_counts })
    }

    pub fn len(&self) -> usize {
        self.token_counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_counts.is_empty()
    }

    pub fn embedding_dim(&self) -> usize {
        self.sentence_embeddings.first().map_or(0, Vec::len)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DraftSummary {
    /// Sentence indices in selection order.
    pub selected: Vec<usize>,
    pub token_count: usize,
    pub terminated: bool,
}

impl DraftSummary {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a draft by selecting `indices` in order.
    pub fn from_indices(indices: &[usize], doc: &EncodedDocument) -> Result<Self, RlError> {
        let mut d = Self::empty();
        for &i in indices {
            d = d.extended(i, doc)?;
        }
        Ok(d)
    }

    pub fn extended(&self, index: usize, doc: &EncodedDocument) -> Result<Self, RlError> {
        let tokens = *doc.token_counts.get(index).ok_or(RlError::InvalidIndex(index))?;
        if self.selected.contains(&index) {
            return Err(RlError::DuplicateIndex(index));
        }
        let mut selected = self.selected.clone();
        selected.push(index);
        Ok(Self { selected, token_count: self.token_count + tokens, terminated: false })
    }

    /// Selected indices in document order.
    pub fn in_document_order(&self) -> Vec<usize> {
        let mut v = self.selected.clone();
        v.sort_unstable();
        v
    }

    pub fn lead_count(&self, lead_k: usize) -> usize {
        self.selected.iter().filter(|&&i| i < lead_k).count()
    }

    fn check(&self, doc: &EncodedDocument) -> Result<(), RlError> {
        let mut seen = BTreeMap::new();
        for &i in &self.selected {
            if i >= doc.len() {
                return Err(RlError::InvalidIndex(i));
            }
            if seen.insert(i, ()).is_some() {
                return Err(RlError::DuplicateIndex(i));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardScheme {
    /// Only the final step is rewarded.
    Delayed,
    /// Each selection is rewarded by the change it causes.
    Stepwise,
}

impl fmt::Display for RewardScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RewardScheme::Delayed => "delayed",
            RewardScheme::Stepwise => "stepwise",
        })
    }
}

impl FromStr for RewardScheme {
    type Err = RlError;

    fn from_str(s: &str) -> Result<Self, RlError> {
        match s {
            "delayed" => Ok(RewardScheme::Delayed),
            "stepwise" => Ok(RewardScheme::Stepwise),
            _ => Err(RlError::InvalidConfig("reward scheme must be delayed or stepwise")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub token_budget: usize,
    /// Extra reward per selected sentence among the first `lead_k`.
    pub lead_bonus: f64,
    pub lead_k: usize,
    pub episodes: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub reward_scheme: RewardScheme,
    pub gamma: f64,
    pub hidden_dim: usize,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            token_budget: 85,
            lead_bonus: 0.5,
            lead_k: 3,
            episodes: 3000,
            learning_rate: 0.01,
            seed: 0,
            reward_scheme: RewardScheme::Delayed,
            gamma: 1.0,
            hidden_dim: 64,
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<(), RlError> {
        if self.token_budget == 0 {
            return Err(RlError::InvalidConfig("token budget must be positive"));
        }
        if self.episodes == 0 {
            return Err(RlError::InvalidConfig("episodes must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(RlError::InvalidConfig("learning rate must be positive"));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(RlError::InvalidConfig("gamma must lie in (0, 1]"));
        }
        if !self.lead_bonus.is_finite() {
            return Err(RlError::InvalidConfig("lead bonus must be finite"));
        }
        if self.hidden_dim == 0 {
            return Err(RlError::InvalidConfig("hidden width must be positive"));
        }
        Ok(())
    }
}

/// Number of scalar features appended after the pooled embedding.
pub const EXTRA_FEATURES: usize = 4;

/// Pooled embedding, max intra-draft cosine, mean draft-to-document cosine,
/// budget usage and lead fraction.
pub fn draft_features(draft: &DraftSummary, doc: &EncodedDocument, cfg: &EpisodeConfig) -> Result<Vec<f64>, RlError> {
    draft.check(doc)?;
    let dim = doc.embedding_dim();
    let mut out = vec![0.0; dim + EXTRA_FEATURES];
    if draft.selected.is_empty() {
        return Ok(out);
    }
    let sel: Vec<&[f64]> = draft.selected.iter().map(|&i| doc.sentence_embeddings[i].as_slice()).collect();
    let k = sel.len() as f64;
    for v in &sel {
        for (o, x) in out.iter_mut().zip(v.iter()) {
            *o += x / k;
        }
    }
    let mut redundancy: f64 = 0.0;
    for a in 0..sel.len() {
        for b in a + 1..sel.len() {
            let c = linalg::cosine(sel[a], sel[b]);
            redundancy = if a == 0 && b == 1 { c } else { redundancy.max(c) };
        }
    }
    let mut coverage = 0.0;
    for s in &sel {
        for d in &doc.sentence_embeddings {
            coverage += linalg::cosine(s, d);
        }
    }
    coverage /= k * doc.len() as f64;
    out[dim] = redundancy;
    out[dim + 1] = coverage;
    out[dim + 2] = draft.token_count as f64 / cfg.token_budget as f64;
    out[dim + 3] = draft.lead_count(cfg.lead_k) as f64 / k;
    Ok(out)
}

/// Feed-forward value estimate with two tanh hidden layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueNet {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
    pub w3: Vec<f64>,
    pub b3: f64,
}

struct Activations {
    h1: Vec<f64>,
    h2: Vec<f64>,
    out: f64,
}

impl ValueNet {
    /// Uniform `±1/sqrt(fan_in)` weights, zero biases.
    pub fn init(input_dim: usize, hidden: usize, rng: &mut crate::Rng) -> Self {
        let mut uniform = |n: usize, fan_in: usize| -> Vec<f64> {
            let a = 1.0 / libm::sqrt(fan_in.max(1) as f64);
            (0..n).map(|_| rng.gen_range(-a..=a)).collect()
        };
        let w1 = Matrix { rows: hidden, cols: input_dim, data: uniform(hidden * input_dim, input_dim) };
        let w2 = Matrix { rows: hidden, cols: hidden, data: uniform(hidden * hidden, hidden) };
        let w3 = uniform(hidden, hidden);
        Self { w1, b1: vec![0.0; hidden], w2, b2: vec![0.0; hidden], w3, b3: 0.0 }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.cols
    }

    pub fn is_finite(&self) -> bool {
        [&self.w1.data, &self.b1, &self.w2.data, &self.b2, &self.w3].iter().all(|t| linalg::all_finite(t)) && self.b3.is_finite()
    }

    fn activations(&self, x: &[f64]) -> Activations {
        let mut h1 = self.w1.matvec(x);
        h1.iter_mut().zip(&self.b1).for_each(|(h, b)| *h = libm::tanh(*h + b));
        let mut h2 = self.w2.matvec(&h1);
        h2.iter_mut().zip(&self.b2).for_each(|(h, b)| *h = libm::tanh(*h + b));
        let out = linalg::dot(&self.w3, &h2) + self.b3;
        Activations { h1, h2, out }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.activations(x).out
    }

    /// `w ← w + step · ∇V(x)`.
    pub fn ascend(&mut self, x: &[f64], step: f64) {
        let a = self.activations(x);
        let d2: Vec<f64> = a.h2.iter().zip(&self.w3).map(|(h, w)| step * w * (1.0 - h * h)).collect();
        let back1 = self.w2.transpose_matvec(&d2);
        let d1: Vec<f64> = a.h1.iter().zip(&back1).map(|(h, g)| g * (1.0 - h * h)).collect();
        self.b3 += step;
        self.w3.iter_mut().zip(&a.h2).for_each(|(w, h)| *w += step * h);
        self.b2.iter_mut().zip(&d2).for_each(|(b, d)| *b += d);
        self.w2.add_outer(1.0, &d2, &a.h1);
        self.b1.iter_mut().zip(&d1).for_each(|(b, d)| *b += d);
        self.w1.add_outer(1.0, &d1, x);
    }
}

/// Softmax over arbitrary finite logits, shifted by the maximum.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| libm::exp(l - max)).collect();
    let total: f64 = exps.iter().sum();
    exps.iter().map(|e| e / total).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    Select(usize),
    Stop,
}

/// Actions available from `draft` with their probabilities. STOP is always
/// last and always present.
pub fn policy_distribution(
    draft: &DraftSummary,
    net: &ValueNet,
    doc: &EncodedDocument,
    cfg: &EpisodeConfig,
) -> Result<Vec<(Action, f64)>, RlError> {
    let mut actions = Vec::new();
    let mut logits = Vec::new();
    for i in 0..doc.len() {
        if draft.selected.contains(&i) || draft.token_count + doc.token_counts[i] > cfg.token_budget {
            continue;
        }
        let next = draft.extended(i, doc)?;
        actions.push(Action::Select(i));
        logits.push(net.value(&draft_features(&next, doc, cfg)?));
    }
    actions.push(Action::Stop);
    logits.push(net.value(&draft_features(draft, doc, cfg)?));
    Ok(actions.into_iter().zip(softmax(&logits)).collect())
}

/// A reward over drafts, given the selected indices in document order.
pub trait DraftReward {
    fn reward(&self, selected: &[usize]) -> f64;
}

impl<F: Fn(&[usize]) -> f64> DraftReward for F {
    fn reward(&self, selected: &[usize]) -> f64 {
        self(selected)
    }
}

/// Memoizes another reward by selected set.
pub struct CachedReward<'a> {
    inner: &'a dyn DraftReward,
    cache: RefCell<BTreeMap<Vec<usize>, f64>>,
}

impl<'a> CachedReward<'a> {
    pub fn new(inner: &'a dyn DraftReward) -> Self {
        Self { inner, cache: RefCell::new(BTreeMap::new()) }
    }
}

impl DraftReward for CachedReward<'_> {
    fn reward(&self, selected: &[usize]) -> f64 {
        if let Some(&r) = self.cache.borrow().get(selected) {
            return r;
        }
        let r = self.inner.reward(selected);
        self.cache.borrow_mut().insert(selected.to_vec(), r);
        r
    }
}

fn reward_of(reward_fn: &dyn DraftReward, draft: &DraftSummary) -> f64 {
    reward_fn.reward(&draft.in_document_order())
}

/// Rewards for each selection step in `selections` followed by the
/// terminal step.
pub fn episode_reward(
    selections: &[usize],
    doc: &EncodedDocument,
    reward_fn: &dyn DraftReward,
    cfg: &EpisodeConfig,
) -> Result<Vec<f64>, RlError> {
    let mut rewards = Vec::with_capacity(selections.len() + 1);
    let mut draft = DraftSummary::empty();
    match cfg.reward_scheme {
        RewardScheme::Delayed => {
            for &i in selections {
                draft = draft.extended(i, doc)?;
                rewards.push(0.0);
            }
            rewards.push(reward_of(reward_fn, &draft) + cfg.lead_bonus * draft.lead_count(cfg.lead_k) as f64);
        }
        RewardScheme::Stepwise => {
            let mut prev = reward_of(reward_fn, &draft);
            for &i in selections {
                draft = draft.extended(i, doc)?;
                let cur = reward_of(reward_fn, &draft);
                let bonus = if i < cfg.lead_k { cfg.lead_bonus } else { 0.0 };
                rewards.push(cur - prev + bonus);
                prev = cur;
            }
            rewards.push(prev);
        }
    }
    Ok(rewards)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub episode: usize,
    pub terminal_reward: f64,
}

#[derive(Debug, Clone)]
pub struct PolicyOutcome {
    pub net: ValueNet,
    pub best: DraftSummary,
    /// Reward of `best` plus its lead bonus.
    pub best_reward: f64,
    /// Best reward so far after each episode.
    pub best_history: Vec<f64>,
    pub trace: Vec<EpisodeTrace>,
}

fn sample_episode(net: &ValueNet, doc: &EncodedDocument, cfg: &EpisodeConfig, rng: &mut crate::Rng) -> Result<DraftSummary, RlError> {
    let mut draft = DraftSummary::empty();
    loop {
        let dist = policy_distribution(&draft, net, doc, cfg)?;
        let pick = WeightedIndex::new(dist.iter().map(|(_, p)| *p)).map(|w| w.sample(rng)).unwrap_or(dist.len() - 1);
        match dist[pick].0 {
            Action::Select(i) => draft = draft.extended(i, doc)?,
            Action::Stop => {
                draft.terminated = true;
                return Ok(draft);
            }
        }
    }
}

/// Trains a value network for `doc` and returns it with the best draft seen.
///
/// After each episode the states `d_0 .. d_T` are updated last to first
/// with `w ← w + lr (r_t + γ V(d_{t+1}) − V(d_t)) ∇V(d_t)`, where the state
/// after STOP is absorbing with value 0.
pub fn train_policy_for_document(doc: &EncodedDocument, reward_fn: &dyn DraftReward, cfg: &EpisodeConfig) -> Result<PolicyOutcome, RlError> {
    cfg.validate()?;
    if doc.is_empty() {
        return Err(RlError::EmptyDocument);
    }
    let reward_fn = CachedReward::new(reward_fn);
    let mut rng = crate::rng_from_seed(cfg.seed);
    let mut net = ValueNet::init(doc.embedding_dim() + EXTRA_FEATURES, cfg.hidden_dim, &mut rng);
    let mut best: Option<(DraftSummary, f64)> = None;
    let mut best_history = Vec::with_capacity(cfg.episodes);
    let mut trace = Vec::with_capacity(cfg.episodes);

    for episode in 0..cfg.episodes {
        let draft = sample_episode(&net, doc, cfg, &mut rng)?;
        let rewards = episode_reward(&draft.selected, doc, &reward_fn, cfg)?;
        let states: Vec<Vec<f64>> = (0..=draft.selected.len())
            .map(|t| draft_features(&DraftSummary::from_indices(&draft.selected[..t], doc)?, doc, cfg))
            .collect::<Result<_, _>>()?;
        for t in (0..states.len()).rev() {
            let next = if t + 1 < states.len() { cfg.gamma * net.value(&states[t + 1]) } else { 0.0 };
            let delta = rewards[t] + next - net.value(&states[t]);
            net.ascend(&states[t], cfg.learning_rate * delta);
        }

        let score = reward_of(&reward_fn, &draft) + cfg.lead_bonus * draft.lead_count(cfg.lead_k) as f64;
        if best.as_ref().is_none_or(|(_, b)| score > *b) {
            best = Some((draft.clone(), score));
        }
        best_history.push(best.as_ref().map_or(score, |(_, b)| *b));
        trace.push(EpisodeTrace { episode, terminal_reward: *rewards.last().unwrap_or(&0.0) });
    }
    let (best, best_reward) = best.ok_or(RlError::InvalidConfig("episodes must be positive"))?;
    Ok(PolicyOutcome { net, best, best_reward, best_history, trace })
}
