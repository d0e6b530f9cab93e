use std::collections::BTreeSet;
use std::rc::Rc;

use proptest::prelude::*;
use sumreward_core::corpus::{enumerate_preference_pairs, split_folds};
use sumreward_core::embeddings::{encode_text, power_mean};
use sumreward_core::eval::{g_precision_recall, good_summary_set, spearman};
use sumreward_core::linalg::cosine;
use sumreward_core::metrics::{bleu, rouge, RougeVariant};
use sumreward_core::reward::simred::{SimRedConfig, SimRedInput, SimRedParams};
use sumreward_core::reward::{preference_probability, simred_reward, Differentiable};
use sumreward_core::rl::{self, DraftSummary, EncodedDocument, EpisodeConfig, ValueNet};
use sumreward_core::text::{ngrams, skip_bigrams, tokenize_and_preprocess, Preprocess, TokenizedText};
use sumreward_core::{Dataset, EmbeddingTable, PMeansConfig, PValue, RatedArticle, RatedSummary};

fn article(id: &str, ratings: &[f64]) -> RatedArticle {
    RatedArticle {
        article_id: id.into(),
        article_text: "Text.".into(),
        summaries: ratings
            .iter()
            .enumerate()
            .map(|(i, &r)| RatedSummary { system_id: format!("s{i}"), text: "x".into(), ratings: vec![r], avg_rating: r })
            .collect(),
    }
}

fn words(v: &[u8]) -> Vec<String> {
    v.iter().map(|w| format!("w{w}")).collect()
}

fn vecs(n: std::ops::Range<usize>, dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-3.0f64..3.0, dim), n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn folds_partition_ids(n in 1usize..60, k in 2usize..7, seed in any::<u64>()) {
        prop_assume!(n >= k);
        let ds = Dataset::new((0..n).map(|i| article(&format!("a{i}"), &[0.1])).collect()).unwrap();
        let folds = split_folds(&ds, k, seed).unwrap();
        let all: BTreeSet<String> = ds.ids().map(String::from).collect();
        let mut tests = BTreeSet::new();
        for f in &folds {
            for id in &f.test_ids {
                prop_assert!(tests.insert(id.clone()), "test sets overlap");
            }
            let mut union: Vec<&String> = f.train_ids.iter().chain(&f.val_ids).chain(&f.test_ids).collect();
            prop_assert_eq!(union.len(), n);
            union.sort();
            union.dedup();
            prop_assert_eq!(union.len(), n);
        }
        prop_assert_eq!(tests, all);
    }

    #[test]
    fn pair_count_excludes_ties(ratings in prop::collection::vec(prop::sample::select(vec![-1.0, -0.5, 0.0, 0.5, 1.0]), 2..10)) {
        let a = article("a", &ratings);
        let n = ratings.len();
        let ties = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).filter(|&(i, j)| ratings[i] == ratings[j]).count();
        prop_assert_eq!(enumerate_preference_pairs(&a).unwrap().len(), n * (n - 1) / 2 - ties);
    }

    #[test]
    fn tokenize_idempotent(s in "[A-Za-z0-9 ,.;'-]{0,60}") {
        let prep = Preprocess { lowercase: true, stem: false, drop_stopwords: true };
        let once = tokenize_and_preprocess(&s, prep);
        prop_assert_eq!(tokenize_and_preprocess(&once.join(" "), prep), once);
    }

    #[test]
    fn ngram_and_skip_bigram_counts(v in prop::collection::vec(0u8..4, 0..12), n in 1usize..5) {
        let t = words(&v);
        prop_assert_eq!(ngrams(&t, n).unwrap().total(), (t.len() + 1).saturating_sub(n));
        if t.len() >= 2 {
            prop_assert_eq!(skip_bigrams(&t, t.len() - 2).total(), t.len() * (t.len() - 1) / 2);
        }
    }

    #[test]
    fn power_mean_ordering(vs in vecs(1..8, 4).prop_map(|v| v.into_iter().map(|r| r.into_iter().map(f64::abs).collect::<Vec<_>>()).collect::<Vec<_>>())) {
        let lo = power_mean(&vs, PValue::NegInf).unwrap();
        let mid = power_mean(&vs, PValue::Finite(1.0)).unwrap();
        let hi = power_mean(&vs, PValue::PosInf).unwrap();
        for i in 0..4 {
            prop_assert!(lo[i] <= mid[i] + 1e-12 && mid[i] <= hi[i] + 1e-12);
        }
        for p in [PValue::NegInf, PValue::PosInf, PValue::Finite(1.0)] {
            prop_assert_eq!(power_mean(&vs[..1], p).unwrap(), vs[0].clone());
        }
    }

    #[test]
    fn encode_text_permutation_invariant(order in Just(vec![0usize, 1, 2]).prop_shuffle()) {
        let table = EmbeddingTable::from_text("cat 1 -2\ndog 0.5 3\nsun -1 0\n", None).unwrap();
        let sents: Vec<Vec<String>> = vec![words_of("cat dog"), words_of("sun"), words_of("dog sun cat")];
        let permuted: Vec<Vec<String>> = order.iter().map(|&i| sents[i].clone()).collect();
        let cfg = PMeansConfig::default();
        let a = encode_text(&sents, &table, &cfg).unwrap().vector;
        let b = encode_text(&permuted, &table, &cfg).unwrap().vector;
        prop_assert!(a.iter().all(|x| x.is_finite()));
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn metric_ranges_and_identity(a in prop::collection::vec(0u8..5, 1..10), b in prop::collection::vec(0u8..5, 0..10)) {
        let (ta, tb) = (TokenizedText::from_sentences([words(&a)]), TokenizedText::from_sentences([words(&b)]));
        for v in [RougeVariant::N(1), RougeVariant::N(2), RougeVariant::L, RougeVariant::SU4] {
            let s = rouge(&ta, &tb, v);
            for x in [s.precision, s.recall, s.f1] {
                prop_assert!((0.0..=1.0).contains(&x));
            }
        }
        prop_assert_eq!(rouge(&ta, &ta, RougeVariant::N(1)).f1, 1.0);
        prop_assert_eq!(rouge(&ta, &ta, RougeVariant::L).f1, 1.0);
        for n in 1..=5 {
            let s = bleu(&words(&a), &words(&b), n);
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert!((bleu(&words(&a), &words(&a), n) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rouge_overlap_clipped(r in prop::collection::vec(0u8..5, 1..8), extra in 1usize..5) {
        let reference = TokenizedText::from_sentences([words(&r)]);
        let base = TokenizedText::from_sentences([words(&r)]);
        let mut padded = words(&r);
        padded.extend(std::iter::repeat_n(padded[0].clone(), extra));
        let padded = TokenizedText::from_sentences([padded]);
        prop_assert_eq!(rouge(&padded, &reference, RougeVariant::N(1)).recall, rouge(&base, &reference, RougeVariant::N(1)).recall);
    }

    #[test]
    fn cosine_scale_invariant(a in prop::collection::vec(-5.0f64..5.0, 3), b in prop::collection::vec(-5.0f64..5.0, 3), s in 0.01f64..100.0) {
        let scaled: Vec<f64> = a.iter().map(|x| x * s).collect();
        prop_assert!((cosine(&scaled, &b) - cosine(&a, &b)).abs() < 1e-12);
    }

    #[test]
    fn preference_probability_symmetric(a in -50.0f64..50.0, b in -50.0f64..50.0) {
        let s = preference_probability(a, b).unwrap() + preference_probability(b, a).unwrap();
        prop_assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn simred_duplicate_and_range(sum in vecs(1..5, 3), doc in vecs(1..5, 3), alpha in 0.0f64..=1.0, pick in 0usize..4) {
        let cfg = SimRedConfig { alpha, projection: None };
        let r = simred_reward(&sum, &doc, &cfg).unwrap();
        prop_assert!((-1.0..=1.0).contains(&r));
        if sum.len() == 1 {
            let dup = vec![sum[0].clone(), sum[0].clone()];
            let d = simred_reward(&dup, &doc, &cfg).unwrap() - r;
            let degenerate = sum[0].iter().all(|&x| x == 0.0);
            if !degenerate {
                prop_assert!((d + (1.0 - alpha)).abs() < 1e-12, "delta {}", d);
            }
        }
        let mut extended = sum.clone();
        extended.push(sum[pick % sum.len()].clone());
        prop_assert!((-1.0..=1.0).contains(&simred_reward(&extended, &doc, &cfg).unwrap()));
    }

    #[test]
    fn simred_forward_matches_reward(sum in vecs(1..4, 3), doc in vecs(1..4, 3)) {
        let p = SimRedParams::identity(3, 0.85).unwrap();
        let x = SimRedInput { doc: Rc::new(doc.clone()), summary: sum.clone() };
        prop_assert!((p.forward(&x) - simred_reward(&sum, &doc, &SimRedConfig::default()).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn spearman_monotone_invariant(xs in prop::collection::vec(-10.0f64..10.0, 3..30), ys_seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(ys_seed);
        let ys: Vec<f64> = xs.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
        if let Ok(base) = spearman(&xs, &ys) {
            let tx: Vec<f64> = xs.iter().map(|x| x.exp() + 3.0 * x).collect();
            prop_assert!((spearman(&tx, &ys).unwrap() - base).abs() < 1e-12);
        }
    }

    #[test]
    fn good_set_scale_invariant(r in prop::collection::vec(-1.0f64..1.0, 1..8), c in 0.1f64..5.0) {
        let scaled: Vec<f64> = r.iter().map(|x| x * c).collect();
        prop_assert_eq!(good_summary_set(&r, 0.5), good_summary_set(&scaled, 0.5 * c));
    }

    #[test]
    fn perfect_metric_has_unit_g_scores(ratings in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 2..6), 1..5)) {
        let all: Vec<f64> = ratings.iter().flatten().copied().collect();
        let (lo, hi) = all.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
        prop_assume!(hi - lo > 1e-6);
        // An affine map onto [-1, 1] keeps order and, after the metric's own
        // normalization, identical threshold crossings.
        let normalized: Vec<Vec<f64>> = ratings.iter().map(|a| a.iter().map(|x| 2.0 * (x - lo) / (hi - lo) - 1.0).collect()).collect();
        prop_assume!(normalized.iter().flatten().any(|&x| x >= 0.5));
        let (p, r) = g_precision_recall(&normalized, &normalized, 0.5).unwrap();
        prop_assert_eq!((p, r), (1.0, 1.0));
    }

    #[test]
    fn policy_sums_to_one_and_respects_budget(tokens in prop::collection::vec(1usize..30, 1..10), budget in 1usize..60, seed in any::<u64>(), take in 0usize..3) {
        let n = tokens.len();
        let embs: Vec<Vec<f64>> = (0..n).map(|i| vec![(i as f64).sin(), (i as f64).cos()]).collect();
        let doc = EncodedDocument::new(embs, tokens.clone()).unwrap();
        let cfg = EpisodeConfig { token_budget: budget, ..EpisodeConfig::default() };
        let mut rng = sumreward_core::rng_from_seed(seed);
        let net = ValueNet::init(2 + rl::EXTRA_FEATURES, 8, &mut rng);
        let mut draft = DraftSummary::empty();
        for (i, &t) in tokens.iter().enumerate().take(take) {
            if draft.token_count + t <= budget {
                draft = draft.extended(i, &doc).unwrap();
            }
        }
        let dist = rl::policy_distribution(&draft, &net, &doc, &cfg).unwrap();
        prop_assert!((dist.iter().map(|(_, p)| p).sum::<f64>() - 1.0).abs() < 1e-9);
        for (a, _) in &dist {
            if let rl::Action::Select(i) = a {
                prop_assert!(draft.token_count + tokens[*i] <= budget);
                prop_assert!(!draft.selected.contains(i));
            }
        }
    }
}

fn words_of(s: &str) -> Vec<String> {
    s.split(' ').map(String::from).collect()
}

#[test]
fn policy_outputs_respect_invariants_and_best_is_monotone() {
    let tokens = vec![12, 7, 30, 9, 15, 22, 5, 11];
    let embs: Vec<Vec<f64>> = (0..8).map(|i| vec![(i as f64 * 0.7).sin(), (i as f64 * 1.3).cos(), 1.0]).collect();
    let doc = EncodedDocument::new(embs, tokens).unwrap();
    let reward = |s: &[usize]| s.iter().map(|&i| if i % 3 == 0 { 0.3 } else { -0.1 }).sum::<f64>();
    for seed in 0..3 {
        let cfg = EpisodeConfig { episodes: 300, token_budget: 40, seed, ..EpisodeConfig::default() };
        let out = rl::train_policy_for_document(&doc, &reward, &cfg).unwrap();
        assert!(out.best.token_count <= 40);
        let set: BTreeSet<usize> = out.best.selected.iter().copied().collect();
        assert_eq!(set.len(), out.best.selected.len());
        assert!(out.best_history.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(out.trace.len(), 300);
    }
}

#[test]
fn training_is_deterministic() {
    let tokens = vec![10; 6];
    let embs: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, 1.0]).collect();
    let doc = EncodedDocument::new(embs, tokens).unwrap();
    let reward = |s: &[usize]| s.len() as f64 * 0.1;
    let cfg = EpisodeConfig { episodes: 100, seed: 9, ..EpisodeConfig::default() };
    let a = rl::train_policy_for_document(&doc, &reward, &cfg).unwrap();
    let b = rl::train_policy_for_document(&doc, &reward, &cfg).unwrap();
    assert_eq!(a.net, b.net);
    assert_eq!(a.best, b.best);
}
