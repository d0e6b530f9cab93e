//! Regression and pairwise-preference losses.

use alloc::collections::BTreeMap;
use alloc::string::String;

use super::RewardError;
use crate::corpus::PreferencePair;

/// `(article_id, summary_index)`.
pub type SummaryKey = (String, usize);

/// Mean squared error.
pub fn mse_loss(predictions: &[f64], targets: &[f64]) -> Result<f64, RewardError> {
    if predictions.len() != targets.len() {
        return Err(RewardError::LengthMismatch(predictions.len(), targets.len()));
    }
    if predictions.is_empty() {
        return Err(RewardError::Empty);
    }
    let sum: f64 = predictions.iter().zip(targets).map(|(p, t)| (t - p) * (t - p)).sum();
    Ok(sum / predictions.len() as f64)
}

/// Logistic function, evaluated without overflow for any finite input.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + libm::log1p(libm::exp(-libm::fabs(x)))
}

/// Probability that a summary scored `r_i` is preferred over one scored
/// `r_j`: `exp(r_i) / (exp(r_i) + exp(r_j))`, i.e. `sigmoid(r_i - r_j)`.
pub fn preference_probability(r_i: f64, r_j: f64) -> Result<f64, RewardError> {
    if !r_i.is_finite() || !r_j.is_finite() {
        return Err(RewardError::NonFinite);
    }
    Ok(sigmoid(r_i - r_j))
}

/// `-ln P(better ≻ worse)` for one pair, computed as `softplus(worse - better)`.
pub fn pair_loss(better: f64, worse: f64) -> f64 {
    softplus(worse - better)
}

/// Mean negative log-likelihood of the human preference over `pairs`.
pub fn ce_loss(pairs: &[PreferencePair], scores: &BTreeMap<SummaryKey, f64>) -> Result<f64, RewardError> {
    if pairs.is_empty() {
        return Err(RewardError::Empty);
    }
    let lookup = |article: &String, index: usize| {
        scores
            .get(&(article.clone(), index))
            .copied()
            .ok_or_else(|| RewardError::MissingScore { article_id: article.clone(), index })
    };
    let mut total = 0.0;
    for p in pairs {
        let better = lookup(&p.article_id, p.better_index)?;
        let worse = lookup(&p.article_id, p.worse_index)?;
        if !better.is_finite() || !worse.is_finite() {
            return Err(RewardError::NonFinite);
        }
        total += pair_loss(better, worse);
    }
    Ok(total / pairs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;

    #[test]
    fn mse_cases() {
        assert_eq!(mse_loss(&[0.2, 0.4], &[0.2, 0.4]).unwrap(), 0.0);
        assert_eq!(mse_loss(&[0.0, 0.0], &[1.0, 0.0]).unwrap(), 0.5);
        let (p, t) = ([0.1, -0.3, 0.7], [0.5, 0.2, -0.1]);
        let base = mse_loss(&p, &t).unwrap();
        let scaled_p: Vec<f64> = p.iter().zip(&t).map(|(p, t)| t - 3.0 * (t - p)).collect();
        assert!((mse_loss(&scaled_p, &t).unwrap() - 9.0 * base).abs() < 1e-12);
        assert_eq!(mse_loss(&[1.0], &[]), Err(RewardError::LengthMismatch(1, 0)));
        assert_eq!(mse_loss(&[], &[]), Err(RewardError::Empty));
    }

    #[test]
    fn preference_probability_cases() {
        assert_eq!(preference_probability(0.3, 0.3).unwrap(), 0.5);
        assert!((preference_probability(libm::log(3.0), 0.0).unwrap() - 0.75).abs() < 1e-15);
        let sat = preference_probability(1000.0, 0.0).unwrap();
        assert!((sat - 1.0).abs() < 1e-12);
        assert!(preference_probability(-1000.0, 0.0).unwrap() >= 0.0);
        assert_eq!(preference_probability(f64::INFINITY, 0.0), Err(RewardError::NonFinite));
    }

    fn pairs() -> Vec<PreferencePair> {
        vec![
            PreferencePair { article_id: "a".into(), better_index: 0, worse_index: 1 },
            PreferencePair { article_id: "a".into(), better_index: 0, worse_index: 2 },
        ]
    }

    #[test]
    fn ce_cases() {
        let mut scores = BTreeMap::new();
        for i in 0..3 {
            scores.insert((String::from("a"), i), 0.7);
        }
        assert!((ce_loss(&pairs(), &scores).unwrap() - core::f64::consts::LN_2).abs() < 1e-15);

        scores.insert((String::from("a"), 0), 100.0);
        assert!(ce_loss(&pairs(), &scores).unwrap() < 1e-40);

        assert_eq!(ce_loss(&[], &scores), Err(RewardError::Empty));
        scores.remove(&(String::from("a"), 2));
        assert!(matches!(ce_loss(&pairs(), &scores), Err(RewardError::MissingScore { index: 2, .. })));
    }

    #[test]
    fn ce_shift_invariant() {
        let mut a = BTreeMap::new();
        let mut b = BTreeMap::new();
        for (i, s) in [0.4, -1.2, 2.5].into_iter().enumerate() {
            a.insert((String::from("a"), i), s);
            b.insert((String::from("a"), i), s + 17.0);
        }
        assert!((ce_loss(&pairs(), &a).unwrap() - ce_loss(&pairs(), &b).unwrap()).abs() < 1e-12);
    }
}
