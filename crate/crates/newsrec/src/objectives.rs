//! Training objectives over relevance scores: cross-entropy with negative
//! sampling, and supervised contrastive loss.

use rand::seq::{IndexedRandom, SliceRandom};
use rand_chacha::ChaCha8Rng;

use crate::data::ResolvedImpression;
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// One positive candidate plus `K` sampled negatives, with the anchoring
/// user's (truncated) click history. Indices point into the news catalog.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingSample {
    pub user_id: String,
    pub user_index: Option<usize>,
    /// Clicked-news catalog indices, oldest first, already truncated.
    pub history: Vec<usize>,
    /// Catalog indices of the scored candidates; `labels` marks positives.
    pub candidates: Vec<usize>,
    pub labels: Vec<bool>,
}

impl TrainingSample {
    pub fn positive_index(&self) -> usize {
        self.labels.iter().position(|&l| l).expect("one positive per sample")
    }
}

/// How the positive set of a supervised-contrastive anchor is formed.
/// Only within-sample contrast is supported: the impression's positives
/// against that sample's own sampled negatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PositiveSetMode {
    #[default]
    WithinSample,
}

/// Supervised-contrastive settings.
#[derive(Debug, Clone, Copy)]
pub struct SclConfig {
    /// Softmax temperature; sweeps cover `[0.08, 0.30]` in 0.02 steps.
    pub temperature: f64,
    pub positive_set_mode: PositiveSetMode,
}

impl SclConfig {
    pub fn with_temperature(temperature: f64) -> Self {
        SclConfig {
            temperature,
            positive_set_mode: PositiveSetMode::WithinSample,
        }
    }
}

impl Default for SclConfig {
    fn default() -> Self {
        // Default temperature when no sweep is run.
        SclConfig::with_temperature(0.1)
    }
}

/// Emit one training sample per clicked candidate of the impression: the
/// positive plus `k` negatives drawn uniformly from the impression's
/// non-clicked candidates — without replacement when at least `k` exist,
/// with replacement otherwise. Impressions without candidates (or without
/// any negative to sample) yield nothing; callers count the skips.
pub fn sample_negatives(
    impression: &ResolvedImpression,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<TrainingSample> {
    let positives: Vec<usize> = impression
        .candidates
        .iter()
        .filter(|(_, clicked)| *clicked)
        .map(|(id, _)| *id)
        .collect();
    let negatives: Vec<usize> = impression
        .candidates
        .iter()
        .filter(|(_, clicked)| !*clicked)
        .map(|(id, _)| *id)
        .collect();
    if positives.is_empty() || negatives.is_empty() {
        return Vec::new();
    }
    let mut samples = Vec::with_capacity(positives.len());
    for &pos in &positives {
        let drawn: Vec<usize> = if negatives.len() >= k {
            let mut pool = negatives.clone();
            pool.shuffle(rng);
            pool.truncate(k);
            pool
        } else {
            (0..k)
                .map(|_| *negatives.choose(rng).expect("nonempty negatives"))
                .collect()
        };
        let mut candidates = Vec::with_capacity(1 + k);
        let mut labels = Vec::with_capacity(1 + k);
        candidates.push(pos);
        labels.push(true);
        for n in drawn {
            candidates.push(n);
            labels.push(false);
        }
        samples.push(TrainingSample {
            user_id: impression.user_id.clone(),
            user_index: impression.user_index,
            history: impression.history.clone(),
            candidates,
            labels,
        });
    }
    samples
}

/// Cross-entropy with negative sampling:
/// `loss = −log softmax(scores)[positive] = logsumexp(scores) − s⁺`.
pub fn ce_ns_loss<T: Scalar>(scores: &Tensor<T>, positive_index: usize) -> Result<Tensor<T>> {
    if !scores.is_finite() {
        return Err(Error::Numeric("non-finite scores in ce_ns_loss".into()));
    }
    if positive_index >= scores.len() {
        return Err(Error::Index(format!(
            "positive index {positive_index} of {} scores",
            scores.len()
        )));
    }
    let lse = scores.logsumexp()?;
    lse.sub(&scores.element(positive_index)?)
}

/// Supervised contrastive loss over one anchor's candidate set:
/// `−(1/|P|) Σ_{p∈P} log( exp(s_p/τ) / Σ_a exp(s_a/τ) )`.
/// With a single positive and τ = 1 this reduces exactly to `ce_ns_loss`.
pub fn scl_loss<T: Scalar>(
    scores: &Tensor<T>,
    labels: &[bool],
    config: &SclConfig,
) -> Result<Tensor<T>> {
    let temperature = config.temperature;
    if temperature <= 0.0 {
        return Err(Error::Config(format!(
            "scl temperature must be positive, got {temperature}"
        )));
    }
    if labels.len() != scores.len() {
        return Err(Error::shape(
            "scl_loss",
            format!("{} labels vs {} scores", labels.len(), scores.len()),
        ));
    }
    if !scores.is_finite() {
        return Err(Error::Numeric("non-finite scores in scl_loss".into()));
    }
    let positives: Vec<usize> = labels
        .iter()
        .enumerate()
        .filter(|(_, &l)| l)
        .map(|(i, _)| i)
        .collect();
    if positives.is_empty() || positives.len() == labels.len() {
        return Err(Error::degenerate(
            "scl_loss",
            "needs at least one positive and one negative",
        ));
    }
    let scaled = scores.scale(T::from_f64(1.0 / temperature));
    let lse = scaled.logsumexp()?;
    let pos: Vec<Tensor<T>> = positives
        .iter()
        .map(|&i| scaled.element(i))
        .collect::<Result<_>>()?;
    let mean_pos = Tensor::add_n(&pos)?.scale(T::one() / T::from_f64(positives.len() as f64));
    lse.sub(&mean_pos)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn imp(history: Vec<usize>, candidates: Vec<(usize, bool)>) -> ResolvedImpression {
        ResolvedImpression {
            user_id: "U1".into(),
            user_index: Some(0),
            history,
            candidates,
        }
    }

    #[test]
    fn exactly_k_negatives_are_used_once_each() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let impression = imp(
            vec![10],
            vec![(1, true), (2, false), (3, false), (4, false), (5, false)],
        );
        let samples = sample_negatives(&impression, 4, &mut rng);
        assert_eq!(samples.len(), 1);
        let mut negs: Vec<usize> = samples[0].candidates[1..].to_vec();
        negs.sort_unstable();
        assert_eq!(negs, vec![2, 3, 4, 5]);
    }

    #[test]
    fn single_negative_sampled_with_replacement() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let impression = imp(vec![10], vec![(1, true), (2, false)]);
        let samples = sample_negatives(&impression, 4, &mut rng);
        assert_eq!(samples[0].candidates[1..], [2, 2, 2, 2]);
    }

    #[test]
    fn one_sample_per_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let impression = imp(vec![], vec![(1, true), (2, true), (3, false)]);
        let samples = sample_negatives(&impression, 2, &mut rng);
        assert_eq!(samples.len(), 2);
        assert!(samples.iter().all(|s| s.labels == [true, false, false]));
    }

    #[test]
    fn seeded_sampling_is_deterministic() {
        let impression = imp(
            vec![7, 8],
            vec![(1, true), (2, false), (3, false), (4, false), (5, false), (6, false)],
        );
        let a = sample_negatives(&impression, 4, &mut ChaCha8Rng::seed_from_u64(99));
        let b = sample_negatives(&impression, 4, &mut ChaCha8Rng::seed_from_u64(99));
        assert_eq!(a, b);
    }

    #[test]
    fn ce_uniform_scores_is_ln_candidate_count() {
        let scores = Tensor::leaf(vec![5], vec![0.7; 5]).unwrap();
        let loss = ce_ns_loss(&scores, 0).unwrap().item();
        assert!((loss - 5.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn ce_dominant_positive_drives_loss_to_zero() {
        let scores = Tensor::leaf(vec![5], vec![60.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(ce_ns_loss(&scores, 0).unwrap().item() < 1e-12);
    }

    #[test]
    fn ce_rejects_non_finite_scores() {
        let scores = Tensor::leaf(vec![2], vec![f64::NAN, 0.0]).unwrap();
        assert!(matches!(ce_ns_loss(&scores, 0), Err(Error::Numeric(_))));
    }

    #[test]
    fn scl_reduces_to_ce_for_single_positive_unit_temperature() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let values: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
            let s1 = Tensor::leaf(vec![5], values.clone()).unwrap();
            let s2 = Tensor::leaf(vec![5], values).unwrap();
            let labels = [false, false, true, false, false];
            let ce = ce_ns_loss(&s1, 2).unwrap();
            let scl = scl_loss(&s2, &labels, &SclConfig::with_temperature(1.0)).unwrap();
            assert!((ce.item() - scl.item()).abs() < 1e-12);
            ce.backward().unwrap();
            scl.backward().unwrap();
            for (a, b) in s1.grad().unwrap().iter().zip(s2.grad().unwrap().iter()) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn scl_uniform_scores_is_ln_a_for_any_temperature() {
        let labels = [true, true, false, false, false, false];
        for tau in [0.08, 0.1, 0.22, 1.0] {
            let scores = Tensor::leaf(vec![6], vec![0.3; 6]).unwrap();
            let loss = scl_loss(&scores, &labels, &SclConfig::with_temperature(tau)).unwrap().item();
            assert!((loss - 6.0f64.ln()).abs() < 1e-9, "tau {tau}");
        }
    }

    #[test]
    fn scl_matches_direct_formula_at_low_temperature() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let tau = 0.1;
        for _ in 0..50 {
            let values: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let labels = [true, false, true, false, false, false];
            let scores = Tensor::leaf(vec![6], values.clone()).unwrap();
            let loss = scl_loss(&scores, &labels, &SclConfig::with_temperature(tau)).unwrap().item();

            let denom: f64 = values.iter().map(|s| (s / tau).exp()).sum();
            let direct: f64 = -[0usize, 2]
                .iter()
                .map(|&p| ((values[p] / tau).exp() / denom).ln())
                .sum::<f64>()
                / 2.0;
            assert!((loss - direct).abs() < 1e-10);
        }
    }

    #[test]
    fn scl_shift_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let labels = [true, false, false, false];
        for _ in 0..50 {
            let values: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let shift = rng.random_range(-5.0..5.0);
            let shifted: Vec<f64> = values.iter().map(|v| v + shift).collect();
            let a = scl_loss(&Tensor::leaf(vec![4], values).unwrap(), &labels, &SclConfig::with_temperature(0.2))
                .unwrap()
                .item();
            let b = scl_loss(&Tensor::leaf(vec![4], shifted).unwrap(), &labels, &SclConfig::with_temperature(0.2))
                .unwrap()
                .item();
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn lower_temperature_sharpens_gradient_on_trailing_positive() {
        // Sharpening holds whenever the positive is not already the top
        // score; condition the random instances accordingly.
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let labels = [true, false, false, false, false];
        let mut tried = 0;
        while tried < 30 {
            let mut values: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
            let max_other = values[1..].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if values[0] >= max_other {
                values[0] = max_other - rng.random_range(0.01..1.0);
            }
            let grad_at = |tau: f64| {
                let t = Tensor::leaf(vec![5], values.clone()).unwrap();
                scl_loss(&t, &labels, &SclConfig::with_temperature(tau)).unwrap().backward().unwrap();
                t.grad().unwrap()[0].abs()
            };
            let mut prev = grad_at(0.30);
            for tau in [0.22, 0.14, 0.08] {
                let g = grad_at(tau);
                assert!(g > prev, "gradient must grow as tau shrinks");
                prev = g;
            }
            tried += 1;
        }
    }

    #[test]
    fn scl_requires_both_classes() {
        let scores = Tensor::leaf(vec![3], vec![0.0; 3]).unwrap();
        assert!(scl_loss(&scores, &[true, true, true], &SclConfig::with_temperature(0.1)).is_err());
        assert!(scl_loss(&scores, &[false, false, false], &SclConfig::with_temperature(0.1)).is_err());
    }
}
