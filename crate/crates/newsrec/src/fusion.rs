//! Candidate relevance scoring under early and late click-behavior fusion.
//!
//! Early fusion compares one encoded user embedding against the candidate
//! with a dot product. Late fusion scores the candidate against each
//! clicked news individually and mean-pools the dot products — which is
//! algebraically the dot product with the mean of the clicked-news
//! embeddings, i.e. a parameterless user encoder.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::FusionMode;
use crate::tensor::{Scalar, Tensor};

/// A scored candidate, for evaluation-side bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelevanceScore {
    pub value: f64,
    pub fusion_mode: FusionMode,
}

/// Early fusion: `s = u · c`.
pub fn score_early<T: Scalar>(user: &Tensor<T>, candidate: &Tensor<T>) -> Result<Tensor<T>> {
    if user.shape() != candidate.shape() {
        return Err(Error::shape(
            "score_early",
            format!("{:?} vs {:?}", user.shape(), candidate.shape()),
        ));
    }
    user.dot(candidate)
}

/// Late fusion: mean over the `len` true history rows of
/// `candidate · historyᵢ`. An empty history scores 0 (cold-start
/// convention), so ranking degenerates to the input order.
pub fn score_late<T: Scalar>(
    history: &Tensor<T>,
    len: usize,
    candidate: &Tensor<T>,
) -> Result<Tensor<T>> {
    if len == 0 {
        return Ok(Tensor::scalar(T::zero()));
    }
    let (rows, cols) = match history.shape() {
        [r, c] => (*r, *c),
        s => {
            return Err(Error::shape(
                "score_late",
                format!("history must be [N, D], got {s:?}"),
            ))
        }
    };
    if len > rows {
        return Err(Error::shape(
            "score_late",
            format!("history length {len} vs {rows} rows"),
        ));
    }
    if candidate.shape() != [cols] {
        return Err(Error::shape(
            "score_late",
            format!("candidate shape {:?} vs history dim {cols}", candidate.shape()),
        ));
    }
    let mut dots = Vec::with_capacity(len);
    for i in 0..len {
        dots.push(candidate.dot(&history.row(i)?)?);
    }
    Ok(Tensor::add_n(&dots)?.scale(T::one() / T::from_f64(len as f64)))
}

/// The late-fusion user embedding: the coordinate-wise mean of the true
/// history rows. Parameterless and candidate-agnostic.
pub fn user_embedding_late<T: Scalar>(history: &Tensor<T>, len: usize) -> Result<Tensor<T>> {
    if len == 0 {
        return Err(Error::degenerate(
            "user_embedding_late",
            "empty click history",
        ));
    }
    history.mean_rows(len)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_leaf(shape: Vec<usize>, rng: &mut ChaCha8Rng) -> Tensor<f64> {
        let n: usize = shape.iter().product();
        let values = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        Tensor::leaf(shape, values).unwrap()
    }

    #[test]
    fn late_equals_early_for_single_click() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = rand_leaf(vec![1, 5], &mut rng);
        let c = rand_leaf(vec![5], &mut rng);
        let late = score_late(&h, 1, &c).unwrap().item();
        let early = score_early(&h.row(0).unwrap(), &c).unwrap().item();
        assert!((late - early).abs() < 1e-12);
    }

    #[test]
    fn late_direct_arithmetic() {
        let h = Tensor::<f64>::leaf(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let c = Tensor::leaf(vec![2], vec![2.0, 2.0]).unwrap();
        assert!((score_late(&h, 2, &c).unwrap().item() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn empty_history_scores_zero() {
        let h = Tensor::<f64>::zeros(vec![0, 4]);
        let c = Tensor::leaf(vec![4], vec![1.0; 4]).unwrap();
        assert_eq!(score_late(&h, 0, &c).unwrap().item(), 0.0);
        assert!(user_embedding_late(&h, 0).is_err());
    }

    #[test]
    fn user_embedding_late_mean_cases() {
        let h = Tensor::<f64>::leaf(vec![2, 2], vec![2.0, 0.0, 0.0, 2.0]).unwrap();
        assert_eq!(user_embedding_late(&h, 2).unwrap().to_vec(), vec![1.0, 1.0]);
        assert_eq!(
            user_embedding_late(&h, 1).unwrap().to_vec(),
            vec![2.0, 0.0]
        );
    }

    #[test]
    fn dot_of_mean_equivalence_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let n = rng.random_range(1..12);
            let d = rng.random_range(1..16);
            let h = rand_leaf(vec![n, d], &mut rng);
            let c = rand_leaf(vec![d], &mut rng);
            let late = score_late(&h, n, &c).unwrap().item();
            let mean = user_embedding_late(&h, n).unwrap();
            let via_mean = score_early(&mean, &c).unwrap().item();
            assert!((late - via_mean).abs() < 1e-10 * (1.0 + late.abs()));
        }
    }

    #[test]
    fn gradients_spread_equally_over_history() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 5;
        let h = rand_leaf(vec![n, 3], &mut rng);
        let c = rand_leaf(vec![3], &mut rng);
        score_late(&h, n, &c).unwrap().backward().unwrap();
        let g = h.grad().unwrap();
        let cv = c.to_vec();
        for i in 0..n {
            for j in 0..3 {
                assert!((g[i * 3 + j] - cv[j] / n as f64).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn appending_duplicate_history_is_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = rand_leaf(vec![4, 3], &mut rng);
        let c = rand_leaf(vec![3], &mut rng);
        let doubled = Tensor::concat_rows(&[h.clone(), h.clone()]).unwrap();
        let a = score_late(&h, 4, &c).unwrap().item();
        let b = score_late(&doubled, 8, &c).unwrap().item();
        assert!((a - b).abs() < 1e-6);
    }
}
