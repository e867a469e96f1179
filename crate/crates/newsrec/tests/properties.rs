//! Property tests for the algebraic invariants the point checks cannot
//! cover exhaustively.

use newsrec::data::{build_vocab, truncate_history};
use newsrec::fusion::{score_early, score_late, user_embedding_late};
use newsrec::metrics::auc;
use newsrec::objectives::{scl_loss, SclConfig};
use newsrec::Tensor;
use proptest::prelude::*;

fn finite_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn softmax_rows_are_distributions(values in prop::collection::vec(-30.0f64..30.0, 1..40)) {
        let x = Tensor::leaf(vec![values.len()], values).unwrap();
        let y = x.softmax(None).unwrap();
        let v = y.to_vec();
        prop_assert!(v.iter().all(|&p| p >= 0.0));
        prop_assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn softmax_is_shift_invariant(values in finite_vec(8), shift in -50.0f64..50.0) {
        let a = Tensor::leaf(vec![8], values.clone()).unwrap();
        let shifted: Vec<f64> = values.iter().map(|v| v + shift).collect();
        let b = Tensor::leaf(vec![8], shifted).unwrap();
        let ya = a.softmax(None).unwrap().to_vec();
        let yb = b.softmax(None).unwrap().to_vec();
        for (p, q) in ya.iter().zip(yb.iter()) {
            prop_assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn late_fusion_is_linear_in_the_candidate(
        h in finite_vec(5 * 6),
        c1 in finite_vec(6),
        c2 in finite_vec(6),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let history = Tensor::leaf(vec![5, 6], h).unwrap();
        let t1 = Tensor::leaf(vec![6], c1.clone()).unwrap();
        let t2 = Tensor::leaf(vec![6], c2.clone()).unwrap();
        let combo: Vec<f64> = c1.iter().zip(c2.iter()).map(|(x, y)| a * x + b * y).collect();
        let tc = Tensor::leaf(vec![6], combo).unwrap();
        let s1 = score_late(&history, 5, &t1).unwrap().item();
        let s2 = score_late(&history, 5, &t2).unwrap().item();
        let sc = score_late(&history, 5, &tc).unwrap().item();
        prop_assert!((sc - (a * s1 + b * s2)).abs() < 1e-6 * (1.0 + sc.abs()));
    }

    #[test]
    fn late_fusion_matches_dot_of_mean(h in finite_vec(4 * 5), c in finite_vec(5)) {
        let history = Tensor::leaf(vec![4, 5], h).unwrap();
        let cand = Tensor::leaf(vec![5], c).unwrap();
        let late = score_late(&history, 4, &cand).unwrap().item();
        let mean = user_embedding_late(&history, 4).unwrap();
        let early = score_early(&mean, &cand).unwrap().item();
        prop_assert!((late - early).abs() < 1e-10 * (1.0 + late.abs()));
    }

    #[test]
    fn truncation_is_a_suffix(history in prop::collection::vec(0usize..1000, 0..120), max_len in 1usize..60) {
        let t = truncate_history(&history, max_len);
        prop_assert!(t.len() <= max_len);
        prop_assert_eq!(&history[history.len() - t.len()..], t.as_slice());
    }

    #[test]
    fn auc_survives_monotone_transforms(
        scores in finite_vec(12),
        labels in prop::collection::vec(any::<bool>(), 12),
    ) {
        prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
        let base = auc(&scores, &labels).unwrap();
        let squashed: Vec<f64> = scores.iter().map(|s| (s / 3.0).tanh() * 7.0 + 2.0).collect();
        let transformed = auc(&squashed, &labels).unwrap();
        prop_assert!((base - transformed).abs() < 1e-12);
    }

    #[test]
    fn scl_loss_is_shift_invariant(
        scores in finite_vec(6),
        shift in -20.0f64..20.0,
        tau in 0.08f64..0.3,
    ) {
        let labels = [true, false, true, false, false, false];
        let a = Tensor::leaf(vec![6], scores.clone()).unwrap();
        let shifted: Vec<f64> = scores.iter().map(|v| v + shift).collect();
        let b = Tensor::leaf(vec![6], shifted).unwrap();
        let cfg = SclConfig::with_temperature(tau);
        let la = scl_loss(&a, &labels, &cfg).unwrap().item();
        let lb = scl_loss(&b, &labels, &cfg).unwrap().item();
        prop_assert!((la - lb).abs() < 1e-9);
    }

    #[test]
    fn vocab_is_order_insensitive(mut tokens in prop::collection::vec("[a-e]{1,3}", 1..60)) {
        let forward = build_vocab(tokens.iter().map(String::as_str), 1);
        tokens.reverse();
        let backward = build_vocab(tokens.iter().map(String::as_str), 1);
        for t in tokens {
            prop_assert_eq!(forward.lookup(&t), backward.lookup(&t));
        }
    }
}
