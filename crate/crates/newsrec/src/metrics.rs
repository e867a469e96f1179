//! Impression-level ranking metrics, multi-seed aggregation, and model
//! parameter accounting.

use serde::{Deserialize, Serialize};

use crate::data::ResolvedImpression;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::news::{Mode, NewsFeatures};
use crate::tensor::{no_grad, Scalar};

/// Area under the ROC curve with fractional tie credit:
/// `(#concordant + ½·#tied) / (#pos · #neg)`. Needs both classes.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::shape("auc", "scores and labels differ in length"));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::degenerate("auc", "needs a positive and a negative"));
    }
    // Rank-sum formulation; ties share their average rank, which yields
    // exactly the ½ credit of the pairwise definition.
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_of = vec![0.0f64; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            rank_of[idx] = avg_rank;
        }
        i = j + 1;
    }
    let pos_rank_sum: f64 = (0..scores.len()).filter(|&i| labels[i]).map(|i| rank_of[i]).sum();
    let p = positives as f64;
    Ok((pos_rank_sum - p * (p + 1.0) / 2.0) / (p * negatives as f64))
}

/// Candidate order by descending score; ties keep the original candidate
/// order (stable sort), making rank-based metrics deterministic.
pub fn descending_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

/// Mean over all positives of `1 / rank(positive)`.
pub fn mrr(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::shape("mrr", "scores and labels differ in length"));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 {
        return Err(Error::degenerate("mrr", "needs at least one positive"));
    }
    let order = descending_order(scores);
    let sum: f64 = order
        .iter()
        .enumerate()
        .filter(|(_, &idx)| labels[idx])
        .map(|(rank0, _)| 1.0 / (rank0 + 1) as f64)
        .sum();
    Ok(sum / positives as f64)
}

/// Binary-relevance nDCG at cutoff `k`.
pub fn ndcg_at_k(scores: &[f64], labels: &[bool], k: usize) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::shape("ndcg", "scores and labels differ in length"));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 {
        return Err(Error::degenerate("ndcg", "needs at least one positive"));
    }
    let order = descending_order(scores);
    let dcg: f64 = order
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, &idx)| labels[idx])
        .map(|(rank0, _)| 1.0 / ((rank0 + 2) as f64).log2())
        .sum();
    let ideal: f64 = (0..positives.min(k))
        .map(|rank0| 1.0 / ((rank0 + 2) as f64).log2())
        .sum();
    Ok(dcg / ideal)
}

/// Metrics of one impression; `None` marks a documented exclusion
/// (single-class for AUC, zero positives for the rank metrics).
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct ImpressionMetrics {
    pub auc: Option<f64>,
    pub mrr: Option<f64>,
    pub ndcg5: Option<f64>,
    pub ndcg10: Option<f64>,
}

/// One run's aggregate: unweighted means over the included impressions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricVector {
    pub auc: f64,
    pub mrr: f64,
    pub ndcg5: f64,
    pub ndcg10: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalSummary {
    pub aggregate: MetricVector,
    pub impressions: usize,
    /// Impressions excluded from AUC (single-class candidate lists).
    pub auc_excluded: usize,
    /// Impressions excluded from MRR/nDCG (no positive at all).
    pub rank_excluded: usize,
    pub per_impression: Vec<ImpressionMetrics>,
}

/// Compute per-impression metrics from candidate scores, excluding (and
/// counting) impressions a metric is undefined for, then aggregate by
/// unweighted mean.
pub fn summarize_impressions(per_impression: Vec<ImpressionMetrics>) -> EvalSummary {
    let mut sums = [0.0f64; 4];
    let mut counts = [0usize; 4];
    for m in &per_impression {
        for (i, v) in [m.auc, m.mrr, m.ndcg5, m.ndcg10].into_iter().enumerate() {
            if let Some(v) = v {
                sums[i] += v;
                counts[i] += 1;
            }
        }
    }
    let mean = |i: usize| if counts[i] == 0 { 0.0 } else { sums[i] / counts[i] as f64 };
    EvalSummary {
        aggregate: MetricVector {
            auc: mean(0),
            mrr: mean(1),
            ndcg5: mean(2),
            ndcg10: mean(3),
        },
        impressions: per_impression.len(),
        auc_excluded: per_impression.iter().filter(|m| m.auc.is_none()).count(),
        rank_excluded: per_impression.iter().filter(|m| m.mrr.is_none()).count(),
        per_impression,
    }
}

pub fn impression_metrics(scores: &[f64], labels: &[bool]) -> ImpressionMetrics {
    ImpressionMetrics {
        auc: auc(scores, labels).ok(),
        mrr: mrr(scores, labels).ok(),
        ndcg5: ndcg_at_k(scores, labels, 5).ok(),
        ndcg10: ndcg_at_k(scores, labels, 10).ok(),
    }
}

/// Score every impression of a split with the model (no gradient graphs)
/// and aggregate the ranking metrics.
pub fn evaluate_run<T: Scalar>(
    model: &Model<T>,
    impressions: &[ResolvedImpression],
    catalog: &[NewsFeatures],
) -> Result<EvalSummary> {
    no_grad(|| {
        let mut per_impression = Vec::with_capacity(impressions.len());
        for imp in impressions {
            let scores = model.impression_scores(imp, catalog, &mut Mode::Eval)?;
            let scores: Vec<f64> = scores.values().iter().map(|v| v.as_f64()).collect();
            let labels: Vec<bool> = imp.candidates.iter().map(|(_, c)| *c).collect();
            per_impression.push(impression_metrics(&scores, &labels));
        }
        Ok(summarize_impressions(per_impression))
    })
}

// ---------------------------------------------------------------------
// Parameter accounting
// ---------------------------------------------------------------------

/// Trainable-parameter totals attributed by name prefix; the components
/// partition the grand total exactly.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParameterBreakdown {
    pub news_encoder: usize,
    pub user_encoder: usize,
    pub other: usize,
}

impl ParameterBreakdown {
    pub fn total(&self) -> usize {
        self.news_encoder + self.user_encoder + self.other
    }
}

/// Sum trainable parameter sizes by component prefix. A parameter outside
/// the `ne.` / `ue.` / `other.` namespaces is an accounting error.
pub fn count_parameters<T: Scalar>(model: &Model<T>) -> Result<ParameterBreakdown> {
    count_parameter_set(&model.params)
}

pub fn count_parameter_set<T: Scalar>(
    params: &crate::params::ParamSet<T>,
) -> Result<ParameterBreakdown> {
    let mut breakdown = ParameterBreakdown::default();
    for p in params.trainable() {
        if p.name().starts_with("ne.") {
            breakdown.news_encoder += p.numel();
        } else if p.name().starts_with("ue.") {
            breakdown.user_encoder += p.numel();
        } else if p.name().starts_with("other.") {
            breakdown.other += p.numel();
        } else {
            return Err(Error::Accounting(format!(
                "parameter {} has no recognized component prefix",
                p.name()
            )));
        }
    }
    Ok(breakdown)
}

// ---------------------------------------------------------------------
// Multi-seed reports
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedMetrics {
    pub seed: u64,
    pub metrics: MetricVector,
}

/// Per-run metric report: per-seed values plus mean and (for ≥ 2 seeds)
/// population standard deviation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricReport {
    pub model: String,
    pub fusion: String,
    pub objective: String,
    pub tau: Option<f64>,
    pub per_seed: Vec<SeedMetrics>,
    pub mean: MetricVector,
    pub std: Option<MetricVector>,
}

impl MetricReport {
    pub fn new(
        model: String,
        fusion: String,
        objective: String,
        tau: Option<f64>,
        per_seed: Vec<SeedMetrics>,
    ) -> Self {
        let n = per_seed.len() as f64;
        let mean_of = |f: fn(&MetricVector) -> f64| -> f64 {
            per_seed.iter().map(|s| f(&s.metrics)).sum::<f64>() / n
        };
        let mean = MetricVector {
            auc: mean_of(|m| m.auc),
            mrr: mean_of(|m| m.mrr),
            ndcg5: mean_of(|m| m.ndcg5),
            ndcg10: mean_of(|m| m.ndcg10),
        };
        let std = if per_seed.len() >= 2 {
            let std_of = |f: fn(&MetricVector) -> f64, mu: f64| -> f64 {
                (per_seed.iter().map(|s| (f(&s.metrics) - mu).powi(2)).sum::<f64>() / n).sqrt()
            };
            Some(MetricVector {
                auc: std_of(|m| m.auc, mean.auc),
                mrr: std_of(|m| m.mrr, mean.mrr),
                ndcg5: std_of(|m| m.ndcg5, mean.ndcg5),
                ndcg10: std_of(|m| m.ndcg10, mean.ndcg10),
            })
        } else {
            None
        };
        MetricReport {
            model,
            fusion,
            objective,
            tau,
            per_seed,
            mean,
            std,
        }
    }

    pub const TSV_HEADER: &'static str = "model\tfusion\tobjective\ttau\tseeds\tauc_mean\tauc_std\tmrr_mean\tmrr_std\tndcg5_mean\tndcg5_std\tndcg10_mean\tndcg10_std";

    /// One row of the delimiter-separated report table.
    pub fn tsv_row(&self) -> String {
        let std_field = |f: fn(&MetricVector) -> f64| -> String {
            match &self.std {
                Some(s) => format!("{:.6}", f(s)),
                None => "-".to_string(),
            }
        };
        format!(
            "{}\t{}\t{}\t{}\t{}\t{:.6}\t{}\t{:.6}\t{}\t{:.6}\t{}\t{:.6}\t{}",
            self.model,
            self.fusion,
            self.objective,
            self.tau.map_or("-".to_string(), |t| format!("{t:.2}")),
            self.per_seed.len(),
            self.mean.auc,
            std_field(|m| m.auc),
            self.mean.mrr,
            std_field(|m| m.mrr),
            self.mean.ndcg5,
            std_field(|m| m.ndcg5),
            self.mean.ndcg10,
            std_field(|m| m.ndcg10),
        )
    }

    /// Human-readable block.
    pub fn summary(&self) -> String {
        let mut out = format!(
            "{} / {} fusion / {}{}  ({} seed{})\n",
            self.model,
            self.fusion,
            self.objective,
            self.tau.map_or(String::new(), |t| format!(" (tau {t:.2})")),
            self.per_seed.len(),
            if self.per_seed.len() == 1 { "" } else { "s" },
        );
        let line = |name: &str, mean: f64, std: Option<f64>| match std {
            Some(s) => format!("  {name:<8} {mean:.4} +/- {s:.4}\n"),
            None => format!("  {name:<8} {mean:.4}\n"),
        };
        out += &line("AUC", self.mean.auc, self.std.as_ref().map(|s| s.auc));
        out += &line("MRR", self.mean.mrr, self.std.as_ref().map(|s| s.mrr));
        out += &line("nDCG@5", self.mean.ndcg5, self.std.as_ref().map(|s| s.ndcg5));
        out += &line("nDCG@10", self.mean.ndcg10, self.std.as_ref().map(|s| s.ndcg10));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Quadratic pairwise oracle for AUC.
    fn auc_pairwise(scores: &[f64], labels: &[bool]) -> f64 {
        let mut concordant = 0.0;
        let mut pairs = 0.0;
        for (i, &li) in labels.iter().enumerate() {
            if !li {
                continue;
            }
            for (j, &lj) in labels.iter().enumerate() {
                if lj {
                    continue;
                }
                pairs += 1.0;
                if scores[i] > scores[j] {
                    concordant += 1.0;
                } else if scores[i] == scores[j] {
                    concordant += 0.5;
                }
            }
        }
        concordant / pairs
    }

    #[test]
    fn auc_trivial_cases() {
        assert_eq!(auc(&[0.9, 0.1], &[true, false]).unwrap(), 1.0);
        assert_eq!(auc(&[0.1, 0.9], &[true, false]).unwrap(), 0.0);
        assert_eq!(auc(&[0.5, 0.5, 0.5], &[true, false, false]).unwrap(), 0.5);
        assert!(auc(&[0.1, 0.2], &[true, true]).is_err());
    }

    #[test]
    fn auc_matches_pairwise_oracle_with_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..500 {
            let n = rng.random_range(2..30);
            // Quantized scores force plenty of ties.
            let scores: Vec<f64> = (0..n)
                .map(|_| (rng.random_range(0..6) as f64) / 5.0)
                .collect();
            let labels: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < 0.4).collect();
            if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
                continue;
            }
            let fast = auc(&scores, &labels).unwrap();
            let slow = auc_pairwise(&scores, &labels);
            assert!((fast - slow).abs() < 1e-12);
        }
    }

    #[test]
    fn auc_invariant_under_monotone_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let n = rng.random_range(2..20);
            let scores: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let labels: Vec<bool> = (0..n).map(|i| i % 3 == 0).collect();
            if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
                continue;
            }
            let transformed: Vec<f64> = scores.iter().map(|s| (2.0 * s).exp() + 1.0).collect();
            let a = auc(&scores, &labels).unwrap();
            let b = auc(&transformed, &labels).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn mrr_closed_forms() {
        assert_eq!(mrr(&[0.9, 0.5, 0.1], &[true, false, false]).unwrap(), 1.0);
        let third = mrr(&[0.1, 0.5, 0.9], &[true, false, false]).unwrap();
        assert!((third - 1.0 / 3.0).abs() < 1e-12);
        // positives at ranks 1 and 2
        let two = mrr(&[0.9, 0.8, 0.1], &[true, true, false]).unwrap();
        assert!((two - 0.75).abs() < 1e-12);
        assert!(mrr(&[0.1], &[false]).is_err());
    }

    #[test]
    fn ndcg_closed_forms() {
        assert_eq!(ndcg_at_k(&[0.9, 0.1], &[true, false], 5).unwrap(), 1.0);
        let rank2 = ndcg_at_k(&[0.5, 0.9], &[true, false], 5).unwrap();
        assert!((rank2 - 1.0 / 3.0f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn ndcg_matches_direct_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let n = rng.random_range(1..25);
            let scores: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let labels: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < 0.35).collect();
            if !labels.iter().any(|&l| l) {
                continue;
            }
            for k in [5usize, 10] {
                let got = ndcg_at_k(&scores, &labels, k).unwrap();
                // direct formula over the stable descending order
                let order = descending_order(&scores);
                let mut dcg = 0.0;
                for (r, &idx) in order.iter().take(k).enumerate() {
                    if labels[idx] {
                        dcg += 1.0 / ((r + 2) as f64).log2();
                    }
                }
                let pos = labels.iter().filter(|&&l| l).count();
                let mut idcg = 0.0;
                for r in 0..pos.min(k) {
                    idcg += 1.0 / ((r + 2) as f64).log2();
                }
                assert!((got - dcg / idcg).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rank_metrics_stable_under_order_preserving_permutation() {
        // Shuffling candidates while keeping scores strictly ordered must
        // not change MRR/nDCG.
        let scores = vec![0.9, 0.7, 0.5, 0.3];
        let labels = vec![false, true, false, true];
        let base_mrr = mrr(&scores, &labels).unwrap();
        let base_ndcg = ndcg_at_k(&scores, &labels, 5).unwrap();
        let perm = [2usize, 0, 3, 1];
        let p_scores: Vec<f64> = perm.iter().map(|&i| scores[i]).collect();
        let p_labels: Vec<bool> = perm.iter().map(|&i| labels[i]).collect();
        assert!((mrr(&p_scores, &p_labels).unwrap() - base_mrr).abs() < 1e-12);
        assert!((ndcg_at_k(&p_scores, &p_labels, 5).unwrap() - base_ndcg).abs() < 1e-12);
    }

    #[test]
    fn aggregate_is_mean_of_per_impression() {
        let per = vec![
            ImpressionMetrics { auc: Some(1.0), mrr: Some(1.0), ndcg5: Some(1.0), ndcg10: Some(1.0) },
            ImpressionMetrics { auc: Some(0.0), mrr: Some(0.5), ndcg5: Some(0.5), ndcg10: Some(0.5) },
            ImpressionMetrics { auc: None, mrr: Some(1.0), ndcg5: Some(1.0), ndcg10: Some(1.0) },
        ];
        let summary = summarize_impressions(per);
        assert!((summary.aggregate.auc - 0.5).abs() < 1e-12);
        assert!((summary.aggregate.mrr - 2.5 / 3.0).abs() < 1e-12);
        assert_eq!(summary.auc_excluded, 1);
        assert_eq!(summary.rank_excluded, 0);
    }

    #[test]
    fn report_std_absent_for_single_seed() {
        let seed = SeedMetrics {
            seed: 1,
            metrics: MetricVector { auc: 0.6, mrr: 0.3, ndcg5: 0.3, ndcg10: 0.35 },
        };
        let report = MetricReport::new("nrms".into(), "late".into(), "ce".into(), None, vec![seed]);
        assert!(report.std.is_none());
        assert!(report.tsv_row().contains("\t-\t"));
    }

    #[test]
    fn report_mean_and_std_over_five_seeds() {
        let per_seed: Vec<SeedMetrics> = (0..5)
            .map(|i| SeedMetrics {
                seed: i,
                metrics: MetricVector {
                    auc: 0.5 + 0.02 * i as f64,
                    mrr: 0.3,
                    ndcg5: 0.3,
                    ndcg10: 0.35,
                },
            })
            .collect();
        let report = MetricReport::new(
            "nrms".into(),
            "late".into(),
            "scl".into(),
            Some(0.14),
            per_seed,
        );
        assert!((report.mean.auc - 0.54).abs() < 1e-12);
        let std = report.std.expect("std over 5 seeds");
        // population std of {0.50, 0.52, 0.54, 0.56, 0.58} is sqrt(8e-4)
        assert!((std.auc - 0.0008f64.sqrt()).abs() < 1e-12);
        assert_eq!(std.mrr, 0.0);
        assert!(report.tsv_row().contains("scl\t0.14\t5"));
    }
}
