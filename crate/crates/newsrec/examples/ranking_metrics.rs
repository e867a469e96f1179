//! Ranking metrics on a toy impression set: AUC with tie credit, MRR,
//! and nDCG at 5/10, plus the exclusion rules for degenerate impressions.
//!
//! ```bash
//! cargo run --example ranking_metrics
//! ```

use newsrec::metrics::{impression_metrics, summarize_impressions};

fn main() {
    // (scores, labels) per impression; the second one is all ties and the
    // last one has no positive at all.
    let impressions: Vec<(Vec<f64>, Vec<bool>)> = vec![
        (vec![2.1, 0.3, -0.4, 1.0], vec![true, false, false, false]),
        (vec![0.5, 0.5, 0.5], vec![true, false, false]),
        (vec![-0.2, 1.4, 0.9, 0.1, 0.7], vec![false, true, true, false, false]),
        (vec![0.9, 0.2], vec![false, false]),
    ];

    println!(
        "{:<28} {:>8} {:>8} {:>8} {:>8}",
        "impression", "AUC", "MRR", "nDCG@5", "nDCG@10"
    );
    let mut per_impression = Vec::new();
    for (i, (scores, labels)) in impressions.iter().enumerate() {
        let m = impression_metrics(scores, labels);
        let fmt = |v: Option<f64>| v.map_or("excl".to_string(), |v| format!("{v:.4}"));
        println!(
            "{:<28} {:>8} {:>8} {:>8} {:>8}",
            format!("#{i} ({} candidates)", scores.len()),
            fmt(m.auc),
            fmt(m.mrr),
            fmt(m.ndcg5),
            fmt(m.ndcg10)
        );
        per_impression.push(m);
    }

    let summary = summarize_impressions(per_impression);
    println!(
        "\naggregate over {} impressions (unweighted mean of included ones):",
        summary.impressions
    );
    println!("  AUC     {:.4}   ({} excluded: single-class)", summary.aggregate.auc, summary.auc_excluded);
    println!("  MRR     {:.4}   ({} excluded: no positive)", summary.aggregate.mrr, summary.rank_excluded);
    println!("  nDCG@5  {:.4}", summary.aggregate.ndcg5);
    println!("  nDCG@10 {:.4}", summary.aggregate.ndcg10);

    // The all-ties impression gets exactly 0.5 AUC from the ½ tie credit.
    assert_eq!(summary.per_impression[1].auc, Some(0.5));
}
