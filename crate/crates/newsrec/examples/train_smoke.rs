//! End-to-end training demo: generate a synthetic corpus, train NRMS
//! under late fusion with cross-entropy for three epochs, and evaluate on
//! the held-out test portion.
//!
//! ```bash
//! cargo run --release --example train_smoke
//! ```

use newsrec::data::synthetic;
use newsrec::model::{FusionMode, ModelConfig, ModelVariant};
use newsrec::runner::{evaluate_test, load_dataset, train, ExperimentConfig, Objective};

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();

    let dir = std::env::temp_dir().join(format!("newsrec-smoke-{}", std::process::id()));
    synthetic::generate(
        &dir,
        &synthetic::SyntheticSpec {
            train_impressions: 2000,
            dev_impressions: 500,
            ..synthetic::SyntheticSpec::default()
        },
    )?;

    let cfg = ExperimentConfig {
        model: ModelVariant::Nrms,
        fusion: FusionMode::Late,
        objective: Objective::Ce,
        epochs: 3,
        batch_size: Some(64),
        learning_rate: 1e-3,
        seeds: vec![1],
        data_dir: dir.clone(),
        model_config: Some(ModelConfig {
            title_len: 10,
            word_dim: 32,
            heads: 4,
            head_dim: 8,
            query_dim: 16,
            ..ModelConfig::defaults_for(ModelVariant::Nrms)
        }),
        ..ExperimentConfig::default()
    };

    let dataset = load_dataset(&cfg)?;
    println!(
        "training {} / {} fusion / {} on {} samples ({} train impressions)\n",
        cfg.model,
        cfg.fusion,
        cfg.objective,
        dataset.train.len(),
        dataset.manifest.train_impressions
    );

    let run = train::<f32>(&cfg, &dataset, 1, None)?;
    println!("{:<7} {:>12} {:>10}", "epoch", "mean loss", "val AUC");
    for e in &run.epochs {
        println!("{:<7} {:>12.5} {:>10.4}", e.epoch, e.mean_loss, e.val_auc);
    }
    println!(
        "\nselected epoch {} (best validation AUC {:.4})",
        run.best_epoch, run.best_val_auc
    );

    let test = evaluate_test(&run, &dataset)?;
    println!("\nheld-out test metrics:");
    println!("  AUC     {:.4}", test.aggregate.auc);
    println!("  MRR     {:.4}", test.aggregate.mrr);
    println!("  nDCG@5  {:.4}", test.aggregate.ndcg5);
    println!("  nDCG@10 {:.4}", test.aggregate.ndcg10);
    Ok(())
}
