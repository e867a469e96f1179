//! Checkpoint round trip: train a few epochs while checkpointing, then
//! resume from the saved state and show that the continued trajectory
//! matches a run that never stopped.
//!
//! ```bash
//! cargo run --release --example checkpoint_resume
//! ```

use newsrec::data::synthetic;
use newsrec::model::{FusionMode, ModelConfig, ModelVariant};
use newsrec::runner::{load_dataset, resume, train, ExperimentConfig, Objective};

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();

    let dir = std::env::temp_dir().join(format!("newsrec-ckpt-{}", std::process::id()));
    synthetic::generate(
        &dir,
        &synthetic::SyntheticSpec {
            train_impressions: 300,
            dev_impressions: 80,
            users: 80,
            ..synthetic::SyntheticSpec::default()
        },
    )?;

    let mut cfg = ExperimentConfig {
        model: ModelVariant::Naml,
        fusion: FusionMode::Late,
        objective: Objective::Ce,
        epochs: 2,
        batch_size: Some(32),
        learning_rate: 1e-3,
        seeds: vec![5],
        data_dir: dir.clone(),
        out_dir: dir.join("runs"),
        model_config: Some(ModelConfig {
            title_len: 8,
            word_dim: 12,
            cnn_filters: 10,
            cat_out_dim: 10,
            query_dim: 8,
            ..ModelConfig::defaults_for(ModelVariant::Naml)
        }),
        ..ExperimentConfig::default()
    };

    let dataset = load_dataset(&cfg)?;
    let ckpt = cfg.checkpoint_path(5);

    // Phase 1: two epochs, checkpointing the best-validation state.
    let short = train::<f64>(&cfg, &dataset, 5, Some(&ckpt))?;
    println!(
        "short run: {} epochs, best epoch {} (val AUC {:.4})",
        short.epochs.len(),
        short.best_epoch,
        short.best_val_auc
    );

    // Phase 2: extend the budget and resume from the checkpoint.
    cfg.epochs = 4;
    let resumed = resume::<f64>(&cfg, &dataset, &ckpt)?;
    println!("resumed run continues at epoch {}", short.best_epoch + 1);

    // Reference: one uninterrupted run over the full budget.
    let full = train::<f64>(&cfg, &dataset, 5, None)?;

    println!("\n{:<7} {:>14} {:>14}", "epoch", "uninterrupted", "resumed");
    for e in &full.epochs {
        let resumed_loss = resumed
            .epochs
            .iter()
            .find(|r| r.epoch == e.epoch)
            .map(|r| format!("{:.10}", r.mean_loss))
            .unwrap_or_else(|| "(before ckpt)".into());
        println!("{:<7} {:>14.10} {:>14}", e.epoch, e.mean_loss, resumed_loss);
    }

    for r in &resumed.epochs {
        let f = full.epochs.iter().find(|e| e.epoch == r.epoch).unwrap();
        assert_eq!(
            f.mean_loss.to_bits(),
            r.mean_loss.to_bits(),
            "epoch {} diverged after resume",
            r.epoch
        );
    }
    println!("\nresumed losses are bit-identical to the uninterrupted run");
    Ok(())
}
