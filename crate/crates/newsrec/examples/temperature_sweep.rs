//! Supervised-contrastive temperature sweep over the 12-point grid
//! {0.08, 0.10, ..., 0.30}, selecting the validation-AUC argmax, on a
//! small synthetic corpus.
//!
//! ```bash
//! cargo run --release --example temperature_sweep
//! ```

use newsrec::data::synthetic;
use newsrec::model::{FusionMode, ModelConfig, ModelVariant};
use newsrec::runner::{load_dataset, sweep_scl_temperature, ExperimentConfig, Objective};

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();

    let dir = std::env::temp_dir().join(format!("newsrec-sweep-{}", std::process::id()));
    synthetic::generate(
        &dir,
        &synthetic::SyntheticSpec {
            train_impressions: 400,
            dev_impressions: 120,
            users: 120,
            ..synthetic::SyntheticSpec::default()
        },
    )?;

    let cfg = ExperimentConfig {
        model: ModelVariant::Nrms,
        fusion: FusionMode::Late,
        objective: Objective::Scl,
        epochs: 2,
        batch_size: Some(64),
        learning_rate: 1e-3,
        seeds: vec![3],
        data_dir: dir,
        model_config: Some(ModelConfig {
            title_len: 10,
            word_dim: 16,
            heads: 2,
            head_dim: 8,
            query_dim: 12,
            ..ModelConfig::defaults_for(ModelVariant::Nrms)
        }),
        ..ExperimentConfig::default()
    };

    let dataset = load_dataset(&cfg)?;
    println!("sweeping tau over 12 grid points (one short run each)...\n");
    let result = sweep_scl_temperature::<f32>(&cfg, &dataset)?;
    print!("{}", result.tsv());
    println!("\nselected tau = {:.2} by validation AUC", result.best_tau);
    Ok(())
}
