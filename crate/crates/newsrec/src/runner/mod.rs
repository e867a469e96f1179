//! Configuration-driven training, evaluation, and temperature sweeps.
//!
//! One training run is sequential over batches (the optimizer state is a
//! serial dependency); independent runs (seeds, sweep points) are simply
//! separate calls with isolated RNG state. Everything is deterministic
//! given the config and seed.

pub mod adam;
pub mod checkpoint;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{fnv1a, make_training_samples, IngestOptions, MindDataset};
use crate::error::{Error, Result};
use crate::metrics::{evaluate_run, EvalSummary, MetricReport, SeedMetrics};
use crate::model::{FusionMode, Model, ModelConfig, ModelVariant};
use crate::news::Mode;
use crate::objectives::{ce_ns_loss, scl_loss, SclConfig};
use crate::tensor::{Scalar, Tensor};

use adam::{Adam, AdamConfig};
use checkpoint::CheckpointMeta;

/// Training objective switch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Ce,
    Scl,
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Objective::Ce => "ce",
            Objective::Scl => "scl",
        })
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ce" => Ok(Objective::Ce),
            "scl" => Ok(Objective::Scl),
            other => Err(Error::Config(format!("unknown objective: {other}"))),
        }
    }
}

/// Numeric precision of a run: single for training speed, double for
/// gradient checks and bitwise-reproducibility audits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    Single,
    Double,
}

impl Precision {
    pub fn bytes(self) -> u8 {
        match self {
            Precision::Single => 4,
            Precision::Double => 8,
        }
    }
}

impl FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "single" | "f32" => Ok(Precision::Single),
            "double" | "f64" => Ok(Precision::Double),
            other => Err(Error::Config(format!("unknown precision: {other}"))),
        }
    }
}

/// Everything one experiment needs. Mirrors the TOML config file; CLI
/// flags override individual fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub model: ModelVariant,
    pub fusion: FusionMode,
    pub objective: Objective,
    /// SCL temperature when no sweep selects one.
    pub tau: f64,
    /// Default depends on the model class: 512 for candidate-agnostic
    /// models, 256 for DKN, 64 for CAUM.
    pub batch_size: Option<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub k_negatives: usize,
    pub max_history: usize,
    pub seeds: Vec<u64>,
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    /// User-level subsampling fraction in (0, 1].
    pub subsample: f64,
    pub precision: Precision,
    pub grad_clip: Option<f64>,
    pub min_token_freq: usize,
    pub word_embeddings: Option<PathBuf>,
    pub entity_embeddings: Option<PathBuf>,
    /// None uses the variant's default dimensions.
    pub model_config: Option<ModelConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: ModelVariant::Nrms,
            fusion: FusionMode::Late,
            objective: Objective::Ce,
            tau: 0.1,
            batch_size: None,
            epochs: 25,
            learning_rate: 1e-4,
            k_negatives: 4,
            max_history: 50,
            seeds: vec![42, 43, 44, 45, 46],
            data_dir: PathBuf::from("data"),
            out_dir: PathBuf::from("runs"),
            subsample: 1.0,
            precision: Precision::Single,
            grad_clip: Some(5.0),
            min_token_freq: 1,
            word_embeddings: None,
            entity_embeddings: None,
            model_config: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn resolved_model_config(&self) -> ModelConfig {
        self.model_config
            .clone()
            .unwrap_or_else(|| ModelConfig::defaults_for(self.model))
    }

    /// Batch-size defaults by model class.
    pub fn effective_batch_size(&self) -> usize {
        self.batch_size.unwrap_or(match self.model {
            ModelVariant::Caum => 64,
            ModelVariant::Dkn => 256,
            _ => 512,
        })
    }

    pub fn ingest_options(&self) -> IngestOptions {
        let model_config = self.resolved_model_config();
        IngestOptions {
            title_len: model_config.title_len,
            min_token_freq: self.min_token_freq,
            max_history: self.max_history,
            subsample: self.subsample,
            word_embeddings: self.word_embeddings.clone(),
            entity_embeddings: self.entity_embeddings.clone(),
            word_dim: model_config.word_dim,
            entity_dim: model_config.entity_dim,
        }
    }

    /// Fingerprint of every field that changes what a trained model means.
    /// Evaluation refuses checkpoints whose fingerprint disagrees.
    pub fn protocol_hash(&self) -> u64 {
        let canonical = format!(
            "{}|{}|{}|{:.6}|{}|{}|{:.8}|{}|{:?}|{:?}",
            self.model,
            self.fusion,
            self.objective,
            self.tau,
            self.k_negatives,
            self.max_history,
            self.subsample,
            self.min_token_freq,
            self.precision,
            self.resolved_model_config(),
        );
        fnv1a(canonical.as_bytes())
    }

    pub fn checkpoint_path(&self, seed: u64) -> PathBuf {
        self.out_dir.join(format!(
            "{}_{}_{}_seed{}.ckpt",
            self.model, self.fusion, self.objective, seed
        ))
    }

    pub fn log_path(&self, seed: u64) -> PathBuf {
        self.out_dir.join(format!(
            "{}_{}_{}_seed{}.log",
            self.model, self.fusion, self.objective, seed
        ))
    }

    pub fn report_path(&self) -> PathBuf {
        self.out_dir.join(format!(
            "report_{}_{}_{}.tsv",
            self.model, self.fusion, self.objective
        ))
    }
}

/// Load and ingest the dataset behind a config. The ingestion RNG (used
/// only for randomly initialized unmatched pretrained rows) is fixed so
/// that every seed of one experiment sees the same tables.
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<MindDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x4D494E44);
    MindDataset::load(&cfg.data_dir, &cfg.ingest_options(), &mut rng)
}

#[derive(Debug, Clone, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    pub val_auc: f64,
    pub clipped_batches: usize,
}

/// Outcome of one seeded training run, with the best-validation-AUC
/// parameters restored into `model`.
pub struct TrainedRun<T: Scalar> {
    pub model: Model<T>,
    pub seed: u64,
    pub best_epoch: usize,
    pub best_val_auc: f64,
    pub epochs: Vec<EpochLog>,
    pub samples: usize,
    pub unsampled_impressions: usize,
}

/// Train one seed. Per epoch: shuffle the sample stream, iterate batches,
/// forward per the configured fusion mode, backward, Adam step; then
/// score the validation portion and track the best epoch. When
/// `checkpoint_path` is set, the best-epoch state (parameters, optimizer
/// moments, RNG position) is written there.
pub fn train<T: Scalar>(
    cfg: &ExperimentConfig,
    dataset: &MindDataset,
    seed: u64,
    checkpoint_path: Option<&Path>,
) -> Result<TrainedRun<T>> {
    let model_config = cfg.resolved_model_config();
    let mut init_rng = ChaCha8Rng::seed_from_u64(seed);
    let model: Model<T> = Model::new(
        cfg.model,
        cfg.fusion,
        &model_config,
        &dataset.vocab_sizes(),
        &dataset.pretrained,
        &mut init_rng,
    )?;

    let mut train_rng = ChaCha8Rng::seed_from_u64(seed);
    train_rng.set_stream(1);
    let (samples, unsampled) = make_training_samples(&dataset.train, cfg.k_negatives, &mut train_rng);
    if samples.is_empty() {
        return Err(Error::Config(
            "no training samples; every impression lacked a positive/negative pair".into(),
        ));
    }
    log::info!(
        "seed {seed}: {} samples from {} impressions ({} skipped)",
        samples.len(),
        dataset.train.len(),
        unsampled
    );

    let mut adam = Adam::new(
        &model.params,
        AdamConfig {
            learning_rate: cfg.learning_rate,
            clip_norm: cfg.grad_clip,
            ..AdamConfig::default()
        },
    );

    let batch_size = cfg.effective_batch_size().max(1);
    let dropout = model_config.dropout;
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut best_epoch = 0usize;
    let mut best_val_auc = f64::NEG_INFINITY;
    let mut best_values: Vec<Vec<T>> = Vec::new();

    for epoch in 0..cfg.epochs {
        // A fresh identity permutation per epoch keeps the trajectory a
        // pure function of (parameters, moments, RNG position, epoch),
        // which checkpoint resumption relies on.
        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.shuffle(&mut train_rng);
        let mut loss_sum = 0.0f64;
        let mut batches = 0usize;
        let mut clipped_batches = 0usize;
        for batch in order.chunks(batch_size) {
            model.params.zero_grads();
            let mut losses = Vec::with_capacity(batch.len());
            {
                let mut mode = Mode::Train {
                    dropout,
                    rng: &mut train_rng,
                };
                for &i in batch {
                    let sample = &samples[i];
                    let scores = model.sample_scores(sample, &dataset.features, &mut mode)?;
                    let loss = match cfg.objective {
                        Objective::Ce => ce_ns_loss(&scores, sample.positive_index())?,
                        Objective::Scl => {
                            scl_loss(&scores, &sample.labels, &SclConfig::with_temperature(cfg.tau))?
                        }
                    };
                    losses.push(loss);
                }
            }
            let batch_loss =
                Tensor::add_n(&losses)?.scale(T::one() / T::from_f64(losses.len() as f64));
            let loss_value = batch_loss.item().as_f64();
            if !loss_value.is_finite() {
                let users: Vec<&str> = batch
                    .iter()
                    .map(|&i| samples[i].user_id.as_str())
                    .collect();
                return Err(Error::Numeric(format!(
                    "non-finite loss {loss_value} at epoch {epoch}, batch {batches}; \
                     offending batch users: {users:?}"
                )));
            }
            batch_loss.backward()?;
            let info = adam.step(&model.params);
            if info.clipped {
                clipped_batches += 1;
            }
            loss_sum += loss_value;
            batches += 1;
        }

        let val = evaluate_run(&model, &dataset.validation, &dataset.features)?;
        let log_entry = EpochLog {
            epoch,
            mean_loss: loss_sum / batches.max(1) as f64,
            val_auc: val.aggregate.auc,
            clipped_batches,
        };
        log::info!(
            "seed {seed} epoch {epoch}: loss {:.5}, val AUC {:.4}{}",
            log_entry.mean_loss,
            log_entry.val_auc,
            if clipped_batches > 0 {
                format!(" ({clipped_batches} clipped batches)")
            } else {
                String::new()
            }
        );
        epochs.push(log_entry);

        if val.aggregate.auc > best_val_auc {
            best_val_auc = val.aggregate.auc;
            best_epoch = epoch;
            best_values = model
                .params
                .trainable()
                .map(|p| p.tensor().to_vec())
                .collect();
            if let Some(path) = checkpoint_path {
                if let Some(parent) = path.parent() {
                    fs::create_dir_all(parent)?;
                }
                checkpoint::save(
                    path,
                    &model,
                    &adam,
                    &CheckpointMeta {
                        precision_bytes: cfg.precision.bytes(),
                        config_hash: cfg.protocol_hash(),
                        epoch: epoch as u32,
                        adam_steps: adam.step_count,
                        rng_seed: seed,
                        rng_word_pos: train_rng.get_word_pos(),
                    },
                )?;
            }
        }
    }

    // Model selection: restore the best-validation-AUC epoch.
    for (p, values) in model.params.trainable().zip(best_values.iter()) {
        p.tensor().set_values(values)?;
    }

    Ok(TrainedRun {
        model,
        seed,
        best_epoch,
        best_val_auc,
        epochs,
        samples: samples.len(),
        unsampled_impressions: unsampled,
    })
}

/// Rebuild a model from config + dataset and load checkpointed values
/// into it, refusing on any protocol-fingerprint mismatch.
pub fn load_model_from_checkpoint<T: Scalar>(
    cfg: &ExperimentConfig,
    dataset: &MindDataset,
    path: &Path,
) -> Result<(Model<T>, Adam<T>, CheckpointMeta)> {
    let ckpt = checkpoint::load(path)?;
    if ckpt.meta.config_hash != cfg.protocol_hash() {
        return Err(Error::Checkpoint(format!(
            "{}: config fingerprint {:#x} does not match the current config {:#x}; \
             refusing to evaluate under a different protocol",
            path.display(),
            ckpt.meta.config_hash,
            cfg.protocol_hash()
        )));
    }
    if ckpt.meta.precision_bytes != cfg.precision.bytes() {
        return Err(Error::Checkpoint(format!(
            "{}: checkpoint precision ({} bytes) differs from configured precision",
            path.display(),
            ckpt.meta.precision_bytes
        )));
    }
    let mut init_rng = ChaCha8Rng::seed_from_u64(ckpt.meta.rng_seed);
    let model: Model<T> = Model::new(
        cfg.model,
        cfg.fusion,
        &cfg.resolved_model_config(),
        &dataset.vocab_sizes(),
        &dataset.pretrained,
        &mut init_rng,
    )?;
    let mut adam = Adam::new(
        &model.params,
        AdamConfig {
            learning_rate: cfg.learning_rate,
            clip_norm: cfg.grad_clip,
            ..AdamConfig::default()
        },
    );
    checkpoint::apply(&ckpt, &model.params, &mut adam)?;
    Ok((model, adam, ckpt.meta))
}

/// Resume training from a checkpoint: epochs `meta.epoch + 1 ..` replay
/// exactly as the original run would have, given identical data order.
pub fn resume<T: Scalar>(
    cfg: &ExperimentConfig,
    dataset: &MindDataset,
    path: &Path,
) -> Result<TrainedRun<T>> {
    let (model, mut adam, meta) = load_model_from_checkpoint::<T>(cfg, dataset, path)?;
    let seed = meta.rng_seed;

    let mut train_rng = ChaCha8Rng::seed_from_u64(seed);
    train_rng.set_stream(1);
    let (samples, unsampled) = make_training_samples(&dataset.train, cfg.k_negatives, &mut train_rng);
    train_rng.set_word_pos(meta.rng_word_pos);

    let batch_size = cfg.effective_batch_size().max(1);
    let dropout = cfg.resolved_model_config().dropout;
    let mut epochs = Vec::new();
    let mut best_epoch = meta.epoch as usize;
    let mut best_val_auc = f64::NEG_INFINITY;
    let mut best_values: Vec<Vec<T>> = model
        .params
        .trainable()
        .map(|p| p.tensor().to_vec())
        .collect();

    for epoch in (meta.epoch as usize + 1)..cfg.epochs {
        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.shuffle(&mut train_rng);
        let mut loss_sum = 0.0f64;
        let mut batches = 0usize;
        for batch in order.chunks(batch_size) {
            model.params.zero_grads();
            let mut losses = Vec::with_capacity(batch.len());
            {
                let mut mode = Mode::Train {
                    dropout,
                    rng: &mut train_rng,
                };
                for &i in batch {
                    let sample = &samples[i];
                    let scores = model.sample_scores(sample, &dataset.features, &mut mode)?;
                    let loss = match cfg.objective {
                        Objective::Ce => ce_ns_loss(&scores, sample.positive_index())?,
                        Objective::Scl => {
                            scl_loss(&scores, &sample.labels, &SclConfig::with_temperature(cfg.tau))?
                        }
                    };
                    losses.push(loss);
                }
            }
            let batch_loss =
                Tensor::add_n(&losses)?.scale(T::one() / T::from_f64(losses.len() as f64));
            batch_loss.backward()?;
            adam.step(&model.params);
            loss_sum += batch_loss.item().as_f64();
            batches += 1;
        }
        let val = evaluate_run(&model, &dataset.validation, &dataset.features)?;
        epochs.push(EpochLog {
            epoch,
            mean_loss: loss_sum / batches.max(1) as f64,
            val_auc: val.aggregate.auc,
            clipped_batches: 0,
        });
        if val.aggregate.auc > best_val_auc {
            best_val_auc = val.aggregate.auc;
            best_epoch = epoch;
            best_values = model
                .params
                .trainable()
                .map(|p| p.tensor().to_vec())
                .collect();
        }
    }
    for (p, values) in model.params.trainable().zip(best_values.iter()) {
        p.tensor().set_values(values)?;
    }
    Ok(TrainedRun {
        model,
        seed,
        best_epoch,
        best_val_auc,
        epochs,
        samples: samples.len(),
        unsampled_impressions: unsampled,
    })
}

/// Train every configured seed, writing checkpoints and per-epoch logs
/// under the output directory.
pub fn run_training(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let dataset = load_dataset(cfg)?;
    fs::create_dir_all(&cfg.out_dir)?;
    fs::write(
        cfg.out_dir.join("manifest.txt"),
        format!("{}\n", dataset.manifest),
    )?;
    let mut paths = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let path = cfg.checkpoint_path(seed);
        let log = match cfg.precision {
            Precision::Single => {
                let run = train::<f32>(cfg, &dataset, seed, Some(&path))?;
                render_log(cfg, &run)
            }
            Precision::Double => {
                let run = train::<f64>(cfg, &dataset, seed, Some(&path))?;
                render_log(cfg, &run)
            }
        };
        fs::write(cfg.log_path(seed), log)?;
        paths.push(path);
    }
    Ok(paths)
}

fn render_log<T: Scalar>(cfg: &ExperimentConfig, run: &TrainedRun<T>) -> String {
    let mut out = format!(
        "model {} fusion {} objective {} seed {}\nsamples {} (skipped impressions {})\n",
        cfg.model, cfg.fusion, cfg.objective, run.seed, run.samples, run.unsampled_impressions
    );
    for e in &run.epochs {
        out += &format!(
            "epoch {} loss {:.6} val_auc {:.6} clipped {}\n",
            e.epoch, e.mean_loss, e.val_auc, e.clipped_batches
        );
    }
    out += &format!("best epoch {} val_auc {:.6}\n", run.best_epoch, run.best_val_auc);
    out
}

/// Evaluate every configured seed's checkpoint on the test split and
/// aggregate. With one seed the standard deviation is absent.
pub fn run_evaluation(cfg: &ExperimentConfig) -> Result<MetricReport> {
    let dataset = load_dataset(cfg)?;
    let mut per_seed = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let path = cfg.checkpoint_path(seed);
        let summary = match cfg.precision {
            Precision::Single => {
                let (model, _, _) = load_model_from_checkpoint::<f32>(cfg, &dataset, &path)?;
                evaluate_run(&model, &dataset.test, &dataset.features)?
            }
            Precision::Double => {
                let (model, _, _) = load_model_from_checkpoint::<f64>(cfg, &dataset, &path)?;
                evaluate_run(&model, &dataset.test, &dataset.features)?
            }
        };
        per_seed.push(SeedMetrics {
            seed,
            metrics: summary.aggregate,
        });
    }
    Ok(MetricReport::new(
        cfg.model.to_string(),
        cfg.fusion.to_string(),
        cfg.objective.to_string(),
        (cfg.objective == Objective::Scl).then_some(cfg.tau),
        per_seed,
    ))
}

/// Evaluate an already trained model on the test split.
pub fn evaluate_test<T: Scalar>(run: &TrainedRun<T>, dataset: &MindDataset) -> Result<EvalSummary> {
    evaluate_run(&run.model, &dataset.test, &dataset.features)
}

// ---------------------------------------------------------------------
// Temperature sweep
// ---------------------------------------------------------------------

/// The SCL sweep grid: 0.08 to 0.30 inclusive in 0.02 steps (12 points).
pub fn temperature_grid() -> Vec<f64> {
    (0..12).map(|i| 0.08 + 0.02 * i as f64).collect()
}

/// Argmax of validation AUC; ties resolve toward the smaller temperature.
pub fn select_best_tau(rows: &[(f64, f64)]) -> Option<f64> {
    let mut best: Option<(f64, f64)> = None;
    for &(tau, auc) in rows {
        match best {
            None => best = Some((tau, auc)),
            Some((_, best_auc)) if auc > best_auc => best = Some((tau, auc)),
            _ => {}
        }
    }
    best.map(|(tau, _)| tau)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    /// `(tau, validation AUC)` per grid point, ascending in tau.
    pub rows: Vec<(f64, f64)>,
    pub best_tau: f64,
}

impl SweepResult {
    pub fn tsv(&self) -> String {
        let mut out = String::from("tau\tval_auc\n");
        for (tau, auc) in &self.rows {
            out += &format!("{tau:.2}\t{auc:.6}\n");
        }
        out += &format!("# best tau: {:.2}\n", self.best_tau);
        out
    }
}

/// Train one SCL model per grid temperature (first configured seed) and
/// select the validation-AUC argmax.
pub fn sweep_scl_temperature<T: Scalar>(
    cfg: &ExperimentConfig,
    dataset: &MindDataset,
) -> Result<SweepResult> {
    if cfg.objective != Objective::Scl {
        return Err(Error::Config(
            "temperature sweeps require the scl objective".into(),
        ));
    }
    let seed = *cfg.seeds.first().ok_or_else(|| {
        Error::Config("temperature sweep needs at least one seed".into())
    })?;
    let mut rows = Vec::with_capacity(12);
    for tau in temperature_grid() {
        let mut point = cfg.clone();
        point.tau = tau;
        let run = train::<T>(&point, dataset, seed, None)?;
        log::info!("sweep tau {tau:.2}: best val AUC {:.4}", run.best_val_auc);
        rows.push((tau, run.best_val_auc));
    }
    let best_tau = select_best_tau(&rows).expect("grid is nonempty");
    Ok(SweepResult { rows, best_tau })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_exactly_twelve_points_with_002_step() {
        let grid = temperature_grid();
        assert_eq!(grid.len(), 12);
        assert!((grid[0] - 0.08).abs() < 1e-12);
        assert!((grid[11] - 0.30).abs() < 1e-12);
        for pair in grid.windows(2) {
            assert!((pair[1] - pair[0] - 0.02).abs() < 1e-12);
        }
    }

    #[test]
    fn tau_selection_takes_argmax_with_smaller_tie() {
        let rows = vec![(0.08, 0.51), (0.10, 0.55), (0.12, 0.55), (0.14, 0.54)];
        assert_eq!(select_best_tau(&rows), Some(0.10));
        let monotone: Vec<(f64, f64)> = temperature_grid()
            .into_iter()
            .enumerate()
            .map(|(i, t)| (t, 0.5 + 0.01 * i as f64))
            .collect();
        assert_eq!(select_best_tau(&monotone), Some(0.30));
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = ExperimentConfig::default();
        let text = cfg.to_toml().unwrap();
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(back.protocol_hash(), cfg.protocol_hash());
        assert_eq!(back.seeds, cfg.seeds);
    }

    #[test]
    fn protocol_hash_sees_model_changes() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.model = ModelVariant::Caum;
        assert_ne!(a.protocol_hash(), b.protocol_hash());
    }

    #[test]
    fn batch_size_defaults_by_model_class() {
        let mut cfg = ExperimentConfig::default();
        assert_eq!(cfg.effective_batch_size(), 512);
        cfg.model = ModelVariant::Dkn;
        assert_eq!(cfg.effective_batch_size(), 256);
        cfg.model = ModelVariant::Caum;
        assert_eq!(cfg.effective_batch_size(), 64);
        cfg.batch_size = Some(16);
        assert_eq!(cfg.effective_batch_size(), 16);
    }
}
