//! Command-line front end: `train`, `evaluate`, `sweep`, `report`, plus a
//! synthetic-corpus generator for runs without the real dataset.

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use newsrec::data::synthetic::{self, SyntheticSpec};
use newsrec::model::{FusionMode, ModelVariant};
use newsrec::runner::{
    self, load_dataset, run_evaluation, run_training, ExperimentConfig, Objective, Precision,
};

#[derive(Parser)]
#[command(
    name = "newsrec",
    about = "Neural news recommendation under early/late fusion and CE/SCL training",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model per configured seed; writes checkpoints, epoch
    /// logs, and the ingestion manifest to the output directory.
    Train(RunArgs),
    /// Evaluate the trained checkpoints on the test split and write a
    /// metric report (mean and std across seeds).
    Evaluate(RunArgs),
    /// Sweep the supervised-contrastive temperature over its 12-point
    /// grid and report the validation-AUC argmax.
    Sweep(RunArgs),
    /// Merge the per-run report tables under the output directory into
    /// one table (one row per model x fusion x objective).
    Report(ReportArgs),
    /// Generate a deterministic synthetic MIND-format corpus.
    GenData(GenDataArgs),
}

#[derive(Args, Clone)]
struct RunArgs {
    /// TOML experiment config; flags below override individual fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<ModelVariant>,
    /// Click-behavior fusion: early | late.
    #[arg(long)]
    fusion: Option<FusionMode>,
    /// Training objective: ce | scl.
    #[arg(long)]
    objective: Option<Objective>,
    /// SCL temperature (when not sweeping).
    #[arg(long)]
    tau: Option<f64>,
    /// Single seed (shorthand for --seeds with one value).
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated seed list.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// User-level subsampling fraction in (0, 1].
    #[arg(long)]
    subsample: Option<f64>,
    /// Output directory for checkpoints, logs, and reports.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Numeric precision: single | double.
    #[arg(long)]
    precision: Option<Precision>,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory containing report_*.tsv files.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 17)]
    seed: u64,
    #[arg(long, default_value_t = 2600)]
    train_impressions: usize,
    #[arg(long, default_value_t = 600)]
    dev_impressions: usize,
    #[arg(long, default_value_t = 400)]
    users: usize,
}

fn merge(args: &RunArgs) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_toml_file(path)
            .with_context(|| format!("reading config {}", path.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = args.model {
        cfg.model = v;
    }
    if let Some(v) = args.fusion {
        cfg.fusion = v;
    }
    if let Some(v) = args.objective {
        cfg.objective = v;
    }
    if let Some(v) = args.tau {
        cfg.tau = v;
    }
    if let Some(seeds) = &args.seeds {
        cfg.seeds = seeds.clone();
    }
    if let Some(seed) = args.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(v) = args.epochs {
        cfg.epochs = v;
    }
    if args.batch_size.is_some() {
        cfg.batch_size = args.batch_size;
    }
    if let Some(v) = &args.data_dir {
        cfg.data_dir = v.clone();
    }
    if let Some(v) = args.subsample {
        if !(0.0..=1.0).contains(&v) || v == 0.0 {
            bail!("--subsample must be in (0, 1]");
        }
        cfg.subsample = v;
    }
    if let Some(v) = &args.out {
        cfg.out_dir = v.clone();
    }
    if let Some(v) = args.learning_rate {
        cfg.learning_rate = v;
    }
    if let Some(v) = args.precision {
        cfg.precision = v;
    }
    Ok(cfg)
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    match Cli::parse().command {
        Command::Train(args) => {
            let cfg = merge(&args)?;
            fs::create_dir_all(&cfg.out_dir)?;
            fs::write(cfg.out_dir.join("config.toml"), cfg.to_toml()?)?;
            let paths = run_training(&cfg)?;
            println!("trained {} seed(s); checkpoints:", paths.len());
            for p in paths {
                println!("  {}", p.display());
            }
            println!(
                "ingestion manifest: {}",
                cfg.out_dir.join("manifest.txt").display()
            );
        }
        Command::Evaluate(args) => {
            let cfg = merge(&args)?;
            let report = run_evaluation(&cfg)?;
            fs::create_dir_all(&cfg.out_dir)?;
            let path = cfg.report_path();
            fs::write(
                &path,
                format!(
                    "{}\n{}\n",
                    newsrec::metrics::MetricReport::TSV_HEADER,
                    report.tsv_row()
                ),
            )?;
            print!("{}", report.summary());
            println!("report table: {}", path.display());
        }
        Command::Sweep(args) => {
            let mut cfg = merge(&args)?;
            cfg.objective = Objective::Scl;
            let dataset = load_dataset(&cfg)?;
            let result = match cfg.precision {
                Precision::Single => runner::sweep_scl_temperature::<f32>(&cfg, &dataset)?,
                Precision::Double => runner::sweep_scl_temperature::<f64>(&cfg, &dataset)?,
            };
            fs::create_dir_all(&cfg.out_dir)?;
            let path = cfg.out_dir.join("sweep.tsv");
            fs::write(&path, result.tsv())?;
            print!("{}", result.tsv());
            println!(
                "best tau {:.2} (written to {})",
                result.best_tau,
                path.display()
            );
        }
        Command::Report(args) => {
            let mut rows = Vec::new();
            for entry in fs::read_dir(&args.out)? {
                let path = entry?.path();
                let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
                if name.starts_with("report_") && name.ends_with(".tsv") {
                    let text = fs::read_to_string(&path)?;
                    rows.extend(text.lines().skip(1).map(str::to_string));
                }
            }
            if rows.is_empty() {
                bail!("no report_*.tsv files under {}", args.out.display());
            }
            rows.sort();
            let mut table = String::from(newsrec::metrics::MetricReport::TSV_HEADER);
            table.push('\n');
            for row in &rows {
                table.push_str(row);
                table.push('\n');
            }
            print!("{table}");
            fs::write(args.out.join("report.tsv"), table)?;
            println!("merged table: {}", args.out.join("report.tsv").display());
        }
        Command::GenData(args) => {
            let spec = SyntheticSpec {
                seed: args.seed,
                users: args.users,
                train_impressions: args.train_impressions,
                dev_impressions: args.dev_impressions,
                ..SyntheticSpec::default()
            };
            synthetic::generate(&args.out, &spec)?;
            println!("synthetic corpus written to {}", args.out.display());
        }
    }
    Ok(())
}
