//! Ingest a MIND-format directory and print the split manifest plus the
//! per-portion corpus statistics. With no argument, a small synthetic
//! corpus is generated into a temporary directory first.
//!
//! ```bash
//! cargo run --example mind_ingest [-- /path/to/mind]
//! ```
//!
//! The directory must contain `train/news.tsv`, `train/behaviors.tsv`,
//! `dev/news.tsv`, and `dev/behaviors.tsv`.

use std::path::PathBuf;

use newsrec::data::{synthetic, IngestOptions, MindDataset};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> anyhow::Result<()> {
    let arg = std::env::args().nth(1);
    let (_guard, dir) = match arg {
        Some(path) => (None, PathBuf::from(path)),
        None => {
            let tmp = tempdir()?;
            println!("no data directory given; generating a synthetic corpus\n");
            synthetic::generate(&tmp, &synthetic::SyntheticSpec::default())?;
            (Some(tmp.clone()), tmp)
        }
    };

    let opts = IngestOptions {
        entity_embeddings: Some(dir.join("entity_embedding.vec"))
            .filter(|p| p.exists()),
        ..IngestOptions::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0x4D494E44);
    let dataset = MindDataset::load(&dir, &opts, &mut rng)?;

    println!("{}\n", dataset.manifest);
    let row = |name: &str, s: &newsrec::data::CorpusStats| {
        println!(
            "{name:<12} {:>8} news {:>8} users {:>9} impressions {:>4} categories {:>4} subcategories",
            s.news, s.users, s.impressions, s.categories, s.subcategories
        );
    };
    println!("raw file statistics:");
    row("train file", &dataset.train_file_stats);
    row("test file", &dataset.test_file_stats);
    Ok(())
}

fn tempdir() -> anyhow::Result<PathBuf> {
    let dir = std::env::temp_dir().join(format!("newsrec-ingest-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}
