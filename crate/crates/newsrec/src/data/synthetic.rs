//! Deterministic MIND-format corpus generator for desk-scale runs.
//!
//! Users carry topic preferences, article titles are dominated by tokens
//! from their topic's pool, and click labels follow the preference match,
//! so a working model can separate clicked from unclicked candidates on a
//! few thousand impressions. Output goes through the regular TSV writers
//! and is re-read by the regular parsers.

use std::fs;
use std::io::Write;
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{write_behaviors_tsv, Impression};
use crate::error::Result;

#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub topics: usize,
    pub users: usize,
    pub train_news: usize,
    pub dev_news: usize,
    pub train_impressions: usize,
    pub dev_impressions: usize,
    /// Calendar days covered by the training file (the split peels off the
    /// last one for validation); the dev file sits one day later.
    pub train_days: usize,
    pub candidates_per_impression: std::ops::RangeInclusive<usize>,
    pub history_len: std::ops::RangeInclusive<usize>,
    pub title_tokens: std::ops::RangeInclusive<usize>,
    /// Click probability for candidates matching / not matching the
    /// user's preferred topics.
    pub on_topic_click: f64,
    pub off_topic_click: f64,
    /// Emit one Wikidata-style entity per title plus an embedding file.
    pub with_entities: bool,
    pub entity_dim: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            seed: 17,
            topics: 8,
            users: 400,
            train_news: 900,
            dev_news: 300,
            train_impressions: 2600,
            dev_impressions: 600,
            train_days: 5,
            candidates_per_impression: 5..=10,
            history_len: 3..=20,
            title_tokens: 4..=10,
            on_topic_click: 0.75,
            off_topic_click: 0.06,
            with_entities: true,
            entity_dim: 100,
        }
    }
}

struct Article {
    id: String,
    topic: usize,
    category: String,
    subcategory: String,
    title: String,
    entity_json: String,
}

fn topic_token(topic: usize, j: usize) -> String {
    format!("topic{topic}word{j}")
}

fn make_article(id: String, topic: usize, spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Article {
    let n_tokens = rng.random_range(spec.title_tokens.clone());
    let mut tokens = Vec::with_capacity(n_tokens);
    // Leading token always comes from the topic pool so the aligned
    // entity mention at offset 0 points at topical content.
    tokens.push(topic_token(topic, rng.random_range(0..30)));
    for _ in 1..n_tokens {
        if rng.random::<f64>() < 0.7 {
            tokens.push(topic_token(topic, rng.random_range(0..30)));
        } else {
            tokens.push(format!("common{}", rng.random_range(0..60)));
        }
    }
    let title = tokens.join(" ");
    let entity_json = if spec.with_entities {
        let surface = tokens[0].clone();
        format!(
            "[{{\"Label\": \"Topic {topic}\", \"Type\": \"C\", \"WikidataId\": \"Q{}\", \
             \"Confidence\": 1.0, \"OccurrenceOffsets\": [0], \"SurfaceForms\": [\"{surface}\"]}}]",
            1000 + topic
        )
    } else {
        "[]".to_string()
    };
    Article {
        id,
        topic,
        category: format!("cat{topic}"),
        subcategory: format!("cat{topic}sub{}", rng.random_range(0..3)),
        title,
        entity_json,
    }
}

fn write_news_tsv(path: &Path, articles: &[&Article]) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    for a in articles {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t[]",
            a.id,
            a.category,
            a.subcategory,
            a.title,
            format!("abstract of {}", a.id),
            format!("https://news.example/{}", a.id),
            a.entity_json,
        )?;
    }
    Ok(())
}

fn timestamp(day: NaiveDate, rng: &mut ChaCha8Rng) -> NaiveDateTime {
    day.and_hms_opt(
        rng.random_range(0..24),
        rng.random_range(0..60),
        rng.random_range(0..60),
    )
    .expect("valid time")
}

/// Generate `dir/train/{news,behaviors}.tsv`, `dir/dev/{news,behaviors}.tsv`
/// and (optionally) `dir/entity_embedding.vec`.
pub fn generate(dir: &Path, spec: &SyntheticSpec) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    fs::create_dir_all(dir.join("train"))?;
    fs::create_dir_all(dir.join("dev"))?;

    let train_articles: Vec<Article> = (0..spec.train_news)
        .map(|i| make_article(format!("N{i}"), i % spec.topics, spec, &mut rng))
        .collect();
    let dev_articles: Vec<Article> = (0..spec.dev_news)
        .map(|i| {
            make_article(
                format!("ND{i}"),
                i % spec.topics,
                spec,
                &mut rng,
            )
        })
        .collect();

    // Per-user topic preferences and a per-user pool of plausible clicks.
    let prefs: Vec<Vec<usize>> = (0..spec.users)
        .map(|_| {
            let first = rng.random_range(0..spec.topics);
            if rng.random::<f64>() < 0.5 {
                let mut second = rng.random_range(0..spec.topics);
                while second == first {
                    second = rng.random_range(0..spec.topics);
                }
                vec![first, second]
            } else {
                vec![first]
            }
        })
        .collect();

    let on_topic: Vec<Vec<usize>> = (0..spec.users)
        .map(|u| {
            train_articles
                .iter()
                .enumerate()
                .filter(|(_, a)| prefs[u].contains(&a.topic))
                .map(|(i, _)| i)
                .collect()
        })
        .collect();

    let start_day = NaiveDate::from_ymd_opt(2019, 11, 9).expect("valid date");
    let make_impressions = |count: usize,
                                days: std::ops::Range<usize>,
                                candidate_pool: &[Article],
                                id_prefix: &str,
                                rng: &mut ChaCha8Rng|
     -> Vec<Impression> {
        let mut impressions = Vec::with_capacity(count);
        for i in 0..count {
            let user = rng.random_range(0..spec.users);
            let day = start_day + chrono::Days::new(rng.random_range(days.clone()) as u64);
            let n_hist = rng.random_range(spec.history_len.clone());
            let history: Vec<String> = (0..n_hist)
                .filter_map(|_| on_topic[user].choose(rng))
                .map(|&a| train_articles[a].id.clone())
                .collect();
            let n_cand = rng.random_range(spec.candidates_per_impression.clone());
            let mut candidates = Vec::with_capacity(n_cand);
            for _ in 0..n_cand {
                let article = &candidate_pool[rng.random_range(0..candidate_pool.len())];
                let p = if prefs[user].contains(&article.topic) {
                    spec.on_topic_click
                } else {
                    spec.off_topic_click
                };
                candidates.push((article.id.clone(), rng.random::<f64>() < p));
            }
            impressions.push(Impression {
                impression_id: format!("{id_prefix}{i}"),
                user_id: format!("U{user}"),
                timestamp: timestamp(day, rng),
                history,
                candidates,
            });
        }
        impressions
    };

    let train_behaviors = make_impressions(
        spec.train_impressions,
        0..spec.train_days,
        &train_articles,
        "I",
        &mut rng,
    );
    let dev_behaviors = make_impressions(
        spec.dev_impressions,
        spec.train_days..spec.train_days + 1,
        &dev_articles,
        "D",
        &mut rng,
    );

    write_news_tsv(
        &dir.join("train").join("news.tsv"),
        &train_articles.iter().collect::<Vec<_>>(),
    )?;
    // The dev file re-lists training articles so histories resolve from
    // it alone, matching how the real distribution overlaps.
    let dev_catalog: Vec<&Article> = dev_articles.iter().chain(train_articles.iter()).collect();
    write_news_tsv(&dir.join("dev").join("news.tsv"), &dev_catalog)?;
    write_behaviors_tsv(&dir.join("train").join("behaviors.tsv"), &train_behaviors)?;
    write_behaviors_tsv(&dir.join("dev").join("behaviors.tsv"), &dev_behaviors)?;

    if spec.with_entities {
        let mut out = std::io::BufWriter::new(fs::File::create(dir.join("entity_embedding.vec"))?);
        for t in 0..spec.topics {
            let values: Vec<String> = (0..spec.entity_dim)
                .map(|_| format!("{:.6}", rng.random_range(-0.5..0.5)))
                .collect();
            writeln!(out, "Q{}\t{}", 1000 + t, values.join("\t"))?;
        }
    }
    Ok(())
}
