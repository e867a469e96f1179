//! News encoders: one fixed-dimensional embedding per article, with one
//! architecture per model family.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{ModelConfig, ModelVariant, PretrainedTables, VocabSizes};
use crate::params::ParamSet;
use crate::tensor::nn::{
    Activation, AdditiveAttention, Conv1dSame, Embedding, Linear, MultiHeadAttention,
    PersonalizedAttention,
};
use crate::tensor::{Scalar, Tensor};

/// Parsed article features with fixed-length, zero-padded id lists.
/// Index 0 is the padding index everywhere and maps to a zero embedding
/// row; `title_entity_ids` is aligned with title positions (0 = none).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NewsFeatures {
    pub news_id: String,
    pub title_token_ids: Vec<usize>,
    pub category_id: usize,
    pub subcategory_id: usize,
    pub title_entity_ids: Vec<usize>,
}

impl NewsFeatures {
    /// Valid (non-padding) title positions.
    pub fn title_mask(&self) -> Vec<bool> {
        self.title_token_ids.iter().map(|&id| id != 0).collect()
    }

    /// True token count; tokens are stored as a dense prefix.
    pub fn title_len(&self) -> usize {
        self.title_token_ids.iter().filter(|&&id| id != 0).count()
    }
}

/// Output of a news encoder.
#[derive(Debug, Clone)]
pub struct NewsEmbedding<T: Scalar> {
    pub vector: Tensor<T>,
    pub variant: ModelVariant,
}

/// Forward-pass phase: training applies dropout (and LSTUR's long-term
/// masking) from the supplied stream; evaluation is deterministic.
pub enum Mode<'a> {
    Train {
        dropout: f64,
        rng: &'a mut ChaCha8Rng,
    },
    Eval,
}

impl Mode<'_> {
    fn apply_dropout<T: Scalar>(&mut self, x: Tensor<T>) -> Tensor<T> {
        match self {
            Mode::Train { dropout, rng } if *dropout > 0.0 => x.dropout(*dropout, rng),
            _ => x,
        }
    }

    /// Sample a Bernoulli(p) event in training mode; always false in eval.
    pub fn coin(&mut self, p: f64) -> bool {
        match self {
            Mode::Train { rng, .. } => rng.random::<f64>() < p,
            Mode::Eval => false,
        }
    }
}

/// Word table: row 0 is the frozen zero padding row; all other rows are
/// trainable, initialized from pretrained vectors when available.
pub(crate) fn word_table<T: Scalar>(
    set: &mut ParamSet<T>,
    vocab: &VocabSizes,
    config: &ModelConfig,
    pretrained: &PretrainedTables,
    rng: &mut ChaCha8Rng,
) -> Result<Embedding<T>> {
    match &pretrained.word_rows {
        Some(rows) => {
            if rows.len() != vocab.words {
                return Err(Error::Config(format!(
                    "pretrained word table has {} rows, vocabulary needs {}",
                    rows.len(),
                    vocab.words
                )));
            }
            let table = set.create_table("ne.word_embedding", rows, vec![0])?;
            Ok(Embedding::new(table))
        }
        None => Embedding::with_padding_row(
            set,
            "ne.word_embedding",
            vocab.words,
            config.word_dim,
            rng,
        ),
    }
}

/// Entity table: frozen (pretrained knowledge-graph vectors are consumed
/// through trainable projections only).
fn entity_table<T: Scalar>(
    set: &mut ParamSet<T>,
    vocab: &VocabSizes,
    config: &ModelConfig,
    pretrained: &PretrainedTables,
) -> Result<Embedding<T>> {
    let rows = match &pretrained.entity_rows {
        Some(rows) => {
            if rows.len() != vocab.entities {
                return Err(Error::Config(format!(
                    "pretrained entity table has {} rows, vocabulary needs {}",
                    rows.len(),
                    vocab.entities
                )));
            }
            rows.clone()
        }
        None => vec![vec![0.0; config.entity_dim]; vocab.entities],
    };
    let table = set.create_frozen_table("ne.entity_embedding", &rows)?;
    Ok(Embedding::new(table))
}

/// NPA's user-ID table. It sits under the news-encoder prefix because the
/// personalized attention inside the news encoder needs it in every
/// fusion mode; the user encoder shares the same rows under early fusion.
pub(crate) fn user_id_table<T: Scalar>(
    set: &mut ParamSet<T>,
    users: usize,
    dim: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Embedding<T>> {
    let rows: Vec<Vec<f64>> = (0..users)
        .map(|_| (0..dim).map(|_| rng.random_range(-0.1..0.1)).collect())
        .collect();
    let table = set.create_table("ne.user_embedding", &rows, Vec::new())?;
    Ok(Embedding::new(table))
}

/// Category + subcategory pair: embed both, concatenate, project, ReLU.
pub struct CategoryPairEncoder<T: Scalar> {
    cat: Embedding<T>,
    subcat: Embedding<T>,
    proj: Linear<T>,
}

impl<T: Scalar> CategoryPairEncoder<T> {
    fn new(
        set: &mut ParamSet<T>,
        prefix: &str,
        vocab: &VocabSizes,
        config: &ModelConfig,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let cat = Embedding::with_padding_row(
            set,
            &format!("{prefix}.category_embedding"),
            vocab.categories,
            config.cat_embed_dim,
            rng,
        )?;
        let subcat = Embedding::with_padding_row(
            set,
            &format!("{prefix}.subcategory_embedding"),
            vocab.subcategories,
            config.cat_embed_dim,
            rng,
        )?;
        let proj = Linear::new(
            set,
            &format!("{prefix}.category_proj"),
            2 * config.cat_embed_dim,
            config.cat_out_dim,
            true,
            rng,
        )?;
        Ok(CategoryPairEncoder { cat, subcat, proj })
    }

    pub fn forward(&self, category_id: usize, subcategory_id: usize) -> Result<Tensor<T>> {
        let c = self.cat.lookup_one(category_id)?;
        let s = self.subcat.lookup_one(subcategory_id)?;
        let pair = Tensor::concat(&[c, s])?;
        Ok(self.proj.forward(&pair)?.relu())
    }
}

fn title_sequence<T: Scalar>(
    words: &Embedding<T>,
    features: &NewsFeatures,
    mode: &mut Mode,
) -> Result<(Tensor<T>, Vec<bool>)> {
    let mask = features.title_mask();
    if !mask.iter().any(|&m| m) {
        return Err(Error::degenerate(
            "encode_news",
            format!("news {} has an empty title", features.news_id),
        ));
    }
    let seq = words.lookup(&features.title_token_ids)?;
    Ok((mode.apply_dropout(seq), mask))
}

/// NAML-style encoder, also used verbatim by MINS: CNN + additive
/// attention over the title, then attention over the feature views.
pub struct NamlNews<T: Scalar> {
    words: Embedding<T>,
    conv: Conv1dSame<T>,
    title_attn: AdditiveAttention<T>,
    cats: CategoryPairEncoder<T>,
    view_attn: AdditiveAttention<T>,
}

impl<T: Scalar> NamlNews<T> {
    fn forward(&self, features: &NewsFeatures, mode: &mut Mode) -> Result<Tensor<T>> {
        let (seq, mask) = title_sequence(&self.words, features, mode)?;
        let contextual = self.conv.forward(&seq)?;
        let title = self.title_attn.forward(&contextual, Some(&mask))?;
        let title = mode.apply_dropout(title);
        let cats = self.cats.forward(features.category_id, features.subcategory_id)?;
        let views = Tensor::stack_rows(&[title, cats])?;
        let out = self.view_attn.forward(&views, None)?;
        Ok(mode.apply_dropout(out))
    }
}

/// NRMS: multi-head self-attention + additive attention over the title.
pub struct NrmsNews<T: Scalar> {
    words: Embedding<T>,
    mhsa: MultiHeadAttention<T>,
    attn: AdditiveAttention<T>,
}

impl<T: Scalar> NrmsNews<T> {
    fn forward(&self, features: &NewsFeatures, mode: &mut Mode) -> Result<Tensor<T>> {
        let (seq, mask) = title_sequence(&self.words, features, mode)?;
        let contextual = self.mhsa.forward(&seq, Some(&mask))?;
        let out = self.attn.forward(&contextual, Some(&mask))?;
        Ok(mode.apply_dropout(out))
    }
}

/// NPA: CNN + personalized attention with a projected user-ID query.
pub struct NpaNews<T: Scalar> {
    words: Embedding<T>,
    conv: Conv1dSame<T>,
    query_proj: Linear<T>,
    attn: PersonalizedAttention<T>,
}

impl<T: Scalar> NpaNews<T> {
    fn forward(
        &self,
        features: &NewsFeatures,
        user_context: Option<&Tensor<T>>,
        mode: &mut Mode,
    ) -> Result<Tensor<T>> {
        let user = user_context.ok_or_else(|| {
            Error::Config("npa news encoder requires a user-ID embedding as context".into())
        })?;
        let query = self.query_proj.forward(user)?.relu();
        let (seq, mask) = title_sequence(&self.words, features, mode)?;
        let contextual = self.conv.forward(&seq)?;
        let out = self.attn.forward(&contextual, &query, Some(&mask))?;
        Ok(mode.apply_dropout(out))
    }
}

/// LSTUR: CNN + additive attention over the title, category vector
/// appended by concatenation.
pub struct LsturNews<T: Scalar> {
    words: Embedding<T>,
    conv: Conv1dSame<T>,
    title_attn: AdditiveAttention<T>,
    cats: CategoryPairEncoder<T>,
}

impl<T: Scalar> LsturNews<T> {
    fn forward(&self, features: &NewsFeatures, mode: &mut Mode) -> Result<Tensor<T>> {
        let (seq, mask) = title_sequence(&self.words, features, mode)?;
        let contextual = self.conv.forward(&seq)?;
        let title = self.title_attn.forward(&contextual, Some(&mask))?;
        let title = mode.apply_dropout(title);
        let cats = self.cats.forward(features.category_id, features.subcategory_id)?;
        Tensor::concat(&[title, cats])
    }
}

/// CenNewsRec: CNN, then multi-head self-attention, then additive
/// attention.
pub struct CenNews<T: Scalar> {
    words: Embedding<T>,
    conv: Conv1dSame<T>,
    mhsa: MultiHeadAttention<T>,
    attn: AdditiveAttention<T>,
}

impl<T: Scalar> CenNews<T> {
    fn forward(&self, features: &NewsFeatures, mode: &mut Mode) -> Result<Tensor<T>> {
        let (seq, mask) = title_sequence(&self.words, features, mode)?;
        let conv = self.conv.forward(&seq)?;
        let contextual = self.mhsa.forward(&conv, Some(&mask))?;
        let out = self.attn.forward(&contextual, Some(&mask))?;
        Ok(mode.apply_dropout(out))
    }
}

/// DKN: word and aligned-entity channels stacked per position, one
/// unpadded convolution per window width, max-over-time pooling,
/// concatenation across windows.
pub struct DknNews<T: Scalar> {
    words: Embedding<T>,
    entities: Embedding<T>,
    align: Linear<T>,
    windows: Vec<DknWindow<T>>,
}

struct DknWindow<T: Scalar> {
    window: usize,
    filters: crate::params::Parameter<T>,
    bias: crate::params::Parameter<T>,
}

impl<T: Scalar> DknNews<T> {
    fn forward(&self, features: &NewsFeatures, mode: &mut Mode) -> Result<Tensor<T>> {
        let (seq, _mask) = title_sequence(&self.words, features, mode)?;
        let t_max = features.title_token_ids.len();
        let entities = self.entities.lookup(&features.title_entity_ids)?;
        let aligned = self.align.forward(&entities)?.tanh();
        let stacked = Tensor::concat_cols(&[seq, aligned])?;
        let true_len = features.title_len();
        let mut pooled = Vec::with_capacity(self.windows.len());
        for w in &self.windows {
            let conv = stacked
                .conv1d_valid(w.filters.tensor(), w.bias.tensor())?
                .relu();
            let out_len = t_max - w.window + 1;
            pooled.push(conv.max_rows(true_len.min(out_len))?);
        }
        Tensor::concat(&pooled)
    }
}

/// CAUM: self-attended title, pooled entity vector, category vector,
/// concatenated and projected to the model dimension.
pub struct CaumNews<T: Scalar> {
    words: Embedding<T>,
    mhsa: MultiHeadAttention<T>,
    title_attn: AdditiveAttention<T>,
    entities: Embedding<T>,
    entity_attn: AdditiveAttention<T>,
    cats: CategoryPairEncoder<T>,
    proj: Linear<T>,
    entity_dim: usize,
}

impl<T: Scalar> CaumNews<T> {
    fn forward(&self, features: &NewsFeatures, mode: &mut Mode) -> Result<Tensor<T>> {
        let (seq, mask) = title_sequence(&self.words, features, mode)?;
        let contextual = self.mhsa.forward(&seq, Some(&mask))?;
        let title = self.title_attn.forward(&contextual, Some(&mask))?;
        let title = mode.apply_dropout(title);

        let mut entity_ids: Vec<usize> = Vec::new();
        for &id in &features.title_entity_ids {
            if id != 0 && !entity_ids.contains(&id) {
                entity_ids.push(id);
            }
        }
        let entity_vec = if entity_ids.is_empty() {
            Tensor::zeros(vec![self.entity_dim])
        } else {
            let rows = self.entities.lookup(&entity_ids)?;
            self.entity_attn.forward(&rows, None)?
        };

        let cats = self.cats.forward(features.category_id, features.subcategory_id)?;
        let fused = Tensor::concat(&[title, entity_vec, cats])?;
        let out = self.proj.forward(&fused)?;
        Ok(mode.apply_dropout(out))
    }
}

/// Variant dispatch for news encoding.
pub enum NewsEncoder<T: Scalar> {
    Naml(NamlNews<T>),
    Nrms(NrmsNews<T>),
    Npa(NpaNews<T>),
    Lstur(LsturNews<T>),
    Cen(CenNews<T>),
    Dkn(DknNews<T>),
    Caum(CaumNews<T>),
}

impl<T: Scalar> NewsEncoder<T> {
    pub fn build(
        variant: ModelVariant,
        config: &ModelConfig,
        vocab: &VocabSizes,
        pretrained: &PretrainedTables,
        set: &mut ParamSet<T>,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let words = word_table(set, vocab, config, pretrained, rng)?;
        let word_dim = words.dim();
        match variant {
            ModelVariant::Naml | ModelVariant::Mins => Ok(NewsEncoder::Naml(NamlNews {
                conv: Conv1dSame::new(
                    set,
                    "ne.title_cnn",
                    word_dim,
                    config.cnn_filters,
                    config.cnn_window,
                    Activation::Relu,
                    rng,
                )?,
                title_attn: AdditiveAttention::new(
                    set,
                    "ne.title_attention",
                    config.cnn_filters,
                    config.query_dim,
                    rng,
                )?,
                cats: CategoryPairEncoder::new(set, "ne", vocab, config, rng)?,
                view_attn: AdditiveAttention::new(
                    set,
                    "ne.view_attention",
                    config.cnn_filters,
                    config.query_dim,
                    rng,
                )?,
                words,
            })),
            ModelVariant::Nrms => Ok(NewsEncoder::Nrms(NrmsNews {
                mhsa: MultiHeadAttention::self_new(
                    set,
                    "ne.title_self_attention",
                    word_dim,
                    config.heads,
                    config.head_dim,
                    rng,
                )?,
                attn: AdditiveAttention::new(
                    set,
                    "ne.title_attention",
                    config.heads * config.head_dim,
                    config.query_dim,
                    rng,
                )?,
                words,
            })),
            ModelVariant::Npa => Ok(NewsEncoder::Npa(NpaNews {
                conv: Conv1dSame::new(
                    set,
                    "ne.title_cnn",
                    word_dim,
                    config.cnn_filters,
                    config.cnn_window,
                    Activation::Relu,
                    rng,
                )?,
                query_proj: Linear::new(
                    set,
                    "ne.word_query_proj",
                    config.user_id_dim,
                    config.query_dim,
                    true,
                    rng,
                )?,
                attn: PersonalizedAttention::new(
                    set,
                    "ne.title_attention",
                    config.cnn_filters,
                    config.query_dim,
                    rng,
                )?,
                words,
            })),
            ModelVariant::LsturIni | ModelVariant::LsturCon => {
                Ok(NewsEncoder::Lstur(LsturNews {
                    conv: Conv1dSame::new(
                        set,
                        "ne.title_cnn",
                        word_dim,
                        config.cnn_filters,
                        config.cnn_window,
                        Activation::Relu,
                        rng,
                    )?,
                    title_attn: AdditiveAttention::new(
                        set,
                        "ne.title_attention",
                        config.cnn_filters,
                        config.query_dim,
                        rng,
                    )?,
                    cats: CategoryPairEncoder::new(set, "ne", vocab, config, rng)?,
                    words,
                }))
            }
            ModelVariant::CenNewsRec => Ok(NewsEncoder::Cen(CenNews {
                conv: Conv1dSame::new(
                    set,
                    "ne.title_cnn",
                    word_dim,
                    config.cnn_filters,
                    config.cnn_window,
                    Activation::Relu,
                    rng,
                )?,
                mhsa: MultiHeadAttention::self_new(
                    set,
                    "ne.title_self_attention",
                    config.cnn_filters,
                    config.heads,
                    config.head_dim,
                    rng,
                )?,
                attn: AdditiveAttention::new(
                    set,
                    "ne.title_attention",
                    config.heads * config.head_dim,
                    config.query_dim,
                    rng,
                )?,
                words,
            })),
            ModelVariant::Dkn => {
                let entities = entity_table(set, vocab, config, pretrained)?;
                let align = Linear::new(
                    set,
                    "ne.entity_align",
                    entities.dim(),
                    word_dim,
                    true,
                    rng,
                )?;
                let mut windows = Vec::with_capacity(config.dkn_windows.len());
                for &w in &config.dkn_windows {
                    windows.push(DknWindow {
                        window: w,
                        filters: set.create(
                            format!("ne.kcnn_w{w}.filters"),
                            vec![config.dkn_filters, w, 2 * word_dim],
                            crate::params::Init::Xavier,
                            rng,
                        )?,
                        bias: set.create(
                            format!("ne.kcnn_w{w}.bias"),
                            vec![config.dkn_filters],
                            crate::params::Init::Zeros,
                            rng,
                        )?,
                    });
                }
                Ok(NewsEncoder::Dkn(DknNews {
                    words,
                    entities,
                    align,
                    windows,
                }))
            }
            ModelVariant::Caum => {
                let entities = entity_table(set, vocab, config, pretrained)?;
                let title_dim = config.heads * config.head_dim;
                let fused = title_dim + config.entity_dim + config.cat_out_dim;
                Ok(NewsEncoder::Caum(CaumNews {
                    mhsa: MultiHeadAttention::self_new(
                        set,
                        "ne.title_self_attention",
                        word_dim,
                        config.heads,
                        config.head_dim,
                        rng,
                    )?,
                    title_attn: AdditiveAttention::new(
                        set,
                        "ne.title_attention",
                        title_dim,
                        config.query_dim,
                        rng,
                    )?,
                    entity_attn: AdditiveAttention::new(
                        set,
                        "ne.entity_attention",
                        config.entity_dim,
                        config.query_dim,
                        rng,
                    )?,
                    cats: CategoryPairEncoder::new(set, "ne", vocab, config, rng)?,
                    proj: Linear::new(set, "ne.fusion_proj", fused, config.caum_out_dim, true, rng)?,
                    entity_dim: config.entity_dim,
                    words,
                    entities,
                }))
            }
        }
    }

    pub fn forward(
        &self,
        features: &NewsFeatures,
        user_context: Option<&Tensor<T>>,
        mode: &mut Mode,
    ) -> Result<Tensor<T>> {
        match self {
            NewsEncoder::Naml(e) => e.forward(features, mode),
            NewsEncoder::Nrms(e) => e.forward(features, mode),
            NewsEncoder::Npa(e) => e.forward(features, user_context, mode),
            NewsEncoder::Lstur(e) => e.forward(features, mode),
            NewsEncoder::Cen(e) => e.forward(features, mode),
            NewsEncoder::Dkn(e) => e.forward(features, mode),
            NewsEncoder::Caum(e) => e.forward(features, mode),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FusionMode, Model};
    use rand::{Rng, SeedableRng};

    pub(crate) fn tiny_config(variant: ModelVariant) -> ModelConfig {
        let mut cfg = ModelConfig {
            title_len: 6,
            word_dim: 8,
            cat_embed_dim: 4,
            cat_out_dim: 5,
            entity_dim: 5,
            cnn_filters: 7,
            cnn_window: 3,
            heads: 2,
            head_dim: 3,
            query_dim: 5,
            user_id_dim: 4,
            dkn_windows: vec![1, 2, 3],
            dkn_filters: 3,
            dkn_attn_hidden: 6,
            mins_channels: 2,
            caum_out_dim: 8,
            lstur_mask_prob: 0.5,
            dropout: 0.2,
        };
        match variant {
            ModelVariant::Naml | ModelVariant::Mins => cfg.cat_out_dim = cfg.cnn_filters,
            ModelVariant::LsturIni | ModelVariant::LsturCon => {
                cfg.cnn_filters = 7;
                cfg.cat_out_dim = 5; // d_model 12, even for the -con split
            }
            _ => {}
        }
        cfg
    }

    pub(crate) fn tiny_vocab() -> VocabSizes {
        VocabSizes {
            words: 20,
            categories: 5,
            subcategories: 6,
            entities: 7,
            users: 3,
        }
    }

    pub(crate) fn sample_features(rng: &mut ChaCha8Rng, title_len: usize) -> NewsFeatures {
        let true_len = rng.random_range(1..=title_len);
        let mut title_token_ids = vec![0usize; title_len];
        for slot in title_token_ids.iter_mut().take(true_len) {
            *slot = rng.random_range(2..20);
        }
        let mut title_entity_ids = vec![0usize; title_len];
        if rng.random::<f64>() < 0.7 {
            title_entity_ids[rng.random_range(0..true_len)] = rng.random_range(2..7);
        }
        NewsFeatures {
            news_id: "N1".into(),
            title_token_ids,
            category_id: rng.random_range(2..5),
            subcategory_id: rng.random_range(2..6),
            title_entity_ids,
        }
    }

    fn build(variant: ModelVariant, seed: u64) -> Model<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Model::new(
            variant,
            FusionMode::Late,
            &tiny_config(variant),
            &tiny_vocab(),
            &PretrainedTables::default(),
            &mut rng,
        )
        .unwrap()
    }

    #[test]
    fn every_variant_matches_its_model_dimension() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for variant in ModelVariant::ALL {
            let model = build(variant, 3);
            let features = sample_features(&mut rng, 6);
            let embedding = model
                .encode_news(&features, Some(1), &mut Mode::Eval)
                .unwrap();
            assert_eq!(
                embedding.vector.shape(),
                [model.d_model()],
                "variant {variant}"
            );
            assert!(embedding.vector.is_finite());
        }
    }

    #[test]
    fn empty_title_is_a_degenerate_input_for_every_variant() {
        for variant in ModelVariant::ALL {
            let model = build(variant, 4);
            let features = NewsFeatures {
                news_id: "N0".into(),
                title_token_ids: vec![0; 6],
                category_id: 0,
                subcategory_id: 0,
                title_entity_ids: vec![0; 6],
            };
            let err = model
                .encode_news(&features, Some(0), &mut Mode::Eval)
                .unwrap_err();
            assert!(
                matches!(err, crate::error::Error::DegenerateInput { .. }),
                "variant {variant}: {err}"
            );
        }
    }

    #[test]
    fn npa_requires_user_context() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = tiny_config(ModelVariant::Npa);
        let mut set = ParamSet::<f64>::new();
        let encoder = NewsEncoder::build(
            ModelVariant::Npa,
            &cfg,
            &tiny_vocab(),
            &PretrainedTables::default(),
            &mut set,
            &mut rng,
        )
        .unwrap();
        let features = sample_features(&mut rng, 6);
        assert!(matches!(
            encoder.forward(&features, None, &mut Mode::Eval),
            Err(crate::error::Error::Config(_))
        ));
    }

    #[test]
    fn naml_and_mins_share_the_news_architecture() {
        // Identical config + identical parameter values must produce
        // identical embeddings (late fusion isolates the news encoders).
        let naml = build(ModelVariant::Naml, 11);
        let mins = build(ModelVariant::Mins, 12);
        for p in naml.params.iter() {
            let q = mins.params.get(p.name()).expect("same parameter names");
            q.tensor().set_values(&p.tensor().to_vec()).unwrap();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..5 {
            let features = sample_features(&mut rng, 6);
            let a = naml.encode_news(&features, None, &mut Mode::Eval).unwrap();
            let b = mins.encode_news(&features, None, &mut Mode::Eval).unwrap();
            assert_eq!(a.vector.to_vec(), b.vector.to_vec());
        }
    }

    #[test]
    fn extending_padding_never_changes_the_embedding() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for variant in ModelVariant::ALL {
            let model = build(variant, 31);
            for _ in 0..3 {
                let features = sample_features(&mut rng, 6);
                let mut extended = features.clone();
                extended.title_token_ids.extend([0; 4]);
                extended.title_entity_ids.extend([0; 4]);
                let a = model.encode_news(&features, Some(1), &mut Mode::Eval).unwrap();
                let b = model.encode_news(&extended, Some(1), &mut Mode::Eval).unwrap();
                for (x, y) in a.vector.values().iter().zip(b.vector.values().iter()) {
                    assert!((x - y).abs() < 1e-12, "variant {variant}");
                }
            }
        }
    }

    #[test]
    fn encoding_is_pure_given_parameters_and_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        for variant in [ModelVariant::Nrms, ModelVariant::Dkn, ModelVariant::Caum] {
            let model = build(variant, 41);
            let features = sample_features(&mut rng, 6);
            let a = model.encode_news(&features, Some(0), &mut Mode::Eval).unwrap();
            let b = model.encode_news(&features, Some(0), &mut Mode::Eval).unwrap();
            assert_eq!(a.vector.to_vec(), b.vector.to_vec());
        }
    }

    #[test]
    fn parameter_counts_match_closed_form_layer_sums() {
        let v = tiny_vocab();
        for variant in ModelVariant::ALL {
            let cfg = tiny_config(variant);
            let model = build(variant, 77);
            let counted = crate::metrics::count_parameters(&model).unwrap().news_encoder;

            let (wd, q, f, w) = (cfg.word_dim, cfg.query_dim, cfg.cnn_filters, cfg.cnn_window);
            let (h, hd, cd) = (cfg.heads, cfg.head_dim, cfg.cat_embed_dim);
            let word_table = v.words * wd;
            let additive = |d: usize| q * d + q + q; // proj weight+bias, query
            let conv = f * w * wd + f;
            let cats = |out: usize| v.categories * cd + v.subcategories * cd + out * 2 * cd + out;
            let expected = match variant {
                ModelVariant::Naml | ModelVariant::Mins => {
                    word_table + conv + additive(f) + cats(cfg.cat_out_dim) + additive(f)
                }
                ModelVariant::Nrms => word_table + 3 * (h * hd) * wd + additive(h * hd),
                ModelVariant::Npa => {
                    word_table
                        + v.users * cfg.user_id_dim
                        + conv
                        + (q * cfg.user_id_dim + q)
                        + (q * f + q)
                }
                ModelVariant::LsturIni | ModelVariant::LsturCon => {
                    word_table + conv + additive(f) + cats(cfg.cat_out_dim)
                }
                ModelVariant::CenNewsRec => {
                    word_table + conv + 3 * (h * hd) * f + additive(h * hd)
                }
                ModelVariant::Dkn => {
                    // entity table is frozen and therefore uncounted
                    word_table
                        + (wd * cfg.entity_dim + wd)
                        + cfg
                            .dkn_windows
                            .iter()
                            .map(|win| cfg.dkn_filters * win * 2 * wd + cfg.dkn_filters)
                            .sum::<usize>()
                }
                ModelVariant::Caum => {
                    let fused = h * hd + cfg.entity_dim + cfg.cat_out_dim;
                    word_table
                        + 3 * (h * hd) * wd
                        + additive(h * hd)
                        + additive(cfg.entity_dim)
                        + cats(cfg.cat_out_dim)
                        + (cfg.caum_out_dim * fused + cfg.caum_out_dim)
                }
            };
            assert_eq!(counted, expected, "variant {variant}");
        }
    }

    #[test]
    fn category_pair_of_padding_ids_is_zero_at_init() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let cfg = tiny_config(ModelVariant::Naml);
        let mut set = ParamSet::<f64>::new();
        let cats = CategoryPairEncoder::new(&mut set, "ne", &tiny_vocab(), &cfg, &mut rng).unwrap();
        let out = cats.forward(0, 0).unwrap();
        assert!(out.values().iter().all(|&v| v == 0.0));
        let a = cats.forward(2, 3).unwrap();
        let b = cats.forward(3, 3).unwrap();
        assert_ne!(a.to_vec(), b.to_vec());
    }
}
