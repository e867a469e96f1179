//! Model variants, hyperparameter configuration, and full-model assembly.

use std::fmt;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion;
use crate::news::{Mode, NewsEmbedding, NewsEncoder, NewsFeatures};
use crate::params::ParamSet;
use crate::tensor::nn::Embedding;
use crate::tensor::{Scalar, Tensor};
use crate::user::{ClickHistory, UserEmbedding, UserEncoder};

/// The eight architectures of the comparison (LSTUR contributes two user
/// encoder flavors).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelVariant {
    Npa,
    Naml,
    Nrms,
    LsturIni,
    LsturCon,
    CenNewsRec,
    Mins,
    Dkn,
    Caum,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 9] = [
        ModelVariant::Npa,
        ModelVariant::Naml,
        ModelVariant::Nrms,
        ModelVariant::LsturIni,
        ModelVariant::LsturCon,
        ModelVariant::CenNewsRec,
        ModelVariant::Mins,
        ModelVariant::Dkn,
        ModelVariant::Caum,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelVariant::Npa => "npa",
            ModelVariant::Naml => "naml",
            ModelVariant::Nrms => "nrms",
            ModelVariant::LsturIni => "lstur-ini",
            ModelVariant::LsturCon => "lstur-con",
            ModelVariant::CenNewsRec => "cennewsrec",
            ModelVariant::Mins => "mins",
            ModelVariant::Dkn => "dkn",
            ModelVariant::Caum => "caum",
        }
    }

    /// Whether the early-fusion user encoder conditions on the candidate.
    pub fn candidate_aware(self) -> bool {
        matches!(self, ModelVariant::Dkn | ModelVariant::Caum)
    }

    /// Whether the news encoder needs a user-ID embedding as context.
    pub fn needs_user_context(self) -> bool {
        matches!(self, ModelVariant::Npa)
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "npa" => Ok(ModelVariant::Npa),
            "naml" => Ok(ModelVariant::Naml),
            "nrms" => Ok(ModelVariant::Nrms),
            "lstur-ini" | "lstur_ini" | "lsturini" => Ok(ModelVariant::LsturIni),
            "lstur-con" | "lstur_con" | "lsturcon" => Ok(ModelVariant::LsturCon),
            "cennewsrec" => Ok(ModelVariant::CenNewsRec),
            "mins" => Ok(ModelVariant::Mins),
            "dkn" => Ok(ModelVariant::Dkn),
            "caum" => Ok(ModelVariant::Caum),
            other => Err(Error::Config(format!("unknown model variant: {other}"))),
        }
    }
}

/// Click-behavior fusion strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionMode {
    /// Dedicated user encoder, then one dot product with the candidate.
    Early,
    /// Mean of per-click dot products; no user encoder parameters.
    Late,
}

impl fmt::Display for FusionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FusionMode::Early => "early",
            FusionMode::Late => "late",
        })
    }
}

impl FromStr for FusionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "early" | "ef" => Ok(FusionMode::Early),
            "late" | "lf" => Ok(FusionMode::Late),
            other => Err(Error::Config(format!("unknown fusion mode: {other}"))),
        }
    }
}

/// Architecture hyperparameters. Defaults follow the optima reported by
/// the respective model papers; [`ModelConfig::defaults_for`] adjusts the
/// handful of dimensions that differ per variant.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct ModelConfig {
    /// Title truncation/padding length.
    pub title_len: usize,
    pub word_dim: usize,
    /// Category/subcategory embedding-table dimension.
    pub cat_embed_dim: usize,
    /// Output of the (category, subcategory) pair projection.
    pub cat_out_dim: usize,
    pub entity_dim: usize,
    pub cnn_filters: usize,
    pub cnn_window: usize,
    pub heads: usize,
    pub head_dim: usize,
    /// Additive-attention query dimension.
    pub query_dim: usize,
    /// NPA user-ID embedding dimension.
    pub user_id_dim: usize,
    pub dkn_windows: Vec<usize>,
    pub dkn_filters: usize,
    /// Hidden width of DKN's pairwise attention network.
    pub dkn_attn_hidden: usize,
    pub mins_channels: usize,
    pub caum_out_dim: usize,
    /// Training-time probability of zeroing the LSTUR long-term vector.
    pub lstur_mask_prob: f64,
    pub dropout: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            title_len: 30,
            word_dim: 300,
            cat_embed_dim: 100,
            cat_out_dim: 100,
            entity_dim: 100,
            cnn_filters: 400,
            cnn_window: 3,
            heads: 16,
            head_dim: 16,
            query_dim: 200,
            user_id_dim: 50,
            dkn_windows: vec![1, 2, 3, 4],
            dkn_filters: 100,
            dkn_attn_hidden: 100,
            mins_channels: 4,
            caum_out_dim: 400,
            lstur_mask_prob: 0.5,
            dropout: 0.2,
        }
    }
}

impl ModelConfig {
    /// Per-variant default dimensions.
    pub fn defaults_for(variant: ModelVariant) -> Self {
        let mut cfg = ModelConfig::default();
        match variant {
            // NAML attends over its feature vectors, so the category view
            // must match the CNN output width.
            ModelVariant::Naml => cfg.cat_out_dim = cfg.cnn_filters,
            // LSTUR concatenates title and category vectors: 300 + 100.
            ModelVariant::LsturIni | ModelVariant::LsturCon => cfg.cnn_filters = 300,
            // MINS shares NAML's news encoder at the 256-dim operating
            // point of its attention-based user encoder.
            ModelVariant::Mins => {
                cfg.cnn_filters = 256;
                cfg.cat_out_dim = 256;
            }
            _ => {}
        }
        cfg
    }

    /// News/user embedding dimension produced by this variant.
    pub fn d_model(&self, variant: ModelVariant) -> usize {
        match variant {
            ModelVariant::Npa | ModelVariant::Naml | ModelVariant::Mins => self.cnn_filters,
            ModelVariant::Nrms | ModelVariant::CenNewsRec => self.heads * self.head_dim,
            ModelVariant::LsturIni | ModelVariant::LsturCon => {
                self.cnn_filters + self.cat_out_dim
            }
            ModelVariant::Dkn => self.dkn_windows.len() * self.dkn_filters,
            ModelVariant::Caum => self.caum_out_dim,
        }
    }

    pub fn validate(&self, variant: ModelVariant) -> Result<()> {
        let positive = [
            ("title_len", self.title_len),
            ("word_dim", self.word_dim),
            ("cnn_filters", self.cnn_filters),
            ("heads", self.heads),
            ("head_dim", self.head_dim),
            ("query_dim", self.query_dim),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout must be in [0, 1), got {}",
                self.dropout
            )));
        }
        if self.cnn_window % 2 == 0 {
            return Err(Error::Config(format!(
                "cnn_window must be odd, got {}",
                self.cnn_window
            )));
        }
        match variant {
            ModelVariant::Naml | ModelVariant::Mins => {
                if self.cat_out_dim != self.cnn_filters {
                    return Err(Error::Config(format!(
                        "{variant} attends over feature views: cat_out_dim {} must equal cnn_filters {}",
                        self.cat_out_dim, self.cnn_filters
                    )));
                }
                if variant == ModelVariant::Mins && self.mins_channels == 0 {
                    return Err(Error::Config("mins_channels must be positive".into()));
                }
            }
            ModelVariant::LsturCon => {
                if self.d_model(variant) % 2 != 0 {
                    return Err(Error::Config(
                        "lstur-con splits the embedding dimension in half; it must be even".into(),
                    ));
                }
            }
            ModelVariant::Dkn => {
                if self.dkn_windows.is_empty() || self.dkn_filters == 0 {
                    return Err(Error::Config("dkn needs at least one window".into()));
                }
                if self.dkn_windows.iter().any(|&w| w == 0 || w > self.title_len) {
                    return Err(Error::Config(format!(
                        "dkn windows {:?} must be in 1..=title_len {}",
                        self.dkn_windows, self.title_len
                    )));
                }
            }
            ModelVariant::Caum => {
                if self.caum_out_dim % self.heads != 0 {
                    return Err(Error::Config(format!(
                        "caum user attention splits caum_out_dim {} across {} heads",
                        self.caum_out_dim, self.heads
                    )));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Vocabulary/table sizes a model is built against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabSizes {
    pub words: usize,
    pub categories: usize,
    pub subcategories: usize,
    pub entities: usize,
    /// Training-split users (per-user tables have exactly this many rows;
    /// unseen users map to a constant zero vector outside the table).
    pub users: usize,
}

/// Optional pretrained rows for the word and entity tables.
#[derive(Debug, Clone, Default)]
pub struct PretrainedTables {
    pub word_rows: Option<Vec<Vec<f64>>>,
    pub entity_rows: Option<Vec<Vec<f64>>>,
}

/// A fully assembled recommender: news encoder, optional user encoder
/// (early fusion only), and the parameter registry.
pub struct Model<T: Scalar> {
    pub variant: ModelVariant,
    pub fusion: FusionMode,
    pub config: ModelConfig,
    pub vocab: VocabSizes,
    pub params: ParamSet<T>,
    news: NewsEncoder<T>,
    user: Option<UserEncoder<T>>,
    /// NPA's user-ID table, consumed by the news encoder's personalized
    /// attention (and shared with its user encoder under early fusion).
    user_table: Option<Embedding<T>>,
    d_model: usize,
}

impl<T: Scalar> Model<T> {
    pub fn new(
        variant: ModelVariant,
        fusion: FusionMode,
        config: &ModelConfig,
        vocab: &VocabSizes,
        pretrained: &PretrainedTables,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        config.validate(variant)?;
        let mut params = ParamSet::new();
        let d_model = config.d_model(variant);

        let user_table = if variant.needs_user_context() {
            Some(crate::news::user_id_table(
                &mut params,
                vocab.users,
                config.user_id_dim,
                rng,
            )?)
        } else {
            None
        };

        let news = NewsEncoder::build(variant, config, vocab, pretrained, &mut params, rng)?;
        let user = match fusion {
            FusionMode::Late => None,
            FusionMode::Early => Some(UserEncoder::build(
                variant,
                config,
                vocab,
                d_model,
                user_table.as_ref(),
                &mut params,
                rng,
            )?),
        };

        Ok(Model {
            variant,
            fusion,
            config: config.clone(),
            vocab: *vocab,
            params,
            news,
            user,
            user_table,
            d_model,
        })
    }

    pub fn d_model(&self) -> usize {
        self.d_model
    }

    /// Embed one news article. `user_index` is only consulted by NPA.
    pub fn encode_news(
        &self,
        features: &NewsFeatures,
        user_index: Option<usize>,
        mode: &mut Mode,
    ) -> Result<NewsEmbedding<T>> {
        let user_context = match (&self.user_table, self.variant.needs_user_context()) {
            (Some(table), true) => Some(match user_index {
                Some(i) => table.lookup_one(i)?,
                None => Tensor::zeros(vec![table.dim()]),
            }),
            _ => None,
        };
        let vector = self.news.forward(features, user_context.as_ref(), mode)?;
        debug_assert_eq!(vector.shape(), [self.d_model]);
        Ok(NewsEmbedding {
            vector,
            variant: self.variant,
        })
    }

    /// Aggregate a click history into a user embedding. Late fusion uses
    /// the parameterless mean of clicked-news embeddings; early fusion
    /// dispatches to the variant's user encoder (candidate required for
    /// candidate-aware variants).
    pub fn encode_user(
        &self,
        history: &ClickHistory<T>,
        candidate: Option<&NewsEmbedding<T>>,
        mode: &mut Mode,
    ) -> Result<UserEmbedding<T>> {
        match self.fusion {
            FusionMode::Late => Ok(UserEmbedding {
                vector: fusion::user_embedding_late(&history.embeddings, history.len)?,
                candidate_aware: false,
            }),
            FusionMode::Early => {
                let encoder = self.user.as_ref().expect("early fusion has a user encoder");
                encoder.forward(history, candidate, mode)
            }
        }
    }

    /// Relevance of `candidate` for the user behind `history` under the
    /// configured fusion mode. An empty history scores 0 for every
    /// candidate (cold-start convention).
    pub fn score(
        &self,
        history: &ClickHistory<T>,
        candidate: &NewsEmbedding<T>,
        mode: &mut Mode,
    ) -> Result<Tensor<T>> {
        match self.fusion {
            FusionMode::Late => {
                fusion::score_late(&history.embeddings, history.len, &candidate.vector)
            }
            FusionMode::Early => {
                if history.len == 0 {
                    return Ok(Tensor::scalar(T::zero()));
                }
                let aware = self.variant.candidate_aware();
                let user = self.encode_user(history, aware.then_some(candidate), mode)?;
                fusion::score_early(&user.vector, &candidate.vector)
            }
        }
    }

    /// Encode a user's clicked news (catalog indices, oldest first) into a
    /// history matrix.
    pub fn encode_history(
        &self,
        clicked: &[usize],
        user_id: &str,
        user_index: Option<usize>,
        catalog: &[NewsFeatures],
        mode: &mut Mode,
    ) -> Result<ClickHistory<T>> {
        let embeddings = if clicked.is_empty() {
            Tensor::zeros(vec![0, self.d_model])
        } else {
            let rows: Vec<Tensor<T>> = clicked
                .iter()
                .map(|&i| Ok(self.encode_news(&catalog[i], user_index, mode)?.vector))
                .collect::<Result<_>>()?;
            Tensor::stack_rows(&rows)?
        };
        Ok(ClickHistory::new(embeddings, clicked.len(), user_id).with_user_index(user_index))
    }

    /// One relevance score per candidate of a resolved impression or
    /// training sample. Candidate-agnostic early fusion encodes the user
    /// once and reuses the embedding across candidates.
    pub fn score_candidates(
        &self,
        clicked: &[usize],
        candidates: &[usize],
        user_id: &str,
        user_index: Option<usize>,
        catalog: &[NewsFeatures],
        mode: &mut Mode,
    ) -> Result<Tensor<T>> {
        let history = self.encode_history(clicked, user_id, user_index, catalog, mode)?;
        let embeddings: Vec<NewsEmbedding<T>> = candidates
            .iter()
            .map(|&c| self.encode_news(&catalog[c], user_index, mode))
            .collect::<Result<_>>()?;
        let mut scores = Vec::with_capacity(embeddings.len());
        match self.fusion {
            FusionMode::Early if !self.variant.candidate_aware() && history.len > 0 => {
                let user = self.encode_user(&history, None, mode)?;
                for cand in &embeddings {
                    scores.push(fusion::score_early(&user.vector, &cand.vector)?);
                }
            }
            _ => {
                for cand in &embeddings {
                    scores.push(self.score(&history, cand, mode)?);
                }
            }
        }
        Tensor::concat(&scores)
    }

    /// Scores for one training sample, aligned with its labels.
    pub fn sample_scores(
        &self,
        sample: &crate::objectives::TrainingSample,
        catalog: &[NewsFeatures],
        mode: &mut Mode,
    ) -> Result<Tensor<T>> {
        self.score_candidates(
            &sample.history,
            &sample.candidates,
            &sample.user_id,
            sample.user_index,
            catalog,
            mode,
        )
    }

    /// Scores for one resolved impression, aligned with its candidates.
    pub fn impression_scores(
        &self,
        impression: &crate::data::ResolvedImpression,
        catalog: &[NewsFeatures],
        mode: &mut Mode,
    ) -> Result<Tensor<T>> {
        let candidates: Vec<usize> = impression.candidates.iter().map(|(i, _)| *i).collect();
        self.score_candidates(
            &impression.history,
            &candidates,
            &impression.user_id,
            impression.user_index,
            catalog,
            mode,
        )
    }
}
