//! Early-fusion user encoders: aggregate clicked-news embeddings into one
//! user embedding, candidate-agnostic or candidate-aware by variant.

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{ModelConfig, ModelVariant, VocabSizes};
use crate::news::{Mode, NewsEmbedding};
use crate::params::ParamSet;
use crate::tensor::nn::{
    Activation, AdditiveAttention, Conv1dSame, Embedding, Gru, Linear, MultiHeadAttention,
    PersonalizedAttention,
};
use crate::tensor::{Scalar, Tensor};

/// A user's clicked-news embeddings, oldest first. The matrix may carry
/// zero-padding rows past `len`; those rows are masked out of every
/// aggregation.
pub struct ClickHistory<T: Scalar> {
    pub embeddings: Tensor<T>,
    pub len: usize,
    pub user_id: String,
    /// Index into per-user tables for training-split users; `None` for
    /// users unseen at training time (they map to a zero vector).
    pub user_index: Option<usize>,
}

impl<T: Scalar> ClickHistory<T> {
    pub fn new(embeddings: Tensor<T>, len: usize, user_id: impl Into<String>) -> Self {
        ClickHistory {
            embeddings,
            len,
            user_id: user_id.into(),
            user_index: None,
        }
    }

    pub fn with_user_index(mut self, index: Option<usize>) -> Self {
        self.user_index = index;
        self
    }

    fn mask(&self) -> Vec<bool> {
        let rows = self.embeddings.shape()[0];
        (0..rows).map(|i| i < self.len).collect()
    }

    /// The first `len` rows as a dense matrix of graph nodes.
    fn valid_rows(&self) -> Result<Vec<Tensor<T>>> {
        (0..self.len).map(|i| self.embeddings.row(i)).collect()
    }

    fn require_nonempty(&self) -> Result<()> {
        if self.len == 0 {
            return Err(Error::degenerate(
                "encode_user",
                format!("user {} has an empty click history", self.user_id),
            ));
        }
        Ok(())
    }
}

/// Output of a user encoder.
#[derive(Debug, Clone)]
pub struct UserEmbedding<T: Scalar> {
    pub vector: Tensor<T>,
    pub candidate_aware: bool,
}

/// Gather a long-term user vector: a trainable row for known users, a
/// constant zero vector for unseen ones. During training the whole vector
/// is zeroed with probability `p_mask` (the LSTUR masking scheme).
pub fn lookup_long_term_user<T: Scalar>(
    table: &Embedding<T>,
    user_index: Option<usize>,
    p_mask: f64,
    mode: &mut Mode,
) -> Result<Tensor<T>> {
    let dim = table.dim();
    match user_index {
        None => Ok(Tensor::zeros(vec![dim])),
        Some(_) if mode.coin(p_mask) => Ok(Tensor::zeros(vec![dim])),
        Some(i) => table.lookup_one(i),
    }
}

pub struct NpaUser<T: Scalar> {
    user_emb: Embedding<T>,
    query_proj: Linear<T>,
    attn: PersonalizedAttention<T>,
}

impl<T: Scalar> NpaUser<T> {
    fn forward(&self, history: &ClickHistory<T>, mode: &mut Mode) -> Result<Tensor<T>> {
        let user_vec = match history.user_index {
            Some(i) => self.user_emb.lookup_one(i)?,
            None => Tensor::zeros(vec![self.user_emb.dim()]),
        };
        let query = self.query_proj.forward(&user_vec)?.relu();
        let out = self
            .attn
            .forward(&history.embeddings, &query, Some(&history.mask()))?;
        Ok(mode_drop(out, mode))
    }
}

pub struct NamlUser<T: Scalar> {
    attn: AdditiveAttention<T>,
}

pub struct NrmsUser<T: Scalar> {
    mhsa: MultiHeadAttention<T>,
    attn: AdditiveAttention<T>,
}

pub struct LsturIniUser<T: Scalar> {
    long_term: Embedding<T>,
    gru: Gru<T>,
    p_mask: f64,
}

pub struct LsturConUser<T: Scalar> {
    long_term: Embedding<T>,
    gru: Gru<T>,
    p_mask: f64,
}

pub struct CenUser<T: Scalar> {
    gru: Gru<T>,
    mhsa: MultiHeadAttention<T>,
    long_attn: AdditiveAttention<T>,
    combine: AdditiveAttention<T>,
}

pub struct MinsUser<T: Scalar> {
    mhsa: MultiHeadAttention<T>,
    channels: Vec<Gru<T>>,
    attn: AdditiveAttention<T>,
}

pub struct DknUser<T: Scalar> {
    hidden: Linear<T>,
    score: Linear<T>,
}

pub struct CaumUser<T: Scalar> {
    cand_proj: Linear<T>,
    attention: MultiHeadAttention<T>,
    conv: Conv1dSame<T>,
    pool: AdditiveAttention<T>,
}

fn mode_drop<T: Scalar>(x: Tensor<T>, mode: &mut Mode) -> Tensor<T> {
    match mode {
        Mode::Train { dropout, rng } if *dropout > 0.0 => x.dropout(*dropout, rng),
        _ => x,
    }
}

/// Variant dispatch for user encoding (early fusion only; late fusion
/// bypasses user encoders entirely).
pub enum UserEncoder<T: Scalar> {
    Npa(NpaUser<T>),
    Naml(NamlUser<T>),
    Nrms(NrmsUser<T>),
    LsturIni(LsturIniUser<T>),
    LsturCon(LsturConUser<T>),
    Cen(CenUser<T>),
    Mins(MinsUser<T>),
    Dkn(DknUser<T>),
    Caum(CaumUser<T>),
}

impl<T: Scalar> UserEncoder<T> {
    pub fn build(
        variant: ModelVariant,
        config: &ModelConfig,
        vocab: &VocabSizes,
        d_model: usize,
        shared_user_table: Option<&Embedding<T>>,
        set: &mut ParamSet<T>,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        match variant {
            ModelVariant::Npa => {
                let user_emb = shared_user_table
                    .ok_or_else(|| Error::Config("npa user encoder needs the user table".into()))?
                    .clone();
                Ok(UserEncoder::Npa(NpaUser {
                    user_emb,
                    query_proj: Linear::new(
                        set,
                        "ue.news_query_proj",
                        config.user_id_dim,
                        config.query_dim,
                        true,
                        rng,
                    )?,
                    attn: PersonalizedAttention::new(
                        set,
                        "ue.click_attention",
                        d_model,
                        config.query_dim,
                        rng,
                    )?,
                }))
            }
            ModelVariant::Naml => Ok(UserEncoder::Naml(NamlUser {
                attn: AdditiveAttention::new(
                    set,
                    "ue.click_attention",
                    d_model,
                    config.query_dim,
                    rng,
                )?,
            })),
            ModelVariant::Nrms => Ok(UserEncoder::Nrms(NrmsUser {
                mhsa: MultiHeadAttention::self_new(
                    set,
                    "ue.click_self_attention",
                    d_model,
                    config.heads,
                    config.head_dim,
                    rng,
                )?,
                attn: AdditiveAttention::new(
                    set,
                    "ue.click_attention",
                    config.heads * config.head_dim,
                    config.query_dim,
                    rng,
                )?,
            })),
            ModelVariant::LsturIni => Ok(UserEncoder::LsturIni(LsturIniUser {
                long_term: long_term_table(set, vocab.users, d_model, rng)?,
                gru: Gru::new(set, "ue.gru", d_model, d_model, rng)?,
                p_mask: config.lstur_mask_prob,
            })),
            ModelVariant::LsturCon => {
                let half = d_model / 2;
                Ok(UserEncoder::LsturCon(LsturConUser {
                    long_term: long_term_table(set, vocab.users, half, rng)?,
                    gru: Gru::new(set, "ue.gru", d_model, half, rng)?,
                    p_mask: config.lstur_mask_prob,
                }))
            }
            ModelVariant::CenNewsRec => Ok(UserEncoder::Cen(CenUser {
                gru: Gru::new(set, "ue.gru", d_model, d_model, rng)?,
                mhsa: MultiHeadAttention::self_new(
                    set,
                    "ue.click_self_attention",
                    d_model,
                    config.heads,
                    config.head_dim,
                    rng,
                )?,
                long_attn: AdditiveAttention::new(
                    set,
                    "ue.long_term_attention",
                    config.heads * config.head_dim,
                    config.query_dim,
                    rng,
                )?,
                combine: AdditiveAttention::new(
                    set,
                    "ue.combine_attention",
                    d_model,
                    config.query_dim,
                    rng,
                )?,
            })),
            ModelVariant::Mins => {
                let mhsa_out = config.heads * config.head_dim;
                let channels = (0..config.mins_channels)
                    .map(|c| Gru::new(set, &format!("ue.channel{c}_gru"), mhsa_out, d_model, rng))
                    .collect::<Result<Vec<_>>>()?;
                Ok(UserEncoder::Mins(MinsUser {
                    mhsa: MultiHeadAttention::self_new(
                        set,
                        "ue.click_self_attention",
                        d_model,
                        config.heads,
                        config.head_dim,
                        rng,
                    )?,
                    channels,
                    attn: AdditiveAttention::new(
                        set,
                        "ue.channel_attention",
                        d_model,
                        config.query_dim,
                        rng,
                    )?,
                }))
            }
            ModelVariant::Dkn => Ok(UserEncoder::Dkn(DknUser {
                hidden: Linear::new(
                    set,
                    "ue.pair_attention_hidden",
                    2 * d_model,
                    config.dkn_attn_hidden,
                    true,
                    rng,
                )?,
                score: Linear::new(set, "ue.pair_attention_score", config.dkn_attn_hidden, 1, true, rng)?,
            })),
            ModelVariant::Caum => {
                if d_model % config.heads != 0 {
                    return Err(Error::Config(format!(
                        "caum user attention needs heads {} to divide d_model {d_model}",
                        config.heads
                    )));
                }
                Ok(UserEncoder::Caum(CaumUser {
                    cand_proj: Linear::new(set, "ue.candidate_proj", d_model, d_model, true, rng)?,
                    attention: MultiHeadAttention::new(
                        set,
                        "ue.candidate_self_attention",
                        2 * d_model,
                        d_model,
                        config.heads,
                        d_model / config.heads,
                        rng,
                    )?,
                    conv: Conv1dSame::new(
                        set,
                        "ue.candidate_cnn",
                        2 * d_model,
                        d_model,
                        3,
                        Activation::Relu,
                        rng,
                    )?,
                    pool: AdditiveAttention::new(
                        set,
                        "ue.range_attention",
                        d_model,
                        config.query_dim,
                        rng,
                    )?,
                }))
            }
        }
    }

    /// Encode one user. `candidate` is required by candidate-aware
    /// variants (DKN, CAUM) and ignored by all others.
    pub fn forward(
        &self,
        history: &ClickHistory<T>,
        candidate: Option<&NewsEmbedding<T>>,
        mode: &mut Mode,
    ) -> Result<UserEmbedding<T>> {
        history.require_nonempty()?;
        let vector = match self {
            UserEncoder::Npa(e) => e.forward(history, mode)?,
            UserEncoder::Naml(e) => {
                let out = e.attn.forward(&history.embeddings, Some(&history.mask()))?;
                mode_drop(out, mode)
            }
            UserEncoder::Nrms(e) => {
                let contextual = e.mhsa.forward(&history.embeddings, Some(&history.mask()))?;
                let out = e.attn.forward(&contextual, Some(&history.mask()))?;
                mode_drop(out, mode)
            }
            UserEncoder::LsturIni(e) => {
                let h0 = lookup_long_term_user(&e.long_term, history.user_index, e.p_mask, mode)?;
                e.gru.forward(&history.embeddings, history.len, &h0)?.1
            }
            UserEncoder::LsturCon(e) => {
                let long = lookup_long_term_user(&e.long_term, history.user_index, e.p_mask, mode)?;
                let h0 = Tensor::zeros(vec![e.gru.hidden]);
                let short = e.gru.forward(&history.embeddings, history.len, &h0)?.1;
                Tensor::concat(&[long, short])?
            }
            UserEncoder::Cen(e) => {
                let h0 = Tensor::zeros(vec![e.gru.hidden]);
                let short = e.gru.forward(&history.embeddings, history.len, &h0)?.1;
                let contextual = e.mhsa.forward(&history.embeddings, Some(&history.mask()))?;
                let long = e.long_attn.forward(&contextual, Some(&history.mask()))?;
                let both = Tensor::stack_rows(&[long, short])?;
                let out = e.combine.forward(&both, None)?;
                mode_drop(out, mode)
            }
            UserEncoder::Mins(e) => {
                let contextual = e.mhsa.forward(&history.embeddings, Some(&history.mask()))?;
                let hidden = e.channels[0].hidden;
                let c = e.channels.len();
                let mut finals = Vec::with_capacity(c);
                for (j, gru) in e.channels.iter().enumerate() {
                    let rows: Vec<Tensor<T>> = (j..history.len)
                        .step_by(c)
                        .map(|i| contextual.row(i))
                        .collect::<Result<_>>()?;
                    if rows.is_empty() {
                        finals.push(Tensor::zeros(vec![hidden]));
                    } else {
                        let sub = Tensor::stack_rows(&rows)?;
                        finals.push(gru.forward(&sub, rows.len(), &Tensor::zeros(vec![hidden]))?.1);
                    }
                }
                let stacked = Tensor::stack_rows(&finals)?;
                let out = e.attn.forward(&stacked, None)?;
                mode_drop(out, mode)
            }
            UserEncoder::Dkn(e) => {
                let cand = require_candidate(candidate, "dkn")?;
                let rows = history.valid_rows()?;
                let mut scores = Vec::with_capacity(rows.len());
                for row in &rows {
                    let pair = Tensor::concat(&[cand.vector.clone(), row.clone()])?;
                    let h = e.hidden.forward(&pair)?.relu();
                    scores.push(e.score.forward(&h)?);
                }
                let weights = Tensor::concat(&scores)?.softmax(None)?;
                let stacked = Tensor::stack_rows(&rows)?;
                let out = weights.vecmat(&stacked)?;
                mode_drop(out, mode)
            }
            UserEncoder::Caum(e) => {
                let cand = require_candidate(candidate, "caum")?;
                let cproj = e.cand_proj.forward(&cand.vector)?;
                let rows = history.valid_rows()?;
                let clicked = Tensor::stack_rows(&rows)?;
                let conditioned: Vec<Tensor<T>> = rows
                    .iter()
                    .map(|r| Tensor::concat(&[r.clone(), cproj.clone()]))
                    .collect::<Result<_>>()?;
                let conditioned = Tensor::stack_rows(&conditioned)?;
                let long_range = e.attention.forward_qkv(&conditioned, &clicked, None)?;
                let short_term = e.conv.forward(&conditioned)?;
                let both = Tensor::concat_rows(&[long_range, short_term])?;
                let out = e.pool.forward(&both, None)?;
                mode_drop(out, mode)
            }
        };
        Ok(UserEmbedding {
            vector,
            candidate_aware: matches!(self, UserEncoder::Dkn(_) | UserEncoder::Caum(_)),
        })
    }
}

fn long_term_table<T: Scalar>(
    set: &mut ParamSet<T>,
    users: usize,
    dim: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Embedding<T>> {
    let rows: Vec<Vec<f64>> = (0..users)
        .map(|_| {
            (0..dim)
                .map(|_| rand::Rng::random_range(rng, -0.1..0.1))
                .collect()
        })
        .collect();
    let table = set.create_table("ue.long_term_embedding", &rows, Vec::new())?;
    Ok(Embedding::new(table))
}

fn require_candidate<'a, T: Scalar>(
    candidate: Option<&'a NewsEmbedding<T>>,
    variant: &str,
) -> Result<&'a NewsEmbedding<T>> {
    candidate.ok_or_else(|| {
        Error::Config(format!(
            "{variant} is candidate-aware: encode_user requires a candidate embedding"
        ))
    })
}
