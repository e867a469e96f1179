//! Neural building blocks shared by the news and user encoders: affine
//! layers, the three attention flavors, a GRU, and embedding lookups.
//!
//! Every layer registers its parameters in a [`ParamSet`] under a
//! hierarchical name prefix, so parameter accounting can attribute sizes
//! to model components by prefix alone.

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::params::{Init, ParamSet, Parameter};

use super::{Scalar, Tensor};

/// Activation applied after a convolution or projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Linear,
    Relu,
    Tanh,
}

impl Activation {
    pub fn apply<T: Scalar>(self, x: &Tensor<T>) -> Tensor<T> {
        match self {
            Activation::Linear => x.clone(),
            Activation::Relu => x.relu(),
            Activation::Tanh => x.tanh(),
        }
    }
}

/// Affine map with optional bias.
pub struct Linear<T: Scalar> {
    pub weight: Parameter<T>,
    pub bias: Option<Parameter<T>>,
}

impl<T: Scalar> Linear<T> {
    pub fn new(
        set: &mut ParamSet<T>,
        prefix: &str,
        in_dim: usize,
        out_dim: usize,
        bias: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let weight = set.create(
            format!("{prefix}.weight"),
            vec![out_dim, in_dim],
            Init::Xavier,
            rng,
        )?;
        let bias = if bias {
            Some(set.create(format!("{prefix}.bias"), vec![out_dim], Init::Zeros, rng)?)
        } else {
            None
        };
        Ok(Linear { weight, bias })
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        x.linear(self.weight.tensor(), self.bias.as_ref().map(|b| b.tensor()))
    }
}

/// Same-length 1-D convolution over a token sequence, with activation.
pub struct Conv1dSame<T: Scalar> {
    pub filters: Parameter<T>,
    pub bias: Parameter<T>,
    pub activation: Activation,
}

impl<T: Scalar> Conv1dSame<T> {
    pub fn new(
        set: &mut ParamSet<T>,
        prefix: &str,
        in_dim: usize,
        out_dim: usize,
        window: usize,
        activation: Activation,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if window % 2 == 0 {
            return Err(Error::Config(format!(
                "convolution window must be odd, got {window}"
            )));
        }
        let filters = set.create(
            format!("{prefix}.filters"),
            vec![out_dim, window, in_dim],
            Init::Xavier,
            rng,
        )?;
        let bias = set.create(format!("{prefix}.bias"), vec![out_dim], Init::Zeros, rng)?;
        Ok(Conv1dSame {
            filters,
            bias,
            activation,
        })
    }

    pub fn forward(&self, seq: &Tensor<T>) -> Result<Tensor<T>> {
        let y = seq.conv1d_same(self.filters.tensor(), self.bias.tensor())?;
        Ok(self.activation.apply(&y))
    }
}

/// Additive attention with a learned global query:
/// `αᵢ = softmax(qᵀ tanh(W seqᵢ + b))`, output `Σ αᵢ seqᵢ`.
pub struct AdditiveAttention<T: Scalar> {
    pub proj: Linear<T>,
    pub query: Parameter<T>,
}

impl<T: Scalar> AdditiveAttention<T> {
    pub fn new(
        set: &mut ParamSet<T>,
        prefix: &str,
        in_dim: usize,
        query_dim: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let proj = Linear::new(set, &format!("{prefix}.proj"), in_dim, query_dim, true, rng)?;
        let query = set.create(
            format!("{prefix}.query"),
            vec![query_dim],
            Init::Uniform(-0.1, 0.1),
            rng,
        )?;
        Ok(AdditiveAttention { proj, query })
    }

    pub fn forward(&self, seq: &Tensor<T>, mask: Option<&[bool]>) -> Result<Tensor<T>> {
        Ok(self.forward_with_weights(seq, mask)?.0)
    }

    pub fn forward_with_weights(
        &self,
        seq: &Tensor<T>,
        mask: Option<&[bool]>,
    ) -> Result<(Tensor<T>, Tensor<T>)> {
        attend(seq, &self.proj, self.query.tensor(), mask)
    }
}

/// Additive attention driven by an external query vector (NPA-style
/// personalization: the query is a projected user-ID embedding).
pub struct PersonalizedAttention<T: Scalar> {
    pub proj: Linear<T>,
}

impl<T: Scalar> PersonalizedAttention<T> {
    pub fn new(
        set: &mut ParamSet<T>,
        prefix: &str,
        in_dim: usize,
        query_dim: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let proj = Linear::new(set, &format!("{prefix}.proj"), in_dim, query_dim, true, rng)?;
        Ok(PersonalizedAttention { proj })
    }

    pub fn forward(
        &self,
        seq: &Tensor<T>,
        query: &Tensor<T>,
        mask: Option<&[bool]>,
    ) -> Result<Tensor<T>> {
        Ok(attend(seq, &self.proj, query, mask)?.0)
    }
}

fn attend<T: Scalar>(
    seq: &Tensor<T>,
    proj: &Linear<T>,
    query: &Tensor<T>,
    mask: Option<&[bool]>,
) -> Result<(Tensor<T>, Tensor<T>)> {
    match seq.shape() {
        [l, _] if *l >= 1 => {}
        _ => {
            return Err(Error::degenerate(
                "additive_attention",
                format!("expected nonempty [L, d] sequence, got {:?}", seq.shape()),
            ))
        }
    }
    let hidden = proj.forward(seq)?.tanh();
    let scores = hidden.matvec(query)?;
    let weights = scores.softmax(mask)?;
    let pooled = weights.vecmat(seq)?;
    Ok((pooled, weights))
}

/// Multi-head scaled dot-product attention. Queries may come from a
/// different sequence than keys/values (used by the candidate-aware user
/// encoder); self-attention passes the same tensor for both. The output is
/// the concatenation of per-head weighted value sums (no output
/// projection), so `d_out = heads × head_dim`.
pub struct MultiHeadAttention<T: Scalar> {
    pub wq: Linear<T>,
    pub wk: Linear<T>,
    pub wv: Linear<T>,
    pub heads: usize,
    pub head_dim: usize,
}

impl<T: Scalar> MultiHeadAttention<T> {
    pub fn new(
        set: &mut ParamSet<T>,
        prefix: &str,
        query_in_dim: usize,
        kv_in_dim: usize,
        heads: usize,
        head_dim: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if heads == 0 {
            return Err(Error::Config("attention needs at least one head".into()));
        }
        let d_out = heads * head_dim;
        let wq = Linear::new(set, &format!("{prefix}.wq"), query_in_dim, d_out, false, rng)?;
        let wk = Linear::new(set, &format!("{prefix}.wk"), kv_in_dim, d_out, false, rng)?;
        let wv = Linear::new(set, &format!("{prefix}.wv"), kv_in_dim, d_out, false, rng)?;
        Ok(MultiHeadAttention {
            wq,
            wk,
            wv,
            heads,
            head_dim,
        })
    }

    pub fn self_new(
        set: &mut ParamSet<T>,
        prefix: &str,
        in_dim: usize,
        heads: usize,
        head_dim: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        Self::new(set, prefix, in_dim, in_dim, heads, head_dim, rng)
    }

    pub fn out_dim(&self) -> usize {
        self.heads * self.head_dim
    }

    /// Self-attention over `seq: [L, d]`; `mask` marks valid key positions.
    pub fn forward(&self, seq: &Tensor<T>, mask: Option<&[bool]>) -> Result<Tensor<T>> {
        self.forward_qkv(seq, seq, mask)
    }

    /// `query_seq: [L, dq]`, `kv_seq: [L, dk]` → `[L, heads × head_dim]`.
    pub fn forward_qkv(
        &self,
        query_seq: &Tensor<T>,
        kv_seq: &Tensor<T>,
        mask: Option<&[bool]>,
    ) -> Result<Tensor<T>> {
        match query_seq.shape() {
            [l, _] if *l >= 1 => {}
            _ => {
                return Err(Error::degenerate("multi_head_attention", "empty sequence"));
            }
        }
        let q = self.wq.forward(query_seq)?;
        let k = self.wk.forward(kv_seq)?;
        let v = self.wv.forward(kv_seq)?;
        let scale = T::from_f64(1.0 / (self.head_dim as f64).sqrt());
        let mut heads_out = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let (from, to) = (h * self.head_dim, (h + 1) * self.head_dim);
            let qh = q.slice_cols(from, to)?;
            let kh = k.slice_cols(from, to)?;
            let vh = v.slice_cols(from, to)?;
            let scores = qh.matmul(&kh.transpose()?)?.scale(scale);
            let weights = scores.softmax(mask)?;
            heads_out.push(weights.matmul(&vh)?);
        }
        Tensor::concat_cols(&heads_out)
    }
}

/// Gated recurrent unit (update gate `z`, reset gate `r`, tanh candidate).
pub struct Gru<T: Scalar> {
    pub w_z: Parameter<T>,
    pub u_z: Parameter<T>,
    pub b_z: Parameter<T>,
    pub w_r: Parameter<T>,
    pub u_r: Parameter<T>,
    pub b_r: Parameter<T>,
    pub w_h: Parameter<T>,
    pub u_h: Parameter<T>,
    pub b_h: Parameter<T>,
    pub hidden: usize,
}

impl<T: Scalar> Gru<T> {
    pub fn new(
        set: &mut ParamSet<T>,
        prefix: &str,
        in_dim: usize,
        hidden: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let gate = |name: &str,
                        set: &mut ParamSet<T>,
                        rng: &mut ChaCha8Rng|
         -> Result<(Parameter<T>, Parameter<T>, Parameter<T>)> {
            Ok((
                set.create(format!("{prefix}.w_{name}"), vec![hidden, in_dim], Init::Xavier, rng)?,
                set.create(format!("{prefix}.u_{name}"), vec![hidden, hidden], Init::Xavier, rng)?,
                set.create(format!("{prefix}.b_{name}"), vec![hidden], Init::Zeros, rng)?,
            ))
        };
        let (w_z, u_z, b_z) = gate("z", set, rng)?;
        let (w_r, u_r, b_r) = gate("r", set, rng)?;
        let (w_h, u_h, b_h) = gate("h", set, rng)?;
        Ok(Gru {
            w_z,
            u_z,
            b_z,
            w_r,
            u_r,
            b_r,
            w_h,
            u_h,
            b_h,
            hidden,
        })
    }

    /// Run the recurrence over the first `n` rows of `seq` starting from
    /// `h0`. Returns all states and the final state; with `n == 0` the
    /// final state is `h0` itself.
    pub fn forward(
        &self,
        seq: &Tensor<T>,
        n: usize,
        h0: &Tensor<T>,
    ) -> Result<(Vec<Tensor<T>>, Tensor<T>)> {
        if h0.shape() != [self.hidden] {
            return Err(Error::shape(
                "gru_forward",
                format!("h0 shape {:?} vs hidden {}", h0.shape(), self.hidden),
            ));
        }
        let mut states = Vec::with_capacity(n);
        let mut h = h0.clone();
        for t in 0..n {
            let x = seq.row(t)?;
            let z = x
                .linear(self.w_z.tensor(), Some(self.b_z.tensor()))?
                .add(&h.linear(self.u_z.tensor(), None)?)?
                .sigmoid();
            let r = x
                .linear(self.w_r.tensor(), Some(self.b_r.tensor()))?
                .add(&h.linear(self.u_r.tensor(), None)?)?
                .sigmoid();
            let cand = x
                .linear(self.w_h.tensor(), Some(self.b_h.tensor()))?
                .add(&r.mul(&h)?.linear(self.u_h.tensor(), None)?)?
                .tanh();
            // h' = (1 - z) ⊙ h + z ⊙ cand
            let keep = h.sub(&z.mul(&h)?)?;
            h = keep.add(&z.mul(&cand)?)?;
            states.push(h.clone());
        }
        Ok((states, h))
    }
}

/// Row-gather over an embedding table parameter. Clones share the table.
#[derive(Clone)]
pub struct Embedding<T: Scalar> {
    pub table: Parameter<T>,
}

impl<T: Scalar> Embedding<T> {
    pub fn new(table: Parameter<T>) -> Self {
        Embedding { table }
    }

    /// Fresh random table with a frozen all-zero padding row 0.
    pub fn with_padding_row(
        set: &mut ParamSet<T>,
        name: &str,
        rows: usize,
        dim: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let mut data: Vec<Vec<f64>> = Vec::with_capacity(rows);
        data.push(vec![0.0; dim]);
        for _ in 1..rows {
            data.push((0..dim).map(|_| rand::Rng::random_range(rng, -0.1..0.1)).collect());
        }
        let table = set.create_table(name, &data, vec![0])?;
        Ok(Embedding { table })
    }

    pub fn dim(&self) -> usize {
        self.table.shape()[1]
    }

    pub fn rows(&self) -> usize {
        self.table.shape()[0]
    }

    pub fn lookup(&self, ids: &[usize]) -> Result<Tensor<T>> {
        Tensor::gather_rows(self.table.tensor(), ids)
    }

    pub fn lookup_one(&self, id: usize) -> Result<Tensor<T>> {
        self.lookup(&[id])?.row(0)
    }
}
