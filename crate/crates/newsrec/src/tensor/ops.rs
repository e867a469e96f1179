//! Forward operations and their backward closures.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::{Scalar, Tensor};

fn same_shape<T: Scalar>(op: &'static str, a: &Tensor<T>, b: &Tensor<T>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(
            op,
            format!("{:?} vs {:?}", a.shape(), b.shape()),
        ));
    }
    Ok(())
}

fn rows_cols<T: Scalar>(op: &'static str, t: &Tensor<T>) -> Result<(usize, usize)> {
    match t.shape() {
        [r, c] => Ok((*r, *c)),
        s => Err(Error::shape(op, format!("expected matrix, got {s:?}"))),
    }
}

impl<T: Scalar> Tensor<T> {
    pub fn add(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        same_shape("add", self, other)?;
        let values = {
            let (a, b) = (self.values(), other.values());
            a.iter().zip(b.iter()).map(|(x, y)| *x + *y).collect()
        };
        let (a, b) = (self.clone(), other.clone());
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            values,
            &[self, other],
            move || {
                Box::new(move |g| {
                    if a.requires_grad() {
                        a.accumulate_grad(g);
                    }
                    if b.requires_grad() {
                        b.accumulate_grad(g);
                    }
                })
            },
        ))
    }

    pub fn sub(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        same_shape("sub", self, other)?;
        let values = {
            let (a, b) = (self.values(), other.values());
            a.iter().zip(b.iter()).map(|(x, y)| *x - *y).collect()
        };
        let (a, b) = (self.clone(), other.clone());
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            values,
            &[self, other],
            move || {
                Box::new(move |g| {
                    if a.requires_grad() {
                        a.accumulate_grad(g);
                    }
                    if b.requires_grad() {
                        let neg: Vec<T> = g.iter().map(|v| -*v).collect();
                        b.accumulate_grad(&neg);
                    }
                })
            },
        ))
    }

    /// Elementwise product.
    pub fn mul(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        same_shape("mul", self, other)?;
        let values = {
            let (a, b) = (self.values(), other.values());
            a.iter().zip(b.iter()).map(|(x, y)| *x * *y).collect()
        };
        let (a, b) = (self.clone(), other.clone());
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            values,
            &[self, other],
            move || {
                Box::new(move |g| {
                    if a.requires_grad() {
                        let contrib: Vec<T> = {
                            let bv = b.values();
                            g.iter().zip(bv.iter()).map(|(g, y)| *g * *y).collect()
                        };
                        a.accumulate_grad(&contrib);
                    }
                    if b.requires_grad() {
                        let contrib: Vec<T> = {
                            let av = a.values();
                            g.iter().zip(av.iter()).map(|(g, x)| *g * *x).collect()
                        };
                        b.accumulate_grad(&contrib);
                    }
                })
            },
        ))
    }

    pub fn scale(&self, c: T) -> Tensor<T> {
        let values = self.values().iter().map(|v| *v * c).collect();
        let a = self.clone();
        Tensor::from_op(self.shape().to_vec(), values, &[self], move || {
            Box::new(move |g| {
                let contrib: Vec<T> = g.iter().map(|v| *v * c).collect();
                a.accumulate_grad(&contrib);
            })
        })
    }

    /// Sum of any number of same-shaped tensors.
    pub fn add_n(parts: &[Tensor<T>]) -> Result<Tensor<T>> {
        let first = parts
            .first()
            .ok_or_else(|| Error::degenerate("add_n", "no inputs"))?;
        let mut values = first.to_vec();
        for p in &parts[1..] {
            same_shape("add_n", first, p)?;
            for (v, x) in values.iter_mut().zip(p.values().iter()) {
                *v = *v + *x;
            }
        }
        let refs: Vec<&Tensor<T>> = parts.iter().collect();
        let kept: Vec<Tensor<T>> = parts.to_vec();
        Ok(Tensor::from_op(
            first.shape().to_vec(),
            values,
            &refs,
            move || {
                Box::new(move |g| {
                    for p in &kept {
                        if p.requires_grad() {
                            p.accumulate_grad(g);
                        }
                    }
                })
            },
        ))
    }

    pub fn relu(&self) -> Tensor<T> {
        let values: Vec<T> = self
            .values()
            .iter()
            .map(|v| if *v > T::zero() { *v } else { T::zero() })
            .collect();
        let a = self.clone();
        Tensor::from_op(self.shape().to_vec(), values, &[self], move || {
            Box::new(move |g| {
                let contrib: Vec<T> = {
                    let av = a.values();
                    g.iter()
                        .zip(av.iter())
                        .map(|(g, x)| if *x > T::zero() { *g } else { T::zero() })
                        .collect()
                };
                a.accumulate_grad(&contrib);
            })
        })
    }

    pub fn tanh(&self) -> Tensor<T> {
        let values: Vec<T> = self.values().iter().map(|v| v.tanh()).collect();
        let a = self.clone();
        let out = values.clone();
        Tensor::from_op(self.shape().to_vec(), values, &[self], move || {
            Box::new(move |g| {
                let contrib: Vec<T> = g
                    .iter()
                    .zip(out.iter())
                    .map(|(g, y)| *g * (T::one() - *y * *y))
                    .collect();
                a.accumulate_grad(&contrib);
            })
        })
    }

    pub fn sigmoid(&self) -> Tensor<T> {
        let values: Vec<T> = self
            .values()
            .iter()
            .map(|v| T::one() / (T::one() + (-*v).exp()))
            .collect();
        let a = self.clone();
        let out = values.clone();
        Tensor::from_op(self.shape().to_vec(), values, &[self], move || {
            Box::new(move |g| {
                let contrib: Vec<T> = g
                    .iter()
                    .zip(out.iter())
                    .map(|(g, y)| *g * *y * (T::one() - *y))
                    .collect();
                a.accumulate_grad(&contrib);
            })
        })
    }

    /// Affine map `y = x Wᵀ + b` for `x: [in]` or `x: [L, in]`,
    /// `w: [out, in]`, `b: [out]`.
    pub fn linear(&self, w: &Tensor<T>, b: Option<&Tensor<T>>) -> Result<Tensor<T>> {
        let (out_dim, in_dim) = rows_cols("linear", w)?;
        let (rows, x_in, out_shape) = match self.shape() {
            [n] => (1usize, *n, vec![out_dim]),
            [l, n] => (*l, *n, vec![*l, out_dim]),
            s => {
                return Err(Error::shape(
                    "linear",
                    format!("input must be vector or matrix, got {s:?}"),
                ))
            }
        };
        if x_in != in_dim {
            return Err(Error::shape(
                "linear",
                format!("input dim {x_in} vs weight in-dim {in_dim}"),
            ));
        }
        if let Some(b) = b {
            if b.shape() != [out_dim] {
                return Err(Error::shape(
                    "linear",
                    format!("bias shape {:?} vs out dim {out_dim}", b.shape()),
                ));
            }
        }
        let mut values = vec![T::zero(); rows * out_dim];
        {
            let xv = self.values();
            let wv = w.values();
            for r in 0..rows {
                let x_row = &xv[r * in_dim..(r + 1) * in_dim];
                let y_row = &mut values[r * out_dim..(r + 1) * out_dim];
                for (o, y) in y_row.iter_mut().enumerate() {
                    let w_row = &wv[o * in_dim..(o + 1) * in_dim];
                    let mut acc = T::zero();
                    for (xi, wi) in x_row.iter().zip(w_row.iter()) {
                        acc = acc + *xi * *wi;
                    }
                    *y = acc;
                }
            }
            if let Some(b) = b {
                let bv = b.values();
                for r in 0..rows {
                    for o in 0..out_dim {
                        values[r * out_dim + o] = values[r * out_dim + o] + bv[o];
                    }
                }
            }
        }
        let parents: Vec<&Tensor<T>> = match b {
            Some(b) => vec![self, w, b],
            None => vec![self, w],
        };
        let (x, wt, bt) = (self.clone(), w.clone(), b.cloned());
        Ok(Tensor::from_op(out_shape, values, &parents, move || {
            Box::new(move |g| {
                if x.requires_grad() {
                    // dx[r, i] = sum_o g[r, o] * w[o, i]
                    let contrib: Vec<T> = {
                        let wv = wt.values();
                        let mut dx = vec![T::zero(); rows * in_dim];
                        for r in 0..rows {
                            for o in 0..out_dim {
                                let go = g[r * out_dim + o];
                                let w_row = &wv[o * in_dim..(o + 1) * in_dim];
                                let dx_row = &mut dx[r * in_dim..(r + 1) * in_dim];
                                for (d, wi) in dx_row.iter_mut().zip(w_row.iter()) {
                                    *d = *d + go * *wi;
                                }
                            }
                        }
                        dx
                    };
                    x.accumulate_grad(&contrib);
                }
                if wt.requires_grad() {
                    // dW[o, i] = sum_r g[r, o] * x[r, i]
                    let contrib: Vec<T> = {
                        let xv = x.values();
                        let mut dw = vec![T::zero(); out_dim * in_dim];
                        for r in 0..rows {
                            let x_row = &xv[r * in_dim..(r + 1) * in_dim];
                            for o in 0..out_dim {
                                let go = g[r * out_dim + o];
                                let dw_row = &mut dw[o * in_dim..(o + 1) * in_dim];
                                for (d, xi) in dw_row.iter_mut().zip(x_row.iter()) {
                                    *d = *d + go * *xi;
                                }
                            }
                        }
                        dw
                    };
                    wt.accumulate_grad(&contrib);
                }
                if let Some(bt) = &bt {
                    if bt.requires_grad() {
                        let mut db = vec![T::zero(); out_dim];
                        for r in 0..rows {
                            for (o, d) in db.iter_mut().enumerate() {
                                *d = *d + g[r * out_dim + o];
                            }
                        }
                        bt.accumulate_grad(&db);
                    }
                }
            })
        }))
    }

    /// Matrix product `[m, k] · [k, n] → [m, n]`.
    pub fn matmul(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        let (m, k) = rows_cols("matmul", self)?;
        let (k2, n) = rows_cols("matmul", other)?;
        if k != k2 {
            return Err(Error::shape("matmul", format!("inner dims {k} vs {k2}")));
        }
        let mut values = vec![T::zero(); m * n];
        {
            let av = self.values();
            let bv = other.values();
            for i in 0..m {
                for kk in 0..k {
                    let a = av[i * k + kk];
                    let b_row = &bv[kk * n..(kk + 1) * n];
                    let out_row = &mut values[i * n..(i + 1) * n];
                    for (o, b) in out_row.iter_mut().zip(b_row.iter()) {
                        *o = *o + a * *b;
                    }
                }
            }
        }
        let (at, bt) = (self.clone(), other.clone());
        Ok(Tensor::from_op(
            vec![m, n],
            values,
            &[self, other],
            move || {
                Box::new(move |g| {
                    if at.requires_grad() {
                        // dA = G Bᵀ
                        let contrib: Vec<T> = {
                            let bv = bt.values();
                            let mut da = vec![T::zero(); m * k];
                            for i in 0..m {
                                for j in 0..n {
                                    let gij = g[i * n + j];
                                    for kk in 0..k {
                                        da[i * k + kk] = da[i * k + kk] + gij * bv[kk * n + j];
                                    }
                                }
                            }
                            da
                        };
                        at.accumulate_grad(&contrib);
                    }
                    if bt.requires_grad() {
                        // dB = Aᵀ G
                        let contrib: Vec<T> = {
                            let av = at.values();
                            let mut db = vec![T::zero(); k * n];
                            for i in 0..m {
                                for kk in 0..k {
                                    let a = av[i * k + kk];
                                    let g_row = &g[i * n..(i + 1) * n];
                                    let db_row = &mut db[kk * n..(kk + 1) * n];
                                    for (d, gj) in db_row.iter_mut().zip(g_row.iter()) {
                                        *d = *d + a * *gj;
                                    }
                                }
                            }
                            db
                        };
                        bt.accumulate_grad(&contrib);
                    }
                })
            },
        ))
    }

    pub fn transpose(&self) -> Result<Tensor<T>> {
        let (r, c) = rows_cols("transpose", self)?;
        let mut values = vec![T::zero(); r * c];
        {
            let v = self.values();
            for i in 0..r {
                for j in 0..c {
                    values[j * r + i] = v[i * c + j];
                }
            }
        }
        let a = self.clone();
        Ok(Tensor::from_op(vec![c, r], values, &[self], move || {
            Box::new(move |g| {
                let mut contrib = vec![T::zero(); r * c];
                for j in 0..c {
                    for i in 0..r {
                        contrib[i * c + j] = g[j * r + i];
                    }
                }
                a.accumulate_grad(&contrib);
            })
        }))
    }

    /// `[r, c] · [c] → [r]`.
    pub fn matvec(&self, v: &Tensor<T>) -> Result<Tensor<T>> {
        let (r, c) = rows_cols("matvec", self)?;
        if v.shape() != [c] {
            return Err(Error::shape(
                "matvec",
                format!("matrix cols {c} vs vector shape {:?}", v.shape()),
            ));
        }
        let mut values = vec![T::zero(); r];
        {
            let mv = self.values();
            let vv = v.values();
            for (i, out) in values.iter_mut().enumerate() {
                let row = &mv[i * c..(i + 1) * c];
                let mut acc = T::zero();
                for (m, x) in row.iter().zip(vv.iter()) {
                    acc = acc + *m * *x;
                }
                *out = acc;
            }
        }
        let (mt, vt) = (self.clone(), v.clone());
        Ok(Tensor::from_op(vec![r], values, &[self, v], move || {
            Box::new(move |g| {
                if mt.requires_grad() {
                    let contrib: Vec<T> = {
                        let vv = vt.values();
                        let mut dm = vec![T::zero(); r * c];
                        for i in 0..r {
                            for j in 0..c {
                                dm[i * c + j] = g[i] * vv[j];
                            }
                        }
                        dm
                    };
                    mt.accumulate_grad(&contrib);
                }
                if vt.requires_grad() {
                    let contrib: Vec<T> = {
                        let mv = mt.values();
                        let mut dv = vec![T::zero(); c];
                        for i in 0..r {
                            let row = &mv[i * c..(i + 1) * c];
                            for (d, m) in dv.iter_mut().zip(row.iter()) {
                                *d = *d + g[i] * *m;
                            }
                        }
                        dv
                    };
                    vt.accumulate_grad(&contrib);
                }
            })
        }))
    }

    /// Weighted sum of matrix rows: `self: [r]`, `m: [r, c] → [c]`.
    pub fn vecmat(&self, m: &Tensor<T>) -> Result<Tensor<T>> {
        let (r, c) = rows_cols("vecmat", m)?;
        if self.shape() != [r] {
            return Err(Error::shape(
                "vecmat",
                format!("weights shape {:?} vs matrix rows {r}", self.shape()),
            ));
        }
        let mut values = vec![T::zero(); c];
        {
            let wv = self.values();
            let mv = m.values();
            for i in 0..r {
                let w = wv[i];
                let row = &mv[i * c..(i + 1) * c];
                for (out, x) in values.iter_mut().zip(row.iter()) {
                    *out = *out + w * *x;
                }
            }
        }
        let (wt, mt) = (self.clone(), m.clone());
        Ok(Tensor::from_op(vec![c], values, &[self, m], move || {
            Box::new(move |g| {
                if wt.requires_grad() {
                    let contrib: Vec<T> = {
                        let mv = mt.values();
                        (0..r)
                            .map(|i| {
                                let row = &mv[i * c..(i + 1) * c];
                                let mut acc = T::zero();
                                for (gj, x) in g.iter().zip(row.iter()) {
                                    acc = acc + *gj * *x;
                                }
                                acc
                            })
                            .collect()
                    };
                    wt.accumulate_grad(&contrib);
                }
                if mt.requires_grad() {
                    let contrib: Vec<T> = {
                        let wv = wt.values();
                        let mut dm = vec![T::zero(); r * c];
                        for i in 0..r {
                            let w = wv[i];
                            let dm_row = &mut dm[i * c..(i + 1) * c];
                            for (d, gj) in dm_row.iter_mut().zip(g.iter()) {
                                *d = w * *gj;
                            }
                        }
                        dm
                    };
                    mt.accumulate_grad(&contrib);
                }
            })
        }))
    }

    /// Inner product of two vectors, returned as a `[1]` tensor.
    pub fn dot(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        if self.shape().len() != 1 || self.shape() != other.shape() {
            return Err(Error::shape(
                "dot",
                format!("{:?} vs {:?}", self.shape(), other.shape()),
            ));
        }
        let value = {
            let (a, b) = (self.values(), other.values());
            let mut acc = T::zero();
            for (x, y) in a.iter().zip(b.iter()) {
                acc = acc + *x * *y;
            }
            acc
        };
        let (at, bt) = (self.clone(), other.clone());
        Ok(Tensor::from_op(
            vec![1],
            vec![value],
            &[self, other],
            move || {
                Box::new(move |g| {
                    let g0 = g[0];
                    if at.requires_grad() {
                        let contrib: Vec<T> = bt.values().iter().map(|y| g0 * *y).collect();
                        at.accumulate_grad(&contrib);
                    }
                    if bt.requires_grad() {
                        let contrib: Vec<T> = at.values().iter().map(|x| g0 * *x).collect();
                        bt.accumulate_grad(&contrib);
                    }
                })
            },
        ))
    }

    /// Extract row `i` of a matrix as a vector.
    pub fn row(&self, i: usize) -> Result<Tensor<T>> {
        let (r, c) = rows_cols("row", self)?;
        if i >= r {
            return Err(Error::Index(format!("row {i} of {r}-row matrix")));
        }
        let values = self.values()[i * c..(i + 1) * c].to_vec();
        let a = self.clone();
        Ok(Tensor::from_op(vec![c], values, &[self], move || {
            Box::new(move |g| {
                a.with_grad_mut(|buf| {
                    for (d, gj) in buf[i * c..(i + 1) * c].iter_mut().zip(g.iter()) {
                        *d = *d + *gj;
                    }
                });
            })
        }))
    }

    /// Column slice `[.., from..to)` of a matrix.
    pub fn slice_cols(&self, from: usize, to: usize) -> Result<Tensor<T>> {
        let (r, c) = rows_cols("slice_cols", self)?;
        if from >= to || to > c {
            return Err(Error::shape(
                "slice_cols",
                format!("range {from}..{to} of {c} columns"),
            ));
        }
        let w = to - from;
        let mut values = Vec::with_capacity(r * w);
        {
            let v = self.values();
            for i in 0..r {
                values.extend_from_slice(&v[i * c + from..i * c + to]);
            }
        }
        let a = self.clone();
        Ok(Tensor::from_op(vec![r, w], values, &[self], move || {
            Box::new(move |g| {
                a.with_grad_mut(|buf| {
                    for i in 0..r {
                        let g_row = &g[i * w..(i + 1) * w];
                        let b_row = &mut buf[i * c + from..i * c + to];
                        for (d, gj) in b_row.iter_mut().zip(g_row.iter()) {
                            *d = *d + *gj;
                        }
                    }
                });
            })
        }))
    }

    /// Concatenate vectors into one vector.
    pub fn concat(parts: &[Tensor<T>]) -> Result<Tensor<T>> {
        if parts.is_empty() {
            return Err(Error::degenerate("concat", "no inputs"));
        }
        let mut values = Vec::new();
        let mut lens = Vec::with_capacity(parts.len());
        for p in parts {
            if p.shape().len() != 1 {
                return Err(Error::shape(
                    "concat",
                    format!("expected vectors, got {:?}", p.shape()),
                ));
            }
            lens.push(p.len());
            values.extend_from_slice(&p.values());
        }
        let total = values.len();
        let refs: Vec<&Tensor<T>> = parts.iter().collect();
        let kept: Vec<Tensor<T>> = parts.to_vec();
        Ok(Tensor::from_op(vec![total], values, &refs, move || {
            Box::new(move |g| {
                let mut offset = 0;
                for (p, len) in kept.iter().zip(lens.iter()) {
                    if p.requires_grad() {
                        p.accumulate_grad(&g[offset..offset + len]);
                    }
                    offset += len;
                }
            })
        }))
    }

    /// Stack vectors as the rows of a matrix.
    pub fn stack_rows(parts: &[Tensor<T>]) -> Result<Tensor<T>> {
        let first = parts
            .first()
            .ok_or_else(|| Error::degenerate("stack_rows", "no inputs"))?;
        let c = match first.shape() {
            [c] => *c,
            s => return Err(Error::shape("stack_rows", format!("expected vectors, got {s:?}"))),
        };
        let mut values = Vec::with_capacity(parts.len() * c);
        for p in parts {
            if p.shape() != [c] {
                return Err(Error::shape(
                    "stack_rows",
                    format!("row shape {:?} vs [{c}]", p.shape()),
                ));
            }
            values.extend_from_slice(&p.values());
        }
        let refs: Vec<&Tensor<T>> = parts.iter().collect();
        let kept: Vec<Tensor<T>> = parts.to_vec();
        Ok(Tensor::from_op(
            vec![parts.len(), c],
            values,
            &refs,
            move || {
                Box::new(move |g| {
                    for (i, p) in kept.iter().enumerate() {
                        if p.requires_grad() {
                            p.accumulate_grad(&g[i * c..(i + 1) * c]);
                        }
                    }
                })
            },
        ))
    }

    /// Concatenate matrices left-to-right (same row count).
    pub fn concat_cols(parts: &[Tensor<T>]) -> Result<Tensor<T>> {
        let first = parts
            .first()
            .ok_or_else(|| Error::degenerate("concat_cols", "no inputs"))?;
        let (r, _) = rows_cols("concat_cols", first)?;
        let mut widths = Vec::with_capacity(parts.len());
        let mut total = 0;
        for p in parts {
            let (pr, pc) = rows_cols("concat_cols", p)?;
            if pr != r {
                return Err(Error::shape("concat_cols", format!("row counts {r} vs {pr}")));
            }
            widths.push(pc);
            total += pc;
        }
        let mut values = vec![T::zero(); r * total];
        {
            let mut offset = 0;
            for (p, w) in parts.iter().zip(widths.iter()) {
                let pv = p.values();
                for i in 0..r {
                    values[i * total + offset..i * total + offset + w]
                        .copy_from_slice(&pv[i * w..(i + 1) * w]);
                }
                offset += w;
            }
        }
        let refs: Vec<&Tensor<T>> = parts.iter().collect();
        let kept: Vec<Tensor<T>> = parts.to_vec();
        Ok(Tensor::from_op(vec![r, total], values, &refs, move || {
            Box::new(move |g| {
                let mut offset = 0;
                for (p, w) in kept.iter().zip(widths.iter()) {
                    if p.requires_grad() {
                        let mut contrib = vec![T::zero(); r * w];
                        for i in 0..r {
                            contrib[i * w..(i + 1) * w]
                                .copy_from_slice(&g[i * total + offset..i * total + offset + w]);
                        }
                        p.accumulate_grad(&contrib);
                    }
                    offset += w;
                }
            })
        }))
    }

    /// Concatenate matrices top-to-bottom (same column count).
    pub fn concat_rows(parts: &[Tensor<T>]) -> Result<Tensor<T>> {
        let first = parts
            .first()
            .ok_or_else(|| Error::degenerate("concat_rows", "no inputs"))?;
        let (_, c) = rows_cols("concat_rows", first)?;
        let mut values = Vec::new();
        let mut heights = Vec::with_capacity(parts.len());
        for p in parts {
            let (pr, pc) = rows_cols("concat_rows", p)?;
            if pc != c {
                return Err(Error::shape("concat_rows", format!("col counts {c} vs {pc}")));
            }
            heights.push(pr);
            values.extend_from_slice(&p.values());
        }
        let total: usize = heights.iter().sum();
        let refs: Vec<&Tensor<T>> = parts.iter().collect();
        let kept: Vec<Tensor<T>> = parts.to_vec();
        Ok(Tensor::from_op(vec![total, c], values, &refs, move || {
            Box::new(move |g| {
                let mut offset = 0;
                for (p, h) in kept.iter().zip(heights.iter()) {
                    if p.requires_grad() {
                        p.accumulate_grad(&g[offset * c..(offset + h) * c]);
                    }
                    offset += h;
                }
            })
        }))
    }

    /// Coordinate-wise mean over the first `n` rows; rows past `n` are
    /// padding and receive zero gradient.
    pub fn mean_rows(&self, n: usize) -> Result<Tensor<T>> {
        let (r, c) = rows_cols("mean_rows", self)?;
        if n == 0 {
            return Err(Error::degenerate("mean_rows", "empty row range"));
        }
        if n > r {
            return Err(Error::shape("mean_rows", format!("{n} rows of {r}")));
        }
        let inv = T::one() / T::from_f64(n as f64);
        let mut values = vec![T::zero(); c];
        {
            let v = self.values();
            for i in 0..n {
                let row = &v[i * c..(i + 1) * c];
                for (out, x) in values.iter_mut().zip(row.iter()) {
                    *out = *out + *x;
                }
            }
            for out in values.iter_mut() {
                *out = *out * inv;
            }
        }
        let a = self.clone();
        Ok(Tensor::from_op(vec![c], values, &[self], move || {
            Box::new(move |g| {
                a.with_grad_mut(|buf| {
                    for i in 0..n {
                        let b_row = &mut buf[i * c..(i + 1) * c];
                        for (d, gj) in b_row.iter_mut().zip(g.iter()) {
                            *d = *d + *gj * inv;
                        }
                    }
                });
            })
        }))
    }

    /// Per-column maximum over the first `n` rows. Ties route the gradient
    /// to the earliest row.
    pub fn max_rows(&self, n: usize) -> Result<Tensor<T>> {
        let (r, c) = rows_cols("max_rows", self)?;
        if n == 0 {
            return Err(Error::degenerate("max_rows", "empty row range"));
        }
        if n > r {
            return Err(Error::shape("max_rows", format!("{n} rows of {r}")));
        }
        let mut values = vec![T::zero(); c];
        let mut argmax = vec![0usize; c];
        {
            let v = self.values();
            for j in 0..c {
                let mut best = v[j];
                let mut at = 0;
                for i in 1..n {
                    let x = v[i * c + j];
                    if x > best {
                        best = x;
                        at = i;
                    }
                }
                values[j] = best;
                argmax[j] = at;
            }
        }
        let a = self.clone();
        Ok(Tensor::from_op(vec![c], values, &[self], move || {
            Box::new(move |g| {
                a.with_grad_mut(|buf| {
                    for (j, &i) in argmax.iter().enumerate() {
                        buf[i * c + j] = buf[i * c + j] + g[j];
                    }
                });
            })
        }))
    }

    /// Numerically stabilized softmax over the last dimension of a vector
    /// or matrix. `mask[i] == false` forces position `i` of every row to
    /// exactly zero (and zero gradient); a fully masked row is an error.
    pub fn softmax(&self, mask: Option<&[bool]>) -> Result<Tensor<T>> {
        let (rows, n) = match self.shape() {
            [n] => (1usize, *n),
            [r, n] => (*r, *n),
            s => {
                return Err(Error::shape(
                    "softmax",
                    format!("expected vector or matrix, got {s:?}"),
                ))
            }
        };
        if n == 0 {
            return Err(Error::degenerate("softmax", "empty distribution"));
        }
        if let Some(m) = mask {
            if m.len() != n {
                return Err(Error::shape(
                    "softmax",
                    format!("mask length {} vs last dim {n}", m.len()),
                ));
            }
            if !m.iter().any(|&b| b) {
                return Err(Error::degenerate("softmax", "fully masked row"));
            }
        }
        let live = |i: usize| mask.map_or(true, |m| m[i]);
        let mut values = vec![T::zero(); rows * n];
        {
            let v = self.values();
            for r in 0..rows {
                let x = &v[r * n..(r + 1) * n];
                let mut max = T::neg_infinity();
                for (i, xi) in x.iter().enumerate() {
                    if live(i) && *xi > max {
                        max = *xi;
                    }
                }
                let mut sum = T::zero();
                let out = &mut values[r * n..(r + 1) * n];
                for (i, (o, xi)) in out.iter_mut().zip(x.iter()).enumerate() {
                    if live(i) {
                        let e = (*xi - max).exp();
                        *o = e;
                        sum = sum + e;
                    }
                }
                for o in out.iter_mut() {
                    *o = *o / sum;
                }
            }
        }
        let a = self.clone();
        let y = values.clone();
        let mask_owned: Option<Vec<bool>> = mask.map(|m| m.to_vec());
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            values,
            &[self],
            move || {
                Box::new(move |g| {
                    let live = |i: usize| mask_owned.as_ref().map_or(true, |m| m[i]);
                    let mut contrib = vec![T::zero(); rows * n];
                    for r in 0..rows {
                        let y_row = &y[r * n..(r + 1) * n];
                        let g_row = &g[r * n..(r + 1) * n];
                        let mut inner = T::zero();
                        for (gj, yj) in g_row.iter().zip(y_row.iter()) {
                            inner = inner + *gj * *yj;
                        }
                        let c_row = &mut contrib[r * n..(r + 1) * n];
                        for i in 0..n {
                            if live(i) {
                                c_row[i] = y_row[i] * (g_row[i] - inner);
                            }
                        }
                    }
                    a.accumulate_grad(&contrib);
                })
            },
        ))
    }

    /// `log Σ exp(x)` of a vector, as a `[1]` tensor.
    pub fn logsumexp(&self) -> Result<Tensor<T>> {
        if self.shape().len() != 1 || self.is_empty() {
            return Err(Error::shape(
                "logsumexp",
                format!("expected nonempty vector, got {:?}", self.shape()),
            ));
        }
        let (value, probs) = {
            let v = self.values();
            let max = v.iter().cloned().fold(T::neg_infinity(), T::max);
            let mut sum = T::zero();
            let exps: Vec<T> = v
                .iter()
                .map(|x| {
                    let e = (*x - max).exp();
                    sum = sum + e;
                    e
                })
                .collect();
            let probs: Vec<T> = exps.iter().map(|e| *e / sum).collect();
            (max + sum.ln(), probs)
        };
        let a = self.clone();
        Ok(Tensor::from_op(vec![1], vec![value], &[self], move || {
            Box::new(move |g| {
                let contrib: Vec<T> = probs.iter().map(|p| g[0] * *p).collect();
                a.accumulate_grad(&contrib);
            })
        }))
    }

    /// Element `i` of a vector, as a `[1]` tensor.
    pub fn element(&self, i: usize) -> Result<Tensor<T>> {
        if self.shape().len() != 1 {
            return Err(Error::shape(
                "element",
                format!("expected vector, got {:?}", self.shape()),
            ));
        }
        if i >= self.len() {
            return Err(Error::Index(format!("element {i} of {}", self.len())));
        }
        let value = self.values()[i];
        let a = self.clone();
        Ok(Tensor::from_op(vec![1], vec![value], &[self], move || {
            Box::new(move |g| {
                a.with_grad_mut(|buf| {
                    buf[i] = buf[i] + g[0];
                });
            })
        }))
    }

    /// Inverted dropout: keeps each element with probability `1 - rate`
    /// and rescales by `1/(1 - rate)`. `rate == 0` is the identity.
    pub fn dropout(&self, rate: f64, rng: &mut ChaCha8Rng) -> Tensor<T> {
        if rate <= 0.0 {
            return self.clone();
        }
        debug_assert!(rate < 1.0, "dropout rate must be < 1");
        let keep = 1.0 - rate;
        let inv_keep = T::from_f64(1.0 / keep);
        let mask: Vec<bool> = (0..self.len()).map(|_| rng.random::<f64>() < keep).collect();
        let values: Vec<T> = self
            .values()
            .iter()
            .zip(mask.iter())
            .map(|(x, &m)| if m { *x * inv_keep } else { T::zero() })
            .collect();
        let a = self.clone();
        Tensor::from_op(self.shape().to_vec(), values, &[self], move || {
            Box::new(move |g| {
                let contrib: Vec<T> = g
                    .iter()
                    .zip(mask.iter())
                    .map(|(g, &m)| if m { *g * inv_keep } else { T::zero() })
                    .collect();
                a.accumulate_grad(&contrib);
            })
        })
    }

    /// Same-length 1-D cross-correlation with zero padding:
    /// `seq: [L, d_in]`, `filters: [d_out, window, d_in]`, `bias: [d_out]`
    /// → `[L, d_out]`. The window must be odd.
    pub fn conv1d_same(&self, filters: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
        let (l, d_in) = rows_cols("conv1d_same", self)?;
        let (d_out, window, f_in) = match filters.shape() {
            [o, w, i] => (*o, *w, *i),
            s => {
                return Err(Error::shape(
                    "conv1d_same",
                    format!("filters must be [out, window, in], got {s:?}"),
                ))
            }
        };
        if window % 2 == 0 {
            return Err(Error::Config(format!(
                "conv1d_same window must be odd, got {window}"
            )));
        }
        if f_in != d_in {
            return Err(Error::shape(
                "conv1d_same",
                format!("input dim {d_in} vs filter in-dim {f_in}"),
            ));
        }
        if bias.shape() != [d_out] {
            return Err(Error::shape(
                "conv1d_same",
                format!("bias shape {:?} vs out dim {d_out}", bias.shape()),
            ));
        }
        let pad = window / 2;
        let mut values = vec![T::zero(); l * d_out];
        {
            let sv = self.values();
            let fv = filters.values();
            let bv = bias.values();
            for t in 0..l {
                let out_row = &mut values[t * d_out..(t + 1) * d_out];
                for (o, out) in out_row.iter_mut().enumerate() {
                    let mut acc = bv[o];
                    for u in 0..window {
                        let s = t + u;
                        if s < pad || s - pad >= l {
                            continue;
                        }
                        let s = s - pad;
                        let x_row = &sv[s * d_in..(s + 1) * d_in];
                        let f_row = &fv[(o * window + u) * d_in..(o * window + u + 1) * d_in];
                        for (x, f) in x_row.iter().zip(f_row.iter()) {
                            acc = acc + *x * *f;
                        }
                    }
                    *out = acc;
                }
            }
        }
        let (st, ft, bt) = (self.clone(), filters.clone(), bias.clone());
        Ok(Tensor::from_op(
            vec![l, d_out],
            values,
            &[self, filters, bias],
            move || {
                Box::new(move |g| {
                    if st.requires_grad() {
                        let contrib: Vec<T> = {
                            let fv = ft.values();
                            let mut dx = vec![T::zero(); l * d_in];
                            for t in 0..l {
                                for o in 0..d_out {
                                    let go = g[t * d_out + o];
                                    for u in 0..window {
                                        let s = t + u;
                                        if s < pad || s - pad >= l {
                                            continue;
                                        }
                                        let s = s - pad;
                                        let f_row = &fv
                                            [(o * window + u) * d_in..(o * window + u + 1) * d_in];
                                        let dx_row = &mut dx[s * d_in..(s + 1) * d_in];
                                        for (d, f) in dx_row.iter_mut().zip(f_row.iter()) {
                                            *d = *d + go * *f;
                                        }
                                    }
                                }
                            }
                            dx
                        };
                        st.accumulate_grad(&contrib);
                    }
                    if ft.requires_grad() {
                        let contrib: Vec<T> = {
                            let sv = st.values();
                            let mut df = vec![T::zero(); d_out * window * d_in];
                            for t in 0..l {
                                for o in 0..d_out {
                                    let go = g[t * d_out + o];
                                    for u in 0..window {
                                        let s = t + u;
                                        if s < pad || s - pad >= l {
                                            continue;
                                        }
                                        let s = s - pad;
                                        let x_row = &sv[s * d_in..(s + 1) * d_in];
                                        let df_row = &mut df
                                            [(o * window + u) * d_in..(o * window + u + 1) * d_in];
                                        for (d, x) in df_row.iter_mut().zip(x_row.iter()) {
                                            *d = *d + go * *x;
                                        }
                                    }
                                }
                            }
                            df
                        };
                        ft.accumulate_grad(&contrib);
                    }
                    if bt.requires_grad() {
                        let mut db = vec![T::zero(); d_out];
                        for t in 0..l {
                            for (o, d) in db.iter_mut().enumerate() {
                                *d = *d + g[t * d_out + o];
                            }
                        }
                        bt.accumulate_grad(&db);
                    }
                })
            },
        ))
    }

    /// Unpadded 1-D cross-correlation: `seq: [L, d_in]`,
    /// `filters: [d_out, window, d_in]` → `[L - window + 1, d_out]`.
    /// Any window length ≥ 1 is allowed (multi-window encoders use even
    /// widths); requires `L ≥ window`.
    pub fn conv1d_valid(&self, filters: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
        let (l, d_in) = rows_cols("conv1d_valid", self)?;
        let (d_out, window, f_in) = match filters.shape() {
            [o, w, i] => (*o, *w, *i),
            s => {
                return Err(Error::shape(
                    "conv1d_valid",
                    format!("filters must be [out, window, in], got {s:?}"),
                ))
            }
        };
        if window == 0 || window > l {
            return Err(Error::shape(
                "conv1d_valid",
                format!("window {window} vs sequence length {l}"),
            ));
        }
        if f_in != d_in {
            return Err(Error::shape(
                "conv1d_valid",
                format!("input dim {d_in} vs filter in-dim {f_in}"),
            ));
        }
        if bias.shape() != [d_out] {
            return Err(Error::shape(
                "conv1d_valid",
                format!("bias shape {:?} vs out dim {d_out}", bias.shape()),
            ));
        }
        let out_len = l - window + 1;
        let mut values = vec![T::zero(); out_len * d_out];
        {
            let sv = self.values();
            let fv = filters.values();
            let bv = bias.values();
            for t in 0..out_len {
                let out_row = &mut values[t * d_out..(t + 1) * d_out];
                for (o, out) in out_row.iter_mut().enumerate() {
                    let mut acc = bv[o];
                    for u in 0..window {
                        let x_row = &sv[(t + u) * d_in..(t + u + 1) * d_in];
                        let f_row = &fv[(o * window + u) * d_in..(o * window + u + 1) * d_in];
                        for (x, f) in x_row.iter().zip(f_row.iter()) {
                            acc = acc + *x * *f;
                        }
                    }
                    *out = acc;
                }
            }
        }
        let (st, ft, bt) = (self.clone(), filters.clone(), bias.clone());
        Ok(Tensor::from_op(
            vec![out_len, d_out],
            values,
            &[self, filters, bias],
            move || {
                Box::new(move |g| {
                    if st.requires_grad() {
                        let contrib: Vec<T> = {
                            let fv = ft.values();
                            let mut dx = vec![T::zero(); l * d_in];
                            for t in 0..out_len {
                                for o in 0..d_out {
                                    let go = g[t * d_out + o];
                                    for u in 0..window {
                                        let f_row = &fv
                                            [(o * window + u) * d_in..(o * window + u + 1) * d_in];
                                        let dx_row =
                                            &mut dx[(t + u) * d_in..(t + u + 1) * d_in];
                                        for (d, f) in dx_row.iter_mut().zip(f_row.iter()) {
                                            *d = *d + go * *f;
                                        }
                                    }
                                }
                            }
                            dx
                        };
                        st.accumulate_grad(&contrib);
                    }
                    if ft.requires_grad() {
                        let contrib: Vec<T> = {
                            let sv = st.values();
                            let mut df = vec![T::zero(); d_out * window * d_in];
                            for t in 0..out_len {
                                for o in 0..d_out {
                                    let go = g[t * d_out + o];
                                    for u in 0..window {
                                        let x_row = &sv[(t + u) * d_in..(t + u + 1) * d_in];
                                        let df_row = &mut df
                                            [(o * window + u) * d_in..(o * window + u + 1) * d_in];
                                        for (d, x) in df_row.iter_mut().zip(x_row.iter()) {
                                            *d = *d + go * *x;
                                        }
                                    }
                                }
                            }
                            df
                        };
                        ft.accumulate_grad(&contrib);
                    }
                    if bt.requires_grad() {
                        let mut db = vec![T::zero(); d_out];
                        for t in 0..out_len {
                            for (o, d) in db.iter_mut().enumerate() {
                                *d = *d + g[t * d_out + o];
                            }
                        }
                        bt.accumulate_grad(&db);
                    }
                })
            },
        ))
    }

    /// Gather `ids` as rows of `table: [V, d]`. Backward scatter-adds into
    /// the gathered rows only.
    pub fn gather_rows(table: &Tensor<T>, ids: &[usize]) -> Result<Tensor<T>> {
        let (v, d) = rows_cols("gather_rows", table)?;
        for &id in ids {
            if id >= v {
                return Err(Error::Index(format!("row {id} of {v}-row table")));
            }
        }
        let mut values = Vec::with_capacity(ids.len() * d);
        {
            let tv = table.values();
            for &id in ids {
                values.extend_from_slice(&tv[id * d..(id + 1) * d]);
            }
        }
        let t = table.clone();
        let ids_owned = ids.to_vec();
        Ok(Tensor::from_op(
            vec![ids.len(), d],
            values,
            &[table],
            move || {
                Box::new(move |g| {
                    t.with_grad_mut(|buf| {
                        for (i, &id) in ids_owned.iter().enumerate() {
                            let g_row = &g[i * d..(i + 1) * d];
                            let b_row = &mut buf[id * d..(id + 1) * d];
                            for (b, gj) in b_row.iter_mut().zip(g_row.iter()) {
                                *b = *b + *gj;
                            }
                        }
                    });
                })
            },
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf(shape: Vec<usize>, v: Vec<f64>) -> Tensor<f64> {
        Tensor::leaf(shape, v).unwrap()
    }

    #[test]
    fn linear_identity_case() {
        let x = leaf(vec![2], vec![1.0, 0.0]);
        let w = leaf(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]);
        let y = x.linear(&w, None).unwrap();
        assert_eq!(y.to_vec(), vec![1.0, 0.0]);
    }

    #[test]
    fn linear_direct_arithmetic() {
        let x = leaf(vec![2], vec![1.0, 2.0]);
        let w = leaf(vec![2, 2], vec![1.0, 1.0, 1.0, -1.0]);
        let b = leaf(vec![2], vec![0.5, 0.5]);
        let y = x.linear(&w, Some(&b)).unwrap();
        assert_eq!(y.to_vec(), vec![3.5, -0.5]);
    }

    #[test]
    fn linear_shape_mismatch_is_error() {
        let x = leaf(vec![3], vec![0.0; 3]);
        let w = leaf(vec![2, 2], vec![0.0; 4]);
        assert!(matches!(x.linear(&w, None), Err(crate::error::Error::Shape { .. })));
    }

    #[test]
    fn softmax_symmetry_and_closed_form() {
        let x = leaf(vec![2], vec![0.0, 0.0]);
        let y = x.softmax(None).unwrap();
        assert_eq!(y.to_vec(), vec![0.5, 0.5]);

        let x = leaf(vec![2], vec![2.0f64.ln(), 0.0]);
        let y = x.softmax(None).unwrap();
        let v = y.to_vec();
        assert!((v[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((v[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_masked_positions_are_exactly_zero() {
        let x = leaf(vec![3], vec![5.0, 1.0, 3.0]);
        let y = x.softmax(Some(&[true, false, true])).unwrap();
        let v = y.to_vec();
        assert_eq!(v[1], 0.0);
        assert!((v[0] + v[2] - 1.0).abs() < 1e-12);

        // Masked positions also get exactly zero gradient.
        y.element(0).unwrap().backward().unwrap();
        assert_eq!(x.grad().unwrap()[1], 0.0);
    }

    #[test]
    fn softmax_fully_masked_row_errors() {
        let x = leaf(vec![2], vec![1.0, 2.0]);
        assert!(matches!(
            x.softmax(Some(&[false, false])),
            Err(crate::error::Error::DegenerateInput { .. })
        ));
    }

    #[test]
    fn conv1d_identity_kernel() {
        let x = leaf(vec![3, 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        // window=1 identity filters: out[o] = in[o]
        let f = leaf(vec![2, 1, 2], vec![1.0, 0.0, 0.0, 1.0]);
        let b = leaf(vec![2], vec![0.0, 0.0]);
        let y = x.conv1d_same(&f, &b).unwrap();
        assert_eq!(y.to_vec(), x.to_vec());
    }

    #[test]
    fn conv1d_averaging_kernel_edge_attenuation() {
        // Constant input, window-3 averaging kernel: interior rows stay
        // constant, border rows lose the out-of-range third of the window.
        let x = leaf(vec![4, 1], vec![3.0; 4]);
        let third = 1.0 / 3.0;
        let f = leaf(vec![1, 3, 1], vec![third, third, third]);
        let b = leaf(vec![1], vec![0.0]);
        let y = x.conv1d_same(&f, &b).unwrap();
        let v = y.to_vec();
        assert!((v[1] - 3.0).abs() < 1e-12);
        assert!((v[2] - 3.0).abs() < 1e-12);
        assert!((v[0] - 2.0).abs() < 1e-12);
        assert!((v[3] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn conv1d_even_window_is_config_error() {
        let x = leaf(vec![3, 1], vec![0.0; 3]);
        let f = leaf(vec![1, 2, 1], vec![0.0; 2]);
        let b = leaf(vec![1], vec![0.0]);
        assert!(matches!(
            x.conv1d_same(&f, &b),
            Err(crate::error::Error::Config(_))
        ));
    }

    #[test]
    fn conv1d_matches_naive_triple_loop() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (l, d_in, d_out, w) = (6, 3, 4, 3);
        let rand_vec = |rng: &mut ChaCha8Rng, n: usize| -> Vec<f64> {
            (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
        };
        let x = leaf(vec![l, d_in], rand_vec(&mut rng, l * d_in));
        let f = leaf(vec![d_out, w, d_in], rand_vec(&mut rng, d_out * w * d_in));
        let b = leaf(vec![d_out], rand_vec(&mut rng, d_out));
        let y = x.conv1d_same(&f, &b).unwrap().to_vec();

        let (xv, fv, bv) = (x.to_vec(), f.to_vec(), b.to_vec());
        let pad = w / 2;
        for t in 0..l {
            for o in 0..d_out {
                let mut expect = bv[o];
                for u in 0..w {
                    let s = t as isize + u as isize - pad as isize;
                    if s < 0 || s >= l as isize {
                        continue;
                    }
                    for i in 0..d_in {
                        expect += xv[s as usize * d_in + i] * fv[(o * w + u) * d_in + i];
                    }
                }
                assert!((y[t * d_out + o] - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn gather_rows_scatter_gradient() {
        let table = leaf(vec![4, 2], vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
        let g = Tensor::gather_rows(&table, &[2, 0, 2]).unwrap();
        assert_eq!(g.to_vec(), vec![4.0, 5.0, 0.0, 1.0, 4.0, 5.0]);
        let pooled = g.mean_rows(3).unwrap();
        let s = pooled.element(0).unwrap();
        s.backward().unwrap();
        let grad = table.grad().unwrap();
        // row 2 gathered twice, row 0 once, rows 1 and 3 untouched
        assert!((grad[2 * 2] - 2.0 / 3.0).abs() < 1e-12);
        assert!((grad[0] - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(grad[1 * 2], 0.0);
        assert_eq!(grad[3 * 2], 0.0);
    }

    #[test]
    fn gather_rows_out_of_bounds() {
        let table = leaf(vec![2, 2], vec![0.0; 4]);
        assert!(matches!(
            Tensor::gather_rows(&table, &[2]),
            Err(crate::error::Error::Index(_))
        ));
    }

    #[test]
    fn mean_rows_ignores_padding_rows() {
        let x = leaf(vec![3, 2], vec![2.0, 0.0, 0.0, 2.0, 99.0, 99.0]);
        let m = x.mean_rows(2).unwrap();
        assert_eq!(m.to_vec(), vec![1.0, 1.0]);
        m.element(0).unwrap().backward().unwrap();
        let g = x.grad().unwrap();
        assert_eq!(&g[4..], &[0.0, 0.0]); // padding row gets no gradient
    }

    #[test]
    fn max_rows_routes_gradient_to_argmax() {
        let x = leaf(vec![3, 2], vec![1.0, 5.0, 4.0, 2.0, -1.0, 9.0]);
        let m = x.max_rows(2).unwrap();
        assert_eq!(m.to_vec(), vec![4.0, 5.0]);
        let s = Tensor::add_n(&[m.element(0).unwrap(), m.element(1).unwrap()]).unwrap();
        s.backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![0.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn dot_and_vecmat() {
        let a = leaf(vec![2], vec![1.0, 0.0]);
        let b = leaf(vec![2], vec![0.0, 1.0]);
        assert_eq!(a.dot(&b).unwrap().item(), 0.0);
        let c = leaf(vec![2], vec![1.0, 1.0]);
        assert_eq!(c.dot(&c).unwrap().item(), 2.0);

        let w = leaf(vec![2], vec![0.5, 0.5]);
        let m = leaf(vec![2, 2], vec![2.0, 0.0, 0.0, 2.0]);
        assert_eq!(w.vecmat(&m).unwrap().to_vec(), vec![1.0, 1.0]);
    }

    #[test]
    fn logsumexp_matches_direct_formula() {
        let x = leaf(vec![3], vec![0.1, -0.4, 2.0]);
        let lse = x.logsumexp().unwrap().item();
        let direct = (0.1f64.exp() + (-0.4f64).exp() + 2.0f64.exp()).ln();
        assert!((lse - direct).abs() < 1e-12);
    }

    #[test]
    fn dropout_rate_one_half_masks_and_rescales() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = leaf(vec![100], vec![1.0; 100]);
        let y = x.dropout(0.5, &mut rng);
        let v = y.to_vec();
        assert!(v.iter().all(|&e| e == 0.0 || (e - 2.0).abs() < 1e-12));
        assert!(v.iter().any(|&e| e == 0.0));
        assert!(v.iter().any(|&e| e != 0.0));
    }
}
