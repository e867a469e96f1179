//! Named trainable parameters and per-model parameter registries.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Initialization scheme for a freshly created parameter.
#[derive(Debug, Clone, Copy)]
pub enum Init {
    Zeros,
    /// Uniform in `[lo, hi)`; embeddings use `(-0.1, 0.1)`.
    Uniform(f64, f64),
    /// Xavier/Glorot uniform over the fan-in/fan-out of the shape.
    Xavier,
}

fn init_values<T: Scalar>(shape: &[usize], init: Init, rng: &mut ChaCha8Rng) -> Vec<T> {
    let n: usize = shape.iter().product();
    match init {
        Init::Zeros => vec![T::zero(); n],
        Init::Uniform(lo, hi) => (0..n)
            .map(|_| T::from_f64(rng.random_range(lo..hi)))
            .collect(),
        Init::Xavier => {
            // [out, in] for matrices; [out, window, in] for conv filters.
            let (fan_out, fan_in) = match shape {
                [o, i] => (*o, *i),
                [o, w, i] => (*o * *w, *w * *i),
                _ => {
                    let f = n.max(1);
                    (f, f)
                }
            };
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            (0..n)
                .map(|_| T::from_f64(rng.random_range(-limit..limit)))
                .collect()
        }
    }
}

/// A named leaf tensor. Names are hierarchical (`"ue.gru.w_z"`) and the
/// leading segment attributes the parameter to a model component for
/// accounting.
#[derive(Clone)]
pub struct Parameter<T: Scalar> {
    name: String,
    tensor: Tensor<T>,
    /// Rows of a table parameter whose gradient is discarded before each
    /// optimizer step (e.g. the padding row of an embedding table).
    frozen_rows: Vec<usize>,
}

impl<T: Scalar> Parameter<T> {
    pub fn new(name: impl Into<String>, tensor: Tensor<T>) -> Self {
        Parameter {
            name: name.into(),
            tensor,
            frozen_rows: Vec::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn tensor(&self) -> &Tensor<T> {
        &self.tensor
    }

    pub fn shape(&self) -> &[usize] {
        self.tensor.shape()
    }

    pub fn numel(&self) -> usize {
        self.tensor.len()
    }

    pub fn trainable(&self) -> bool {
        self.tensor.requires_grad()
    }

    pub fn frozen_rows(&self) -> &[usize] {
        &self.frozen_rows
    }

    /// Zero the gradient of every frozen row; called before optimizer steps.
    pub fn clear_frozen_row_grads(&self) {
        if self.frozen_rows.is_empty() {
            return;
        }
        let cols = match self.tensor.shape() {
            [_, c] => *c,
            _ => return,
        };
        for &r in &self.frozen_rows {
            self.tensor.with_grad_mut(|g| {
                for v in &mut g[r * cols..(r + 1) * cols] {
                    *v = T::zero();
                }
            });
        }
    }
}

/// Ordered registry of a model's parameters with unique names.
#[derive(Default)]
pub struct ParamSet<T: Scalar> {
    params: Vec<Parameter<T>>,
    by_name: HashMap<String, usize>,
}

impl<T: Scalar> ParamSet<T> {
    pub fn new() -> Self {
        ParamSet {
            params: Vec::new(),
            by_name: HashMap::new(),
        }
    }

    /// Create, register, and return a trainable parameter.
    pub fn create(
        &mut self,
        name: impl Into<String>,
        shape: Vec<usize>,
        init: Init,
        rng: &mut ChaCha8Rng,
    ) -> Result<Parameter<T>> {
        let values = init_values(&shape, init, rng);
        let tensor = Tensor::leaf(shape, values)?;
        self.register(Parameter::new(name, tensor))
    }

    /// Register a trainable table from explicit row values, optionally with
    /// frozen rows (their gradients are discarded each step).
    pub fn create_table(
        &mut self,
        name: impl Into<String>,
        rows: &[Vec<f64>],
        frozen_rows: Vec<usize>,
    ) -> Result<Parameter<T>> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut values = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::shape("create_table", "ragged rows"));
            }
            values.extend(row.iter().map(|&v| T::from_f64(v)));
        }
        let tensor = Tensor::leaf(vec![rows.len(), cols], values)?;
        let mut p = Parameter::new(name, tensor);
        p.frozen_rows = frozen_rows;
        self.register(p)
    }

    /// Register a non-trainable table (no gradients, excluded from counts).
    pub fn create_frozen_table(
        &mut self,
        name: impl Into<String>,
        rows: &[Vec<f64>],
    ) -> Result<Parameter<T>> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut values = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::shape("create_frozen_table", "ragged rows"));
            }
            values.extend(row.iter().map(|&v| T::from_f64(v)));
        }
        let tensor = Tensor::constant(vec![rows.len(), cols], values)?;
        self.register(Parameter::new(name, tensor))
    }

    pub fn register(&mut self, param: Parameter<T>) -> Result<Parameter<T>> {
        if self.by_name.contains_key(param.name()) {
            return Err(Error::Config(format!(
                "duplicate parameter name: {}",
                param.name()
            )));
        }
        self.by_name
            .insert(param.name().to_string(), self.params.len());
        self.params.push(param.clone());
        Ok(param)
    }

    pub fn get(&self, name: &str) -> Option<&Parameter<T>> {
        self.by_name.get(name).map(|&i| &self.params[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter<T>> {
        self.params.iter()
    }

    /// Trainable parameters only, in registration order.
    pub fn trainable(&self) -> impl Iterator<Item = &Parameter<T>> {
        self.params.iter().filter(|p| p.trainable())
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn zero_grads(&self) {
        for p in self.trainable() {
            p.tensor().zero_grad();
        }
    }
}
