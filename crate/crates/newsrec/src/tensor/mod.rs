//! Dense tensors with reverse-mode automatic differentiation.
//!
//! Small by design: only the operations the news/user encoders and losses
//! need. A forward op records its parents and a backward closure; calling
//! [`Tensor::backward`] on a scalar loss walks the graph in reverse
//! topological order and accumulates gradients into every leaf that was
//! created with `requires_grad`.
//!
//! Tensors are immutable once produced by an op. Leaf values may be
//! rewritten in place (`set_values`) by the optimizer or by the
//! finite-difference harness between graph constructions.

mod ops;

pub mod gradcheck;
pub mod nn;

use std::cell::{Ref, RefCell};
use std::collections::HashSet;
use std::fmt;
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use num_traits::Float;

use crate::error::{Error, Result};

/// Floating-point element type of a tensor. Implemented for `f32`
/// (training mode) and `f64` (gradient-check mode).
pub trait Scalar:
    Float + fmt::Debug + fmt::Display + Default + Send + Sync + 'static + std::iter::Sum<Self>
{
    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn as_f64(self) -> f64 {
        self
    }
}

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

thread_local! {
    static NO_GRAD: std::cell::Cell<bool> = const { std::cell::Cell::new(false) };
}

/// Run `f` without recording any backward graph: every op inside behaves
/// as if its inputs were constants. Evaluation paths use this to skip
/// gradient bookkeeping entirely.
pub fn no_grad<R>(f: impl FnOnce() -> R) -> R {
    let previous = NO_GRAD.with(|c| c.replace(true));
    let result = f();
    NO_GRAD.with(|c| c.set(previous));
    result
}

type BackwardFn<T> = Box<dyn Fn(&[T])>;

struct Inner<T: Scalar> {
    id: u64,
    shape: Vec<usize>,
    values: RefCell<Vec<T>>,
    requires_grad: bool,
    grad: RefCell<Option<Vec<T>>>,
    /// Gradient-requiring parents, kept for the reverse topological walk.
    parents: Vec<Tensor<T>>,
    backward_fn: Option<BackwardFn<T>>,
}

/// Dense tensor handle. Cloning is cheap (reference-counted); all clones
/// observe the same values and gradient.
#[derive(Clone)]
pub struct Tensor<T: Scalar>(Rc<Inner<T>>);

impl<T: Scalar> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.0.shape)
            .field("requires_grad", &self.0.requires_grad)
            .field("values", &self.0.values.borrow())
            .finish()
    }
}

impl<T: Scalar> Tensor<T> {
    fn make(
        shape: Vec<usize>,
        values: Vec<T>,
        requires_grad: bool,
        parents: Vec<Tensor<T>>,
        backward_fn: Option<BackwardFn<T>>,
    ) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), values.len());
        Tensor(Rc::new(Inner {
            id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
            shape,
            values: RefCell::new(values),
            requires_grad,
            grad: RefCell::new(None),
            parents,
            backward_fn,
        }))
    }

    /// Constant (non-differentiable) tensor.
    pub fn constant(shape: Vec<usize>, values: Vec<T>) -> Result<Self> {
        if shape.iter().product::<usize>() != values.len() {
            return Err(Error::shape(
                "constant",
                format!("shape {:?} implies {} values, got {}", shape, shape.iter().product::<usize>(), values.len()),
            ));
        }
        Ok(Self::make(shape, values, false, Vec::new(), None))
    }

    /// Trainable leaf tensor: receives gradients during `backward`.
    pub fn leaf(shape: Vec<usize>, values: Vec<T>) -> Result<Self> {
        if shape.iter().product::<usize>() != values.len() {
            return Err(Error::shape(
                "leaf",
                format!("shape {:?} implies {} values, got {}", shape, shape.iter().product::<usize>(), values.len()),
            ));
        }
        Ok(Self::make(shape, values, true, Vec::new(), None))
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self::make(shape, vec![T::zero(); n], false, Vec::new(), None)
    }

    pub fn scalar(v: T) -> Self {
        Self::make(vec![1], vec![v], false, Vec::new(), None)
    }

    pub fn from_f64_slice(shape: Vec<usize>, values: &[f64]) -> Result<Self> {
        Self::constant(shape, values.iter().map(|&v| T::from_f64(v)).collect())
    }

    /// Graph-producing constructor used by the ops module. The backward
    /// closure is only built when at least one parent tracks gradients;
    /// otherwise the result is a plain constant and the inputs can be freed.
    pub(crate) fn from_op<F>(
        shape: Vec<usize>,
        values: Vec<T>,
        parents: &[&Tensor<T>],
        make_backward: F,
    ) -> Self
    where
        F: FnOnce() -> BackwardFn<T>,
    {
        let requires =
            !NO_GRAD.with(|c| c.get()) && parents.iter().any(|p| p.0.requires_grad);
        if requires {
            let kept: Vec<Tensor<T>> = parents
                .iter()
                .filter(|p| p.0.requires_grad)
                .map(|p| (*p).clone())
                .collect();
            Self::make(shape, values, true, kept, Some(make_backward()))
        } else {
            Self::make(shape, values, false, Vec::new(), None)
        }
    }

    pub fn id(&self) -> u64 {
        self.0.id
    }

    pub fn shape(&self) -> &[usize] {
        &self.0.shape
    }

    pub fn len(&self) -> usize {
        self.0.values.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    pub fn values(&self) -> Ref<'_, Vec<T>> {
        self.0.values.borrow()
    }

    pub fn to_vec(&self) -> Vec<T> {
        self.0.values.borrow().clone()
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> T {
        let v = self.0.values.borrow();
        debug_assert_eq!(v.len(), 1, "item() on non-scalar tensor");
        v[0]
    }

    pub fn is_finite(&self) -> bool {
        self.0.values.borrow().iter().all(|v| v.is_finite())
    }

    /// Overwrite the values of a leaf in place. Only the optimizer and the
    /// finite-difference harness call this, between graph constructions.
    pub fn set_values(&self, values: &[T]) -> Result<()> {
        if values.len() != self.len() {
            return Err(Error::shape(
                "set_values",
                format!("expected {} values, got {}", self.len(), values.len()),
            ));
        }
        self.0.values.borrow_mut().copy_from_slice(values);
        Ok(())
    }

    /// Apply `f` to the mutable value buffer of a leaf.
    pub fn update_values(&self, f: impl FnOnce(&mut [T])) {
        f(self.0.values.borrow_mut().as_mut_slice());
    }

    pub fn grad(&self) -> Option<Vec<T>> {
        self.0.grad.borrow().clone()
    }

    pub fn zero_grad(&self) {
        *self.0.grad.borrow_mut() = None;
    }

    /// Add `contrib` into this tensor's gradient accumulator.
    pub(crate) fn accumulate_grad(&self, contrib: &[T]) {
        debug_assert_eq!(contrib.len(), self.len());
        let mut g = self.0.grad.borrow_mut();
        match g.as_mut() {
            Some(v) => {
                for (a, b) in v.iter_mut().zip(contrib) {
                    *a = *a + *b;
                }
            }
            None => *g = Some(contrib.to_vec()),
        }
    }

    /// Run `f` on the zero-initialized gradient buffer; used by ops whose
    /// backward writes into sub-ranges directly.
    pub(crate) fn with_grad_mut(&self, f: impl FnOnce(&mut [T])) {
        let mut g = self.0.grad.borrow_mut();
        if g.is_none() {
            *g = Some(vec![T::zero(); self.len()]);
        }
        f(g.as_mut().unwrap());
    }

    /// Reverse-mode sweep from a scalar output. Gradients accumulate into
    /// every reachable gradient-tracking tensor; leaves keep theirs until
    /// `zero_grad`.
    pub fn backward(&self) -> Result<()> {
        if self.len() != 1 {
            return Err(Error::shape(
                "backward",
                format!("loss must be scalar, got shape {:?}", self.shape()),
            ));
        }
        if !self.0.requires_grad {
            return Ok(()); // nothing reachable tracks gradients
        }
        let order = self.topo_order();
        self.accumulate_grad(&[T::one()]);
        for node in order.iter().rev() {
            let Some(backward) = &node.0.backward_fn else {
                continue;
            };
            let grad = node.0.grad.borrow().clone();
            if let Some(grad) = grad {
                backward(&grad);
            }
        }
        // Intermediate gradients are dropped with the graph; only leaves
        // (no backward_fn, requires_grad) retain theirs for the optimizer.
        Ok(())
    }

    /// Post-order over gradient-tracking nodes (parents before children).
    fn topo_order(&self) -> Vec<Tensor<T>> {
        let mut order = Vec::new();
        let mut visited: HashSet<u64> = HashSet::new();
        visited.insert(self.id());
        let mut stack: Vec<(Tensor<T>, usize)> = vec![(self.clone(), 0)];
        while let Some((node, child)) = stack.pop() {
            if child < node.0.parents.len() {
                stack.push((node.clone(), child + 1));
                let parent = node.0.parents[child].clone();
                if visited.insert(parent.id()) {
                    stack.push((parent, 0));
                }
            } else {
                order.push(node);
            }
        }
        order
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leaf_rejects_mismatched_shape() {
        assert!(Tensor::<f64>::leaf(vec![2, 2], vec![1.0; 3]).is_err());
    }

    #[test]
    fn backward_requires_scalar() {
        let x = Tensor::<f64>::leaf(vec![2], vec![1.0, 2.0]).unwrap();
        assert!(matches!(x.backward(), Err(Error::Shape { .. })));
    }

    #[test]
    fn shared_node_accumulates_both_paths() {
        // y = x*x + x  =>  dy/dx = 2x + 1
        let x = Tensor::<f64>::leaf(vec![1], vec![3.0]).unwrap();
        let y = x.mul(&x).unwrap().add(&x).unwrap();
        y.backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![7.0]);
    }

    #[test]
    fn constant_graph_skips_backward_bookkeeping() {
        let a = Tensor::<f64>::constant(vec![2], vec![1.0, 2.0]).unwrap();
        let b = a.relu();
        assert!(!b.requires_grad());
        assert!(b.0.parents.is_empty());
    }

    #[test]
    fn grads_accumulate_until_cleared() {
        let x = Tensor::<f64>::leaf(vec![1], vec![2.0]).unwrap();
        for _ in 0..2 {
            let y = x.mul(&x).unwrap();
            y.backward().unwrap();
        }
        assert_eq!(x.grad().unwrap(), vec![8.0]); // 4.0 twice
        x.zero_grad();
        assert!(x.grad().is_none());
    }
}
