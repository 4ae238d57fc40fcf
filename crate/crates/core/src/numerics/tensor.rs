use std::cell::Cell;
use std::cmp::Reverse;
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use super::float::Float;
use crate::error::{Error, Result};

static NEXT_ID: AtomicU64 = AtomicU64::new(0);

thread_local! {
    static GRAD_ENABLED: Cell<bool> = const { Cell::new(true) };
}

/// Runs `f` without recording a differentiation tape on this thread.
pub fn no_grad<R>(f: impl FnOnce() -> R) -> R {
    struct Restore(bool);
    impl Drop for Restore {
        fn drop(&mut self) {
            GRAD_ENABLED.with(|g| g.set(self.0));
        }
    }
    let _restore = Restore(GRAD_ENABLED.with(|g| g.replace(false)));
    f()
}

pub fn is_grad_enabled() -> bool {
    GRAD_ENABLED.with(|g| g.get())
}

/// Vector-Jacobian product of one recorded op: `(grad_out, out_data, parents)`
/// to one gradient buffer per parent.
pub(crate) type GradFn<F> = Box<dyn Fn(&[F], &[F], &[Tensor<F>]) -> Vec<Vec<F>> + Send + Sync>;

struct Node<F: Float> {
    id: u64,
    shape: Vec<usize>,
    data: Vec<F>,
    requires_grad: bool,
    grad: Mutex<Option<Vec<F>>>,
    parents: Vec<Tensor<F>>,
    grad_fn: Option<GradFn<F>>,
}

/// Dense row-major tensor with optional reverse-mode gradient tracking.
///
/// Values are immutable once built; cloning a `Tensor` clones a handle. Ops on
/// tensors that require grad record their inputs, and the recorded graph lives
/// as long as some handle to its output does.
pub struct Tensor<F: Float = f32>(Arc<Node<F>>);

impl<F: Float> Clone for Tensor<F> {
    fn clone(&self) -> Self {
        Tensor(Arc::clone(&self.0))
    }
}

impl<F: Float> fmt::Debug for Tensor<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const SHOWN: usize = 8;
        let data = &self.0.data;
        write!(f, "Tensor{:?}", self.0.shape)?;
        if data.len() <= SHOWN {
            write!(f, " {:?}", data)
        } else {
            write!(f, " {:?}...", &data[..SHOWN])
        }
    }
}

pub(crate) fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl<F: Float> Tensor<F> {
    fn build(
        data: Vec<F>,
        shape: Vec<usize>,
        requires_grad: bool,
        parents: Vec<Tensor<F>>,
        grad_fn: Option<GradFn<F>>,
    ) -> Self {
        debug_assert_eq!(numel(&shape), data.len());
        Tensor(Arc::new(Node {
            id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
            shape,
            data,
            requires_grad,
            grad: Mutex::new(None),
            parents,
            grad_fn,
        }))
    }

    pub fn from_vec(data: Vec<F>, shape: &[usize]) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::shape("from_vec", format!("zero extent in {shape:?}")));
        }
        if numel(shape) != data.len() {
            return Err(Error::shape(
                "from_vec",
                format!("{} values do not fill shape {shape:?}", data.len()),
            ));
        }
        Ok(Self::build(data, shape.to_vec(), false, Vec::new(), None))
    }

    /// Builds a tensor from `f64` values, converting to the element type.
    pub fn from_f64(data: &[f64], shape: &[usize]) -> Result<Self> {
        Self::from_vec(data.iter().map(|&v| F::of(v)).collect(), shape)
    }

    pub fn full(shape: &[usize], value: F) -> Self {
        assert!(shape.iter().all(|&d| d > 0), "zero extent in {shape:?}");
        Self::build(vec![value; numel(shape)], shape.to_vec(), false, Vec::new(), None)
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, F::zero())
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::full(shape, F::one())
    }

    pub fn scalar(value: F) -> Self {
        Self::build(vec![value], Vec::new(), false, Vec::new(), None)
    }

    /// A leaf that tracks gradients.
    pub fn param(data: Vec<F>, shape: &[usize]) -> Result<Self> {
        Ok(Self::from_vec(data, shape)?.requires_grad())
    }

    /// Returns a leaf copy of this tensor with gradient tracking on.
    pub fn requires_grad(&self) -> Self {
        Self::build(self.0.data.clone(), self.0.shape.clone(), true, Vec::new(), None)
    }

    /// Returns a leaf copy without gradient tracking.
    pub fn detach(&self) -> Self {
        Self::build(self.0.data.clone(), self.0.shape.clone(), false, Vec::new(), None)
    }

    /// Result of an op. Records `grad_fn` only when some parent requires grad
    /// and recording is enabled on this thread.
    pub(crate) fn from_op(
        data: Vec<F>,
        shape: Vec<usize>,
        parents: Vec<Tensor<F>>,
        grad_fn: GradFn<F>,
    ) -> Self {
        if is_grad_enabled() && parents.iter().any(|p| p.0.requires_grad) {
            Self::build(data, shape, true, parents, Some(grad_fn))
        } else {
            Self::build(data, shape, false, Vec::new(), None)
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.0.shape
    }

    pub fn rank(&self) -> usize {
        self.0.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.0.data.len()
    }

    pub fn data(&self) -> &[F] {
        &self.0.data
    }

    pub fn to_vec(&self) -> Vec<F> {
        self.0.data.clone()
    }

    pub fn tracks_grad(&self) -> bool {
        self.0.requires_grad
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> Result<F> {
        match self.0.data.as_slice() {
            [v] => Ok(*v),
            _ => Err(Error::shape(
                "item",
                format!("expected one element, shape {:?}", self.0.shape),
            )),
        }
    }

    pub fn grad(&self) -> Option<Vec<F>> {
        self.0.grad.lock().unwrap().clone()
    }

    pub fn zero_grad(&self) {
        *self.0.grad.lock().unwrap() = None;
    }

    /// Accumulates d(self)/d(leaf) into every reachable tensor that requires
    /// grad. Calling it again (or on another loss sharing leaves) adds to the
    /// stored gradients.
    pub fn backward(&self) -> Result<()> {
        if self.numel() != 1 {
            return Err(Error::NonScalarLoss(self.0.shape.clone()));
        }
        if !self.0.requires_grad {
            return Err(Error::NoGraph);
        }

        // Parents are always created before their children, so descending
        // creation id is a valid reverse topological order.
        let mut seen = HashSet::new();
        let mut order = Vec::new();
        let mut stack = vec![self.clone()];
        seen.insert(self.0.id);
        while let Some(t) = stack.pop() {
            for p in &t.0.parents {
                if p.0.requires_grad && seen.insert(p.0.id) {
                    stack.push(p.clone());
                }
            }
            order.push(t);
        }
        order.sort_by_key(|t| Reverse(t.0.id));

        let mut pending: HashMap<u64, Vec<F>> = HashMap::new();
        pending.insert(self.0.id, vec![F::one()]);
        for t in order {
            let Some(g) = pending.remove(&t.0.id) else {
                continue;
            };
            if let Some(grad_fn) = &t.0.grad_fn {
                let parent_grads = grad_fn(&g, &t.0.data, &t.0.parents);
                debug_assert_eq!(parent_grads.len(), t.0.parents.len());
                for (p, pg) in t.0.parents.iter().zip(parent_grads) {
                    if !p.0.requires_grad {
                        continue;
                    }
                    debug_assert_eq!(pg.len(), p.numel());
                    match pending.get_mut(&p.0.id) {
                        Some(acc) => acc.iter_mut().zip(&pg).for_each(|(a, b)| *a = *a + *b),
                        None => {
                            pending.insert(p.0.id, pg);
                        }
                    }
                }
            }
            let mut slot = t.0.grad.lock().unwrap();
            match slot.as_mut() {
                Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a = *a + *b),
                None => *slot = Some(g),
            }
        }
        Ok(())
    }
}
