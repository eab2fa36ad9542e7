//! Dense f64 tensors with tape-free reverse-mode automatic differentiation.
//!
//! Every tensor is an immutable value. Ops that see at least one input with
//! `requires_grad` attach a [`Node`] that remembers the inputs and a backward
//! closure. Tensor ids are drawn from a per-thread monotone counter, so every
//! input id is smaller than its output id and sorting the reachable set by
//! descending id is a valid reverse topological order. Graphs are confined to
//! the thread that built them (`Rc`), which is the single-threaded contract
//! of the training loop.

pub mod gemm;
pub mod gradcheck;
pub mod io;
pub mod ops;

use std::cell::{Cell, RefCell};
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::rc::Rc;

use crate::error::{Error, Result};

pub use gradcheck::{grad_check, grad_check_coords};

thread_local! {
    static NEXT_ID: Cell<u64> = const { Cell::new(0) };
    static GRAD_ENABLED: Cell<bool> = const { Cell::new(true) };
    static NAN_CHECKS: Cell<bool> = const { Cell::new(cfg!(debug_assertions)) };
}

fn next_id() -> u64 {
    NEXT_ID.with(|c| {
        let id = c.get();
        c.set(id + 1);
        id
    })
}

/// True when new ops record graph nodes.
pub fn grad_enabled() -> bool {
    GRAD_ENABLED.with(|c| c.get())
}

/// Runs `f` without recording graph nodes.
pub fn no_grad<R>(f: impl FnOnce() -> R) -> R {
    let prev = GRAD_ENABLED.with(|c| c.replace(false));
    let out = f();
    GRAD_ENABLED.with(|c| c.set(prev));
    out
}

pub fn nan_checks_enabled() -> bool {
    NAN_CHECKS.with(|c| c.get())
}

/// Toggles the per-op non-finite scan for the current thread. Defaults to on
/// in debug builds; the benchmark harness turns it off for timed sections.
pub fn set_nan_checks(on: bool) -> bool {
    NAN_CHECKS.with(|c| c.replace(on))
}

/// What a backward closure sees: the upstream gradient, the op inputs and the
/// forward output values.
pub struct BackwardCtx<'a> {
    pub grad: &'a [f64],
    pub inputs: &'a [Tensor],
    pub output: &'a [f64],
}

/// Returns one optional gradient per input, in input order.
pub type BackwardFn = Box<dyn Fn(&BackwardCtx<'_>) -> Vec<Option<Vec<f64>>>>;

struct Node {
    op: &'static str,
    inputs: Vec<Tensor>,
    backward: BackwardFn,
}

struct Inner {
    id: u64,
    shape: Vec<usize>,
    data: Vec<f64>,
    requires_grad: bool,
    grad: RefCell<Option<Vec<f64>>>,
    node: Option<Node>,
}

#[derive(Clone)]
pub struct Tensor(Rc<Inner>);

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("id", &self.0.id)
            .field("shape", &self.0.shape)
            .field("requires_grad", &self.0.requires_grad)
            .field("op", &self.op_name())
            .finish()
    }
}

pub(crate) fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

fn check_shape(op: &'static str, shape: &[usize], len: usize) -> Result<()> {
    if shape.contains(&0) {
        return Err(Error::dim(op, format!("shape {shape:?} has a zero extent")));
    }
    if numel(shape) != len {
        return Err(Error::dim(op, format!("shape {shape:?} needs {} values, got {len}", numel(shape))));
    }
    Ok(())
}

impl Tensor {
    fn leaf(data: Vec<f64>, shape: Vec<usize>, requires_grad: bool) -> Tensor {
        Tensor(Rc::new(Inner { id: next_id(), shape, data, requires_grad, grad: RefCell::new(None), node: None }))
    }

    /// Constant tensor (no gradient).
    pub fn new(data: Vec<f64>, shape: &[usize]) -> Result<Tensor> {
        check_shape("new", shape, data.len())?;
        Ok(Tensor::leaf(data, shape.to_vec(), false))
    }

    /// Trainable leaf: gradients accumulate into it on `backward`.
    pub fn param(data: Vec<f64>, shape: &[usize]) -> Result<Tensor> {
        check_shape("param", shape, data.len())?;
        Ok(Tensor::leaf(data, shape.to_vec(), true))
    }

    pub fn zeros(shape: &[usize]) -> Tensor {
        Tensor::full(shape, 0.0)
    }

    pub fn full(shape: &[usize], value: f64) -> Tensor {
        Tensor::leaf(vec![value; numel(shape)], shape.to_vec(), false)
    }

    pub fn scalar(value: f64) -> Tensor {
        Tensor::leaf(vec![value], vec![1], false)
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> f64) -> Tensor {
        let data = (0..numel(shape)).map(&mut f).collect();
        Tensor::leaf(data, shape.to_vec(), false)
    }

    /// Standard-normal entries scaled by `std`, drawn from `rng`.
    pub fn randn(shape: &[usize], std: f64, rng: &mut crate::rng::SplitMix64) -> Tensor {
        Tensor::from_fn(shape, |_| std * rng.normal())
    }

    /// Generic op constructor. Computes nothing itself: `data` is the forward
    /// result, `backward` maps the upstream gradient onto input gradients.
    /// A node is recorded only when gradients are enabled and some input
    /// requires them.
    pub fn from_op(
        op: &'static str,
        data: Vec<f64>,
        shape: Vec<usize>,
        inputs: &[&Tensor],
        backward: impl Fn(&BackwardCtx<'_>) -> Vec<Option<Vec<f64>>> + 'static,
    ) -> Result<Tensor> {
        check_shape(op, &shape, data.len())?;
        if nan_checks_enabled() && data.iter().any(|v| !v.is_finite()) {
            let inputs_finite = inputs.iter().all(|t| t.data().iter().all(|v| v.is_finite()));
            if inputs_finite {
                return Err(Error::NonFinite { op: op.to_string() });
            }
        }
        let track = grad_enabled() && inputs.iter().any(|t| t.requires_grad());
        let node = track.then(|| Node {
            op,
            inputs: inputs.iter().map(|t| (*t).clone()).collect(),
            backward: Box::new(backward),
        });
        Ok(Tensor(Rc::new(Inner { id: next_id(), shape, data, requires_grad: track, grad: RefCell::new(None), node })))
    }

    pub fn id(&self) -> u64 {
        self.0.id
    }

    pub fn shape(&self) -> &[usize] {
        &self.0.shape
    }

    pub fn ndim(&self) -> usize {
        self.0.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.0.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.0.data
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.data.clone()
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> f64 {
        assert_eq!(self.numel(), 1, "item() on tensor of shape {:?}", self.shape());
        self.0.data[0]
    }

    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    pub fn is_leaf(&self) -> bool {
        self.0.node.is_none()
    }

    /// Name of the op that produced this tensor, `None` for leaves.
    pub fn op_name(&self) -> Option<&'static str> {
        self.0.node.as_ref().map(|n| n.op)
    }

    /// Accumulated gradient of a leaf, if any.
    pub fn grad(&self) -> Option<Vec<f64>> {
        self.0.grad.borrow().clone()
    }

    pub fn zero_grad(&self) {
        *self.0.grad.borrow_mut() = None;
    }

    /// A fresh constant leaf holding the same values.
    pub fn detach(&self) -> Tensor {
        Tensor::leaf(self.0.data.clone(), self.0.shape.clone(), false)
    }

    /// A fresh trainable leaf holding the same values.
    pub fn detach_param(&self) -> Tensor {
        Tensor::leaf(self.0.data.clone(), self.0.shape.clone(), true)
    }

    /// Reverse-mode sweep from a scalar. Gradients accumulate into every
    /// reachable `requires_grad` leaf; calling twice without `zero_grad`
    /// doubles them.
    pub fn backward(&self) -> Result<()> {
        if self.numel() != 1 {
            return Err(Error::Contract(format!("backward needs a scalar loss, got shape {:?}", self.shape())));
        }
        if !self.requires_grad() {
            return Err(Error::Contract("backward called on a tensor that is not on an active graph".into()));
        }

        let mut order: Vec<Tensor> = Vec::new();
        let mut seen: HashSet<u64> = HashSet::new();
        let mut stack = vec![self.clone()];
        seen.insert(self.id());
        while let Some(t) = stack.pop() {
            if let Some(node) = &t.0.node {
                for inp in &node.inputs {
                    if inp.requires_grad() && seen.insert(inp.id()) {
                        stack.push(inp.clone());
                    }
                }
            }
            order.push(t);
        }
        order.sort_unstable_by_key(|t| std::cmp::Reverse(t.id()));

        let mut grads: HashMap<u64, Vec<f64>> = HashMap::new();
        grads.insert(self.id(), vec![1.0]);
        for t in &order {
            let Some(g) = grads.remove(&t.id()) else {
                continue;
            };
            match &t.0.node {
                None => {
                    let mut slot = t.0.grad.borrow_mut();
                    match slot.as_mut() {
                        Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                        None => *slot = Some(g),
                    }
                }
                Some(node) => {
                    let ctx = BackwardCtx { grad: &g, inputs: &node.inputs, output: &t.0.data };
                    let input_grads = (node.backward)(&ctx);
                    debug_assert_eq!(input_grads.len(), node.inputs.len(), "op {}", node.op);
                    for (inp, ig) in node.inputs.iter().zip(input_grads) {
                        let Some(ig) = ig else { continue };
                        if !inp.requires_grad() {
                            continue;
                        }
                        debug_assert_eq!(ig.len(), inp.numel(), "op {} grad length", node.op);
                        match grads.get_mut(&inp.id()) {
                            Some(acc) => acc.iter_mut().zip(&ig).for_each(|(a, b)| *a += b),
                            None => {
                                grads.insert(inp.id(), ig);
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::ops;

    #[test]
    fn shape_must_match_data() {
        assert!(Tensor::new(vec![1.0; 5], &[2, 3]).is_err());
        assert!(Tensor::new(vec![], &[0]).is_err());
        assert!(Tensor::new(vec![1.0; 6], &[2, 3]).is_ok());
    }

    #[test]
    fn sum_gives_ones() {
        let x = Tensor::param(vec![0.3, -1.0, 2.0, 5.0], &[2, 2]).unwrap();
        ops::sum_all(&x).unwrap().backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![1.0; 4]);
    }

    #[test]
    fn square_gives_two_x() {
        let x = Tensor::param(vec![0.3, -1.0, 2.0], &[3]).unwrap();
        let y = ops::mul(&x, &x).unwrap();
        ops::sum_all(&y).unwrap().backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![0.6, -2.0, 4.0]);
    }

    #[test]
    fn repeated_backward_accumulates() {
        let x = Tensor::param(vec![1.0, 2.0], &[2]).unwrap();
        let loss = ops::sum_all(&x).unwrap();
        loss.backward().unwrap();
        loss.backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![2.0, 2.0]);
        x.zero_grad();
        assert!(x.grad().is_none());
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let x = Tensor::param(vec![1.0, 2.0], &[2]).unwrap();
        let y = ops::mul_scalar(&x, 2.0).unwrap();
        assert!(matches!(y.backward(), Err(Error::Contract(_))));
    }

    #[test]
    fn constant_loss_rejected() {
        let x = Tensor::scalar(1.0);
        assert!(matches!(x.backward(), Err(Error::Contract(_))));
    }

    #[test]
    fn shared_subexpression_visited_once() {
        // y = x*x used twice: loss = sum(y + y) -> d/dx = 4x
        let x = Tensor::param(vec![1.5, -2.0], &[2]).unwrap();
        let y = ops::mul(&x, &x).unwrap();
        let z = ops::add(&y, &y).unwrap();
        ops::sum_all(&z).unwrap().backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![6.0, -8.0]);
    }

    #[test]
    fn no_grad_records_nothing() {
        let x = Tensor::param(vec![1.0], &[1]).unwrap();
        let y = no_grad(|| ops::mul_scalar(&x, 3.0).unwrap());
        assert!(!y.requires_grad());
        assert!(y.is_leaf());
        assert!(grad_enabled());
    }

    #[test]
    fn nan_scan_names_op() {
        let prev = set_nan_checks(true);
        let x = Tensor::new(vec![1.0, 0.0], &[2]).unwrap();
        let z = Tensor::new(vec![0.0, 0.0], &[2]).unwrap();
        let err = ops::div(&x, &z).unwrap_err();
        set_nan_checks(prev);
        match err {
            Error::NonFinite { op } => assert_eq!(op, "div"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
