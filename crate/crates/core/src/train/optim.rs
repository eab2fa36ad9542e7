use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ParamStore;
use crate::tensor::Tensor;

/// SGD with heavy-ball momentum and L2 weight decay folded into the
/// velocity: `v <- mu v + g + lambda theta`, `theta <- theta - lr v`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub momentum: f64,
    pub weight_decay: f64,
    pub step: u64,
    /// One buffer per parameter, in store order; empty until the first step.
    pub velocity: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(momentum: f64, weight_decay: f64) -> Self {
        OptimizerState { momentum, weight_decay, step: 0, velocity: Vec::new() }
    }
}

/// One update of every parameter in `params` from its accumulated gradient.
/// Parameters are replaced by fresh leaves, which also clears their grads.
pub fn sgd_step(params: &mut ParamStore, state: &mut OptimizerState, lr: f64) -> Result<()> {
    let mut updates = Vec::with_capacity(params.len());
    for (i, (name, t, _)) in params.iter().enumerate() {
        let g = t.grad().ok_or_else(|| Error::Contract(format!("parameter {name:?} has no gradient")))?;
        if state.velocity.len() <= i {
            state.velocity.push(vec![0.0; t.numel()]);
        }
        let v = &mut state.velocity[i];
        if v.len() != t.numel() {
            return Err(Error::Contract(format!("velocity of {name:?} does not match its shape")));
        }
        let mut theta = t.to_vec();
        for ((th, vi), gi) in theta.iter_mut().zip(v.iter_mut()).zip(&g) {
            *vi = state.momentum * *vi + gi + state.weight_decay * *th;
            *th -= lr * *vi;
        }
        updates.push((name.to_string(), Tensor::param(theta, t.shape())?));
    }
    for (name, t) in updates {
        params.set(&name, t)?;
    }
    state.step += 1;
    Ok(())
}
