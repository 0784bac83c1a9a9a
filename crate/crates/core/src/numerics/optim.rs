use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ParamSet, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Adagrad,
}

/// Optimizer hyperparameters. Weight decay is an L2 term added to the
/// gradient before the update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSpec {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for OptimizerSpec {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Adam,
            lr: 0.01,
            weight_decay: 5e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdagradState {
    pub acc: Vec<Tensor>,
    pub lr: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OptimizerState {
    Adam(AdamState),
    Adagrad(AdagradState),
}

fn zeros_like(params: &[Tensor]) -> Vec<Tensor> {
    params.iter().map(|p| Tensor::zeros(p.rows(), p.cols())).collect()
}

fn check_aligned(buffers: &[Tensor], params: &[Tensor], grads: &[Tensor]) -> Result<()> {
    if buffers.len() != params.len() || grads.len() != params.len() {
        return Err(Error::dim(format!(
            "optimizer tracks {} tensors, got {} params and {} grads",
            buffers.len(),
            params.len(),
            grads.len()
        )));
    }
    for (i, ((b, p), g)) in buffers.iter().zip(params).zip(grads).enumerate() {
        if b.shape() != p.shape() || g.shape() != p.shape() {
            return Err(Error::dim(format!(
                "optimizer slot {i}: state {:?}, param {:?}, grad {:?}",
                b.shape(),
                p.shape(),
                g.shape()
            )));
        }
    }
    Ok(())
}

impl AdamState {
    pub fn new(params: &[Tensor], lr: f64, beta1: f64, beta2: f64, eps: f64, weight_decay: f64) -> Self {
        Self {
            m: zeros_like(params),
            v: zeros_like(params),
            t: 0,
            lr,
            beta1,
            beta2,
            eps,
            weight_decay,
        }
    }
}

impl AdagradState {
    pub fn new(params: &[Tensor], lr: f64, eps: f64, weight_decay: f64) -> Self {
        Self {
            acc: zeros_like(params),
            lr,
            eps,
            weight_decay,
        }
    }
}

/// One bias-corrected Adam update in place.
pub fn adam_step(state: &mut AdamState, params: &mut [Tensor], grads: &[Tensor]) -> Result<()> {
    check_aligned(&state.m, params, grads)?;
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        for (((p, &g), m), v) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut())
            .zip(v.data_mut())
        {
            let g = g + state.weight_decay * *p;
            *m = state.beta1 * *m + (1.0 - state.beta1) * g;
            *v = state.beta2 * *v + (1.0 - state.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
        }
    }
    Ok(())
}

/// One Adagrad update in place.
pub fn adagrad_step(state: &mut AdagradState, params: &mut [Tensor], grads: &[Tensor]) -> Result<()> {
    check_aligned(&state.acc, params, grads)?;
    for ((p, g), acc) in params.iter_mut().zip(grads).zip(&mut state.acc) {
        for ((p, &g), a) in p.data_mut().iter_mut().zip(g.data()).zip(acc.data_mut()) {
            let g = g + state.weight_decay * *p;
            *a += g * g;
            *p -= state.lr * g / (a.sqrt() + state.eps);
        }
    }
    Ok(())
}

impl OptimizerState {
    pub fn new(spec: &OptimizerSpec, params: &ParamSet) -> Self {
        match spec.kind {
            OptimizerKind::Adam => OptimizerState::Adam(AdamState::new(
                params.values(),
                spec.lr,
                spec.beta1,
                spec.beta2,
                spec.eps,
                spec.weight_decay,
            )),
            OptimizerKind::Adagrad => {
                OptimizerState::Adagrad(AdagradState::new(params.values(), spec.lr, spec.eps, spec.weight_decay))
            }
        }
    }

    pub fn step(&mut self, params: &mut ParamSet, grads: &[Tensor]) -> Result<()> {
        match self {
            OptimizerState::Adam(s) => adam_step(s, params.values_mut(), grads),
            OptimizerState::Adagrad(s) => adagrad_step(s, params.values_mut(), grads),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut p = vec![Tensor::scalar(0.5)];
        let mut s = AdamState::new(&p, 0.1, 0.9, 0.999, 1e-8, 0.0);
        adam_step(&mut s, &mut p, &[Tensor::scalar(1.0)]).unwrap();
        assert!((p[0].item() - 0.5 + 0.1).abs() < 1e-6);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn adagrad_first_step_moves_by_lr() {
        let mut p = vec![Tensor::scalar(0.0)];
        let mut s = AdagradState::new(&p, 0.1, 1e-8, 0.0);
        adagrad_step(&mut s, &mut p, &[Tensor::scalar(2.0)]).unwrap();
        assert!((p[0].item() + 0.1).abs() < 1e-6);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let init = vec![Tensor::row(&[1.0, -2.0, 3.0])];
        let zero = vec![Tensor::zeros(1, 3)];

        let mut p = init.clone();
        let mut s = AdamState::new(&p, 0.1, 0.9, 0.999, 1e-8, 0.0);
        adam_step(&mut s, &mut p, &zero).unwrap();
        assert_eq!(p, init);

        // Adagrad ignores zero gradients whatever it has accumulated.
        let mut p = init.clone();
        let mut s = AdagradState::new(&p, 0.1, 1e-8, 0.0);
        adagrad_step(&mut s, &mut p, &[Tensor::row(&[0.3, 0.1, -4.0])]).unwrap();
        let before = p.clone();
        adagrad_step(&mut s, &mut p, &zero).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn weight_decay_pulls_towards_zero() {
        let mut p = vec![Tensor::scalar(2.0)];
        let mut s = AdagradState::new(&p, 0.1, 1e-8, 0.5);
        adagrad_step(&mut s, &mut p, &[Tensor::scalar(0.0)]).unwrap();
        assert!(p[0].item() < 2.0);
    }

    #[test]
    fn misaligned_shapes_are_rejected() {
        let mut p = vec![Tensor::zeros(2, 2)];
        let mut s = AdamState::new(&p, 0.1, 0.9, 0.999, 1e-8, 0.0);
        let err = adam_step(&mut s, &mut p, &[Tensor::zeros(1, 2)]);
        assert!(matches!(err, Err(Error::Dimension(_))));
    }
}
