use crate::error::{Error, Result};
use crate::numerics::{BoundParams, Init, ParamId, ParamSet, Tape, Var};
use crate::temporal::UpdateKind;

/// Learnable (or fixed) map `(current, past) -> new state`.
#[derive(Debug, Clone, PartialEq)]
pub enum UpdateModule {
    /// Gated recurrent cell with `past` as hidden state and `current` as input.
    Gru {
        w_z: ParamId,
        u_z: ParamId,
        b_z: ParamId,
        w_r: ParamId,
        u_r: ParamId,
        b_r: ParamId,
        w_h: ParamId,
        u_h: ParamId,
        b_h: ParamId,
        dim: usize,
    },
    /// `relu([current | past] W1 + b1) W2 + b2`.
    ConcatMlp {
        w1: ParamId,
        b1: ParamId,
        w2: ParamId,
        b2: ParamId,
        dim: usize,
    },
    WeightedAverage {
        alpha: f64,
    },
}

impl UpdateModule {
    pub fn new(kind: &UpdateKind, params: &mut ParamSet, init: &mut Init, name: &str, dim: usize) -> Self {
        match *kind {
            UpdateKind::Gru => {
                let mut gate = |g: &str| {
                    (
                        params.add(format!("{name}.w_{g}"), init.weight(dim, dim)),
                        params.add(format!("{name}.u_{g}"), init.weight(dim, dim)),
                        params.add(format!("{name}.b_{g}"), init.uniform(1, dim, dim)),
                    )
                };
                let (w_z, u_z, b_z) = gate("z");
                let (w_r, u_r, b_r) = gate("r");
                let (w_h, u_h, b_h) = gate("h");
                UpdateModule::Gru {
                    w_z,
                    u_z,
                    b_z,
                    w_r,
                    u_r,
                    b_r,
                    w_h,
                    u_h,
                    b_h,
                    dim,
                }
            }
            UpdateKind::ConcatMlp => UpdateModule::ConcatMlp {
                w1: params.add(format!("{name}.w1"), init.weight(2 * dim, dim)),
                b1: params.add(format!("{name}.b1"), init.uniform(1, dim, 2 * dim)),
                w2: params.add(format!("{name}.w2"), init.weight(dim, dim)),
                b2: params.add(format!("{name}.b2"), init.uniform(1, dim, dim)),
                dim,
            },
            UpdateKind::WeightedAverage { alpha } => UpdateModule::WeightedAverage { alpha },
        }
    }

    pub fn num_params(&self) -> usize {
        match self {
            UpdateModule::Gru { dim, .. } => 3 * (2 * dim * dim + dim),
            UpdateModule::ConcatMlp { dim, .. } => 2 * dim * dim + dim + dim * dim + dim,
            UpdateModule::WeightedAverage { .. } => 0,
        }
    }

    pub fn forward(&self, tape: &mut Tape, pv: &BoundParams, current: Var, past: Var) -> Result<Var> {
        if tape.shape(current) != tape.shape(past) {
            return Err(Error::dim(format!(
                "update of current {:?} with past {:?}",
                tape.shape(current),
                tape.shape(past)
            )));
        }
        match *self {
            UpdateModule::WeightedAverage { alpha } => {
                // The endpoints are exact so that alpha = 0 is truly stateless.
                if alpha == 0.0 {
                    Ok(current)
                } else if alpha == 1.0 {
                    Ok(past)
                } else {
                    let c = tape.scale(current, 1.0 - alpha);
                    let p = tape.scale(past, alpha);
                    tape.add(c, p)
                }
            }
            UpdateModule::ConcatMlp { w1, b1, w2, b2, .. } => {
                let cat = tape.concat_cols(&[current, past])?;
                let h = tape.matmul(cat, pv.var(w1))?;
                let h = tape.add_row(h, pv.var(b1))?;
                let h = tape.relu(h);
                let o = tape.matmul(h, pv.var(w2))?;
                tape.add_row(o, pv.var(b2))
            }
            UpdateModule::Gru {
                w_z,
                u_z,
                b_z,
                w_r,
                u_r,
                b_r,
                w_h,
                u_h,
                b_h,
                ..
            } => {
                let x = current;
                let h = past;
                let gate = |tape: &mut Tape, w: ParamId, hin: Var, u: ParamId, b: ParamId| -> Result<Var> {
                    let a = tape.matmul(x, pv.var(w))?;
                    let c = tape.matmul(hin, pv.var(u))?;
                    let s = tape.add(a, c)?;
                    tape.add_row(s, pv.var(b))
                };
                let z = gate(tape, w_z, h, u_z, b_z)?;
                let z = tape.sigmoid(z);
                let r = gate(tape, w_r, h, u_r, b_r)?;
                let r = tape.sigmoid(r);
                let rh = tape.mul(r, h)?;
                let n = gate(tape, w_h, rh, u_h, b_h)?;
                let n = tape.tanh(n);
                let keep = tape.affine(z, -1.0, 1.0);
                let fresh = tape.mul(keep, n)?;
                let old = tape.mul(z, h)?;
                tape.add(fresh, old)
            }
        }
    }
}
