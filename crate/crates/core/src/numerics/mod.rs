//! Dense tensors, the differentiation tape, and optimizers.

mod gradcheck;
mod optim;
mod params;
mod tape;
mod tensor;

pub use gradcheck::{grad_check, grad_check_with};
pub use optim::{adagrad_step, adam_step, AdagradState, AdamState, OptimizerKind, OptimizerSpec, OptimizerState};
pub use params::{BoundParams, Init, ParamId, ParamSet};
pub use tape::{sigmoid, OpKind, Tape, Var};
pub use tensor::Tensor;
