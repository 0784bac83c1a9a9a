//! Shared fixtures for the benchmarks.

use thn_core::io::{synth_generate, SynthSpec};
use thn_core::numerics::Init;
use thn_core::{ModelSpec, TemporalHeteroGraph, Tensor};

/// A planted-rule graph with `users` and `users / 2` items.
pub fn planted(users: usize) -> TemporalHeteroGraph {
    let spec = SynthSpec {
        node_types: vec![("user".into(), users), ("item".into(), users / 2)],
        ..SynthSpec::default()
    };
    synth_generate(&spec).expect("valid generator spec").0
}

/// A dense `rows x cols` tensor of uniform noise.
pub fn noise(rows: usize, cols: usize, seed: u64) -> Tensor {
    Init::new(seed).uniform(rows, cols, cols)
}

/// The default model at hidden width `dim`.
pub fn model(dim: usize) -> ModelSpec {
    ModelSpec {
        input_dim: dim,
        dims: vec![dim, dim],
        ..ModelSpec::default()
    }
}
