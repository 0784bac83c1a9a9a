//! Gradient-check registry covering every parameterized component.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;

use crate::decoders::{ComplExDecoder, ComplExModel, HadamardMlp, TntComplEx};
use crate::error::Result;
use crate::graph::{HeteroSnapshot, MessageIndex, NodeType, Relation, TemporalHeteroGraph};
use crate::layers::{AggregationKind, NeighborAggregation, RelationConv, SemanticAttention};
use crate::numerics::{grad_check_with, BoundParams, Init, OpKind, ParamSet, Tape, Tensor, Var};
use crate::temporal::{ModelSpec, Scheme, UpdateKind, UpdateModule};
use crate::training::{bce_var, Model};

/// Largest relative error a component may show.
pub const TOLERANCE: f64 = 1e-4;
/// Central-difference step.
pub const STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub component: &'static str,
    pub max_rel_error: f64,
    pub passed: bool,
    pub seconds: f64,
}

type CheckFn = fn(Option<OpKind>) -> Result<f64>;

/// Every registered check, in report order.
pub fn registry() -> Vec<(&'static str, CheckFn)> {
    vec![
        ("relation_conv", check_conv),
        ("semantic_attention", check_attention),
        ("update_gru", |f| check_update(UpdateKind::Gru, f)),
        ("update_concat_mlp", |f| check_update(UpdateKind::ConcatMlp, f)),
        ("update_weighted_average", |f| {
            check_update(UpdateKind::WeightedAverage { alpha: 0.3 }, f)
        }),
        ("model_uta", |f| check_model(Scheme::Uta, f)),
        ("model_atu", |f| check_model(Scheme::Atu, f)),
        ("decoder_hadamard_mlp", check_hadamard),
        ("decoder_complex", check_complex_decoder),
        ("complex", check_complex),
        ("tnt_complex", check_tnt),
    ]
}

/// Runs every check. With `fault` set, the backward rule of that op kind is
/// deliberately corrupted on the analytic tape.
pub fn run_all(fault: Option<OpKind>) -> Result<Vec<CheckResult>> {
    registry()
        .into_iter()
        .map(|(component, check)| {
            let start = Instant::now();
            let err = check(fault)?;
            Ok(CheckResult {
                component,
                max_rel_error: err,
                passed: err < TOLERANCE,
                seconds: start.elapsed().as_secs_f64(),
            })
        })
        .collect()
}

fn random(rows: usize, cols: usize, seed: u64) -> Tensor {
    Init::new(seed).uniform(rows, cols, 1)
}

/// `sum(out * weights)` with fixed pseudo-random weights, so every output
/// entry gets a distinct sensitivity.
fn project(tape: &mut Tape, out: Var, seed: u64) -> Result<Var> {
    let [r, c] = tape.shape(out);
    let w = tape.constant(random(r, c, seed));
    let m = tape.mul(out, w)?;
    Ok(tape.sum(m))
}

/// Checks a function of a [`ParamSet`] plus extra input tensors.
fn check_params<F>(params: &ParamSet, inputs: &[Tensor], fault: Option<OpKind>, f: F) -> Result<f64>
where
    F: Fn(&mut Tape, &BoundParams, &[Var]) -> Result<Var>,
{
    let n = params.len();
    let all: Vec<Tensor> = params.values().iter().chain(inputs).cloned().collect();
    grad_check_with(
        |tape, vars| {
            let pv = BoundParams::from_vars(vars[..n].to_vec());
            f(tape, &pv, &vars[n..])
        },
        &all,
        STEP,
        |tape| tape.inject_backward_fault(fault),
    )
}

fn check_conv(fault: Option<OpKind>) -> Result<f64> {
    let mut params = ParamSet::new();
    let conv = RelationConv::new(&mut params, &mut Init::new(1), "conv", 3, 2, NeighborAggregation::Sum);
    let messages = MessageIndex {
        from_type: 0,
        sources: vec![1, 2, 0, 2],
        targets: vec![0, 0, 1, 3],
    };
    check_params(&params, &[random(4, 3, 2)], fault, |tape, pv, x| {
        let out = conv.forward(tape, pv, x[0], x[0], &messages)?;
        project(tape, out, 3)
    })
}

fn check_attention(fault: Option<OpKind>) -> Result<f64> {
    let mut params = ParamSet::new();
    let att = SemanticAttention::new(&mut params, &mut Init::new(4), "att", 3, 2);
    let partials = [random(4, 3, 5), random(4, 3, 6), random(4, 3, 7)];
    check_params(&params, &partials, fault, |tape, pv, z| {
        let (out, _) = att.forward(tape, pv, z)?;
        project(tape, out, 8)
    })
}

fn check_update(kind: UpdateKind, fault: Option<OpKind>) -> Result<f64> {
    let mut params = ParamSet::new();
    let module = UpdateModule::new(&kind, &mut params, &mut Init::new(9), "upd", 3);
    check_params(&params, &[random(4, 3, 10), random(4, 3, 11)], fault, |tape, pv, x| {
        let out = module.forward(tape, pv, x[0], x[1])?;
        project(tape, out, 12)
    })
}

/// Four nodes of one featured type, two relations, two snapshots.
pub fn toy_graph() -> TemporalHeteroGraph {
    let types = vec![NodeType {
        id: 0,
        name: "node".into(),
        feature_dim: 2,
    }];
    let rels = vec![
        Relation {
            id: 0,
            name: "a".into(),
            src_type: 0,
            dst_type: 0,
            directed: true,
        },
        Relation {
            id: 1,
            name: "b".into(),
            src_type: 0,
            dst_type: 0,
            directed: false,
        },
    ];
    let snaps = vec![
        HeteroSnapshot {
            index: 1,
            node_counts: vec![3],
            edges: vec![vec![(0, 1), (2, 1)], vec![(0, 2)]],
        },
        HeteroSnapshot {
            index: 2,
            node_counts: vec![4],
            edges: vec![vec![(1, 0), (3, 2)], vec![(1, 3), (0, 1)]],
        },
    ];
    let feats = random(4, 2, 13);
    TemporalHeteroGraph::new(types, rels, snaps, vec![Some(feats)], "step").expect("valid toy graph")
}

fn check_model(scheme: Scheme, fault: Option<OpKind>) -> Result<f64> {
    let g = toy_graph();
    let spec = ModelSpec {
        scheme,
        input_dim: 3,
        dims: vec![3, 2],
        aggregation: AggregationKind::Attention,
        attention_dim: 2,
        update: UpdateKind::Gru,
        decoder_hidden: 3,
        seed: 14,
        ..ModelSpec::default()
    };
    let model = Model::new(&spec, &g)?;
    check_params(&model.params, &[], fault, |tape, pv, _| {
        let first = model.encoder.forward_from(tape, pv, &g, 1, &BTreeMap::new(), None)?;
        let past: BTreeMap<_, _> = first.states.iter().copied().collect();
        let second = model.encoder.forward_from(tape, pv, &g, 2, &past, None)?;
        let pairs = [(1, 0), (3, 2), (0, 3), (2, 2)];
        let p = model.score(tape, pv, &g, &second.embeddings, 0, &pairs)?;
        bce_var(tape, p, &[1.0, 1.0, 0.0, 0.0])
    })
}

fn check_hadamard(fault: Option<OpKind>) -> Result<f64> {
    let mut params = ParamSet::new();
    let m = HadamardMlp::new(&mut params, &mut Init::new(15), 3, 4);
    check_params(&params, &[random(5, 3, 16), random(5, 3, 17)], fault, |tape, pv, x| {
        let out = m.forward(tape, pv, x[0], x[1])?;
        project(tape, out, 18)
    })
}

fn check_complex_decoder(fault: Option<OpKind>) -> Result<f64> {
    let mut params = ParamSet::new();
    let d = ComplExDecoder::new(&mut params, &mut Init::new(19), 4, 2)?;
    check_params(&params, &[random(3, 4, 20), random(3, 4, 21)], fault, |tape, pv, x| {
        let out = d.forward(tape, pv, 1, x[0], x[1])?;
        project(tape, out, 22)
    })
}

fn check_complex(fault: Option<OpKind>) -> Result<f64> {
    let m = ComplExModel::new(4, 2, 3, 23);
    check_params(&m.params, &[], fault, |tape, pv, _| {
        let out = m.score_var(tape, pv, &[(0, 1, 2), (3, 0, 3), (1, 1, 0)])?;
        project(tape, out, 24)
    })
}

fn check_tnt(fault: Option<OpKind>) -> Result<f64> {
    let m = TntComplEx::new(4, 2, 2, 3, 25);
    check_params(&m.params, &[], fault, |tape, pv, _| {
        let out = m.score_var(tape, pv, &[(0, 1, 2), (3, 0, 1)], 3)?;
        project(tape, out, 26)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_is_complete_and_unique() {
        let names: Vec<_> = registry().iter().map(|c| c.0).collect();
        let mut sorted = names.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), names.len());
        assert!(names.len() >= 11);
    }

    #[test]
    fn single_components_are_tight() {
        assert!(check_update(UpdateKind::Gru, None).unwrap() < 1e-5);
        assert!(check_attention(None).unwrap() < 1e-5);
    }

    #[test]
    fn corrupted_backward_is_caught() {
        assert!(check_attention(Some(OpKind::Tanh)).unwrap() > TOLERANCE);
        assert!(check_conv(Some(OpKind::ScatterAddRows)).unwrap() > TOLERANCE);
    }
}
