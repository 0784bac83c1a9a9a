use proptest::prelude::*;

use thn_core::decoders::{hermitian, HadamardMlp};
use thn_core::graph::{evolutivity, MessageIndex};
use thn_core::layers::{NeighborAggregation, RelationConv, SemanticAttention};
use thn_core::numerics::{grad_check, Init, ParamSet};
use thn_core::training::{auprc, mrr};
use thn_core::{HeteroSnapshot, NodeRef, NodeType, Relation, Tape, TemporalHeteroGraph, Tensor};

fn tensor(rows: usize, cols: usize) -> impl Strategy<Value = Tensor> {
    prop::collection::vec(-2.0f64..2.0, rows * cols).prop_map(move |d| Tensor::from_vec(rows, cols, d).unwrap())
}

fn dot(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gather_and_scatter_are_adjoint(
        (n, x, y, idx) in (1usize..6, 1usize..8).prop_flat_map(|(n, m)| {
            (Just(n), tensor(n, 3), tensor(m, 3), prop::collection::vec(0..n, m))
        })
    ) {
        let mut tape = Tape::new();
        let xv = tape.constant(x.clone());
        let yv = tape.constant(y.clone());
        let g = tape.gather_rows(xv, &idx).unwrap();
        let s = tape.scatter_add_rows(yv, &idx, n).unwrap();
        let lhs = dot(tape.value(g), &y);
        let rhs = dot(&x, tape.value(s));
        prop_assert!((lhs - rhs).abs() < 1e-9, "{lhs} vs {rhs}");
    }

    #[test]
    fn elementwise_ops_pass_gradcheck(a in tensor(3, 4), b in tensor(4, 2), w in tensor(3, 2)) {
        let err = grad_check(
            |tape, v| {
                let m = tape.matmul(v[0], v[1])?;
                let s = tape.sigmoid(m);
                let t = tape.tanh(s);
                let sm = tape.row_softmax(t);
                let c = tape.concat_cols(&[sm, m])?;
                let back = tape.col_slice(c, 1, 2)?;
                let p = tape.mul(back, v[2])?;
                Ok(tape.sum(p))
            },
            &[a, b, w],
            1e-5,
        ).unwrap();
        prop_assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn attention_weights_lie_on_the_simplex(z in prop::collection::vec(tensor(4, 3), 1..5), seed in 0u64..1000) {
        let mut params = ParamSet::new();
        let att = SemanticAttention::new(&mut params, &mut Init::new(seed), "att", 3, 2);
        let mut tape = Tape::new();
        let pv = params.bind(&mut tape);
        let vars: Vec<_> = z.iter().map(|t| tape.constant(t.clone())).collect();
        let (_, beta) = att.forward(&mut tape, &pv, &vars).unwrap();
        let beta = tape.value(beta).data();
        prop_assert_eq!(beta.len(), z.len());
        prop_assert!(beta.iter().all(|&b| (0.0..=1.0).contains(&b)));
        prop_assert!((beta.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn convolution_is_affine_in_its_input(
        x in tensor(4, 3), y in tensor(4, 3), a in -3.0f64..3.0,
        edges in prop::collection::vec((0usize..4, 0usize..4), 0..10),
    ) {
        let mut params = ParamSet::new();
        let conv = RelationConv::new(&mut params, &mut Init::new(5), "c", 3, 2, NeighborAggregation::Sum);
        let messages = MessageIndex {
            from_type: 0,
            sources: edges.iter().map(|e| e.0).collect(),
            targets: edges.iter().map(|e| e.1).collect(),
        };
        let mut tape = Tape::new();
        let pv = params.bind(&mut tape);
        let mut run = |t: Tensor| {
            let v = tape.constant(t);
            let out = conv.forward(&mut tape, &pv, v, v, &messages).unwrap();
            tape.value(out).clone()
        };
        let zero = run(Tensor::zeros(4, 3));
        let fx = run(x.clone());
        let fy = run(y.clone());
        let fxy = run(x.zip_map(&y, |p, q| a * p + q));
        for i in 0..fxy.len() {
            let b = zero.data()[i];
            let want = a * (fx.data()[i] - b) + (fy.data()[i] - b) + b;
            prop_assert!((fxy.data()[i] - want).abs() < 1e-9);
        }
    }

    #[test]
    fn metrics_ignore_monotone_transforms(
        scores in prop::collection::vec(-5.0f64..5.0, 2..40),
        flips in prop::collection::vec(any::<bool>(), 40),
    ) {
        let labels: Vec<bool> = scores.iter().zip(&flips).map(|(_, &f)| f).collect();
        prop_assume!(labels.iter().any(|&l| l));
        let warped: Vec<f64> = scores.iter().map(|s| (2.0 * s).exp() + 3.0).collect();
        prop_assert_eq!(auprc(&scores, &labels).unwrap(), auprc(&warped, &labels).unwrap());
        let groups = |s: &[f64]| vec![(s[0], s[1..].to_vec())];
        prop_assert_eq!(mrr(&groups(&scores)).unwrap(), mrr(&groups(&warped)).unwrap());
    }

    #[test]
    fn complex_score_is_conjugate_symmetric(v in prop::collection::vec(-1.0f64..1.0, 12)) {
        let (s_re, s_im, w_re, w_im, o_re, o_im) = (&v[0..2], &v[2..4], &v[4..6], &v[6..8], &v[8..10], &v[10..12]);
        let w_im_conj: Vec<f64> = w_im.iter().map(|x| -x).collect();
        let forward = hermitian((s_re, s_im), (w_re, w_im), (o_re, o_im));
        let swapped = hermitian((o_re, o_im), (w_re, &w_im_conj), (s_re, s_im));
        prop_assert!((forward - swapped).abs() < 1e-12);
    }

    #[test]
    fn hadamard_mlp_is_symmetric(u in prop::collection::vec(-2.0f64..2.0, 4), v in prop::collection::vec(-2.0f64..2.0, 4), seed in 0u64..1000) {
        let mut params = ParamSet::new();
        let m = HadamardMlp::new(&mut params, &mut Init::new(seed), 4, 5);
        prop_assert_eq!(m.score(&params, &u, &v).unwrap(), m.score(&params, &v, &u).unwrap());
    }

    #[test]
    fn evolutivity_adds_over_relations(g in graph_strategy()) {
        let (raw, _) = evolutivity(&g).unwrap();
        let mut parts = 0.0;
        for r in 0..g.relations().len() {
            let mut only = g.clone();
            for t in 1..=g.num_snapshots() {
                let edges = (0..g.relations().len())
                    .map(|q| if q == r { g.snapshot(t).unwrap().edges[q].clone() } else { Vec::new() })
                    .collect();
                only = only.with_snapshot_edges(t, edges).unwrap();
            }
            parts += evolutivity(&only).unwrap().0;
        }
        prop_assert!((raw - parts).abs() < 1e-9);
    }

    #[test]
    fn undirected_neighborhoods_are_symmetric(g in graph_strategy()) {
        let n = g.snapshot(1).unwrap().node_counts[0];
        for t in 1..=g.num_snapshots() {
            for u in 0..n {
                for v in g.neighborhood(t, 1, NodeRef { node_type: 0, index: u }).unwrap() {
                    let back = g.neighborhood(t, 1, NodeRef { node_type: 0, index: v }).unwrap();
                    prop_assert!(back.contains(&u), "{u} -> {v} at {t}");
                }
            }
        }
    }
}

/// One type, a directed relation 0 and an undirected relation 1.
fn graph_strategy() -> impl Strategy<Value = TemporalHeteroGraph> {
    (2usize..8, 2usize..5).prop_flat_map(|(n, t)| {
        prop::collection::vec(
            (
                prop::collection::btree_set((0..n, 0..n), 0..10),
                prop::collection::btree_set((0..n, 0..n), 0..10),
            ),
            t,
        )
        .prop_map(move |snaps| {
            let types = vec![NodeType {
                id: 0,
                name: "n".into(),
                feature_dim: 0,
            }];
            let rels = vec![
                Relation {
                    id: 0,
                    name: "d".into(),
                    src_type: 0,
                    dst_type: 0,
                    directed: true,
                },
                Relation {
                    id: 1,
                    name: "u".into(),
                    src_type: 0,
                    dst_type: 0,
                    directed: false,
                },
            ];
            let snapshots = snaps
                .into_iter()
                .enumerate()
                .map(|(i, (d, u))| {
                    let mut und = Vec::new();
                    for (a, b) in u {
                        if !und.contains(&(b, a)) {
                            und.push((a, b));
                        }
                    }
                    HeteroSnapshot {
                        index: i + 1,
                        node_counts: vec![n],
                        edges: vec![d.into_iter().collect(), und],
                    }
                })
                .collect();
            TemporalHeteroGraph::new(types, rels, snapshots, vec![None], "step").unwrap()
        })
    })
}
