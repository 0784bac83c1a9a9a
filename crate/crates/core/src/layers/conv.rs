use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{MessageIndex, TemporalHeteroGraph};
use crate::numerics::{BoundParams, Init, ParamId, ParamSet, Tape, Var};

/// How neighbor rows are combined inside a relation convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NeighborAggregation {
    #[default]
    Sum,
    Mean,
}

/// GraphConv-style operator for one (layer, relation):
/// `out_v = h_v W_root + (agg_{w in N(v)} h_w) W_neigh + bias`.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationConv {
    pub w_root: ParamId,
    pub w_neigh: ParamId,
    pub bias: ParamId,
    pub d_in: usize,
    pub d_out: usize,
    pub neighbor_agg: NeighborAggregation,
}

impl RelationConv {
    pub fn new(
        params: &mut ParamSet,
        init: &mut Init,
        name: &str,
        d_in: usize,
        d_out: usize,
        neighbor_agg: NeighborAggregation,
    ) -> Self {
        Self {
            w_root: params.add(format!("{name}.w_root"), init.weight(d_in, d_out)),
            w_neigh: params.add(format!("{name}.w_neigh"), init.weight(d_in, d_out)),
            bias: params.add(format!("{name}.bias"), init.uniform(1, d_out, d_in)),
            d_in,
            d_out,
            neighbor_agg,
        }
    }

    pub fn num_params(&self) -> usize {
        2 * self.d_in * self.d_out + self.d_out
    }

    /// `h_target` holds the receiving type's rows, `h_from` the sending
    /// type's rows (the same var for same-type relations).
    pub fn forward(
        &self,
        tape: &mut Tape,
        pv: &BoundParams,
        h_target: Var,
        h_from: Var,
        messages: &MessageIndex,
    ) -> Result<Var> {
        let [n_target, d_t] = tape.shape(h_target);
        let [_, d_f] = tape.shape(h_from);
        if d_t != self.d_in || d_f != self.d_in {
            return Err(Error::dim(format!(
                "relation conv expects {} input columns, got {d_t} (target) and {d_f} (source)",
                self.d_in
            )));
        }
        let root = tape.matmul(h_target, pv.var(self.w_root))?;
        let gathered = tape.gather_rows(h_from, &messages.sources)?;
        let mut summed = tape.scatter_add_rows(gathered, &messages.targets, n_target)?;
        if self.neighbor_agg == NeighborAggregation::Mean {
            let mut deg = vec![0usize; n_target];
            for &t in &messages.targets {
                deg[t] += 1;
            }
            let inv: Vec<f64> = deg.iter().map(|&d| if d == 0 { 0.0 } else { 1.0 / d as f64 }).collect();
            summed = tape.scale_rows(summed, &inv)?;
        }
        let neigh = tape.matmul(summed, pv.var(self.w_neigh))?;
        let both = tape.add(root, neigh)?;
        tape.add_row(both, pv.var(self.bias))
    }
}

/// Applies `conv` for relation `r` into `target_type` at snapshot `t`, with
/// `h_in` holding one input matrix per node type.
#[allow(clippy::too_many_arguments)]
pub fn relation_conv(
    tape: &mut Tape,
    pv: &BoundParams,
    conv: &RelationConv,
    graph: &TemporalHeteroGraph,
    t: usize,
    r: usize,
    target_type: usize,
    h_in: &[Var],
) -> Result<Var> {
    let messages = graph
        .message_index(t, r, target_type)?
        .ok_or_else(|| Error::Contract(format!("node type {target_type} is not an endpoint of relation {r}")))?;
    let n = graph.snapshot(t)?.node_counts[target_type];
    let h_target = h_in[target_type];
    if tape.shape(h_target)[0] != n {
        return Err(Error::dim(format!(
            "input for node type {target_type} has {} rows, snapshot {t} has {n} nodes",
            tape.shape(h_target)[0]
        )));
    }
    conv.forward(tape, pv, h_target, h_in[messages.from_type], &messages)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Tensor;

    fn identity_conv(params: &mut ParamSet, root: f64) -> RelationConv {
        let mut init = Init::new(0);
        let conv = RelationConv::new(params, &mut init, "c", 2, 2, NeighborAggregation::Sum);
        *params.get_mut(conv.w_root) = Tensor::identity(2).map(|x| x * root);
        *params.get_mut(conv.w_neigh) = Tensor::identity(2);
        *params.get_mut(conv.bias) = Tensor::zeros(1, 2);
        conv
    }

    fn run(params: &ParamSet, conv: &RelationConv, h: &[Vec<f64>], msgs: &MessageIndex) -> Tensor {
        let mut tape = Tape::new();
        let pv = params.bind(&mut tape);
        let x = tape.constant(Tensor::from_rows(h).unwrap());
        let y = conv.forward(&mut tape, &pv, x, x, msgs).unwrap();
        tape.value(y).clone()
    }

    #[test]
    fn identity_weights_add_neighbor() {
        let mut params = ParamSet::new();
        let conv = identity_conv(&mut params, 1.0);
        let msgs = MessageIndex {
            from_type: 0,
            sources: vec![1],
            targets: vec![0],
        };
        let out = run(&params, &conv, &[vec![1.0, 0.0], vec![0.0, 1.0]], &msgs);
        assert_eq!(out.row_slice(0), &[1.0, 1.0]);
        // Node 1 has no in-neighbors: root term only.
        assert_eq!(out.row_slice(1), &[0.0, 1.0]);
    }

    #[test]
    fn sums_neighbors() {
        let mut params = ParamSet::new();
        let conv = identity_conv(&mut params, 0.0);
        let msgs = MessageIndex {
            from_type: 0,
            sources: vec![1, 2],
            targets: vec![0, 0],
        };
        let out = run(&params, &conv, &[vec![5.0, 5.0], vec![1.0, 0.0], vec![1.0, 0.0]], &msgs);
        assert_eq!(out.row_slice(0), &[2.0, 0.0]);
    }

    #[test]
    fn mean_variant_divides_by_degree() {
        let mut params = ParamSet::new();
        let mut conv = identity_conv(&mut params, 0.0);
        conv.neighbor_agg = NeighborAggregation::Mean;
        let msgs = MessageIndex {
            from_type: 0,
            sources: vec![1, 2],
            targets: vec![0, 0],
        };
        let out = run(&params, &conv, &[vec![5.0, 5.0], vec![1.0, 0.0], vec![3.0, 0.0]], &msgs);
        assert_eq!(out.row_slice(0), &[2.0, 0.0]);
    }

    #[test]
    fn isolated_node_gets_root_and_bias() {
        let mut params = ParamSet::new();
        let mut init = Init::new(3);
        let conv = RelationConv::new(&mut params, &mut init, "c", 2, 3, NeighborAggregation::Sum);
        let msgs = MessageIndex {
            from_type: 0,
            sources: vec![],
            targets: vec![],
        };
        let h = vec![vec![0.4, -1.5]];
        let out = run(&params, &conv, &h, &msgs);
        let w = params.get(conv.w_root);
        let b = params.get(conv.bias);
        for c in 0..3 {
            let expect = 0.4 * w.get(0, c) + -1.5 * w.get(1, c) + b.get(0, c);
            assert!((out.get(0, c) - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_wrong_width() {
        let mut params = ParamSet::new();
        let conv = identity_conv(&mut params, 1.0);
        let mut tape = Tape::new();
        let pv = params.bind(&mut tape);
        let x = tape.constant(Tensor::zeros(2, 3));
        let msgs = MessageIndex {
            from_type: 0,
            sources: vec![],
            targets: vec![],
        };
        assert!(matches!(
            conv.forward(&mut tape, &pv, x, x, &msgs),
            Err(Error::Dimension(_))
        ));
    }
}
