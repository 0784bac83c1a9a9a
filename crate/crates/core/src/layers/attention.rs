use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{BoundParams, Init, ParamId, ParamSet, Tape, Var};

/// How per-relation partial embeddings of one node type are merged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregationKind {
    Sum,
    #[default]
    Attention,
}

/// Elementwise sum over relations. A single partial is returned as is.
pub fn sum_aggregate(tape: &mut Tape, partials: &[Var]) -> Result<Var> {
    let (&first, rest) = partials
        .split_first()
        .ok_or_else(|| Error::Contract("aggregation over zero relations".into()))?;
    rest.iter().try_fold(first, |acc, &p| tape.add(acc, p))
}

/// Semantic-level attention over relations.
///
/// Each relation gets the score `w_r = mean_v q . tanh(W z_v + b)`; the
/// weights are `beta = softmax(w)` and the output is `sum_r beta_r Z_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticAttention {
    pub w: ParamId,
    pub b: ParamId,
    pub q: ParamId,
    pub dim: usize,
    pub att_dim: usize,
}

impl SemanticAttention {
    pub fn new(params: &mut ParamSet, init: &mut Init, name: &str, dim: usize, att_dim: usize) -> Self {
        Self {
            w: params.add(format!("{name}.w"), init.weight(dim, att_dim)),
            b: params.add(format!("{name}.b"), init.uniform(1, att_dim, dim)),
            q: params.add(format!("{name}.q"), init.weight(att_dim, 1)),
            dim,
            att_dim,
        }
    }

    pub fn num_params(&self) -> usize {
        self.dim * self.att_dim + 2 * self.att_dim
    }

    /// Returns the merged matrix and the `1 x R` weight row.
    pub fn forward(&self, tape: &mut Tape, pv: &BoundParams, partials: &[Var]) -> Result<(Var, Var)> {
        if partials.is_empty() {
            return Err(Error::Contract("aggregation over zero relations".into()));
        }
        let shape = tape.shape(partials[0]);
        let mut scores = Vec::with_capacity(partials.len());
        for &z in partials {
            if tape.shape(z) != shape {
                return Err(Error::dim(format!(
                    "partial embeddings {:?} vs {:?}",
                    tape.shape(z),
                    shape
                )));
            }
            // A type with no nodes in this snapshot contributes nothing.
            if shape[0] == 0 {
                scores.push(tape.constant(crate::numerics::Tensor::scalar(0.0)));
                continue;
            }
            let proj = tape.matmul(z, pv.var(self.w))?;
            let proj = tape.add_row(proj, pv.var(self.b))?;
            let act = tape.tanh(proj);
            let s = tape.matmul(act, pv.var(self.q))?;
            scores.push(tape.mean(s)?);
        }
        let row = tape.concat_cols(&scores)?;
        let beta = tape.row_softmax(row);
        let mut out = None;
        for (r, &z) in partials.iter().enumerate() {
            let b_r = tape.col_slice(beta, r, 1)?;
            let term = tape.mul_scalar(b_r, z)?;
            out = Some(match out {
                None => term,
                Some(acc) => tape.add(acc, term)?,
            });
        }
        Ok((out.expect("non-empty"), beta))
    }
}

/// A configured aggregator for one (layer, node type).
#[derive(Debug, Clone, PartialEq)]
pub enum Aggregator {
    Sum,
    Attention(SemanticAttention),
}

impl Aggregator {
    /// Merged matrix plus attention weights when applicable.
    pub fn aggregate(&self, tape: &mut Tape, pv: &BoundParams, partials: &[Var]) -> Result<(Var, Option<Var>)> {
        match self {
            Aggregator::Sum => Ok((sum_aggregate(tape, partials)?, None)),
            Aggregator::Attention(att) => {
                let (out, beta) = att.forward(tape, pv, partials)?;
                Ok((out, Some(beta)))
            }
        }
    }

    pub fn num_params(&self) -> usize {
        match self {
            Aggregator::Sum => 0,
            Aggregator::Attention(a) => a.num_params(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Tensor;

    fn mat(rows: &[Vec<f64>]) -> Tensor {
        Tensor::from_rows(rows).unwrap()
    }

    #[test]
    fn sum_cases() {
        let m = mat(&[vec![1.0, -2.0], vec![0.5, 3.0]]);
        let mut tape = Tape::new();
        let a = tape.constant(m.clone());
        let single = sum_aggregate(&mut tape, &[a]).unwrap();
        assert_eq!(tape.value(single), &m);
        let twice = sum_aggregate(&mut tape, &[a, a]).unwrap();
        assert_eq!(tape.value(twice), &m.map(|x| 2.0 * x));
        let neg = tape.constant(m.map(|x| -x));
        let zero = sum_aggregate(&mut tape, &[a, neg]).unwrap();
        assert!(tape.value(zero).data().iter().all(|&x| x == 0.0));
        assert!(matches!(sum_aggregate(&mut tape, &[]), Err(Error::Contract(_))));
    }

    #[test]
    fn identical_partials_get_equal_weight() {
        let mut params = ParamSet::new();
        let att = SemanticAttention::new(&mut params, &mut Init::new(1), "att", 2, 3);
        let mut tape = Tape::new();
        let pv = params.bind(&mut tape);
        let z = tape.constant(mat(&[vec![0.3, -0.1], vec![1.0, 2.0]]));
        let z2 = tape.constant(mat(&[vec![0.3, -0.1], vec![1.0, 2.0]]));
        let (_, beta) = att.forward(&mut tape, &pv, &[z, z2]).unwrap();
        assert_eq!(tape.value(beta).data(), &[0.5, 0.5]);
    }

    #[test]
    fn single_relation_passes_through() {
        let mut params = ParamSet::new();
        let att = SemanticAttention::new(&mut params, &mut Init::new(1), "att", 2, 3);
        let mut tape = Tape::new();
        let pv = params.bind(&mut tape);
        let m = mat(&[vec![0.3, -0.1], vec![1.0, 2.0]]);
        let z = tape.constant(m.clone());
        let (out, beta) = att.forward(&mut tape, &pv, &[z]).unwrap();
        assert_eq!(tape.value(beta).data(), &[1.0]);
        assert_eq!(tape.value(out), &m);
    }

    #[test]
    fn empty_node_type_is_harmless() {
        let mut params = ParamSet::new();
        let att = SemanticAttention::new(&mut params, &mut Init::new(1), "att", 2, 3);
        let mut tape = Tape::new();
        let pv = params.bind(&mut tape);
        let a = tape.constant(Tensor::zeros(0, 2));
        let b = tape.constant(Tensor::zeros(0, 2));
        let (out, beta) = att.forward(&mut tape, &pv, &[a, b]).unwrap();
        assert_eq!(tape.shape(out), [0, 2]);
        assert_eq!(tape.value(beta).data(), &[0.5, 0.5]);
    }
}
