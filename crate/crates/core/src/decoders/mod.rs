//! Link scorers on top of encoder embeddings, and the factorization
//! baselines.

mod complex;
mod tnt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{sigmoid, BoundParams, Init, ParamId, ParamSet, Tape, Tensor, Var};

pub use complex::{complex_score, hermitian, ComplExModel};
pub use tnt::TntComplEx;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoderKind {
    #[default]
    HadamardMlp,
    #[serde(rename = "complex")]
    ComplEx,
}

/// `sigmoid(W2 relu(W1 (h_u * h_v) + b1) + b2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HadamardMlp {
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
    pub dim: usize,
    pub hidden: usize,
}

impl HadamardMlp {
    pub fn new(params: &mut ParamSet, init: &mut Init, dim: usize, hidden: usize) -> Self {
        Self {
            w1: params.add("decoder.w1", init.weight(dim, hidden)),
            b1: params.add("decoder.b1", init.uniform(1, hidden, dim)),
            w2: params.add("decoder.w2", init.weight(hidden, 1)),
            b2: params.add("decoder.b2", init.uniform(1, 1, hidden)),
            dim,
            hidden,
        }
    }

    /// Scores row pairs `(h_u[i], h_v[i])`; returns an `n x 1` column of
    /// probabilities.
    pub fn forward(&self, tape: &mut Tape, pv: &BoundParams, h_u: Var, h_v: Var) -> Result<Var> {
        if tape.shape(h_u) != tape.shape(h_v) || tape.shape(h_u)[1] != self.dim {
            return Err(Error::dim(format!(
                "decoder expects two n x {} inputs, got {:?} and {:?}",
                self.dim,
                tape.shape(h_u),
                tape.shape(h_v)
            )));
        }
        let x = tape.mul(h_u, h_v)?;
        let h = tape.matmul(x, pv.var(self.w1))?;
        let h = tape.add_row(h, pv.var(self.b1))?;
        let h = tape.relu(h);
        let o = tape.matmul(h, pv.var(self.w2))?;
        let o = tape.add_row(o, pv.var(self.b2))?;
        Ok(tape.sigmoid(o))
    }

    /// Plain-value score of a single pair.
    pub fn score(&self, params: &ParamSet, h_u: &[f64], h_v: &[f64]) -> Result<f64> {
        if h_u.len() != self.dim || h_v.len() != self.dim {
            return Err(Error::dim(format!(
                "decoder expects vectors of length {}, got {} and {}",
                self.dim,
                h_u.len(),
                h_v.len()
            )));
        }
        let (w1, b1, w2, b2) = (
            params.get(self.w1),
            params.get(self.b1),
            params.get(self.w2),
            params.get(self.b2),
        );
        let mut out = b2.get(0, 0);
        for j in 0..self.hidden {
            let mut a = b1.get(0, j);
            for k in 0..self.dim {
                a += h_u[k] * h_v[k] * w1.get(k, j);
            }
            out += a.max(0.0) * w2.get(j, 0);
        }
        Ok(sigmoid(out))
    }
}

/// ComplEx scoring over encoder embeddings: the first half of each
/// embedding is the real part, the second half the imaginary part, and
/// relation embeddings are learned.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplExDecoder {
    pub rel_re: ParamId,
    pub rel_im: ParamId,
    pub half: usize,
    pub num_relations: usize,
}

impl ComplExDecoder {
    pub fn new(params: &mut ParamSet, init: &mut Init, dim: usize, num_relations: usize) -> Result<Self> {
        if !dim.is_multiple_of(2) {
            return Err(Error::dim(format!("ComplEx needs an even embedding width, got {dim}")));
        }
        let half = dim / 2;
        Ok(Self {
            rel_re: params.add("decoder.rel_re", init.uniform(num_relations, half, half)),
            rel_im: params.add("decoder.rel_im", init.uniform(num_relations, half, half)),
            half,
            num_relations,
        })
    }

    /// Probabilities `sigmoid(Re <e_s, w_r, conj(e_o)>)`, `n x 1`.
    pub fn forward(&self, tape: &mut Tape, pv: &BoundParams, relation: usize, h_s: Var, h_o: Var) -> Result<Var> {
        if relation >= self.num_relations {
            return Err(Error::Index {
                what: "relation",
                index: relation,
                bound: self.num_relations,
            });
        }
        let d = 2 * self.half;
        if tape.shape(h_s) != tape.shape(h_o) || tape.shape(h_s)[1] != d {
            return Err(Error::dim(format!(
                "decoder expects two n x {d} inputs, got {:?} and {:?}",
                tape.shape(h_s),
                tape.shape(h_o)
            )));
        }
        let s_re = tape.col_slice(h_s, 0, self.half)?;
        let s_im = tape.col_slice(h_s, self.half, self.half)?;
        let o_re = tape.col_slice(h_o, 0, self.half)?;
        let o_im = tape.col_slice(h_o, self.half, self.half)?;
        let w_re = tape.row_slice(pv.var(self.rel_re), relation, 1)?;
        let w_im = tape.row_slice(pv.var(self.rel_im), relation, 1)?;
        let n = tape.shape(h_s)[0];
        let w_re = tape.gather_rows(w_re, &vec![0; n])?;
        let w_im = tape.gather_rows(w_im, &vec![0; n])?;
        let score = hermitian_var(tape, [s_re, s_im], [w_re, w_im], [o_re, o_im])?;
        Ok(tape.sigmoid(score))
    }
}

/// Row-wise `Re(sum_k s_k w_k conj(o_k))` on the tape, `n x 1`.
pub(crate) fn hermitian_var(tape: &mut Tape, s: [Var; 2], w: [Var; 2], o: [Var; 2]) -> Result<Var> {
    let [s_re, s_im] = s;
    let [w_re, w_im] = w;
    let [o_re, o_im] = o;
    // s w = (s_re w_re - s_im w_im) + i (s_re w_im + s_im w_re)
    let a = tape.mul(s_re, w_re)?;
    let b = tape.mul(s_im, w_im)?;
    let sw_re = tape.sub(a, b)?;
    let c = tape.mul(s_re, w_im)?;
    let d = tape.mul(s_im, w_re)?;
    let sw_im = tape.add(c, d)?;
    // Re((x + iy)(o_re - i o_im)) = x o_re + y o_im
    let p = tape.mul(sw_re, o_re)?;
    let q = tape.mul(sw_im, o_im)?;
    let both = tape.add(p, q)?;
    Ok(tape.row_sum(both))
}

/// The decoder attached to an encoder.
#[derive(Debug, Clone, PartialEq)]
pub enum Decoder {
    HadamardMlp(HadamardMlp),
    ComplEx(ComplExDecoder),
}

impl Decoder {
    pub fn new(
        kind: DecoderKind,
        params: &mut ParamSet,
        init: &mut Init,
        dim: usize,
        hidden: usize,
        num_relations: usize,
    ) -> Result<Self> {
        Ok(match kind {
            DecoderKind::HadamardMlp => Decoder::HadamardMlp(HadamardMlp::new(params, init, dim, hidden)),
            DecoderKind::ComplEx => Decoder::ComplEx(ComplExDecoder::new(params, init, dim, num_relations)?),
        })
    }

    /// Link probabilities for `pairs` of relation `relation`, as an `n x 1`
    /// column. `h_src` and `h_dst` are the embeddings of the relation's
    /// endpoint types.
    pub fn score_pairs(
        &self,
        tape: &mut Tape,
        pv: &BoundParams,
        relation: usize,
        h_src: Var,
        h_dst: Var,
        pairs: &[(usize, usize)],
    ) -> Result<Var> {
        let src: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let dst: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        let u = tape.gather_rows(h_src, &src)?;
        let v = tape.gather_rows(h_dst, &dst)?;
        match self {
            Decoder::HadamardMlp(m) => m.forward(tape, pv, u, v),
            Decoder::ComplEx(c) => c.forward(tape, pv, relation, u, v),
        }
    }

    pub fn num_params(&self, params: &ParamSet) -> usize {
        match self {
            Decoder::HadamardMlp(m) => [m.w1, m.b1, m.w2, m.b2].iter().map(|&p| params.get(p).len()).sum(),
            Decoder::ComplEx(c) => params.get(c.rel_re).len() + params.get(c.rel_im).len(),
        }
    }
}

/// Complex product of two `(re, im)` slices, elementwise.
pub(crate) fn cmul(a: (&[f64], &[f64]), b: (&[f64], &[f64])) -> (Vec<f64>, Vec<f64>) {
    let re = (0..a.0.len()).map(|k| a.0[k] * b.0[k] - a.1[k] * b.1[k]).collect();
    let im = (0..a.0.len()).map(|k| a.0[k] * b.1[k] + a.1[k] * b.0[k]).collect();
    (re, im)
}

pub(crate) fn check_row(t: &Tensor, row: usize, what: &'static str) -> Result<()> {
    if row >= t.rows() {
        return Err(Error::Index {
            what,
            index: row,
            bound: t.rows(),
        });
    }
    Ok(())
}
