use crate::decoders::check_row;
use crate::error::Result;
use crate::numerics::{BoundParams, Init, ParamId, ParamSet, Tape, Var};

/// `Re(sum_k s_k w_k conj(o_k))` for complex vectors given as `(re, im)`.
pub fn hermitian(s: (&[f64], &[f64]), w: (&[f64], &[f64]), o: (&[f64], &[f64])) -> f64 {
    let mut acc = 0.0;
    for k in 0..s.0.len() {
        let sw_re = s.0[k] * w.0[k] - s.1[k] * w.1[k];
        let sw_im = s.0[k] * w.1[k] + s.1[k] * w.0[k];
        acc += sw_re * o.0[k] + sw_im * o.1[k];
    }
    acc
}

/// ComplEx factorization: complex entity and relation embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplExModel {
    pub params: ParamSet,
    pub ent_re: ParamId,
    pub ent_im: ParamId,
    pub rel_re: ParamId,
    pub rel_im: ParamId,
    pub dim: usize,
}

impl ComplExModel {
    pub fn new(num_entities: usize, num_relations: usize, dim: usize, seed: u64) -> Self {
        let mut params = ParamSet::new();
        let mut init = Init::new(seed);
        let ent_re = params.add("ent_re", init.uniform(num_entities, dim, dim));
        let ent_im = params.add("ent_im", init.uniform(num_entities, dim, dim));
        let rel_re = params.add("rel_re", init.uniform(num_relations, dim, dim));
        let rel_im = params.add("rel_im", init.uniform(num_relations, dim, dim));
        Self {
            params,
            ent_re,
            ent_im,
            rel_re,
            rel_im,
            dim,
        }
    }

    pub fn num_entities(&self) -> usize {
        self.params.get(self.ent_re).rows()
    }

    pub fn num_relations(&self) -> usize {
        self.params.get(self.rel_re).rows()
    }

    pub(crate) fn check(&self, s: usize, r: usize, o: usize) -> Result<()> {
        check_row(self.params.get(self.ent_re), s, "entity")?;
        check_row(self.params.get(self.ent_re), o, "entity")?;
        check_row(self.params.get(self.rel_re), r, "relation")
    }

    /// Raw scores of `(s, r, o)` triples on the tape, `n x 1`.
    pub fn score_var(&self, tape: &mut Tape, pv: &BoundParams, triples: &[(usize, usize, usize)]) -> Result<Var> {
        for &(s, r, o) in triples {
            self.check(s, r, o)?;
        }
        let ss: Vec<usize> = triples.iter().map(|t| t.0).collect();
        let rs: Vec<usize> = triples.iter().map(|t| t.1).collect();
        let os: Vec<usize> = triples.iter().map(|t| t.2).collect();
        let s = [
            tape.gather_rows(pv.var(self.ent_re), &ss)?,
            tape.gather_rows(pv.var(self.ent_im), &ss)?,
        ];
        let w = [
            tape.gather_rows(pv.var(self.rel_re), &rs)?,
            tape.gather_rows(pv.var(self.rel_im), &rs)?,
        ];
        let o = [
            tape.gather_rows(pv.var(self.ent_re), &os)?,
            tape.gather_rows(pv.var(self.ent_im), &os)?,
        ];
        super::hermitian_var(tape, s, w, o)
    }
}

/// Hermitian trilinear score of one triple.
pub fn complex_score(model: &ComplExModel, s: usize, r: usize, o: usize) -> Result<f64> {
    model.check(s, r, o)?;
    let p = &model.params;
    let ent = |i: usize| (p.get(model.ent_re).row_slice(i), p.get(model.ent_im).row_slice(i));
    let rel = (p.get(model.rel_re).row_slice(r), p.get(model.rel_im).row_slice(r));
    Ok(hermitian(ent(s), rel, ent(o)))
}
