use crate::decoders::{check_row, cmul, complex::hermitian};
use crate::error::{Error, Result};
use crate::numerics::{BoundParams, Init, ParamId, ParamSet, Tape, Tensor, Var};
use crate::temporal::{UpdateKind, UpdateModule};

/// TNTComplEx with recurrently generated timestamp embeddings.
///
/// `t_l = head(GRU(h_{l-1}, 0))` starting from a learned `h_0`, so any
/// timestamp, including ones never seen in training, has an embedding. A
/// relation has a temporal part `w_t` and a static part `w_s`; the score is
/// `Re(sum_k s_k (w_t,k t_l,k + w_s,k) conj(o_k))`.
#[derive(Debug, Clone, PartialEq)]
pub struct TntComplEx {
    pub params: ParamSet,
    pub ent_re: ParamId,
    pub ent_im: ParamId,
    pub rel_t_re: ParamId,
    pub rel_t_im: ParamId,
    pub rel_s_re: ParamId,
    pub rel_s_im: ParamId,
    pub h0: ParamId,
    pub cell: UpdateModule,
    pub head_w: ParamId,
    pub head_b: ParamId,
    pub dim: usize,
    pub hidden: usize,
}

impl TntComplEx {
    pub fn new(num_entities: usize, num_relations: usize, dim: usize, hidden: usize, seed: u64) -> Self {
        let mut params = ParamSet::new();
        let mut init = Init::new(seed);
        let ent_re = params.add("ent_re", init.uniform(num_entities, dim, dim));
        let ent_im = params.add("ent_im", init.uniform(num_entities, dim, dim));
        let rel_t_re = params.add("rel_t_re", init.uniform(num_relations, dim, dim));
        let rel_t_im = params.add("rel_t_im", init.uniform(num_relations, dim, dim));
        let rel_s_re = params.add("rel_s_re", init.uniform(num_relations, dim, dim));
        let rel_s_im = params.add("rel_s_im", init.uniform(num_relations, dim, dim));
        let h0 = params.add("h0", init.uniform(1, hidden, hidden));
        let cell = UpdateModule::new(&UpdateKind::Gru, &mut params, &mut init, "cell", hidden);
        let head_w = params.add("head_w", init.weight(hidden, 2 * dim));
        let head_b = params.add("head_b", init.uniform(1, 2 * dim, hidden));
        Self {
            params,
            ent_re,
            ent_im,
            rel_t_re,
            rel_t_im,
            rel_s_re,
            rel_s_im,
            h0,
            cell,
            head_w,
            head_b,
            dim,
            hidden,
        }
    }

    /// Timestamp embeddings `t_1 ..= t_max` as `1 x 2d` tape values
    /// (real half first), from one sequential sweep.
    pub fn timestamp_vars(&self, tape: &mut Tape, pv: &BoundParams, max: usize) -> Result<Vec<Var>> {
        let zero = tape.constant(Tensor::zeros(1, self.hidden));
        let mut h = pv.var(self.h0);
        let mut out = Vec::with_capacity(max);
        for _ in 0..max {
            h = self.cell.forward(tape, pv, zero, h)?;
            let t = tape.matmul(h, pv.var(self.head_w))?;
            out.push(tape.add_row(t, pv.var(self.head_b))?);
        }
        Ok(out)
    }

    /// `t_1 ..= t_max` in one sweep.
    pub fn timestamp_sweep(&self, max: usize) -> Result<Vec<Tensor>> {
        let mut tape = Tape::new();
        let pv = self.params.bind(&mut tape);
        let vars = self.timestamp_vars(&mut tape, &pv, max)?;
        Ok(vars.iter().map(|&v| tape.value(v).clone()).collect())
    }

    /// Scores `(s, r, o)` triples at timestamp `l` on the tape, `n x 1`.
    pub fn score_var(
        &self,
        tape: &mut Tape,
        pv: &BoundParams,
        triples: &[(usize, usize, usize)],
        l: usize,
    ) -> Result<Var> {
        self.check_timestamp(l)?;
        for &(s, r, o) in triples {
            self.check(s, r, o)?;
        }
        let t = *self.timestamp_vars(tape, pv, l)?.last().expect("l >= 1");
        let n = triples.len();
        let t = tape.gather_rows(t, &vec![0; n])?;
        let t_re = tape.col_slice(t, 0, self.dim)?;
        let t_im = tape.col_slice(t, self.dim, self.dim)?;
        let ss: Vec<usize> = triples.iter().map(|x| x.0).collect();
        let rs: Vec<usize> = triples.iter().map(|x| x.1).collect();
        let os: Vec<usize> = triples.iter().map(|x| x.2).collect();
        let mut g = |id: ParamId, idx: &[usize]| tape.gather_rows(pv.var(id), idx);
        let s = [g(self.ent_re, &ss)?, g(self.ent_im, &ss)?];
        let o = [g(self.ent_re, &os)?, g(self.ent_im, &os)?];
        let (wt_re, wt_im) = (g(self.rel_t_re, &rs)?, g(self.rel_t_im, &rs)?);
        let (ws_re, ws_im) = (g(self.rel_s_re, &rs)?, g(self.rel_s_im, &rs)?);
        let a = tape.mul(wt_re, t_re)?;
        let b = tape.mul(wt_im, t_im)?;
        let w_re = tape.sub(a, b)?;
        let w_re = tape.add(w_re, ws_re)?;
        let c = tape.mul(wt_re, t_im)?;
        let d = tape.mul(wt_im, t_re)?;
        let w_im = tape.add(c, d)?;
        let w_im = tape.add(w_im, ws_im)?;
        super::hermitian_var(tape, s, [w_re, w_im], o)
    }

    fn check(&self, s: usize, r: usize, o: usize) -> Result<()> {
        check_row(self.params.get(self.ent_re), s, "entity")?;
        check_row(self.params.get(self.ent_re), o, "entity")?;
        check_row(self.params.get(self.rel_t_re), r, "relation")
    }

    fn check_timestamp(&self, l: usize) -> Result<()> {
        if l < 1 {
            return Err(Error::Contract("timestamps start at 1".into()));
        }
        Ok(())
    }

    /// `t_l` computed on its own by `l` recurrent steps from `h_0`.
    pub fn timestamp_embed(&self, l: usize) -> Result<Tensor> {
        self.check_timestamp(l)?;
        Ok(self.timestamp_sweep(l)?.pop().expect("l >= 1"))
    }

    /// Score of `(s, r, o)` at timestamp `l`.
    pub fn score(&self, s: usize, r: usize, o: usize, l: usize) -> Result<f64> {
        self.check(s, r, o)?;
        let t = self.timestamp_embed(l)?;
        let (t_re, t_im) = t.data().split_at(self.dim);
        let p = &self.params;
        let row = |id: ParamId, i: usize| p.get(id).row_slice(i);
        let (tw_re, tw_im) = cmul((row(self.rel_t_re, r), row(self.rel_t_im, r)), (t_re, t_im));
        let w_re: Vec<f64> = tw_re.iter().zip(row(self.rel_s_re, r)).map(|(a, b)| a + b).collect();
        let w_im: Vec<f64> = tw_im.iter().zip(row(self.rel_s_im, r)).map(|(a, b)| a + b).collect();
        Ok(hermitian(
            (row(self.ent_re, s), row(self.ent_im, s)),
            (&w_re, &w_im),
            (row(self.ent_re, o), row(self.ent_im, o)),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_generator_gives_zero_timestamps() {
        let mut m = TntComplEx::new(3, 2, 2, 4, 7);
        let generator = [m.h0, m.head_w, m.head_b];
        for (id, _, _) in m.params.clone().iter() {
            let gen_param = generator.contains(&id) || m.params.name(id).starts_with("cell.");
            if gen_param {
                *m.params.get_mut(id) = m.params.get(id).map(|_| 0.0);
            }
        }
        for l in 1..=4 {
            assert!(m.timestamp_embed(l).unwrap().data().iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn rejects_timestamp_zero() {
        let m = TntComplEx::new(3, 2, 2, 4, 7);
        assert!(matches!(m.timestamp_embed(0), Err(Error::Contract(_))));
    }

    #[test]
    fn initial_state_matters() {
        let mut m = TntComplEx::new(3, 2, 2, 4, 7);
        let before = m.timestamp_embed(1).unwrap();
        *m.params.get_mut(m.h0) = m.params.get(m.h0).map(|x| x + 0.5);
        assert_ne!(m.timestamp_embed(1).unwrap(), before);
    }

    #[test]
    fn tape_matches_plain() {
        let m = TntComplEx::new(4, 2, 3, 5, 3);
        let mut tape = Tape::new();
        let pv = m.params.bind(&mut tape);
        let triples = [(0, 1, 2), (3, 0, 3)];
        let out = m.score_var(&mut tape, &pv, &triples, 3).unwrap();
        for (i, &(s, r, o)) in triples.iter().enumerate() {
            assert!((tape.value(out).get(i, 0) - m.score(s, r, o, 3).unwrap()).abs() < 1e-14);
        }
    }
}
