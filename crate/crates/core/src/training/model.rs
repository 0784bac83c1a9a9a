use crate::decoders::Decoder;
use crate::error::Result;
use crate::graph::TemporalHeteroGraph;
use crate::numerics::{BoundParams, Init, ParamSet, Tape, Tensor, Var};
use crate::temporal::{ModelSpec, TemporalEncoder};

/// Encoder plus decoder with their parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub spec: ModelSpec,
    pub params: ParamSet,
    pub encoder: TemporalEncoder,
    pub decoder: Decoder,
}

impl Model {
    pub fn new(spec: &ModelSpec, graph: &TemporalHeteroGraph) -> Result<Self> {
        let mut params = ParamSet::new();
        let mut init = Init::new(spec.seed);
        let encoder = TemporalEncoder::new(spec, graph.node_types(), graph.relations(), &mut params, &mut init)?;
        let decoder = Decoder::new(
            spec.decoder,
            &mut params,
            &mut init,
            spec.output_dim(),
            spec.decoder_hidden,
            graph.relations().len(),
        )?;
        Ok(Self {
            spec: spec.clone(),
            params,
            encoder,
            decoder,
        })
    }

    /// Link probabilities of `pairs` under relation `r`, given per-type
    /// embeddings on the tape.
    pub fn score(
        &self,
        tape: &mut Tape,
        pv: &BoundParams,
        graph: &TemporalHeteroGraph,
        embeddings: &[Var],
        r: usize,
        pairs: &[(usize, usize)],
    ) -> Result<Var> {
        let rel = graph.relation(r)?;
        let (mut src_rows, mut dst_rows) = (0, 0);
        for &(u, v) in pairs {
            src_rows = src_rows.max(u + 1);
            dst_rows = dst_rows.max(v + 1);
        }
        if rel.src_type == rel.dst_type {
            src_rows = src_rows.max(dst_rows);
            dst_rows = src_rows;
        }
        let h_src = pad_var(tape, embeddings[rel.src_type], src_rows)?;
        let h_dst = if rel.dst_type == rel.src_type {
            h_src
        } else {
            pad_var(tape, embeddings[rel.dst_type], dst_rows)?
        };
        self.decoder.score_pairs(tape, pv, r, h_src, h_dst, pairs)
    }

    /// Plain-value scores from fixed embeddings. Nodes beyond an embedding
    /// matrix's rows score with a zero embedding.
    pub fn score_fixed(
        &self,
        graph: &TemporalHeteroGraph,
        embeddings: &[Tensor],
        r: usize,
        pairs: &[(usize, usize)],
    ) -> Result<Vec<f64>> {
        let rel = graph.relation(r)?;
        let mut rows: Vec<usize> = embeddings.iter().map(Tensor::rows).collect();
        for &(u, v) in pairs {
            rows[rel.src_type] = rows[rel.src_type].max(u + 1);
            rows[rel.dst_type] = rows[rel.dst_type].max(v + 1);
        }
        let mut tape = Tape::new();
        let pv = self.params.bind(&mut tape);
        let h_src = tape.constant(embeddings[rel.src_type].pad_rows(rows[rel.src_type]));
        let h_dst = if rel.dst_type == rel.src_type {
            h_src
        } else {
            tape.constant(embeddings[rel.dst_type].pad_rows(rows[rel.dst_type]))
        };
        let out = self.decoder.score_pairs(&mut tape, &pv, r, h_src, h_dst, pairs)?;
        Ok(tape.value(out).data().to_vec())
    }
}

/// Appends zero rows so `v` has at least `rows` rows.
fn pad_var(tape: &mut Tape, v: Var, rows: usize) -> Result<Var> {
    let [have, cols] = tape.shape(v);
    if have >= rows {
        return Ok(v);
    }
    let zeros = tape.constant(Tensor::zeros(rows - have, cols));
    tape.concat_rows(&[v, zeros])
}
