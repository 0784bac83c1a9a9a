//! Negative sampling by destination corruption.

use std::collections::HashSet;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::TemporalHeteroGraph;

/// Draws `ratio` negatives per positive `(u, v)` as `(u, v')` with `v'`
/// uniform over the destination type at snapshot `t`, never an edge of
/// relation `r` in that snapshot. Negatives are grouped by positive, in
/// positive order.
pub fn sample_negatives<R: Rng>(
    graph: &TemporalHeteroGraph,
    t: usize,
    r: usize,
    positives: &[(usize, usize)],
    ratio: usize,
    rng: &mut R,
) -> Result<Vec<(usize, usize)>> {
    let snapshot = graph.snapshot(t)?;
    let rel = graph.relation(r)?;
    let n_dst = snapshot.node_counts[rel.dst_type];
    let mirrored = !rel.directed && rel.src_type == rel.dst_type;
    let known: HashSet<(usize, usize)> = snapshot
        .edges(r)
        .iter()
        .flat_map(|&(u, v)| {
            let back = mirrored.then_some((v, u));
            std::iter::once((u, v)).chain(back)
        })
        .collect();
    let mut out = Vec::with_capacity(positives.len() * ratio);
    for &(u, _) in positives {
        for _ in 0..ratio {
            out.push((u, draw(&known, u, n_dst, rng)?));
        }
    }
    Ok(out)
}

fn draw<R: Rng>(known: &HashSet<(usize, usize)>, u: usize, n_dst: usize, rng: &mut R) -> Result<usize> {
    if n_dst == 0 {
        return Err(Error::Sampling("destination type has no nodes".into()));
    }
    for _ in 0..64 {
        let v = rng.random_range(0..n_dst);
        if !known.contains(&(u, v)) {
            return Ok(v);
        }
    }
    // Dense rows: pick uniformly among the remaining candidates.
    let free: Vec<usize> = (0..n_dst).filter(|&v| !known.contains(&(u, v))).collect();
    if free.is_empty() {
        return Err(Error::Sampling(format!("node {u} is linked to every destination")));
    }
    Ok(free[rng.random_range(0..free.len())])
}
