//! Dataset requirement metrics: heterogeneity, temporality, evolutivity.

use std::collections::HashSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::TemporalHeteroGraph;

/// At least two relation types make a graph heterogeneous.
pub const MIN_HETEROGENEITY: usize = 2;
/// Live-update evaluation needs at least four snapshots.
pub const MIN_TEMPORALITY: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetMetrics {
    pub heterogeneity: usize,
    pub temporality: usize,
    /// `None` when fewer than two snapshots exist.
    pub evolutivity_raw: Option<f64>,
    pub evolutivity_normalized: Option<f64>,
    pub meets_requirements: bool,
}

/// Number of relation types.
pub fn heterogeneity(g: &TemporalHeteroGraph) -> usize {
    g.relations().len()
}

/// Number of snapshots.
pub fn temporality(g: &TemporalHeteroGraph) -> usize {
    g.num_snapshots()
}

/// `(sum_t |E_t| / (T - 1), that / |E|)` with `|E|` the number of distinct
/// `(relation, src, dst)` triples.
pub fn evolutivity(g: &TemporalHeteroGraph) -> Result<(f64, f64)> {
    let t = g.num_snapshots();
    if t < 2 {
        return Err(Error::UndefinedMetric(format!(
            "evolutivity needs at least 2 snapshots, graph has {t}"
        )));
    }
    let total: usize = g.snapshots().iter().map(|s| s.num_edges()).sum();
    let raw = total as f64 / (t - 1) as f64;
    let distinct = g.distinct_edge_count();
    let normalized = if distinct == 0 { 0.0 } else { raw / distinct as f64 };
    Ok((raw, normalized))
}

/// Diagnostic variant counting only links never seen in an earlier snapshot,
/// averaged over the `T - 1` transitions and normalized by `|E|`.
pub fn evolutivity_novel(g: &TemporalHeteroGraph) -> Result<(f64, f64)> {
    let t = g.num_snapshots();
    if t < 2 {
        return Err(Error::UndefinedMetric(format!(
            "evolutivity needs at least 2 snapshots, graph has {t}"
        )));
    }
    let mut seen = HashSet::new();
    let mut novel = 0usize;
    for (pos, s) in g.snapshots().iter().enumerate() {
        for (r, edges) in s.edges.iter().enumerate() {
            for &(u, v) in edges {
                if seen.insert((r, u, v)) && pos > 0 {
                    novel += 1;
                }
            }
        }
    }
    let raw = novel as f64 / (t - 1) as f64;
    let normalized = if seen.is_empty() { 0.0 } else { raw / seen.len() as f64 };
    Ok((raw, normalized))
}

/// Reports the metrics and whether all dataset requirements hold. Never fails.
pub fn check_requirements(g: &TemporalHeteroGraph) -> DatasetMetrics {
    let heterogeneity = heterogeneity(g);
    let temporality = temporality(g);
    let evo = evolutivity(g).ok();
    let meets_requirements =
        heterogeneity >= MIN_HETEROGENEITY && temporality >= MIN_TEMPORALITY && evo.is_some_and(|(raw, _)| raw >= 0.0);
    DatasetMetrics {
        heterogeneity,
        temporality,
        evolutivity_raw: evo.map(|e| e.0),
        evolutivity_normalized: evo.map(|e| e.1),
        meets_requirements,
    }
}
