//! Temporal heterogeneous graphs as sequences of typed snapshots.
//!
//! Node identity is global and append-only: node `i` of a type is the same
//! entity in every snapshot where the type has more than `i` nodes. Node
//! features belong to the node, so each type carries one feature matrix
//! whose first `n_t` rows are the features visible at snapshot `t`.

mod metrics;

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::numerics::Tensor;

pub use metrics::{
    check_requirements, evolutivity, evolutivity_novel, heterogeneity, temporality, DatasetMetrics, MIN_HETEROGENEITY,
    MIN_TEMPORALITY,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeType {
    pub id: usize,
    pub name: String,
    /// Zero for featureless types.
    pub feature_dim: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relation {
    pub id: usize,
    pub name: String,
    pub src_type: usize,
    pub dst_type: usize,
    pub directed: bool,
}

/// Edges for one relation in one snapshot, as `(src, dst)` local indices.
pub type EdgeList = Vec<(usize, usize)>;

#[derive(Debug, Clone, PartialEq)]
pub struct HeteroSnapshot {
    /// 1-based position in the sequence.
    pub index: usize,
    /// Node count per node type.
    pub node_counts: Vec<usize>,
    /// Edge list per relation.
    pub edges: Vec<EdgeList>,
}

impl HeteroSnapshot {
    pub fn num_edges(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    pub fn edges(&self, relation: usize) -> &[(usize, usize)] {
        &self.edges[relation]
    }
}

/// Messages flowing into one node type along one relation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageIndex {
    /// Node type the messages come from.
    pub from_type: usize,
    /// Sending node per message.
    pub sources: Vec<usize>,
    /// Receiving node per message.
    pub targets: Vec<usize>,
}

/// A node addressed by its type and local index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeRef {
    pub node_type: usize,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalHeteroGraph {
    node_types: Vec<NodeType>,
    relations: Vec<Relation>,
    snapshots: Vec<HeteroSnapshot>,
    features: Vec<Option<Tensor>>,
    time_granularity: String,
}

impl TemporalHeteroGraph {
    /// Validates and assembles a graph.
    ///
    /// `features[a]`, when present, must have `feature_dim` columns and one
    /// row per node of type `a` in the last snapshot.
    pub fn new(
        node_types: Vec<NodeType>,
        relations: Vec<Relation>,
        snapshots: Vec<HeteroSnapshot>,
        features: Vec<Option<Tensor>>,
        time_granularity: impl Into<String>,
    ) -> Result<Self> {
        let g = Self {
            node_types,
            relations,
            snapshots,
            features,
            time_granularity: time_granularity.into(),
        };
        g.validate()?;
        Ok(g)
    }

    fn validate(&self) -> Result<()> {
        let mut names = HashSet::new();
        for (i, ty) in self.node_types.iter().enumerate() {
            if ty.id != i {
                return Err(Error::Validation(format!(
                    "node type `{}` has id {} at position {i}",
                    ty.name, ty.id
                )));
            }
            if !names.insert(ty.name.as_str()) {
                return Err(Error::Validation(format!("duplicate node type `{}`", ty.name)));
            }
        }
        let n_types = self.node_types.len();
        let mut rel_keys = HashSet::new();
        for (i, r) in self.relations.iter().enumerate() {
            if r.id != i {
                return Err(Error::Validation(format!(
                    "relation `{}` has id {} at position {i}",
                    r.name, r.id
                )));
            }
            if r.src_type >= n_types || r.dst_type >= n_types {
                return Err(Error::Validation(format!(
                    "relation `{}` references an unknown node type",
                    r.name
                )));
            }
            if !rel_keys.insert((r.name.as_str(), r.src_type, r.dst_type)) {
                return Err(Error::Validation(format!("duplicate relation `{}`", r.name)));
            }
        }
        if self.features.len() != n_types {
            return Err(Error::Validation(format!(
                "{} feature slots for {n_types} node types",
                self.features.len()
            )));
        }
        let mut prev_counts = vec![0; n_types];
        for (pos, s) in self.snapshots.iter().enumerate() {
            if s.index != pos + 1 {
                return Err(Error::Validation(format!(
                    "snapshot at position {pos} has index {}, expected {}",
                    s.index,
                    pos + 1
                )));
            }
            if s.node_counts.len() != n_types || s.edges.len() != self.relations.len() {
                return Err(Error::Validation(format!(
                    "snapshot {} does not match the schema",
                    s.index
                )));
            }
            for (a, (&now, &before)) in s.node_counts.iter().zip(&prev_counts).enumerate() {
                if now < before {
                    return Err(Error::Validation(format!(
                        "node type `{}` shrinks from {before} to {now} nodes at snapshot {}",
                        self.node_types[a].name, s.index
                    )));
                }
            }
            prev_counts.clone_from(&s.node_counts);
            for (r, edges) in self.relations.iter().zip(&s.edges) {
                let mut seen = HashSet::with_capacity(edges.len());
                let (ns, nd) = (s.node_counts[r.src_type], s.node_counts[r.dst_type]);
                for &(u, v) in edges {
                    if u >= ns || v >= nd {
                        return Err(Error::Validation(format!(
                            "edge ({u}, {v}) of `{}` out of range at snapshot {} ({ns} x {nd} nodes)",
                            r.name, s.index
                        )));
                    }
                    if !seen.insert((u, v)) {
                        return Err(Error::Validation(format!(
                            "duplicate edge ({u}, {v}) of `{}` at snapshot {}",
                            r.name, s.index
                        )));
                    }
                }
            }
        }
        for (ty, f) in self.node_types.iter().zip(&self.features) {
            match f {
                Some(f) => {
                    if ty.feature_dim == 0 || f.cols() != ty.feature_dim {
                        return Err(Error::Validation(format!(
                            "features of `{}` have {} columns, declared {}",
                            ty.name,
                            f.cols(),
                            ty.feature_dim
                        )));
                    }
                    if f.rows() != prev_counts[ty.id] {
                        return Err(Error::Validation(format!(
                            "features of `{}` cover {} nodes, graph has {}",
                            ty.name,
                            f.rows(),
                            prev_counts[ty.id]
                        )));
                    }
                }
                None if ty.feature_dim > 0 => {
                    return Err(Error::Validation(format!(
                        "node type `{}` declares {} features but none were given",
                        ty.name, ty.feature_dim
                    )));
                }
                None => {}
            }
        }
        Ok(())
    }

    pub fn node_types(&self) -> &[NodeType] {
        &self.node_types
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn snapshots(&self) -> &[HeteroSnapshot] {
        &self.snapshots
    }

    pub fn time_granularity(&self) -> &str {
        &self.time_granularity
    }

    pub fn num_snapshots(&self) -> usize {
        self.snapshots.len()
    }

    /// Snapshot `t`, 1-based.
    pub fn snapshot(&self, t: usize) -> Result<&HeteroSnapshot> {
        if t == 0 || t > self.snapshots.len() {
            return Err(Error::Index {
                what: "snapshot",
                index: t,
                bound: self.snapshots.len(),
            });
        }
        Ok(&self.snapshots[t - 1])
    }

    pub fn relation(&self, r: usize) -> Result<&Relation> {
        self.relations.get(r).ok_or(Error::Index {
            what: "relation",
            index: r,
            bound: self.relations.len(),
        })
    }

    pub fn relation_by_name(&self, name: &str) -> Option<&Relation> {
        self.relations.iter().find(|r| r.name == name)
    }

    pub fn node_type_by_name(&self, name: &str) -> Option<&NodeType> {
        self.node_types.iter().find(|a| a.name == name)
    }

    /// Full feature matrix of a node type, if it has features.
    pub fn features(&self, node_type: usize) -> Option<&Tensor> {
        self.features.get(node_type).and_then(Option::as_ref)
    }

    /// Features visible at snapshot `t`: the first `n_t` rows.
    pub fn snapshot_features(&self, t: usize, node_type: usize) -> Result<Option<Tensor>> {
        let n = self.snapshot(t)?.node_counts[node_type];
        Ok(self.features(node_type).map(|f| {
            Tensor::from_vec(n, f.cols(), f.data()[..n * f.cols()].to_vec()).expect("prefix of a valid matrix")
        }))
    }

    /// Number of distinct `(relation, src, dst)` triples over all snapshots.
    pub fn distinct_edge_count(&self) -> usize {
        let mut seen = HashSet::new();
        for s in &self.snapshots {
            for (r, edges) in s.edges.iter().enumerate() {
                for &(u, v) in edges {
                    seen.insert((r, u, v));
                }
            }
        }
        seen.len()
    }

    /// Nodes sending messages to `v` under relation `r` at snapshot `t`.
    ///
    /// For a node of the relation's destination type these are the sources
    /// of edges ending at `v`. Undirected relations also count destinations of
    /// edges leaving `v` when `v` has the source type. Sorted, deduplicated.
    pub fn neighborhood(&self, t: usize, r: usize, v: NodeRef) -> Result<Vec<usize>> {
        let s = self.snapshot(t)?;
        let rel = self.relation(r)?;
        if v.node_type >= self.node_types.len() {
            return Err(Error::Index {
                what: "node type",
                index: v.node_type,
                bound: self.node_types.len(),
            });
        }
        let n = s.node_counts[v.node_type];
        if v.index >= n {
            return Err(Error::Index {
                what: "node",
                index: v.index,
                bound: n,
            });
        }
        let mut out = Vec::new();
        for &(a, b) in &s.edges[r] {
            if v.node_type == rel.dst_type && b == v.index {
                out.push(a);
            }
            if !rel.directed && v.node_type == rel.src_type && a == v.index {
                out.push(b);
            }
        }
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    /// Message routing for relation `r` into `target_type` at snapshot `t`.
    ///
    /// Returns `None` when `target_type` is not an endpoint of `r`. A directed
    /// relation delivers nothing to its source type, so that side gets an
    /// empty index.
    pub fn message_index(&self, t: usize, r: usize, target_type: usize) -> Result<Option<MessageIndex>> {
        let s = self.snapshot(t)?;
        let rel = self.relation(r)?;
        let edges = &s.edges[r];
        let mut sources = Vec::new();
        let mut targets = Vec::new();
        if target_type == rel.dst_type {
            for &(u, v) in edges {
                sources.push(u);
                targets.push(v);
            }
            if !rel.directed && rel.src_type == rel.dst_type {
                for &(u, v) in edges {
                    if u != v {
                        sources.push(v);
                        targets.push(u);
                    }
                }
            }
            Ok(Some(MessageIndex {
                from_type: rel.src_type,
                sources,
                targets,
            }))
        } else if target_type == rel.src_type {
            if !rel.directed {
                for &(u, v) in edges {
                    sources.push(v);
                    targets.push(u);
                }
            }
            Ok(Some(MessageIndex {
                from_type: rel.dst_type,
                sources,
                targets,
            }))
        } else {
            Ok(None)
        }
    }

    /// Node types each relation touches, as `(relation, node type)` pairs in
    /// relation order (destination side first).
    pub fn relation_endpoints(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for r in &self.relations {
            out.push((r.id, r.dst_type));
            if r.src_type != r.dst_type {
                out.push((r.id, r.src_type));
            }
        }
        out
    }

    /// Returns a copy with snapshot `t`'s edges replaced.
    pub fn with_snapshot_edges(&self, t: usize, edges: Vec<EdgeList>) -> Result<Self> {
        let mut g = self.clone();
        self.snapshot(t)?;
        g.snapshots[t - 1].edges = edges;
        g.validate()?;
        Ok(g)
    }

    /// Returns a copy with the given snapshot order (a permutation of
    /// `1..=T`), re-indexed so positions stay contiguous.
    pub fn reorder_snapshots(&self, order: &[usize]) -> Result<Self> {
        let mut snapshots = Vec::with_capacity(order.len());
        for (pos, &t) in order.iter().enumerate() {
            let mut s = self.snapshot(t)?.clone();
            s.index = pos + 1;
            snapshots.push(s);
        }
        Self::new(
            self.node_types.clone(),
            self.relations.clone(),
            snapshots,
            self.features.clone(),
            self.time_granularity.clone(),
        )
    }
}
