//! Static heterogeneous message passing: one convolution per relation,
//! merged per node type by a semantic aggregator.

mod attention;
mod conv;

pub use attention::{sum_aggregate, AggregationKind, Aggregator, SemanticAttention};
pub use conv::{relation_conv, NeighborAggregation, RelationConv};
