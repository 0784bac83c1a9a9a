//! Learning on temporal heterogeneous networks.
//!
//! A temporal heterogeneous network is a sequence of snapshots with typed
//! nodes and typed relations. The model here runs a heterogeneous
//! message-passing layer per snapshot and carries node states across
//! snapshots, updating them either per relation before the relations are
//! merged ([`temporal::Scheme::Uta`]) or once after merging
//! ([`temporal::Scheme::Atu`]). Training follows the live-update protocol:
//! fine-tune on snapshot `t`, test on `t + 1`.
//!
//! Modules, bottom up:
//!
//! - [`numerics`]: tensors, reverse-mode tape, Adam/Adagrad, gradient checks
//! - [`graph`]: the snapshot data model and dataset metrics
//! - [`io`]: on-disk formats and the planted-rule generator
//! - [`layers`]: per-relation convolution and semantic aggregation
//! - [`temporal`]: update modules, node-state store, the encoder
//! - [`decoders`]: link scorers and the factorization baselines
//! - [`training`]: sampling, metrics, the live-update loop, reports
//! - [`checks`]: the gradient-check registry

pub mod checks;
pub mod decoders;
pub mod error;
pub mod graph;
pub mod io;
pub mod layers;
pub mod numerics;
pub mod rng;
pub mod temporal;
pub mod training;

pub use error::{Error, Result};
pub use graph::{HeteroSnapshot, NodeRef, NodeType, Relation, TemporalHeteroGraph};
pub use numerics::{ParamSet, Tape, Tensor, Var};
pub use temporal::{ModelSpec, NodeStateStore, Scheme, UpdateKind};
pub use training::{live_update_run, LiveUpdateConfig, RunReport, Task};
