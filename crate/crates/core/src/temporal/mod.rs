//! Node states over time, update modules, and the snapshot encoder.

mod encoder;
mod spec;
mod store;
mod update;

pub use encoder::{EncoderOutput, InputProjection, TemporalEncoder, TemporalLayer};
pub use spec::{Activation, ModelSpec, Scheme, UpdateKind};
pub use store::{NodeStateStore, StateKey};
pub use update::UpdateModule;
