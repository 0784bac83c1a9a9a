//! Live-update training and evaluation.

mod live;
pub mod metrics;
mod model;
mod report;
pub mod sampling;

pub use live::{
    average, candidate_metrics, evaluate_with_scorer, live_update_run, rule_oracle_auprc, test_candidates, Candidates,
    EvalResult, LiveUpdate, LiveUpdateConfig, Supervision, Task,
};
pub use metrics::{auprc, bce_loss, bce_var, mrr};
pub use model::Model;
pub use report::{RelationMetrics, RunConfig, RunReport, SnapshotMetrics, SnapshotStatus};
pub use sampling::sample_negatives;
