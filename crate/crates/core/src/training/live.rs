use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::TemporalHeteroGraph;
use crate::numerics::{OptimizerState, ParamSet, Tape, Tensor};
use crate::rng::{stream, Purpose};
use crate::temporal::{ModelSpec, NodeStateStore};
use crate::training::metrics::{auprc, bce_var, mrr};
use crate::training::report::{RelationMetrics, RunConfig, RunReport, SnapshotMetrics, SnapshotStatus};
use crate::training::sampling::sample_negatives;
use crate::training::Model;

/// Which links are predicted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "lowercase")]
pub enum Task {
    /// One target relation.
    Mono { relation: usize },
    /// Every relation, with metrics averaged over relations.
    Multi,
}

impl Task {
    pub fn targets(&self, graph: &TemporalHeteroGraph) -> Result<Vec<usize>> {
        match *self {
            Task::Mono { relation } => {
                graph.relation(relation)?;
                Ok(vec![relation])
            }
            Task::Multi => Ok((0..graph.relations().len()).collect()),
        }
    }
}

/// Which embeddings score a snapshot's training labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Supervision {
    /// Embeddings of snapshot `t` score the edges of `t`.
    #[default]
    Current,
    /// Embeddings of snapshot `t - 1` score the edges of `t`, matching the
    /// one-step-ahead test task. Nothing is trained on the first snapshot.
    Next,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiveUpdateConfig {
    /// Share of each snapshot's target edges held out for early stopping.
    pub val_fraction: f64,
    /// Consecutive epochs without validation improvement before stopping.
    pub patience: usize,
    pub max_epochs: usize,
    /// Negatives per positive.
    pub neg_ratio: usize,
    pub task: Task,
    #[serde(default)]
    pub supervision: Supervision,
    pub seed: u64,
}

impl Default for LiveUpdateConfig {
    fn default() -> Self {
        Self {
            val_fraction: 0.2,
            patience: 3,
            max_epochs: 50,
            neg_ratio: 1,
            task: Task::Multi,
            supervision: Supervision::Current,
            seed: 0,
        }
    }
}

impl LiveUpdateConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::Validation(format!(
                "val_fraction must lie in (0, 1), got {}",
                self.val_fraction
            )));
        }
        if self.patience < 1 {
            return Err(Error::Validation("patience must be at least 1".into()));
        }
        if self.neg_ratio < 1 {
            return Err(Error::Validation("neg_ratio must be at least 1".into()));
        }
        Ok(())
    }
}

/// Metrics of one evaluated snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    /// Unweighted means over relations with at least one positive.
    pub auprc: f64,
    pub mrr: f64,
    pub per_relation: BTreeMap<usize, RelationMetrics>,
    /// Target relations without positives, left out of the means.
    pub excluded: Vec<usize>,
}

/// Candidate layout for one relation: for positive `i`, the candidates are
/// `pairs[i * (ratio + 1)]` (the positive) followed by its `ratio`
/// negatives.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidates {
    pub relation: usize,
    pub pairs: Vec<(usize, usize)>,
    pub ratio: usize,
}

impl Candidates {
    pub fn labels(&self) -> Vec<bool> {
        (0..self.pairs.len()).map(|i| i % (self.ratio + 1) == 0).collect()
    }

    pub fn num_positives(&self) -> usize {
        self.pairs.len() / (self.ratio + 1)
    }
}

/// Builds test candidates for snapshot `t`; negatives come from a stream
/// keyed by `(seed, t, r)`, so every scorer sees the same candidates.
pub fn test_candidates(graph: &TemporalHeteroGraph, t: usize, r: usize, ratio: usize, seed: u64) -> Result<Candidates> {
    let positives = graph.snapshot(t)?.edges(r).to_vec();
    let mut rng = stream(seed, Purpose::TestNegatives, &[t as u64, r as u64]);
    let negatives = sample_negatives(graph, t, r, &positives, ratio, &mut rng)?;
    let mut pairs = Vec::with_capacity(positives.len() * (ratio + 1));
    for (i, &p) in positives.iter().enumerate() {
        pairs.push(p);
        pairs.extend_from_slice(&negatives[i * ratio..(i + 1) * ratio]);
    }
    Ok(Candidates {
        relation: r,
        pairs,
        ratio,
    })
}

/// AUPRC and MRR of `scores` over `candidates`.
pub fn candidate_metrics(candidates: &Candidates, scores: &[f64]) -> Result<RelationMetrics> {
    let k = candidates.ratio + 1;
    let groups: Vec<(f64, Vec<f64>)> = scores.chunks(k).map(|c| (c[0], c[1..].to_vec())).collect();
    Ok(RelationMetrics {
        auprc: auprc(scores, &candidates.labels())?,
        mrr: mrr(&groups)?,
        positives: candidates.num_positives(),
    })
}

/// Evaluates an arbitrary scorer on snapshot `t` for the target relations of
/// `task`. `scorer(r, pairs)` returns one score per pair. Returns `None` when
/// no target relation has a positive.
pub fn evaluate_with_scorer<F>(
    graph: &TemporalHeteroGraph,
    t: usize,
    task: Task,
    ratio: usize,
    seed: u64,
    mut scorer: F,
) -> Result<Option<EvalResult>>
where
    F: FnMut(usize, &[(usize, usize)]) -> Result<Vec<f64>>,
{
    let mut per_relation = BTreeMap::new();
    let mut excluded = Vec::new();
    for r in task.targets(graph)? {
        if graph.snapshot(t)?.edges(r).is_empty() {
            excluded.push(r);
            continue;
        }
        let cands = test_candidates(graph, t, r, ratio, seed)?;
        let scores = scorer(r, &cands.pairs)?;
        if scores.len() != cands.pairs.len() {
            return Err(Error::dim(format!(
                "scorer returned {} scores for {} candidates",
                scores.len(),
                cands.pairs.len()
            )));
        }
        per_relation.insert(r, candidate_metrics(&cands, &scores)?);
    }
    if per_relation.is_empty() {
        return Ok(None);
    }
    Ok(Some(average(per_relation, excluded)))
}

/// AUPRC of the planted-rule oracle on every test snapshot `2..=T`, scored
/// on the same candidates as a trained model.
pub fn rule_oracle_auprc(
    graph: &TemporalHeteroGraph,
    trigger: usize,
    target: usize,
    ratio: usize,
    seed: u64,
) -> Result<Vec<(usize, Option<f64>)>> {
    (2..=graph.num_snapshots())
        .map(|t| {
            let oracle = crate::io::rule_scorer(graph, trigger, t)?;
            let res = evaluate_with_scorer(graph, t, Task::Mono { relation: target }, ratio, seed, |_, pairs| {
                Ok(oracle(pairs))
            })?;
            Ok((t, res.map(|r| r.auprc)))
        })
        .collect()
}

/// Unweighted mean over relations.
pub fn average(per_relation: BTreeMap<usize, RelationMetrics>, excluded: Vec<usize>) -> EvalResult {
    let n = per_relation.len() as f64;
    let auprc = per_relation.values().map(|m| m.auprc).sum::<f64>() / n;
    let mrr = per_relation.values().map(|m| m.mrr).sum::<f64>() / n;
    EvalResult {
        auprc,
        mrr,
        per_relation,
        excluded,
    }
}

/// Train/validation split of one relation's edges in one snapshot.
#[derive(Debug, Clone, PartialEq)]
struct Split {
    relation: usize,
    train: Vec<(usize, usize)>,
    val: Vec<(usize, usize)>,
    val_negatives: Vec<(usize, usize)>,
}

/// Incremental trainer: fine-tunes on snapshot `t`, then predicts `t + 1`.
#[derive(Debug, Clone)]
pub struct LiveUpdate<'g> {
    graph: &'g TemporalHeteroGraph,
    config: LiveUpdateConfig,
    model: Model,
    store: NodeStateStore,
    /// States as they were before the last trained snapshot.
    history: NodeStateStore,
    optimizer: OptimizerState,
    /// Final embeddings of the last trained snapshot.
    embeddings: Option<(usize, Vec<Tensor>)>,
}

impl<'g> LiveUpdate<'g> {
    pub fn new(spec: &ModelSpec, graph: &'g TemporalHeteroGraph, config: LiveUpdateConfig) -> Result<Self> {
        config.validate()?;
        config.task.targets(graph)?;
        let model = Model::new(spec, graph)?;
        let optimizer = OptimizerState::new(&spec.optimizer, &model.params);
        Ok(Self {
            graph,
            config,
            store: NodeStateStore::new(spec.scheme),
            history: NodeStateStore::new(spec.scheme),
            model,
            optimizer,
            embeddings: None,
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn params(&self) -> &ParamSet {
        &self.model.params
    }

    pub fn store(&self) -> &NodeStateStore {
        &self.store
    }

    /// Snapshot whose states the store currently holds.
    pub fn last_trained(&self) -> Option<usize> {
        self.embeddings.as_ref().map(|e| e.0)
    }

    /// Snapshot and states whose embeddings score the labels of `t`.
    fn source(&self, t: usize) -> Option<(usize, &NodeStateStore)> {
        match self.config.supervision {
            Supervision::Current => Some((t, &self.store)),
            Supervision::Next => (t > 1).then_some((t - 1, &self.history)),
        }
    }

    fn split(&self, t: usize) -> Result<Vec<Split>> {
        let mut out = Vec::new();
        for r in self.config.task.targets(self.graph)? {
            let mut edges = self.graph.snapshot(t)?.edges(r).to_vec();
            if edges.is_empty() {
                continue;
            }
            edges.shuffle(&mut stream(self.config.seed, Purpose::Split, &[t as u64, r as u64]));
            let n = edges.len();
            let n_val = if n < 2 {
                0
            } else {
                ((n as f64 * self.config.val_fraction).round() as usize).clamp(1, n - 1)
            };
            let train = edges.split_off(n_val);
            let mut rng = stream(self.config.seed, Purpose::ValNegatives, &[t as u64, r as u64]);
            let val_negatives = sample_negatives(self.graph, t, r, &edges, self.config.neg_ratio, &mut rng)?;
            out.push(Split {
                relation: r,
                train,
                val: edges,
                val_negatives,
            });
        }
        Ok(out)
    }

    fn train_step(&mut self, t: usize, splits: &[Split], epoch: usize) -> Result<f64> {
        let mut tape = Tape::new();
        let pv = self.model.params.bind(&mut tape);
        let (src, states) = self
            .source(t)
            .ok_or_else(|| Error::Contract("no source snapshot".into()))?;
        let out = self.model.encoder.forward(&mut tape, &pv, self.graph, src, states)?;
        let mut probs = Vec::new();
        let mut labels = Vec::new();
        for s in splits.iter().filter(|s| !s.train.is_empty()) {
            let mut rng = stream(
                self.config.seed,
                Purpose::TrainNegatives,
                &[t as u64, s.relation as u64, epoch as u64],
            );
            let negs = sample_negatives(self.graph, t, s.relation, &s.train, self.config.neg_ratio, &mut rng)?;
            let pairs: Vec<_> = s.train.iter().chain(&negs).copied().collect();
            probs.push(
                self.model
                    .score(&mut tape, &pv, self.graph, &out.embeddings, s.relation, &pairs)?,
            );
            labels.extend(std::iter::repeat_n(1.0, s.train.len()));
            labels.extend(std::iter::repeat_n(0.0, negs.len()));
        }
        let probs = tape.concat_rows(&probs)?;
        let loss = bce_var(&mut tape, probs, &labels)?;
        tape.backward(loss)?;
        let value = tape.value(loss).item();
        if !value.is_finite() {
            return Err(Error::Numeric(format!("loss became {value} at snapshot {t}")));
        }
        let grads = pv.grads(&tape);
        self.optimizer.step(&mut self.model.params, &grads)?;
        Ok(value)
    }

    fn validation_auprc(&self, t: usize, splits: &[Split]) -> Result<Option<f64>> {
        let mut tape = Tape::new();
        let pv = self.model.params.bind(&mut tape);
        let (src, states) = self
            .source(t)
            .ok_or_else(|| Error::Contract("no source snapshot".into()))?;
        let out = self.model.encoder.forward(&mut tape, &pv, self.graph, src, states)?;
        let mut vals = Vec::new();
        for s in splits.iter().filter(|s| !s.val.is_empty()) {
            let pairs: Vec<_> = s.val.iter().chain(&s.val_negatives).copied().collect();
            let p = self
                .model
                .score(&mut tape, &pv, self.graph, &out.embeddings, s.relation, &pairs)?;
            let labels: Vec<bool> = (0..pairs.len()).map(|i| i < s.val.len()).collect();
            vals.push(auprc(tape.value(p).data(), &labels)?);
        }
        Ok((!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64))
    }

    /// Fine-tunes on snapshot `t` with early stopping, restores the best
    /// parameters, then advances the node states through `t`. Returns the
    /// number of epochs run.
    pub fn train_snapshot(&mut self, t: usize) -> Result<usize> {
        let expected = self.last_trained().map_or(1, |p| p + 1);
        if t != expected {
            return Err(Error::Contract(format!(
                "snapshots are trained in order; expected {expected}, got {t}"
            )));
        }
        let splits = self.split(t)?;
        let trainable = self.source(t).is_some() && splits.iter().any(|s| !s.train.is_empty());
        let mut epochs = 0;
        let mut best: Option<(f64, ParamSet)> = None;
        let mut bad = 0;
        if trainable {
            for epoch in 0..self.config.max_epochs {
                self.train_step(t, &splits, epoch)?;
                epochs = epoch + 1;
                let Some(score) = self.validation_auprc(t, &splits)? else {
                    continue;
                };
                if best.as_ref().is_none_or(|b| score > b.0) {
                    best = Some((score, self.model.params.clone()));
                    bad = 0;
                } else {
                    bad += 1;
                    if bad >= self.config.patience {
                        break;
                    }
                }
            }
        }
        if let Some((_, params)) = best {
            self.model.params = params;
        }
        if self.config.supervision == Supervision::Next && t > 1 {
            // Replay t - 1 so the carried states match the final parameters.
            let mut replayed = self.history.clone();
            self.model
                .encoder
                .forward_snapshot(&self.model.params, self.graph, t - 1, &mut replayed)?;
            self.store = replayed;
        }
        self.history = self.store.clone();
        let embeddings = self
            .model
            .encoder
            .forward_snapshot(&self.model.params, self.graph, t, &mut self.store)?;
        self.embeddings = Some((t, embeddings));
        Ok(epochs)
    }

    /// Scores snapshot `t` (normally the one after the last trained
    /// snapshot) from the current embeddings. Nodes without an embedding
    /// score with zeros.
    pub fn evaluate(&self, t: usize) -> Result<Option<EvalResult>> {
        let (_, emb) = self
            .embeddings
            .as_ref()
            .ok_or_else(|| Error::Contract("evaluate called before any training".into()))?;
        evaluate_with_scorer(
            self.graph,
            t,
            self.config.task,
            self.config.neg_ratio,
            self.config.seed,
            |r, pairs| self.model.score_fixed(self.graph, emb, r, pairs),
        )
    }

    /// Multirelational evaluation of snapshot `t`: per-relation metrics
    /// averaged over relations with positives.
    pub fn multirelational_eval(&self, t: usize) -> Result<EvalResult> {
        let (_, emb) = self
            .embeddings
            .as_ref()
            .ok_or_else(|| Error::Contract("evaluate called before any training".into()))?;
        evaluate_with_scorer(
            self.graph,
            t,
            Task::Multi,
            self.config.neg_ratio,
            self.config.seed,
            |r, pairs| self.model.score_fixed(self.graph, emb, r, pairs),
        )?
        .ok_or_else(|| Error::UndefinedMetric(format!("snapshot {t} has no edges")))
    }
}

/// Runs the live-update protocol over every snapshot: train on `t`, test on
/// `t + 1`, for `t = 1 ..= T - 1`.
pub fn live_update_run(spec: &ModelSpec, graph: &TemporalHeteroGraph, config: &LiveUpdateConfig) -> Result<RunReport> {
    let t_max = graph.num_snapshots();
    if t_max < 2 {
        return Err(Error::Validation(format!(
            "live update needs at least 2 snapshots, graph has {t_max}"
        )));
    }
    let mut warnings = Vec::new();
    if t_max < crate::graph::MIN_TEMPORALITY {
        warnings.push(format!(
            "graph has {t_max} snapshots; at least {} are recommended",
            crate::graph::MIN_TEMPORALITY
        ));
    }
    let mut runner = LiveUpdate::new(spec, graph, *config)?;
    let mut snapshots = Vec::with_capacity(t_max - 1);
    for t in 1..t_max {
        let start = Instant::now();
        let epochs = runner.train_snapshot(t)?;
        let result = runner.evaluate(t + 1)?;
        let seconds = start.elapsed().as_secs_f64();
        let names = |m: &BTreeMap<usize, RelationMetrics>| {
            m.iter()
                .map(|(&r, v)| (graph.relations()[r].name.clone(), v.clone()))
                .collect::<BTreeMap<_, _>>()
        };
        snapshots.push(match result {
            Some(res) => {
                for &r in &res.excluded {
                    warnings.push(format!(
                        "snapshot {}: relation '{}' has no positives and is left out of the mean",
                        t + 1,
                        graph.relations()[r].name
                    ));
                }
                SnapshotMetrics {
                    trained_on: t,
                    tested_on: t + 1,
                    status: SnapshotStatus::Ok,
                    auprc: Some(res.auprc),
                    mrr: Some(res.mrr),
                    per_relation: names(&res.per_relation),
                    epochs,
                    seconds,
                }
            }
            None => SnapshotMetrics {
                trained_on: t,
                tested_on: t + 1,
                status: SnapshotStatus::Skipped,
                auprc: None,
                mrr: None,
                per_relation: BTreeMap::new(),
                epochs,
                seconds,
            },
        });
    }
    let config = RunConfig {
        model: spec.clone(),
        live: *config,
    };
    Ok(RunReport::new(config, snapshots, warnings))
}
