use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::graph::{NodeType, Relation, TemporalHeteroGraph};
use crate::layers::{AggregationKind, Aggregator, RelationConv, SemanticAttention};
use crate::numerics::{BoundParams, Init, ParamId, ParamSet, Tape, Tensor, Var};
use crate::temporal::{Activation, ModelSpec, NodeStateStore, Scheme, StateKey, UpdateModule};

/// Maps raw node features (or nothing) to the first layer's width.
#[derive(Debug, Clone, PartialEq)]
pub enum InputProjection {
    /// `X W + b` for types with features.
    Linear { w: ParamId, b: ParamId },
    /// One learned row shared by every node of a featureless type.
    Shared { row: ParamId },
}

impl InputProjection {
    fn forward(&self, tape: &mut Tape, pv: &BoundParams, features: Option<Tensor>, n: usize) -> Result<Var> {
        match (self, features) {
            (InputProjection::Linear { w, b }, Some(x)) => {
                let x = tape.constant(x);
                let h = tape.matmul(x, pv.var(*w))?;
                tape.add_row(h, pv.var(*b))
            }
            (InputProjection::Shared { row }, None) => tape.gather_rows(pv.var(*row), &vec![0; n]),
            _ => Err(Error::Contract(
                "node features do not match the input projection".into(),
            )),
        }
    }

    fn num_params(&self, params: &ParamSet) -> usize {
        match self {
            InputProjection::Linear { w, b } => params.get(*w).len() + params.get(*b).len(),
            InputProjection::Shared { row } => params.get(*row).len(),
        }
    }
}

/// One message-passing layer with its temporal update.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalLayer {
    pub d_in: usize,
    pub d_out: usize,
    /// One operator per relation.
    pub convs: Vec<RelationConv>,
    /// One aggregator per node type.
    pub aggregators: Vec<Aggregator>,
    /// One module per relation under UTA, a single module under ATU.
    pub updates: Vec<UpdateModule>,
}

/// Values produced by one encoder pass over a snapshot.
#[derive(Debug, Clone)]
pub struct EncoderOutput {
    /// Final-layer embeddings, one matrix per node type.
    pub embeddings: Vec<Var>,
    /// New states to commit, keyed like the store.
    pub states: Vec<(StateKey, Var)>,
    /// Attention weights per `(layer, node type)` when attention is used.
    pub attention: BTreeMap<(usize, usize), Var>,
}

/// The snapshot encoder: input projections followed by temporal layers.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalEncoder {
    pub scheme: Scheme,
    pub activation: Activation,
    pub inputs: Vec<InputProjection>,
    pub layers: Vec<TemporalLayer>,
    /// For each node type, the relations it receives partials from.
    partials_of: Vec<Vec<usize>>,
    node_types: Vec<NodeType>,
    relations: Vec<Relation>,
}

impl TemporalEncoder {
    /// Allocates parameters in a fixed order: input projections, then per
    /// layer the convolutions, aggregators and update modules.
    pub fn new(
        spec: &ModelSpec,
        node_types: &[NodeType],
        relations: &[Relation],
        params: &mut ParamSet,
        init: &mut Init,
    ) -> Result<Self> {
        spec.validate()?;
        let mut partials_of = vec![Vec::new(); node_types.len()];
        for r in relations {
            partials_of[r.dst_type].push(r.id);
            if r.src_type != r.dst_type {
                partials_of[r.src_type].push(r.id);
            }
        }
        if let Some(ty) = partials_of.iter().position(Vec::is_empty) {
            return Err(Error::Validation(format!(
                "node type '{}' takes part in no relation",
                node_types[ty].name
            )));
        }
        let inputs = node_types
            .iter()
            .map(|ty| {
                if ty.feature_dim > 0 {
                    InputProjection::Linear {
                        w: params.add(
                            format!("input.{}.w", ty.name),
                            init.weight(ty.feature_dim, spec.input_dim),
                        ),
                        b: params.add(
                            format!("input.{}.b", ty.name),
                            init.uniform(1, spec.input_dim, ty.feature_dim),
                        ),
                    }
                } else {
                    InputProjection::Shared {
                        row: params.add(format!("input.{}.row", ty.name), init.uniform(1, spec.input_dim, 1)),
                    }
                }
            })
            .collect();
        let mut layers = Vec::with_capacity(spec.num_layers());
        for l in 0..spec.num_layers() {
            let d_in = spec.layer_input_dim(l);
            let d_out = spec.dims[l];
            let convs = relations
                .iter()
                .map(|r| {
                    RelationConv::new(
                        params,
                        init,
                        &format!("l{l}.{}.conv", r.name),
                        d_in,
                        d_out,
                        spec.neighbor_agg,
                    )
                })
                .collect();
            let aggregators = node_types
                .iter()
                .map(|ty| match spec.aggregation {
                    AggregationKind::Sum => Aggregator::Sum,
                    AggregationKind::Attention => Aggregator::Attention(SemanticAttention::new(
                        params,
                        init,
                        &format!("l{l}.{}.att", ty.name),
                        d_out,
                        spec.attention_dim,
                    )),
                })
                .collect();
            let updates = match spec.scheme {
                Scheme::Uta => relations
                    .iter()
                    .map(|r| UpdateModule::new(&spec.update, params, init, &format!("l{l}.{}.update", r.name), d_out))
                    .collect(),
                Scheme::Atu => vec![UpdateModule::new(
                    &spec.update,
                    params,
                    init,
                    &format!("l{l}.update"),
                    d_out,
                )],
            };
            layers.push(TemporalLayer {
                d_in,
                d_out,
                convs,
                aggregators,
                updates,
            });
        }
        Ok(Self {
            scheme: spec.scheme,
            activation: spec.activation,
            inputs,
            layers,
            partials_of,
            node_types: node_types.to_vec(),
            relations: relations.to_vec(),
        })
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.d_out)
    }

    /// Number of update modules over all layers.
    pub fn num_update_modules(&self) -> usize {
        self.layers.iter().map(|l| l.updates.len()).sum()
    }

    pub fn num_update_params(&self) -> usize {
        self.layers
            .iter()
            .flat_map(|l| &l.updates)
            .map(UpdateModule::num_params)
            .sum()
    }

    pub fn num_params(&self, params: &ParamSet) -> usize {
        let inputs: usize = self.inputs.iter().map(|p| p.num_params(params)).sum();
        let layers: usize = self
            .layers
            .iter()
            .map(|l| {
                l.convs.iter().map(RelationConv::num_params).sum::<usize>()
                    + l.aggregators.iter().map(Aggregator::num_params).sum::<usize>()
                    + l.updates.iter().map(UpdateModule::num_params).sum::<usize>()
            })
            .sum();
        inputs + layers
    }

    /// Every state key the encoder reads and writes.
    pub fn state_keys(&self) -> Vec<StateKey> {
        let mut keys = Vec::new();
        for layer in 0..self.layers.len() {
            for (node_type, rels) in self.partials_of.iter().enumerate() {
                match self.scheme {
                    Scheme::Uta => keys.extend(rels.iter().map(|&r| StateKey {
                        layer,
                        relation: Some(r),
                        node_type,
                    })),
                    Scheme::Atu => keys.push(StateKey {
                        layer,
                        relation: None,
                        node_type,
                    }),
                }
            }
        }
        keys
    }

    fn state_dim(&self, key: &StateKey) -> usize {
        self.layers[key.layer].d_out
    }

    fn check_graph(&self, graph: &TemporalHeteroGraph) -> Result<()> {
        if graph.node_types() != self.node_types.as_slice() || graph.relations() != self.relations.as_slice() {
            return Err(Error::Schema("graph schema differs from the encoder's".into()));
        }
        Ok(())
    }

    /// Binds the stored states for snapshot `t` as constants.
    pub fn bind_states(
        &self,
        tape: &mut Tape,
        graph: &TemporalHeteroGraph,
        t: usize,
        store: &NodeStateStore,
    ) -> Result<BTreeMap<StateKey, Var>> {
        if store.scheme() != self.scheme {
            return Err(Error::Contract(format!(
                "store holds {} states, encoder runs {}",
                store.scheme().name(),
                self.scheme.name()
            )));
        }
        let counts = &graph.snapshot(t)?.node_counts;
        self.state_keys()
            .into_iter()
            .map(|k| Ok((k, store.bind(tape, &k, counts[k.node_type], self.state_dim(&k))?)))
            .collect()
    }

    /// Encodes snapshot `t` against the stored states.
    pub fn forward(
        &self,
        tape: &mut Tape,
        pv: &BoundParams,
        graph: &TemporalHeteroGraph,
        t: usize,
        store: &NodeStateStore,
    ) -> Result<EncoderOutput> {
        let past = self.bind_states(tape, graph, t, store)?;
        self.forward_from(tape, pv, graph, t, &past, None)
    }

    /// Encodes snapshot `t` with past states given as tape values.
    ///
    /// Missing keys count as zero states; states with fewer rows than the
    /// snapshot has nodes are padded with zero rows. With `subset` set (UTA
    /// only) relations outside it keep their past state instead of being
    /// recomputed, and are left out of `states`.
    pub fn forward_from(
        &self,
        tape: &mut Tape,
        pv: &BoundParams,
        graph: &TemporalHeteroGraph,
        t: usize,
        past: &BTreeMap<StateKey, Var>,
        subset: Option<&[usize]>,
    ) -> Result<EncoderOutput> {
        self.check_graph(graph)?;
        if subset.is_some() && self.scheme == Scheme::Atu {
            return Err(Error::UnsupportedScheme("atu"));
        }
        if let Some(s) = subset {
            if let Some(&r) = s.iter().find(|&&r| r >= self.relations.len()) {
                return Err(Error::Index {
                    what: "relation",
                    index: r,
                    bound: self.relations.len(),
                });
            }
        }
        let counts = graph.snapshot(t)?.node_counts.clone();
        let mut h = Vec::with_capacity(self.inputs.len());
        for (ty, proj) in self.inputs.iter().enumerate() {
            h.push(proj.forward(tape, pv, graph.snapshot_features(t, ty)?, counts[ty])?);
        }
        let mut states = Vec::new();
        let mut attention = BTreeMap::new();
        for (l, layer) in self.layers.iter().enumerate() {
            let past_state = |tape: &mut Tape, key: StateKey| -> Result<Var> {
                let n = counts[key.node_type];
                match past.get(&key) {
                    None => Ok(tape.constant(Tensor::zeros(n, layer.d_out))),
                    Some(&v) => {
                        let [rows, cols] = tape.shape(v);
                        if cols != layer.d_out {
                            return Err(Error::dim(format!(
                                "state {key:?} has width {cols}, layer expects {}",
                                layer.d_out
                            )));
                        }
                        match rows.cmp(&n) {
                            std::cmp::Ordering::Equal => Ok(v),
                            std::cmp::Ordering::Less => {
                                let pad = tape.constant(Tensor::zeros(n - rows, cols));
                                tape.concat_rows(&[v, pad])
                            }
                            std::cmp::Ordering::Greater => Err(Error::Contract(format!(
                                "state {key:?} covers {rows} nodes but only {n} exist"
                            ))),
                        }
                    }
                }
            };
            let mut out = Vec::with_capacity(h.len());
            for (ty, rels) in self.partials_of.iter().enumerate() {
                let mut partials = Vec::with_capacity(rels.len());
                for &r in rels {
                    let key = StateKey {
                        layer: l,
                        relation: Some(r),
                        node_type: ty,
                    };
                    let skip = subset.is_some_and(|s| !s.contains(&r));
                    if skip {
                        partials.push(past_state(tape, key)?);
                        continue;
                    }
                    let messages = graph
                        .message_index(t, r, ty)?
                        .expect("partials_of lists endpoint types only");
                    let p = layer.convs[r].forward(tape, pv, h[ty], h[messages.from_type], &messages)?;
                    if self.scheme == Scheme::Uta {
                        let prev = past_state(tape, key)?;
                        let s = layer.updates[r].forward(tape, pv, p, prev)?;
                        states.push((key, s));
                        partials.push(s);
                    } else {
                        partials.push(p);
                    }
                }
                let (merged, beta) = layer.aggregators[ty].aggregate(tape, pv, &partials)?;
                if let Some(b) = beta {
                    attention.insert((l, ty), b);
                }
                let merged = if self.scheme == Scheme::Atu {
                    let key = StateKey {
                        layer: l,
                        relation: None,
                        node_type: ty,
                    };
                    let prev = past_state(tape, key)?;
                    let s = layer.updates[0].forward(tape, pv, merged, prev)?;
                    states.push((key, s));
                    s
                } else {
                    merged
                };
                out.push(merged);
            }
            let last = l + 1 == self.layers.len();
            h = if last || self.activation == Activation::None {
                out
            } else {
                out.into_iter().map(|v| tape.relu(v)).collect()
            };
        }
        Ok(EncoderOutput {
            embeddings: h,
            states,
            attention,
        })
    }

    /// Writes the states of `output` into `store`.
    pub fn commit(&self, tape: &Tape, output: &EncoderOutput, store: &mut NodeStateStore) -> Result<()> {
        for (key, v) in &output.states {
            store.insert(*key, tape.value(*v).clone())?;
        }
        Ok(())
    }

    /// Runs snapshot `t`, advances `store`, and returns the final embeddings.
    pub fn forward_snapshot(
        &self,
        params: &ParamSet,
        graph: &TemporalHeteroGraph,
        t: usize,
        store: &mut NodeStateStore,
    ) -> Result<Vec<Tensor>> {
        let mut tape = Tape::new();
        let pv = params.bind(&mut tape);
        let out = self.forward(&mut tape, &pv, graph, t, store)?;
        self.commit(&tape, &out, store)?;
        Ok(out.embeddings.iter().map(|&v| tape.value(v).clone()).collect())
    }

    /// Advances only the states of the relations in `subset` (UTA only).
    pub fn partial_update(
        &self,
        params: &ParamSet,
        graph: &TemporalHeteroGraph,
        t: usize,
        store: &mut NodeStateStore,
        subset: &[usize],
    ) -> Result<()> {
        if self.scheme == Scheme::Atu {
            return Err(Error::UnsupportedScheme("atu"));
        }
        let mut tape = Tape::new();
        let pv = params.bind(&mut tape);
        let past = self.bind_states(&mut tape, graph, t, store)?;
        let out = self.forward_from(&mut tape, &pv, graph, t, &past, Some(subset))?;
        self.commit(&tape, &out, store)
    }
}
