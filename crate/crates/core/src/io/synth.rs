use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::graph::{HeteroSnapshot, NodeType, Relation, TemporalHeteroGraph, MIN_HETEROGENEITY, MIN_TEMPORALITY};
use crate::numerics::Tensor;
use crate::rng::{stream, Purpose};

/// Trigger edge `(u, v)` at `t` implies a target edge `(u, v)` at `t + 1`
/// with probability `p_rule`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedRule {
    pub trigger: String,
    pub target: String,
    pub p_rule: f64,
}

/// Parameters of a synthetic dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    /// `(name, node count)`; counts are fixed over time.
    pub node_types: Vec<(String, usize)>,
    /// `(name, src type, dst type, directed)`.
    pub relations: Vec<(String, String, String, bool)>,
    pub snapshots: usize,
    pub rule: Option<PlantedRule>,
    /// Per relation and snapshot, each source node adds one uniform edge
    /// with this probability.
    pub noise: f64,
    /// Edges each source node draws per active snapshot. The rule target
    /// only draws these at snapshot 1.
    pub activity: usize,
    /// Relation name to period: base edges appear at `t` with
    /// `(t - 1) % period == 0`. Missing relations have period 1.
    pub periods: BTreeMap<String, usize>,
    /// Gaussian feature width for every type; 0 leaves types featureless.
    pub feature_dim: usize,
    pub seed: u64,
    pub granularity: String,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            node_types: vec![("user".into(), 200), ("item".into(), 100)],
            relations: vec![
                ("click".into(), "user".into(), "item".into(), false),
                ("buy".into(), "user".into(), "item".into(), false),
            ],
            snapshots: 6,
            rule: Some(PlantedRule {
                trigger: "click".into(),
                target: "buy".into(),
                p_rule: 0.9,
            }),
            noise: 0.05,
            activity: 2,
            periods: BTreeMap::new(),
            feature_dim: 16,
            seed: 0,
            granularity: "day".into(),
        }
    }
}

/// Rule-implied edges that were planted, per snapshot (index 0 is
/// snapshot 1, always empty).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleLabels {
    pub trigger: usize,
    pub target: usize,
    pub planted: Vec<Vec<(usize, usize)>>,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        if self.snapshots < MIN_TEMPORALITY {
            return bad(format!(
                "{} snapshots requested; generated sets need at least {MIN_TEMPORALITY}",
                self.snapshots
            ));
        }
        if self.relations.len() < MIN_HETEROGENEITY {
            return bad(format!(
                "{} relations requested; generated sets need at least {MIN_HETEROGENEITY}",
                self.relations.len()
            ));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return bad(format!("noise must lie in [0, 1], got {}", self.noise));
        }
        if let Some((name, _)) = self.node_types.iter().find(|t| t.1 == 0) {
            return bad(format!("node type `{name}` has no nodes"));
        }
        let type_of = |n: &str| self.node_types.iter().position(|t| t.0 == n);
        for (name, src, dst, _) in &self.relations {
            if type_of(src).is_none() || type_of(dst).is_none() {
                return Err(Error::Schema(format!("relation `{name}` uses an undeclared node type")));
            }
        }
        let rel = |n: &str| self.relations.iter().find(|r| r.0 == n);
        for (name, &p) in &self.periods {
            if rel(name).is_none() {
                return Err(Error::Schema(format!("period given for unknown relation `{name}`")));
            }
            if p < 1 {
                return bad(format!("period of `{name}` must be at least 1"));
            }
        }
        if let Some(rule) = &self.rule {
            if !(0.0..=1.0).contains(&rule.p_rule) {
                return bad(format!("p_rule must lie in [0, 1], got {}", rule.p_rule));
            }
            let (Some(a), Some(b)) = (rel(&rule.trigger), rel(&rule.target)) else {
                return Err(Error::Schema("rule references an unknown relation".into()));
            };
            if a.0 == b.0 {
                return bad("rule trigger and target must differ".into());
            }
            if (&a.1, &a.2) != (&b.1, &b.2) {
                return bad("rule trigger and target must join the same node types".into());
            }
        }
        Ok(())
    }

    fn relation_index(&self, name: &str) -> usize {
        self.relations.iter().position(|r| r.0 == name).expect("validated")
    }
}

/// Parses the line-based spec format:
///
/// ```text
/// nodetype user 200
/// relation click user item 0
/// snapshots 6
/// rule click buy 0.9
/// noise 0.05
/// activity 2
/// period click 2
/// features 16
/// seed 7
/// granularity day
/// ```
pub fn parse_synth_spec(text: &str, path: &Path) -> Result<SynthSpec> {
    let mut spec = SynthSpec {
        node_types: Vec::new(),
        relations: Vec::new(),
        rule: None,
        ..SynthSpec::default()
    };
    let perr = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    for (i, raw) in text.lines().enumerate() {
        let no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        let n = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| perr(no, format!("expected an integer, found `{s}`")))
        };
        let x = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| perr(no, format!("expected a number, found `{s}`")))
        };
        match f.as_slice() {
            ["nodetype", name, count] => spec.node_types.push((name.to_string(), n(count)?)),
            ["relation", name, src, dst, d] => {
                let directed = match *d {
                    "0" => false,
                    "1" => true,
                    _ => return Err(perr(no, format!("directed flag must be 0 or 1, found `{d}`"))),
                };
                spec.relations
                    .push((name.to_string(), src.to_string(), dst.to_string(), directed));
            }
            ["snapshots", t] => spec.snapshots = n(t)?,
            ["rule", a, b, p] => {
                spec.rule = Some(PlantedRule {
                    trigger: a.to_string(),
                    target: b.to_string(),
                    p_rule: x(p)?,
                })
            }
            ["noise", v] => spec.noise = x(v)?,
            ["activity", v] => spec.activity = n(v)?,
            ["period", r, p] => {
                spec.periods.insert(r.to_string(), n(p)?);
            }
            ["features", d] => spec.feature_dim = n(d)?,
            ["seed", s] => {
                spec.seed = s
                    .parse()
                    .map_err(|_| perr(no, format!("expected a seed, found `{s}`")))?
            }
            ["granularity", rest @ ..] => spec.granularity = rest.join(" "),
            _ => return Err(perr(no, format!("unrecognized line `{line}`"))),
        }
    }
    spec.validate()?;
    Ok(spec)
}

/// Ordered edge set.
#[derive(Default)]
struct EdgeSet {
    list: Vec<(usize, usize)>,
    seen: HashSet<(usize, usize)>,
    mirrored: bool,
}

impl EdgeSet {
    fn insert(&mut self, e: (usize, usize)) {
        if self.mirrored && self.seen.contains(&(e.1, e.0)) {
            return;
        }
        if self.seen.insert(e) {
            self.list.push(e);
        }
    }
}

/// Generates a dataset from `spec`. Structure draws come from one stream per
/// `(relation, snapshot)` and features from one stream per node type.
pub fn synth_generate(spec: &SynthSpec) -> Result<(TemporalHeteroGraph, OracleLabels)> {
    spec.validate()?;
    let type_of = |n: &str| spec.node_types.iter().position(|t| t.0 == n).expect("validated");
    let node_types: Vec<NodeType> = spec
        .node_types
        .iter()
        .enumerate()
        .map(|(id, (name, _))| NodeType {
            id,
            name: name.clone(),
            feature_dim: spec.feature_dim,
        })
        .collect();
    let relations: Vec<Relation> = spec
        .relations
        .iter()
        .enumerate()
        .map(|(id, (name, s, d, directed))| Relation {
            id,
            name: name.clone(),
            src_type: type_of(s),
            dst_type: type_of(d),
            directed: *directed,
        })
        .collect();
    let counts: Vec<usize> = spec.node_types.iter().map(|t| t.1).collect();
    let rule = spec.rule.as_ref().map(|r| {
        (
            spec.relation_index(&r.trigger),
            spec.relation_index(&r.target),
            r.p_rule,
        )
    });
    let mut snapshots: Vec<HeteroSnapshot> = Vec::with_capacity(spec.snapshots);
    let mut planted = vec![Vec::new(); spec.snapshots];
    for t in 1..=spec.snapshots {
        let mut edges = Vec::with_capacity(relations.len());
        for rel in &relations {
            let mut rng = stream(spec.seed, Purpose::SynthStructure, &[rel.id as u64, t as u64]);
            let (n_src, n_dst) = (counts[rel.src_type], counts[rel.dst_type]);
            let mut set = EdgeSet {
                mirrored: !rel.directed && rel.src_type == rel.dst_type,
                ..EdgeSet::default()
            };
            let is_target = rule.is_some_and(|r| r.1 == rel.id);
            let period = spec.periods.get(&rel.name).copied().unwrap_or(1);
            if (!is_target || t == 1) && (t - 1) % period == 0 {
                for u in 0..n_src {
                    for _ in 0..spec.activity {
                        set.insert((u, rng.random_range(0..n_dst)));
                    }
                }
            }
            if let Some((trigger, target, p)) = rule {
                if rel.id == target && t >= 2 {
                    for &e in snapshots[t - 2].edges(trigger) {
                        if rng.random_bool(p) {
                            set.insert(e);
                            planted[t - 1].push(e);
                        }
                    }
                }
            }
            for u in 0..n_src {
                if rng.random_bool(spec.noise) {
                    set.insert((u, rng.random_range(0..n_dst)));
                }
            }
            edges.push(set.list);
        }
        snapshots.push(HeteroSnapshot {
            index: t,
            node_counts: counts.clone(),
            edges,
        });
    }
    let features = node_types
        .iter()
        .map(|ty| {
            (spec.feature_dim > 0).then(|| {
                let mut rng = stream(spec.seed, Purpose::SynthFeatures, &[ty.id as u64]);
                let n = counts[ty.id] * spec.feature_dim;
                let data = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                Tensor::from_vec(counts[ty.id], spec.feature_dim, data).expect("sized")
            })
        })
        .collect();
    let graph = TemporalHeteroGraph::new(node_types, relations, snapshots, features, spec.granularity.clone())?;
    let (trigger, target) = rule.map_or((0, 0), |r| (r.0, r.1));
    Ok((
        graph,
        OracleLabels {
            trigger,
            target,
            planted,
        },
    ))
}

/// The brute-force rule predictor for snapshot `t`: a candidate scores 1 if
/// it was a trigger edge at `t - 1`, else 0.
#[allow(clippy::type_complexity)]
pub fn rule_scorer(
    graph: &TemporalHeteroGraph,
    trigger: usize,
    t: usize,
) -> Result<impl Fn(&[(usize, usize)]) -> Vec<f64>> {
    if t < 2 {
        return Err(Error::Contract("the rule predicts from the previous snapshot".into()));
    }
    let seen: HashSet<(usize, usize)> = graph.snapshot(t - 1)?.edges(trigger).iter().copied().collect();
    Ok(move |pairs: &[(usize, usize)]| pairs.iter().map(|e| if seen.contains(e) { 1.0 } else { 0.0 }).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::check_requirements;

    #[test]
    fn same_seed_same_graph() {
        let spec = SynthSpec {
            seed: 3,
            ..SynthSpec::default()
        };
        let a = synth_generate(&spec).unwrap();
        let b = synth_generate(&spec).unwrap();
        assert_eq!(a, b);
        assert!(check_requirements(&a.0).meets_requirements);
    }

    #[test]
    fn zero_rule_probability_leaves_target_empty() {
        let mut spec = SynthSpec {
            noise: 0.0,
            ..SynthSpec::default()
        };
        spec.rule.as_mut().unwrap().p_rule = 0.0;
        let (g, _) = synth_generate(&spec).unwrap();
        for t in 2..=spec.snapshots {
            assert!(g.snapshot(t).unwrap().edges(1).is_empty());
        }
    }

    #[test]
    fn certain_rule_copies_every_trigger() {
        let mut spec = SynthSpec {
            noise: 0.0,
            ..SynthSpec::default()
        };
        spec.rule.as_mut().unwrap().p_rule = 1.0;
        let (g, labels) = synth_generate(&spec).unwrap();
        for t in 2..=spec.snapshots {
            let mut prev = g.snapshot(t - 1).unwrap().edges(0).to_vec();
            let mut now = g.snapshot(t).unwrap().edges(1).to_vec();
            prev.sort_unstable();
            now.sort_unstable();
            assert_eq!(prev, now);
            assert_eq!(labels.planted[t - 1].len(), now.len());
        }
    }

    #[test]
    fn periods_thin_out_base_edges() {
        let mut spec = SynthSpec {
            noise: 0.0,
            ..SynthSpec::default()
        };
        spec.periods.insert("click".into(), 2);
        let (g, _) = synth_generate(&spec).unwrap();
        assert!(!g.snapshot(1).unwrap().edges(0).is_empty());
        assert!(g.snapshot(2).unwrap().edges(0).is_empty());
        assert!(!g.snapshot(3).unwrap().edges(0).is_empty());
    }

    #[test]
    fn rejects_short_horizons() {
        let spec = SynthSpec {
            snapshots: 3,
            ..SynthSpec::default()
        };
        assert!(matches!(synth_generate(&spec), Err(Error::Validation(_))));
    }

    #[test]
    fn parses_the_text_format() {
        let text = "nodetype user 20\nnodetype item 10\n\
            relation click user item 0\nrelation buy user item 0 # target\n\
            snapshots 5\nrule click buy 0.5\nnoise 0.1\nactivity 3\nperiod click 1\n\
            features 4\nseed 9\ngranularity hour\n";
        let spec = parse_synth_spec(text, Path::new("s.txt")).unwrap();
        assert_eq!(spec.snapshots, 5);
        assert_eq!(spec.rule.unwrap().p_rule, 0.5);
        assert_eq!(spec.granularity, "hour");
        let err = parse_synth_spec("snapshots x\n", Path::new("s.txt"));
        assert!(matches!(err, Err(Error::Parse { line: 1, .. })));
    }
}
