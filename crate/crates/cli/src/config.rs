//! `key = value` run configuration files.

use std::fmt;
use std::path::{Path, PathBuf};

use thn_core::decoders::DecoderKind;
use thn_core::layers::{AggregationKind, NeighborAggregation};
use thn_core::numerics::OptimizerKind;
use thn_core::temporal::Activation;
use thn_core::training::Supervision;
use thn_core::{LiveUpdateConfig, ModelSpec, Scheme, Task, TemporalHeteroGraph, UpdateKind};

/// Every key a config file may set.
pub const KEYS: &[&str] = &[
    "scheme",
    "update",
    "alpha",
    "input_dim",
    "dims",
    "neighbor_agg",
    "aggregation",
    "attention_dim",
    "activation",
    "decoder",
    "decoder_hidden",
    "optimizer",
    "lr",
    "weight_decay",
    "beta1",
    "beta2",
    "eps",
    "val_fraction",
    "patience",
    "max_epochs",
    "neg_ratio",
    "task",
    "target_relation",
    "supervision",
    "seed",
];

#[derive(Debug)]
pub struct ConfigError {
    pub path: PathBuf,
    pub line: Option<usize>,
    pub msg: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{}:{}: {}", self.path.display(), l, self.msg),
            None => write!(f, "{}: {}", self.path.display(), self.msg),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskChoice {
    Mono,
    Multi,
}

/// Update module choice before `alpha` is attached.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateChoice {
    Gru,
    Mlp,
    Avg,
}

/// A parsed config, not yet resolved against a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfigFile {
    pub model: ModelSpec,
    pub live: LiveUpdateConfig,
    pub update: UpdateChoice,
    pub alpha: f64,
    pub task: TaskChoice,
    pub target_relation: Option<String>,
    pub path: PathBuf,
}

impl Default for RunConfigFile {
    fn default() -> Self {
        let model = ModelSpec::default();
        let (update, alpha) = split_update(model.update);
        Self {
            model,
            live: LiveUpdateConfig::default(),
            update,
            alpha,
            task: TaskChoice::Multi,
            target_relation: None,
            path: PathBuf::from("<defaults>"),
        }
    }
}

fn split_update(kind: UpdateKind) -> (UpdateChoice, f64) {
    match kind {
        UpdateKind::Gru => (UpdateChoice::Gru, 0.1),
        UpdateKind::ConcatMlp => (UpdateChoice::Mlp, 0.1),
        UpdateKind::WeightedAverage { alpha } => (UpdateChoice::Avg, alpha),
    }
}

pub fn parse_scheme(s: &str) -> Result<Scheme, String> {
    match s {
        "uta" => Ok(Scheme::Uta),
        "atu" => Ok(Scheme::Atu),
        _ => Err(format!("expected uta or atu, found `{s}`")),
    }
}

pub fn parse_update(s: &str) -> Result<UpdateChoice, String> {
    match s {
        "gru" => Ok(UpdateChoice::Gru),
        "mlp" => Ok(UpdateChoice::Mlp),
        "avg" => Ok(UpdateChoice::Avg),
        _ => Err(format!("expected gru, mlp or avg, found `{s}`")),
    }
}

pub fn parse_task(s: &str) -> Result<TaskChoice, String> {
    match s {
        "mono" => Ok(TaskChoice::Mono),
        "multi" => Ok(TaskChoice::Multi),
        _ => Err(format!("expected mono or multi, found `{s}`")),
    }
}

fn num<T: std::str::FromStr>(s: &str) -> Result<T, String> {
    s.parse().map_err(|_| format!("cannot parse `{s}`"))
}

fn pick<T: Copy>(s: &str, options: &[(&str, T)]) -> Result<T, String> {
    options.iter().find(|o| o.0 == s).map(|o| o.1).ok_or_else(|| {
        let names: Vec<_> = options.iter().map(|o| o.0).collect();
        format!("expected one of {}, found `{s}`", names.join(", "))
    })
}

impl RunConfigFile {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            path: path.to_path_buf(),
            line: None,
            msg: e.to_string(),
        })?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let mut cfg = Self {
            path: path.to_path_buf(),
            ..Self::default()
        };
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| ConfigError {
                path: path.to_path_buf(),
                line: Some(i + 1),
                msg,
            };
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err(format!("expected `key = value`, found `{line}`")))?;
            cfg.set(key, value).map_err(|m| err(format!("{key}: {m}")))?;
        }
        Ok(cfg)
    }

    /// Applies one key.
    pub fn set(&mut self, key: &str, v: &str) -> Result<(), String> {
        let m = &mut self.model;
        let o = &mut m.optimizer;
        let l = &mut self.live;
        match key {
            "scheme" => m.scheme = parse_scheme(v)?,
            "update" => self.update = parse_update(v)?,
            "alpha" => self.alpha = num(v)?,
            "input_dim" => m.input_dim = num(v)?,
            "dims" => m.dims = v.split(',').map(|d| num(d.trim())).collect::<Result<_, _>>()?,
            "neighbor_agg" => {
                m.neighbor_agg = pick(
                    v,
                    &[("sum", NeighborAggregation::Sum), ("mean", NeighborAggregation::Mean)],
                )?
            }
            "aggregation" => {
                m.aggregation = pick(
                    v,
                    &[("sum", AggregationKind::Sum), ("attention", AggregationKind::Attention)],
                )?
            }
            "attention_dim" => m.attention_dim = num(v)?,
            "activation" => m.activation = pick(v, &[("relu", Activation::Relu), ("none", Activation::None)])?,
            "decoder" => {
                m.decoder = pick(
                    v,
                    &[
                        ("hadamard_mlp", DecoderKind::HadamardMlp),
                        ("complex", DecoderKind::ComplEx),
                    ],
                )?
            }
            "decoder_hidden" => m.decoder_hidden = num(v)?,
            "optimizer" => o.kind = pick(v, &[("adam", OptimizerKind::Adam), ("adagrad", OptimizerKind::Adagrad)])?,
            "lr" => o.lr = num(v)?,
            "weight_decay" => o.weight_decay = num(v)?,
            "beta1" => o.beta1 = num(v)?,
            "beta2" => o.beta2 = num(v)?,
            "eps" => o.eps = num(v)?,
            "val_fraction" => l.val_fraction = num(v)?,
            "patience" => l.patience = num(v)?,
            "max_epochs" => l.max_epochs = num(v)?,
            "neg_ratio" => l.neg_ratio = num(v)?,
            "task" => self.task = parse_task(v)?,
            "target_relation" => self.target_relation = Some(v.to_string()),
            "supervision" => {
                l.supervision = pick(v, &[("current", Supervision::Current), ("next", Supervision::Next)])?
            }
            "seed" => {
                let s = num(v)?;
                l.seed = s;
                m.seed = s;
            }
            _ => return Err(format!("unknown key; valid keys are {}", KEYS.join(", "))),
        }
        Ok(())
    }

    /// Final model spec and protocol config for `graph`.
    pub fn resolve(&self, graph: &TemporalHeteroGraph) -> Result<(ModelSpec, LiveUpdateConfig), ConfigError> {
        let err = |msg: String| ConfigError {
            path: self.path.clone(),
            line: None,
            msg,
        };
        let mut model = self.model.clone();
        model.update = match self.update {
            UpdateChoice::Gru => UpdateKind::Gru,
            UpdateChoice::Mlp => UpdateKind::ConcatMlp,
            UpdateChoice::Avg => UpdateKind::WeightedAverage { alpha: self.alpha },
        };
        model.validate().map_err(|e| err(e.to_string()))?;
        let mut live = self.live;
        live.task = match self.task {
            TaskChoice::Multi => Task::Multi,
            TaskChoice::Mono => {
                let name = self
                    .target_relation
                    .as_deref()
                    .ok_or_else(|| err("task = mono requires the key `target_relation`".into()))?;
                let rel = graph
                    .relation_by_name(name)
                    .ok_or_else(|| err(format!("target_relation `{name}` is not a relation of the dataset")))?;
                Task::Mono { relation: rel.id }
            }
        };
        live.validate().map_err(|e| err(e.to_string()))?;
        Ok((model, live))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfigFile, ConfigError> {
        RunConfigFile::parse(text, Path::new("run.cfg"))
    }

    #[test]
    fn parses_keys_and_comments() {
        let c = parse("# run\nscheme = atu\nupdate = avg  # past weight below\nalpha = 0.25\ndims = 8, 4\nseed = 9\n")
            .unwrap();
        assert_eq!(c.model.scheme, Scheme::Atu);
        assert_eq!(c.update, UpdateChoice::Avg);
        assert_eq!(c.alpha, 0.25);
        assert_eq!(c.model.dims, vec![8, 4]);
        assert_eq!((c.live.seed, c.model.seed), (9, 9));
    }

    #[test]
    fn unknown_key_is_rejected_with_line() {
        let e = parse("lr = 0.1\nlearning_rate = 0.1\n").unwrap_err();
        assert_eq!(e.line, Some(2));
        assert!(e.msg.contains("unknown key"));
    }

    #[test]
    fn bad_value_names_the_key() {
        let e = parse("patience = soon\n").unwrap_err();
        assert!(e.msg.starts_with("patience:"), "{}", e.msg);
    }

    #[test]
    fn missing_equals_is_rejected() {
        assert!(parse("scheme uta\n").is_err());
    }

    #[test]
    fn every_key_is_settable() {
        let mut c = RunConfigFile::default();
        let sample = |k: &str| match k {
            "scheme" => "uta",
            "update" => "gru",
            "neighbor_agg" | "aggregation" => "sum",
            "activation" => "relu",
            "decoder" => "complex",
            "optimizer" => "adagrad",
            "task" => "mono",
            "target_relation" => "r",
            "supervision" => "next",
            "dims" => "4,4",
            "alpha" | "lr" | "weight_decay" | "beta1" | "beta2" | "eps" | "val_fraction" => "0.5",
            _ => "3",
        };
        for k in KEYS {
            c.set(k, sample(k)).unwrap_or_else(|e| panic!("{k}: {e}"));
        }
    }
}
