use serde::{Deserialize, Serialize};

use crate::decoders::DecoderKind;
use crate::error::{Error, Result};
use crate::layers::{AggregationKind, NeighborAggregation};
use crate::numerics::OptimizerSpec;

/// Where the temporal update sits relative to semantic aggregation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Update-then-aggregate: one state and one update module per relation.
    #[default]
    Uta,
    /// Aggregate-then-update: one state and one update module per layer.
    Atu,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Uta => "uta",
            Scheme::Atu => "atu",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UpdateKind {
    Gru,
    ConcatMlp,
    /// `(1 - alpha) * current + alpha * past`.
    WeightedAverage {
        alpha: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    None,
}

/// Declarative model configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub scheme: Scheme,
    /// Width of the per-type input projection.
    pub input_dim: usize,
    /// Output width of each message-passing layer.
    pub dims: Vec<usize>,
    pub neighbor_agg: NeighborAggregation,
    pub aggregation: AggregationKind,
    pub attention_dim: usize,
    pub update: UpdateKind,
    /// Applied to a layer's output before it feeds the next layer.
    pub activation: Activation,
    pub decoder: DecoderKind,
    pub decoder_hidden: usize,
    pub optimizer: OptimizerSpec,
    /// Parameter initialization seed.
    pub seed: u64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            scheme: Scheme::Uta,
            input_dim: 64,
            dims: vec![64, 64],
            neighbor_agg: NeighborAggregation::Sum,
            aggregation: AggregationKind::Attention,
            attention_dim: 32,
            update: UpdateKind::WeightedAverage { alpha: 0.1 },
            activation: Activation::Relu,
            decoder: DecoderKind::HadamardMlp,
            decoder_hidden: 64,
            optimizer: OptimizerSpec::default(),
            seed: 0,
        }
    }
}

impl ModelSpec {
    pub fn num_layers(&self) -> usize {
        self.dims.len()
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap_or(&self.input_dim)
    }

    /// Width feeding layer `l`.
    pub fn layer_input_dim(&self, l: usize) -> usize {
        if l == 0 {
            self.input_dim
        } else {
            self.dims[l - 1]
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.dims.len()) {
            return Err(Error::Validation(format!(
                "models have 1 or 2 message-passing layers, got {}",
                self.dims.len()
            )));
        }
        if self.input_dim == 0 || self.dims.contains(&0) {
            return Err(Error::Validation("layer widths must be positive".into()));
        }
        if self.aggregation == AggregationKind::Attention && self.attention_dim == 0 {
            return Err(Error::Validation("attention_dim must be positive".into()));
        }
        if let UpdateKind::WeightedAverage { alpha } = self.update {
            if !(0.0..=1.0).contains(&alpha) {
                return Err(Error::Validation(format!("alpha must lie in [0, 1], got {alpha}")));
            }
        }
        match self.decoder {
            DecoderKind::ComplEx if !self.output_dim().is_multiple_of(2) => Err(Error::Validation(format!(
                "the ComplEx decoder splits embeddings in halves; output width {} is odd",
                self.output_dim()
            ))),
            DecoderKind::HadamardMlp if self.decoder_hidden == 0 => {
                Err(Error::Validation("decoder_hidden must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}
