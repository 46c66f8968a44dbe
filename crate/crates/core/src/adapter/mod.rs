//! The hypergraph adapter: a bottleneck adapter whose down-projected token
//! vectors exchange messages over code hyperedges before projecting back up.
//!
//! One [`AdapterLayer`] sits after each layer of a frozen encoder. Layer `l`
//! adds the previous layer's aggregated vectors `o` to its own
//! down-projection before the activation; layer 1 has no carry.

pub mod check;
mod checkpoint;
mod index;
mod layer;
mod params;
pub mod reference;

pub use checkpoint::Checkpoint;
pub use index::IncidenceIndex;
pub use layer::{adapter_backward, adapter_forward, ActivationTape, AdapterGradients, AdapterOutput};
pub use params::{init_parameters, AdapterLayer, AdapterParameters};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::NumericsError;

#[derive(Debug, Error)]
pub enum AdapterError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("invalid adapter config: {0}")]
    Config(String),
    #[error("token id {token} out of range for {count} tokens")]
    TokenOutOfRange { token: usize, count: usize },
    #[error("hyperedge id {edge} has no type ({count} types given)")]
    HyperedgeOutOfRange { edge: usize, count: usize },
    #[error("carry has {found} rows, expected {expected}")]
    CarryMismatch { expected: usize, found: usize },
    #[error("backward called without an activation tape (forward ran in inference mode)")]
    MissingTape,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

/// Shape of the host model as far as the adapters are concerned.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlmShapeConfig {
    pub layers: usize,
    pub hidden: usize,
    pub bottleneck: usize,
}

impl PlmShapeConfig {
    pub const DEFAULT_BOTTLENECK: usize = 64;

    pub fn new(layers: usize, hidden: usize, bottleneck: usize) -> Result<Self, AdapterError> {
        let cfg = Self {
            layers,
            hidden,
            bottleneck,
        };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<(), AdapterError> {
        if self.layers == 0 {
            return Err(AdapterError::Config("layers must be at least 1".into()));
        }
        if self.bottleneck == 0 || self.bottleneck > self.hidden {
            return Err(AdapterError::Config(format!(
                "need 1 <= bottleneck <= hidden, got bottleneck {} with hidden {}",
                self.bottleneck, self.hidden
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdapterVariant {
    /// Down-project, ReLU, up-project, residual.
    Plain,
    /// Plain plus per-type queries and heterogeneous transforms.
    Hypergraph,
}

/// Exact trainable parameter count over all layers.
pub fn count_parameters(cfg: &PlmShapeConfig, variant: AdapterVariant) -> u64 {
    let (l, c, d) = (cfg.layers as u64, cfg.hidden as u64, cfg.bottleneck as u64);
    let plain = l * (c * d + d + d * c + c);
    match variant {
        AdapterVariant::Plain => plain,
        AdapterVariant::Hypergraph => plain + l * (3 * (d * d + d) + 3 * d),
    }
}

/// Rounds a count to one decimal of its unit and renders it like `1.3M`.
pub fn format_rounded(count: u64) -> String {
    let (value, unit) = rounded_parts(count);
    format!("{value:.1}{unit}")
}

/// `count` rounded to 0.1 of millions (or billions above 1e9), in raw units.
pub fn rounded_value(count: u64) -> f64 {
    let (value, unit) = rounded_parts(count);
    value * if unit == "B" { 1e9 } else { 1e6 }
}

fn rounded_parts(count: u64) -> (f64, &'static str) {
    let (scale, unit) = if count >= 1_000_000_000 { (1e9, "B") } else { (1e6, "M") };
    ((count as f64 / scale * 10.0).round() / 10.0, unit)
}

/// A published host model with its reported total size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReferenceModel {
    pub name: &'static str,
    pub shape: PlmShapeConfig,
    /// Reported total parameter count, as printed (e.g. `125M`).
    pub reported_params: &'static str,
    pub reported_params_value: f64,
    pub reported_adapter: &'static str,
    pub reported_hgadapter: &'static str,
}

const fn shape(layers: usize, hidden: usize) -> PlmShapeConfig {
    PlmShapeConfig {
        layers,
        hidden,
        bottleneck: 64,
    }
}

pub const REFERENCE_MODELS: [ReferenceModel; 5] = [
    ReferenceModel {
        name: "RoBERTa, CodeBERT, GraphCodeBERT",
        shape: shape(12, 768),
        reported_params: "125M",
        reported_params_value: 125e6,
        reported_adapter: "1.2M",
        reported_hgadapter: "1.3M",
    },
    ReferenceModel {
        name: "UniXcoder",
        shape: shape(12, 768),
        reported_params: "126M",
        reported_params_value: 126e6,
        reported_adapter: "1.2M",
        reported_hgadapter: "1.3M",
    },
    ReferenceModel {
        name: "Code Llama 7B",
        shape: shape(32, 4096),
        reported_params: "6.7B",
        reported_params_value: 6.7e9,
        reported_adapter: "16.9M",
        reported_hgadapter: "17.3M",
    },
    ReferenceModel {
        name: "TinyLlama-Math&Code",
        shape: shape(22, 2048),
        reported_params: "1.1B",
        reported_params_value: 1.1e9,
        reported_adapter: "5.8M",
        reported_hgadapter: "6.1M",
    },
    ReferenceModel {
        name: "Qwen2.5-Coder-0.5B",
        shape: shape(24, 896),
        reported_params: "0.5B",
        reported_params_value: 0.5e9,
        reported_adapter: "2.8M",
        reported_hgadapter: "3.1M",
    },
];

/// Parameter accounting for one host shape.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParameterSummary {
    pub shape: PlmShapeConfig,
    pub adapter: u64,
    pub hgadapter: u64,
    pub adapter_rounded: String,
    pub hgadapter_rounded: String,
    /// Extra parameters of the hypergraph variant over the plain one, in %.
    pub overhead_exact_pct: f64,
    /// Same ratio computed from the 0.1M-rounded counts.
    pub overhead_rounded_pct: f64,
}

impl ParameterSummary {
    pub fn new(shape: PlmShapeConfig) -> Self {
        let adapter = count_parameters(&shape, AdapterVariant::Plain);
        let hgadapter = count_parameters(&shape, AdapterVariant::Hypergraph);
        let pct = |hg: f64, plain: f64| (hg / plain - 1.0) * 100.0;
        Self {
            shape,
            adapter,
            hgadapter,
            adapter_rounded: format_rounded(adapter),
            hgadapter_rounded: format_rounded(hgadapter),
            overhead_exact_pct: pct(hgadapter as f64, adapter as f64),
            overhead_rounded_pct: pct(rounded_value(hgadapter), rounded_value(adapter)),
        }
    }

    /// Hypergraph adapter size as a percentage of a host of `total` parameters.
    pub fn share_of(&self, total: f64) -> f64 {
        self.hgadapter as f64 / total * 100.0
    }
}
