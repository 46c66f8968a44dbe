//! The desk-scale clone-detection run, end to end from a single seed.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{
    make_synthetic_clone_set, train_adapters, CloneHead, ClonePipeline, EncodedPair, FrozenEncoder,
    FrozenEncoderConfig, HostError, SnippetEncoder, TrainConfig, TrainReport,
};
use crate::adapter::{init_parameters, Checkpoint, PlmShapeConfig};
use crate::incidence::HyperedgeType;
use crate::parsing::Language;
use crate::tokenizer::Tokenizer;

/// Defaults to a three-layer host: the start token belongs to no hyperedge
/// and the carry only feeds the next adapter, so with two layers the
/// start token's final state cannot depend on the hyperedges at all.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoConfig {
    pub seed: u64,
    pub encoder: FrozenEncoderConfig,
    pub bottleneck: usize,
    pub train_size: usize,
    pub val_size: usize,
    /// Hyperedge types kept by the pipeline.
    pub enabled: BTreeSet<HyperedgeType>,
    pub train: TrainConfig,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            encoder: FrozenEncoderConfig {
                layers: 3,
                ..FrozenEncoderConfig::default()
            },
            bottleneck: 8,
            train_size: 256,
            val_size: 64,
            enabled: HyperedgeType::ALL.into_iter().collect(),
            train: TrainConfig::default(),
        }
    }
}

/// Everything derived from a [`DemoConfig`] before training.
pub struct DemoSetup {
    pub pipeline: ClonePipeline,
    pub train: Vec<EncodedPair>,
    pub val: Vec<EncodedPair>,
}

impl DemoConfig {
    /// Builds the pipeline and encodes both splits. The encoder, data and
    /// initial adapters depend only on `seed`, never on `enabled`, so runs
    /// that differ only in hyperedge types start from identical states.
    pub fn setup(&self) -> Result<DemoSetup, HostError> {
        let encoder = FrozenEncoder::new(FrozenEncoderConfig {
            seed: self.seed,
            ..self.encoder
        })?;
        let shape = PlmShapeConfig::new(self.encoder.layers, self.encoder.hidden, self.bottleneck)?;
        let mut snippets = SnippetEncoder::new(
            Language::Java,
            Tokenizer::demo(),
            self.encoder.max_len,
            self.encoder.vocab_size,
        );
        snippets.enabled = self.enabled.clone();
        let pipeline = ClonePipeline {
            snippets,
            encoder,
            adapters: Some(init_parameters(shape, self.seed.wrapping_add(1))?),
            head: CloneHead::new(self.encoder.hidden, self.seed.wrapping_add(2)),
        };
        let encode = |seed: u64, size: usize| -> Result<Vec<EncodedPair>, HostError> {
            make_synthetic_clone_set(seed, size)?
                .iter()
                .map(|ex| pipeline.encode_pair(&ex.code_a, &ex.code_b, ex.label.is_clone()))
                .collect()
        };
        let train = encode(self.seed.wrapping_mul(2).wrapping_add(1000), self.train_size)?;
        let val = encode(self.seed.wrapping_mul(2).wrapping_add(1001), self.val_size)?;
        Ok(DemoSetup { pipeline, train, val })
    }
}

pub fn run_clone_demo(cfg: &DemoConfig) -> Result<(TrainReport, Checkpoint), HostError> {
    let DemoSetup {
        mut pipeline,
        train,
        val,
    } = cfg.setup()?;
    let train_cfg = TrainConfig {
        seed: cfg.seed,
        ..cfg.train.clone()
    };
    train_adapters(&mut pipeline, &train, &val, &train_cfg)
}
