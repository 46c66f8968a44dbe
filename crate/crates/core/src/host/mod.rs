//! A desk-scale host for the adapters: a frozen random transformer
//! encoder, a pair classifier for clone detection, a synthetic clone
//! dataset and an adapter-only trainer.

mod dataset;
mod demo;
mod encoder;
mod head;
mod optim;
mod pipeline;
mod train;

pub use dataset::{make_synthetic_clone_set, read_jsonl, write_jsonl, CloneExample, CloneLabel, TEMPLATE_COUNT};
pub use demo::{run_clone_demo, DemoConfig, DemoSetup};
pub use encoder::{EncoderLayer, EncoderOutput, FrozenEncoder, FrozenEncoderConfig};
pub use head::{CloneHead, HeadPass};
pub use optim::{Optimizer, OptimizerKind};
pub use pipeline::{ClonePipeline, EncodedPair, EncodedSnippet, SnippetEncoder, START_ID, UNKNOWN_ID};
pub use train::{binary_metrics, evaluate, train_adapters, Metrics, TrainConfig, TrainReport};

use thiserror::Error;

use crate::adapter::AdapterError;
use crate::generator::GenerateError;
use crate::incidence::IncidenceError;
use crate::numerics::NumericsError;

#[derive(Debug, Error)]
pub enum HostError {
    #[error(transparent)]
    Generate(#[from] GenerateError),
    #[error(transparent)]
    Adapter(#[from] AdapterError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Incidence(#[from] IncidenceError),
    #[error("invalid host config: {0}")]
    Config(String),
    #[error("sequence of {len} tokens exceeds the maximum of {max}")]
    SequenceTooLong { len: usize, max: usize },
    #[error("non-finite loss {loss} in epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize, loss: f64 },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}
