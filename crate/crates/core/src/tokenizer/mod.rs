//! Subword tokenization of leaf text.
//!
//! Two kinds are available: a byte-level BPE model loaded from a JSON file
//! (`{"vocab": {token: id}, "merges": ["a b", ...], "byte_level": true}`, with
//! token strings in the byte-to-unicode alphabet of [`bpe::byte_to_char`]) and
//! a vocabulary-free [`fallback`] splitter.

pub mod bpe;
pub mod fallback;

use std::collections::HashMap;
use std::path::Path;
use std::sync::OnceLock;

use thiserror::Error;

pub use bpe::ByteLevelBpe;

#[derive(Debug, Error)]
pub enum TokenizerError {
    #[error("cannot read vocabulary file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed vocabulary file, field `{field}`: {detail}")]
    Malformed { field: String, detail: String },
    #[error("duplicate merge rule {0:?}")]
    DuplicateMerge(String),
    #[error("token {0:?} contains characters outside the byte-level alphabet")]
    NotByteLevel(String),
    #[error("detokenized bytes are not UTF-8")]
    InvalidUtf8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TokenizerKind {
    ByteLevelBpe,
    Fallback,
}

#[derive(Clone, Debug)]
pub enum Tokenizer {
    ByteLevelBpe(ByteLevelBpe),
    Fallback,
}

const DEMO_VOCAB: &str = include_str!("../../data/demo_vocab.json");

impl Tokenizer {
    pub fn fallback() -> Self {
        Self::Fallback
    }

    /// Loads a byte-level BPE model from the documented JSON format.
    pub fn load_vocabulary(path: impl AsRef<Path>) -> Result<Self, TokenizerError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| TokenizerError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, TokenizerError> {
        ByteLevelBpe::from_json(text).map(Self::ByteLevelBpe)
    }

    /// The small byte-level vocabulary bundled with the crate, trained on the
    /// bundled code corpus.
    pub fn demo() -> Self {
        static DEMO: OnceLock<Tokenizer> = OnceLock::new();
        DEMO.get_or_init(|| Self::from_json(DEMO_VOCAB).expect("bundled vocabulary is valid"))
            .clone()
    }

    pub fn kind(&self) -> TokenizerKind {
        match self {
            Self::ByteLevelBpe(_) => TokenizerKind::ByteLevelBpe,
            Self::Fallback => TokenizerKind::Fallback,
        }
    }

    pub fn tokenize(&self, text: &str) -> Vec<String> {
        match self {
            Self::ByteLevelBpe(bpe) => bpe.tokenize(text),
            Self::Fallback => fallback::split(text),
        }
    }

    /// Inverse of [`tokenize`](Self::tokenize). Exact for byte-level BPE; the
    /// fallback splitter drops whitespace, so its tokens are simply joined.
    pub fn detokenize<S: AsRef<str>>(&self, tokens: &[S]) -> Result<String, TokenizerError> {
        match self {
            Self::ByteLevelBpe(_) => {
                let bytes = ByteLevelBpe::detokenize_bytes(tokens)?;
                String::from_utf8(bytes).map_err(|_| TokenizerError::InvalidUtf8)
            }
            Self::Fallback => Ok(tokens.iter().map(|t| t.as_ref()).collect()),
        }
    }

    /// Vocabulary ids; empty for the fallback splitter.
    pub fn vocabulary(&self) -> Option<&HashMap<String, u32>> {
        match self {
            Self::ByteLevelBpe(bpe) => Some(bpe.vocab()),
            Self::Fallback => None,
        }
    }

    pub fn token_id(&self, token: &str) -> Option<u32> {
        self.vocabulary().and_then(|v| v.get(token).copied())
    }
}
