//! Source text → (token ids, aligned incidence) → encoder → classifier.

use std::collections::BTreeSet;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{CloneHead, FrozenEncoder, HostError};
use crate::adapter::{AdapterParameters, IncidenceIndex};
use crate::generator::{generate, GeneratorConfig};
use crate::incidence::{filter_types, offset_tokens, truncate_remap, HyperedgeType, TokenizedHypergraph};
use crate::parsing::Language;
use crate::tokenizer::Tokenizer;

/// Id of the start token prepended to every sequence.
pub const START_ID: usize = 0;
/// Id of empty or unmapped token strings.
pub const UNKNOWN_ID: usize = 1;

/// Turns snippets into encoder inputs.
#[derive(Clone, Debug)]
pub struct SnippetEncoder {
    pub language: Language,
    pub tokenizer: Tokenizer,
    pub generator: GeneratorConfig,
    /// Hyperedge types kept; an empty set leaves a plain adapter.
    pub enabled: BTreeSet<HyperedgeType>,
    /// Includes the start token.
    pub max_len: usize,
    pub vocab_size: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct EncodedSnippet {
    pub ids: Vec<usize>,
    pub graph: TokenizedHypergraph,
    #[serde(skip)]
    pub index: IncidenceIndex,
}

#[derive(Clone, Debug)]
pub struct EncodedPair {
    pub a: EncodedSnippet,
    pub b: EncodedSnippet,
    pub label: bool,
}

impl SnippetEncoder {
    pub fn new(language: Language, tokenizer: Tokenizer, max_len: usize, vocab_size: usize) -> Self {
        Self {
            language,
            tokenizer,
            generator: GeneratorConfig::default(),
            enabled: HyperedgeType::ALL.into_iter().collect(),
            max_len,
            vocab_size,
        }
    }

    /// Vocabulary ids shifted past the reserved ids and folded into the
    /// encoder's vocabulary; tokens without an id are hashed instead.
    pub fn token_id(&self, token: &str) -> usize {
        let room = self.vocab_size - 2;
        if token.is_empty() {
            return UNKNOWN_ID;
        }
        if let Some(id) = self.tokenizer.token_id(token) {
            return 2 + id as usize % room;
        }
        let digest = Sha256::digest(token.as_bytes());
        let word = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"));
        2 + (word % room as u64) as usize
    }

    /// Extract, truncate to leave room for the start token, drop disabled
    /// types, and shift everything one position right.
    pub fn encode(&self, source: &str) -> Result<EncodedSnippet, HostError> {
        if self.max_len < 1 || self.vocab_size < 3 {
            return Err(HostError::Config("max_len >= 1 and vocab_size >= 3 required".into()));
        }
        let g = generate(source, self.language, &self.tokenizer, &self.generator)?;
        let g = truncate_remap(&g, self.max_len - 1);
        let g = filter_types(&g, &self.enabled);
        let g = offset_tokens(&g, 1, g.token_count + 1)?;
        let ids = std::iter::once(START_ID)
            .chain(g.tokens[1..].iter().map(|t| self.token_id(t)))
            .collect();
        let index = IncidenceIndex::new(&g)?;
        Ok(EncodedSnippet { ids, graph: g, index })
    }
}

/// Frozen encoder, optional adapters and the classifier head.
#[derive(Clone, Debug)]
pub struct ClonePipeline {
    pub snippets: SnippetEncoder,
    pub encoder: FrozenEncoder,
    pub adapters: Option<AdapterParameters>,
    pub head: CloneHead,
}

impl ClonePipeline {
    /// Position-0 vector of the final hidden states.
    pub fn represent(&self, s: &EncodedSnippet) -> Result<Vec<f64>, HostError> {
        let out = self.encoder.forward(&s.ids, &s.index, self.adapters.as_ref(), false)?;
        Ok(out.hidden.row(0).to_vec())
    }

    pub fn p_clone_encoded(&self, a: &EncodedSnippet, b: &EncodedSnippet) -> Result<f64, HostError> {
        Ok(self.head.forward(&self.represent(a)?, &self.represent(b)?)?.p_clone())
    }

    /// Probability that `code_a` and `code_b` are clones. The pair is
    /// ordered: swapping the snippets generally changes the result.
    pub fn clone_classify(&self, code_a: &str, code_b: &str) -> Result<f64, HostError> {
        self.p_clone_encoded(&self.snippets.encode(code_a)?, &self.snippets.encode(code_b)?)
    }

    pub fn encode_pair(&self, code_a: &str, code_b: &str, label: bool) -> Result<EncodedPair, HostError> {
        Ok(EncodedPair {
            a: self.snippets.encode(code_a)?,
            b: self.snippets.encode(code_b)?,
            label,
        })
    }
}
