//! Hypergraph views of source code and the adapter layers that consume them.
//!
//! The extraction half ([`parsing`], [`tokenizer`], [`generator`],
//! [`incidence`]) turns a snippet into a token sequence with three kinds of
//! typed hyperedges: AST family, lexical and line. The numeric half
//! ([`numerics`], [`adapter`], [`host`]) implements the hypergraph adapter
//! layer with hand-written backward passes, hosts it in a small frozen
//! transformer encoder and trains only the adapters on a clone detection task.

pub mod adapter;
pub mod corpus;
pub mod generator;
pub mod host;
pub mod incidence;
pub mod numerics;
pub mod parsing;
pub mod selftest;
pub mod tokenizer;

pub use generator::{generate, stats, AstScope, CorpusStats, GeneratorConfig};
pub use incidence::{HyperedgeType, TokenizedHypergraph, ValidationReport};
pub use parsing::Language;
pub use tokenizer::Tokenizer;
