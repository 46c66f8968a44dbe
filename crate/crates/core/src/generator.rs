//! Tokens-and-hyperedges generator.
//!
//! One postorder pass over the syntax tree produces the token sequence and all
//! three hyperedge kinds:
//!
//! * at a leaf, its text is tokenized and the tokens get consecutive ids; if
//!   there are at least `min_tokens_for_hyperedge` of them they form a
//!   lexical hyperedge. The leaf's start line is looked up in a line →
//!   hyperedge dictionary; a new line opens a new line hyperedge, a known one
//!   is extended.
//! * at an internal node, the tokens returned by its children are collected;
//!   if there are at least `min_tokens_for_hyperedge` they form an AST family
//!   hyperedge, and all of them are returned to the parent.
//!
//! Hyperedge ids follow creation order.

use std::collections::HashMap;
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::incidence::{HyperedgeType, TokenizedHypergraph};
use crate::parsing::{self, InternalInfo, Language, LeafInfo, ParseError, PostorderVisitor};
use crate::tokenizer::Tokenizer;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GenerateError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("invalid generator config: {0}")]
    Config(String),
    #[error("corpus is empty")]
    EmptyCorpus,
}

/// Which internal nodes open AST family hyperedges.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AstScope {
    /// Every internal node, over all tokens of its subtree.
    #[default]
    AllInternalNodes,
    /// Only nodes with leaf children, over the tokens of those leaves.
    DirectParentsOnly,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub min_tokens_for_hyperedge: usize,
    pub ast_scope: AstScope,
    pub include_comments: bool,
    pub max_ast_hyperedge_size: Option<usize>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            min_tokens_for_hyperedge: 3,
            ast_scope: AstScope::AllInternalNodes,
            include_comments: true,
            max_ast_hyperedge_size: None,
        }
    }
}

impl GeneratorConfig {
    pub fn check(&self) -> Result<(), GenerateError> {
        if self.min_tokens_for_hyperedge < 2 {
            return Err(GenerateError::Config(format!(
                "min_tokens_for_hyperedge must be >= 2, got {}",
                self.min_tokens_for_hyperedge
            )));
        }
        Ok(())
    }
}

/// Token span handed from a node to its parent.
struct Returned {
    span: Range<usize>,
    from_leaf: bool,
}

struct Builder<'a> {
    tokenizer: &'a Tokenizer,
    config: &'a GeneratorConfig,
    tokens: Vec<String>,
    lines: Vec<usize>,
    hyperedges: Vec<(HyperedgeType, Vec<usize>)>,
    line_hyperedge: HashMap<usize, usize>,
}

impl Builder<'_> {
    fn open(&mut self, ty: HyperedgeType, members: Vec<usize>) -> usize {
        self.hyperedges.push((ty, members));
        self.hyperedges.len() - 1
    }
}

impl PostorderVisitor for Builder<'_> {
    type Output = Returned;

    fn on_leaf(&mut self, leaf: &LeafInfo) -> Returned {
        let start = self.tokens.len();
        if leaf.is_comment && !self.config.include_comments {
            return Returned {
                span: start..start,
                from_leaf: true,
            };
        }
        let pieces = self.tokenizer.tokenize(&leaf.text);
        let count = pieces.len();
        self.tokens.extend(pieces);
        self.lines.extend(std::iter::repeat_n(leaf.start_line, count));
        let span = start..self.tokens.len();

        if count >= self.config.min_tokens_for_hyperedge {
            self.open(HyperedgeType::Lexical, span.clone().collect());
        }
        if count > 0 {
            match self.line_hyperedge.get(&leaf.start_line) {
                Some(&e) => self.hyperedges[e].1.extend(span.clone()),
                None => {
                    let e = self.open(HyperedgeType::Line, span.clone().collect());
                    self.line_hyperedge.insert(leaf.start_line, e);
                }
            }
        }
        Returned { span, from_leaf: true }
    }

    fn on_internal(&mut self, _node: &InternalInfo, children: Vec<Returned>) -> Returned {
        let start = children.first().map_or(self.tokens.len(), |c| c.span.start);
        let end = children.last().map_or(start, |c| c.span.end);
        let members: Vec<usize> = match self.config.ast_scope {
            AstScope::AllInternalNodes => (start..end).collect(),
            AstScope::DirectParentsOnly => children
                .iter()
                .filter(|c| c.from_leaf)
                .flat_map(|c| c.span.clone())
                .collect(),
        };
        let within_cap = self
            .config
            .max_ast_hyperedge_size
            .is_none_or(|cap| members.len() <= cap);
        if members.len() >= self.config.min_tokens_for_hyperedge && within_cap {
            self.open(HyperedgeType::AstFamily, members);
        }
        Returned {
            span: start..end,
            from_leaf: false,
        }
    }
}

/// Extracts the token sequence and typed hyperedges of one snippet.
pub fn generate(
    source: &str,
    language: Language,
    tokenizer: &Tokenizer,
    config: &GeneratorConfig,
) -> Result<TokenizedHypergraph, GenerateError> {
    config.check()?;
    let tree = parsing::parse(source, language)?;
    Ok(generate_from_tree(&tree, tokenizer, config))
}

/// [`generate`] for raw bytes; fails on non-UTF-8 input.
pub fn generate_bytes(
    source: &[u8],
    language: Language,
    tokenizer: &Tokenizer,
    config: &GeneratorConfig,
) -> Result<TokenizedHypergraph, GenerateError> {
    config.check()?;
    let tree = parsing::parse_bytes(source, language)?;
    Ok(generate_from_tree(&tree, tokenizer, config))
}

pub fn generate_from_tree(
    tree: &parsing::SyntaxTree,
    tokenizer: &Tokenizer,
    config: &GeneratorConfig,
) -> TokenizedHypergraph {
    let mut builder = Builder {
        tokenizer,
        config,
        tokens: Vec::new(),
        lines: Vec::new(),
        hyperedges: Vec::new(),
        line_hyperedge: HashMap::new(),
    };
    parsing::postorder(tree, &mut builder);
    TokenizedHypergraph::from_members(
        builder.tokens,
        Some(builder.lines),
        builder.hyperedges,
        tree.language().name(),
    )
}

/// Corpus-level means of tokens and hyperedges per snippet.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub language: Language,
    /// Snippets that were extracted and enter the means.
    pub snippet_count: usize,
    /// Snippets that failed to parse; excluded from the means.
    pub failed_count: usize,
    pub total_tokens: u64,
    pub total_hyperedges: u64,
    pub total_ast_family: u64,
    pub total_lexical: u64,
    pub total_line: u64,
    pub avg_tokens: f64,
    pub avg_hyperedges: f64,
    pub avg_ast_family: f64,
    pub avg_lexical: f64,
    pub avg_line: f64,
}

/// Rounds half away from zero to two decimals.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

impl CorpusStats {
    pub fn from_graphs(language: Language, graphs: &[TokenizedHypergraph], failed: usize) -> Self {
        let count = |ty| graphs.iter().map(|g| g.count_of_type(ty) as u64).sum::<u64>();
        let total_tokens = graphs.iter().map(|g| g.token_count as u64).sum();
        let total_hyperedges = graphs.iter().map(|g| g.hyperedge_count() as u64).sum();
        let (ast, lex, line) = (
            count(HyperedgeType::AstFamily),
            count(HyperedgeType::Lexical),
            count(HyperedgeType::Line),
        );
        let n = graphs.len();
        let mean = |total: u64| if n == 0 { 0.0 } else { round2(total as f64 / n as f64) };
        Self {
            language,
            snippet_count: n,
            failed_count: failed,
            total_tokens,
            total_hyperedges,
            total_ast_family: ast,
            total_lexical: lex,
            total_line: line,
            avg_tokens: mean(total_tokens),
            avg_hyperedges: mean(total_hyperedges),
            avg_ast_family: mean(ast),
            avg_lexical: mean(lex),
            avg_line: mean(line),
        }
    }
}

/// Extracts every snippet (in parallel) and averages the counts.
pub fn stats<S: AsRef<[u8]> + Sync>(
    corpus: &[S],
    language: Language,
    tokenizer: &Tokenizer,
    config: &GeneratorConfig,
) -> Result<CorpusStats, GenerateError> {
    if corpus.is_empty() {
        return Err(GenerateError::EmptyCorpus);
    }
    config.check()?;
    let results: Vec<Result<TokenizedHypergraph, GenerateError>> = corpus
        .par_iter()
        .map(|src| generate_bytes(src.as_ref(), language, tokenizer, config))
        .collect();
    let failed = results.iter().filter(|r| r.is_err()).count();
    let graphs: Vec<_> = results.into_iter().filter_map(Result::ok).collect();
    Ok(CorpusStats::from_graphs(language, &graphs, failed))
}
