//! Grammar registry and deterministic postorder traversal over tree-sitter
//! concrete syntax trees.
//!
//! A leaf is any node without children: named identifiers, anonymous
//! punctuation, comments and childless error nodes alike. Error-recovery nodes
//! with children are walked like any other internal node.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tree_sitter::{Node, Parser, Tree};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("unsupported language '{0}'")]
    UnsupportedLanguage(String),
    #[error("invalid encoding: {0}")]
    InvalidEncoding(String),
    #[error("parser failed for {0}")]
    ParserFailed(Language),
}

/// The six supported source languages.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    Ruby,
    JavaScript,
    Java,
    Go,
    Php,
    Python,
}

/// Grammar crate versions compiled into this build.
pub const GRAMMAR_VERSIONS: [(Language, &str); 6] = [
    (Language::Ruby, "tree-sitter-ruby 0.23"),
    (Language::JavaScript, "tree-sitter-javascript 0.25"),
    (Language::Java, "tree-sitter-java 0.23"),
    (Language::Go, "tree-sitter-go 0.25"),
    (Language::Php, "tree-sitter-php 0.25 (php_only)"),
    (Language::Python, "tree-sitter-python 0.25"),
];

impl Language {
    pub const ALL: [Language; 6] = [
        Self::Ruby,
        Self::JavaScript,
        Self::Java,
        Self::Go,
        Self::Php,
        Self::Python,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Ruby => "ruby",
            Self::JavaScript => "javascript",
            Self::Java => "java",
            Self::Go => "go",
            Self::Php => "php",
            Self::Python => "python",
        }
    }

    pub fn extensions(self) -> &'static [&'static str] {
        match self {
            Self::Ruby => &["rb"],
            Self::JavaScript => &["js"],
            Self::Java => &["java"],
            Self::Go => &["go"],
            Self::Php => &["php"],
            Self::Python => &["py"],
        }
    }

    pub fn from_extension(ext: &str) -> Option<Self> {
        let ext = ext.to_ascii_lowercase();
        Self::ALL.into_iter().find(|l| l.extensions().contains(&ext.as_str()))
    }

    /// The tree-sitter grammar for this language. PHP uses the `php_only`
    /// grammar so that snippets without an opening `<?php` tag parse as code.
    pub fn grammar(self) -> tree_sitter::Language {
        match self {
            Self::Ruby => tree_sitter_ruby::LANGUAGE.into(),
            Self::JavaScript => tree_sitter_javascript::LANGUAGE.into(),
            Self::Java => tree_sitter_java::LANGUAGE.into(),
            Self::Go => tree_sitter_go::LANGUAGE.into(),
            Self::Php => tree_sitter_php::LANGUAGE_PHP_ONLY.into(),
            Self::Python => tree_sitter_python::LANGUAGE.into(),
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Language {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ruby" | "rb" => Ok(Self::Ruby),
            "javascript" | "js" => Ok(Self::JavaScript),
            "java" => Ok(Self::Java),
            "go" | "golang" => Ok(Self::Go),
            "php" => Ok(Self::Php),
            "python" | "py" => Ok(Self::Python),
            _ => Err(ParseError::UnsupportedLanguage(s.to_string())),
        }
    }
}

/// A parsed source file.
pub struct SyntaxTree {
    tree: Tree,
    source: String,
    language: Language,
}

impl fmt::Debug for SyntaxTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SyntaxTree")
            .field("language", &self.language)
            .field("root", &self.tree.root_node().to_sexp())
            .finish()
    }
}

impl SyntaxTree {
    pub fn root_node(&self) -> Node<'_> {
        self.tree.root_node()
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn language(&self) -> Language {
        self.language
    }

    /// Text of `node`, lossily decoded. The flag reports whether replacement
    /// characters were introduced.
    pub fn node_text(&self, node: Node<'_>) -> (String, bool) {
        let bytes = &self.source.as_bytes()[node.start_byte()..node.end_byte()];
        match std::str::from_utf8(bytes) {
            Ok(s) => (s.to_string(), false),
            Err(_) => (String::from_utf8_lossy(bytes).into_owned(), true),
        }
    }
}

/// Parses UTF-8 source text. Syntax errors never fail the parse; they show up
/// as `ERROR`/`MISSING` nodes in the tree.
pub fn parse(source: &str, language: Language) -> Result<SyntaxTree, ParseError> {
    let mut parser = Parser::new();
    parser
        .set_language(&language.grammar())
        .map_err(|_| ParseError::ParserFailed(language))?;
    let tree = parser.parse(source, None).ok_or(ParseError::ParserFailed(language))?;
    Ok(SyntaxTree {
        tree,
        source: source.to_string(),
        language,
    })
}

/// [`parse`] for raw bytes, rejecting input that is not UTF-8.
pub fn parse_bytes(source: &[u8], language: Language) -> Result<SyntaxTree, ParseError> {
    let text = std::str::from_utf8(source).map_err(|e| ParseError::InvalidEncoding(e.to_string()))?;
    parse(text, language)
}

/// A childless node as seen by the traversal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LeafInfo {
    pub text: String,
    /// 1-based line of the first byte.
    pub start_line: usize,
    pub byte_span: (usize, usize),
    pub kind: String,
    /// The leaf is, or sits inside, a comment node.
    pub is_comment: bool,
    pub is_error: bool,
    /// Text was not valid UTF-8 and was lossily decoded.
    pub lossy: bool,
}

/// An internal node as seen by the traversal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InternalInfo {
    pub kind: String,
    pub byte_span: (usize, usize),
    pub start_line: usize,
    pub child_count: usize,
    pub is_error: bool,
    pub is_root: bool,
}

/// Callbacks for [`postorder`]. Each node produces a value that is handed to
/// its parent's `on_internal`.
pub trait PostorderVisitor {
    type Output;

    fn on_leaf(&mut self, leaf: &LeafInfo) -> Self::Output;

    fn on_internal(&mut self, node: &InternalInfo, children: Vec<Self::Output>) -> Self::Output;
}

fn is_comment_kind(kind: &str) -> bool {
    kind.contains("comment")
}

struct Frame<'t, T> {
    node: Node<'t>,
    comment: bool,
    next_child: u32,
    results: Vec<T>,
}

/// Walks `tree` in postorder: leaves fire left to right, each internal node
/// fires after all of its children, and the root fires last. Returns the
/// root's value, or `None` for a tree with no nodes at all.
///
/// The walk uses an explicit stack, so deeply nested sources cannot overflow.
pub fn postorder<V: PostorderVisitor>(tree: &SyntaxTree, visitor: &mut V) -> Option<V::Output> {
    let root = tree.root_node();
    let leaf = |node: Node<'_>, comment: bool| {
        let (text, lossy) = tree.node_text(node);
        LeafInfo {
            text,
            start_line: node.start_position().row + 1,
            byte_span: (node.start_byte(), node.end_byte()),
            kind: node.kind().to_string(),
            is_comment: comment || is_comment_kind(node.kind()),
            is_error: node.is_error() || node.is_missing(),
            lossy,
        }
    };

    if root.child_count() == 0 {
        // A bare root is a leaf of an otherwise empty tree; an empty source
        // produces a root spanning zero bytes, which has no leaves at all.
        if root.start_byte() == root.end_byte() {
            return Some(visitor.on_internal(&internal_info(root, true), Vec::new()));
        }
        return Some(visitor.on_leaf(&leaf(root, false)));
    }

    let mut stack = vec![Frame {
        node: root,
        comment: is_comment_kind(root.kind()),
        next_child: 0,
        results: Vec::new(),
    }];
    while let Some(top) = stack.last_mut() {
        if top.next_child < top.node.child_count() {
            let child = top.node.child(top.next_child).expect("child index within child_count");
            top.next_child += 1;
            let comment = top.comment || is_comment_kind(child.kind());
            if child.child_count() == 0 {
                let out = visitor.on_leaf(&leaf(child, comment));
                top.results.push(out);
            } else {
                stack.push(Frame {
                    node: child,
                    comment,
                    next_child: 0,
                    results: Vec::new(),
                });
            }
            continue;
        }
        let frame = stack.pop().expect("non-empty stack");
        let is_root = stack.is_empty();
        let out = visitor.on_internal(&internal_info(frame.node, is_root), frame.results);
        match stack.last_mut() {
            Some(parent) => parent.results.push(out),
            None => return Some(out),
        }
    }
    None
}

fn internal_info(node: Node<'_>, is_root: bool) -> InternalInfo {
    InternalInfo {
        kind: node.kind().to_string(),
        byte_span: (node.start_byte(), node.end_byte()),
        start_line: node.start_position().row + 1,
        child_count: node.child_count() as usize,
        is_error: node.is_error(),
        is_root,
    }
}

/// Collects every leaf in traversal order.
pub fn leaves(tree: &SyntaxTree) -> Vec<LeafInfo> {
    struct Collect(Vec<LeafInfo>);
    impl PostorderVisitor for Collect {
        type Output = ();
        fn on_leaf(&mut self, leaf: &LeafInfo) {
            self.0.push(leaf.clone());
        }
        fn on_internal(&mut self, _: &InternalInfo, _: Vec<()>) {}
    }
    let mut c = Collect(Vec::new());
    postorder(tree, &mut c);
    c.0
}

/// Postorder sequence of node kinds, leaves and internal nodes alike. Two
/// sources with equal shapes differ at most in leaf text.
pub fn node_kind_sequence(tree: &SyntaxTree) -> Vec<String> {
    struct Kinds(Vec<String>);
    impl PostorderVisitor for Kinds {
        type Output = ();
        fn on_leaf(&mut self, leaf: &LeafInfo) {
            self.0.push(leaf.kind.clone());
        }
        fn on_internal(&mut self, node: &InternalInfo, _: Vec<()>) {
            self.0.push(node.kind.clone());
        }
    }
    let mut k = Kinds(Vec::new());
    postorder(tree, &mut k);
    k.0
}
