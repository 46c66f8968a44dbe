//! Independent re-extraction of hyperedges, written without the generator's
//! single-pass traversal: leaves are collected first, then lines are grouped
//! from the leaf list and families from a separate recursive subtree walk.

#![allow(dead_code)]

use std::collections::BTreeMap;

use hgcode::parsing::{parse, Language};
use hgcode::{HyperedgeType, TokenizedHypergraph, Tokenizer};
use tree_sitter::Node;

pub type Edge = (HyperedgeType, Vec<usize>);

pub struct Extraction {
    pub tokens: Vec<String>,
    pub edges: Vec<Edge>,
}

struct Leaf {
    id: usize,
    line: usize,
    tokens: std::ops::Range<usize>,
}

fn collect_leaves(node: Node<'_>, src: &[u8], tok: &Tokenizer, tokens: &mut Vec<String>, out: &mut Vec<Leaf>) {
    if node.child_count() == 0 {
        let text = String::from_utf8_lossy(&src[node.start_byte()..node.end_byte()]);
        let start = tokens.len();
        tokens.extend(tok.tokenize(&text));
        out.push(Leaf {
            id: node.id(),
            line: node.start_position().row + 1,
            tokens: start..tokens.len(),
        });
        return;
    }
    let mut cursor = node.walk();
    for child in node.children(&mut cursor) {
        collect_leaves(child, src, tok, tokens, out);
    }
}

/// Token ids under `node`, appending one family per qualifying internal node.
fn families(node: Node<'_>, leaf_tokens: &BTreeMap<usize, Vec<usize>>, min: usize, out: &mut Vec<Edge>) -> Vec<usize> {
    if node.child_count() == 0 {
        return leaf_tokens[&node.id()].clone();
    }
    let mut cursor = node.walk();
    let mut all = Vec::new();
    for child in node.children(&mut cursor) {
        all.extend(families(child, leaf_tokens, min, out));
    }
    if all.len() >= min {
        out.push((HyperedgeType::AstFamily, all.clone()));
    }
    all
}

/// Default-configuration extraction (all internal nodes, comments kept,
/// minimum size `min`).
pub fn reextract(source: &str, language: Language, tok: &Tokenizer, min: usize) -> Extraction {
    let tree = parse(source, language).expect("parses");
    let root = tree.root_node();
    let mut tokens = Vec::new();
    let mut leaves = Vec::new();
    if root.child_count() > 0 || root.start_byte() < root.end_byte() {
        collect_leaves(root, source.as_bytes(), tok, &mut tokens, &mut leaves);
    }

    let mut edges = Vec::new();
    let mut by_line: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for leaf in &leaves {
        if leaf.tokens.len() >= min {
            edges.push((HyperedgeType::Lexical, leaf.tokens.clone().collect()));
        }
        by_line.entry(leaf.line).or_default().extend(leaf.tokens.clone());
    }
    edges.extend(
        by_line
            .into_values()
            .filter(|m| !m.is_empty())
            .map(|m| (HyperedgeType::Line, m)),
    );
    if root.child_count() > 0 {
        let leaf_tokens = leaves.iter().map(|l| (l.id, l.tokens.clone().collect())).collect();
        families(root, &leaf_tokens, min, &mut edges);
    }
    Extraction { tokens, edges }
}

/// Hyperedges of `g` as a sorted multiset.
pub fn edge_multiset(g: &TokenizedHypergraph) -> Vec<Edge> {
    let mut edges: Vec<Edge> = g.hyperedge_types.iter().copied().zip(g.members()).collect();
    edges.sort();
    edges
}

pub fn sorted(mut edges: Vec<Edge>) -> Vec<Edge> {
    for (_, m) in &mut edges {
        m.sort_unstable();
    }
    edges.sort();
    edges
}

/// Whether the AST family hyperedges of `g` are pairwise disjoint or nested,
/// by brute force over all pairs.
pub fn families_laminar(g: &TokenizedHypergraph) -> bool {
    let fams: Vec<Vec<usize>> = g
        .hyperedge_types
        .iter()
        .zip(g.members())
        .filter(|(t, _)| **t == HyperedgeType::AstFamily)
        .map(|(_, m)| m)
        .collect();
    for a in &fams {
        for b in &fams {
            let shared = a.iter().filter(|t| b.contains(t)).count();
            if shared != 0 && shared != a.len() && shared != b.len() {
                return false;
            }
        }
    }
    true
}
