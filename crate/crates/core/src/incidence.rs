//! Typed token/hyperedge incidence.
//!
//! A [`TokenizedHypergraph`] is a token sequence plus a COO list of
//! `(token_id, hyperedge_id)` membership pairs and one [`HyperedgeType`] per
//! hyperedge. Every operation in this module is a pure function returning a
//! new value; the in-memory incidence list is always kept sorted by
//! `(hyperedge_id, token_id)`, which is also the serialized order.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The three correlation kinds a hyperedge can carry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HyperedgeType {
    /// All tokens under one internal syntax node.
    AstFamily,
    /// The subword pieces of a single leaf.
    Lexical,
    /// All tokens of leaves starting on one source line.
    Line,
}

impl HyperedgeType {
    pub const ALL: [HyperedgeType; 3] = [Self::AstFamily, Self::Lexical, Self::Line];

    /// Dense index used for per-type parameter tables.
    pub fn index(self) -> usize {
        match self {
            Self::AstFamily => 0,
            Self::Lexical => 1,
            Self::Line => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::AstFamily => "ast_family",
            Self::Lexical => "lexical",
            Self::Line => "line",
        }
    }
}

impl fmt::Display for HyperedgeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HyperedgeType {
    type Err = IncidenceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "ast_family" | "ast" => Ok(Self::AstFamily),
            "lexical" => Ok(Self::Lexical),
            "line" => Ok(Self::Line),
            other => Err(IncidenceError::UnknownType(other.to_string())),
        }
    }
}

/// Parses a comma separated list such as `ast_family,line`; the empty string
/// yields the empty set.
pub fn parse_type_set(list: &str) -> Result<BTreeSet<HyperedgeType>, IncidenceError> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(HyperedgeType::from_str)
        .collect()
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IncidenceError {
    #[error("offset overflow: offset {offset} + {tokens} tokens exceeds new total {new_total}")]
    OffsetOverflow {
        offset: usize,
        tokens: usize,
        new_total: usize,
    },
    #[error("unknown hyperedge type '{0}'")]
    UnknownType(String),
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// Token sequence with typed hyperedges in COO layout.
///
/// `tokens.len() == token_count` always holds. Positions that do not come from
/// source text (special tokens added by [`offset_tokens`]) hold the empty string
/// and line `0`.
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenizedHypergraph {
    pub tokens: Vec<String>,
    pub token_count: usize,
    pub incidence: Vec<(usize, usize)>,
    pub hyperedge_types: Vec<HyperedgeType>,
    pub line_of_token: Option<Vec<usize>>,
    pub source_language: String,
    /// Set once tokens were cut by [`truncate_remap`]; relaxes the minimum
    /// AST family / lexical size from 3 to 2.
    #[serde(default, skip_serializing_if = "is_false")]
    pub truncated: bool,
}

impl TokenizedHypergraph {
    /// An empty graph for `language`.
    pub fn empty(language: impl Into<String>) -> Self {
        Self {
            source_language: language.into(),
            line_of_token: Some(Vec::new()),
            ..Self::default()
        }
    }

    pub fn hyperedge_count(&self) -> usize {
        self.hyperedge_types.len()
    }

    /// Member token ids of every hyperedge, each list ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.hyperedge_count()];
        for &(t, e) in &self.incidence {
            if let Some(list) = out.get_mut(e) {
                list.push(t);
            }
        }
        for list in &mut out {
            list.sort_unstable();
        }
        out
    }

    /// Hyperedge ids containing each token.
    pub fn memberships(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.token_count];
        for &(t, e) in &self.incidence {
            if let Some(list) = out.get_mut(t) {
                list.push(e);
            }
        }
        out
    }

    pub fn count_of_type(&self, ty: HyperedgeType) -> usize {
        self.hyperedge_types.iter().filter(|&&t| t == ty).count()
    }

    /// Builds a graph from per-hyperedge member lists, sorting the incidence
    /// into canonical order.
    pub fn from_members(
        tokens: Vec<String>,
        line_of_token: Option<Vec<usize>>,
        hyperedges: Vec<(HyperedgeType, Vec<usize>)>,
        source_language: impl Into<String>,
    ) -> Self {
        let mut incidence = Vec::new();
        let mut types = Vec::with_capacity(hyperedges.len());
        for (e, (ty, members)) in hyperedges.into_iter().enumerate() {
            types.push(ty);
            incidence.extend(members.into_iter().map(|t| (t, e)));
        }
        let mut g = Self {
            token_count: tokens.len(),
            tokens,
            incidence,
            hyperedge_types: types,
            line_of_token,
            source_language: source_language.into(),
            truncated: false,
        };
        g.canonicalize();
        g
    }

    /// Sorts incidence by `(hyperedge_id, token_id)`.
    pub fn canonicalize(&mut self) {
        self.incidence.sort_unstable_by_key(|&(t, e)| (e, t));
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.canonical_clone()).expect("hypergraph serializes")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.canonical_clone()).expect("hypergraph serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    fn canonical_clone(&self) -> Self {
        let mut g = self.clone();
        g.canonicalize();
        g
    }

    /// Keeps the hyperedges for which `keep(id, type, members)` holds and
    /// renumbers survivors contiguously in their original order.
    fn retain_hyperedges<F>(&self, mut keep: F) -> Self
    where
        F: FnMut(usize, HyperedgeType, &[usize]) -> bool,
    {
        let members = self.members();
        let mut kept = Vec::new();
        for (e, list) in members.into_iter().enumerate() {
            let ty = self.hyperedge_types[e];
            if keep(e, ty, &list) {
                kept.push((ty, list));
            }
        }
        let mut g = Self::from_members(
            self.tokens.clone(),
            self.line_of_token.clone(),
            kept,
            self.source_language.clone(),
        );
        g.token_count = self.token_count;
        g.truncated = self.truncated;
        g
    }
}

/// One broken invariant.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub rule: &'static str,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn has_rule(&self, rule: &str) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok {
            return f.write_str("ok");
        }
        for v in &self.violations {
            writeln!(f, "{}: {}", v.rule, v.detail)?;
        }
        Ok(())
    }
}

/// Checks every structural invariant. The minimum size for AST family and
/// lexical hyperedges is 3, or 2 for truncated graphs.
pub fn validate(g: &TokenizedHypergraph) -> ValidationReport {
    validate_with_min_size(g, if g.truncated { 2 } else { 3 })
}

/// [`validate`] with an explicit minimum AST family / lexical size, for graphs
/// generated under a lowered threshold.
pub fn validate_with_min_size(g: &TokenizedHypergraph, min_group: usize) -> ValidationReport {
    let mut violations = Vec::new();
    let mut push = |rule: &'static str, detail: String| violations.push(Violation { rule, detail });

    let n = g.token_count;
    let e_count = g.hyperedge_count();
    if g.tokens.len() != n {
        push(
            "token_count mismatch",
            format!("{} token strings but token_count = {n}", g.tokens.len()),
        );
    }
    if let Some(lines) = &g.line_of_token {
        if lines.len() != n {
            push(
                "line_of_token length",
                format!("{} entries for {n} tokens", lines.len()),
            );
        }
    }

    let mut seen = HashSet::with_capacity(g.incidence.len());
    let mut sizes = vec![0usize; e_count];
    for (i, &(t, e)) in g.incidence.iter().enumerate() {
        if t >= n {
            push("token_id out of range", format!("pair {i} = ({t}, {e}) with N = {n}"));
        }
        if e >= e_count {
            push(
                "hyperedge_id out of range",
                format!("pair {i} = ({t}, {e}) with E = {e_count}"),
            );
        } else {
            sizes[e] += 1;
        }
        if !seen.insert((t, e)) {
            push("duplicate pair", format!("({t}, {e})"));
        }
    }
    if g.incidence.windows(2).any(|w| (w[0].1, w[0].0) > (w[1].1, w[1].0)) {
        push(
            "incidence not sorted",
            "pairs must be ordered by (hyperedge_id, token_id)".to_string(),
        );
    }

    for (e, (&size, ty)) in sizes.iter().zip(&g.hyperedge_types).enumerate() {
        if size == 0 {
            push("hyperedge ids not contiguous", format!("hyperedge {e} has no members"));
            continue;
        }
        match ty {
            HyperedgeType::AstFamily if size < min_group => {
                push("ast_family size < 3", format!("hyperedge {e} has {size} members"))
            }
            HyperedgeType::Lexical if size < min_group => {
                push("lexical size < 3", format!("hyperedge {e} has {size} members"))
            }
            _ => {}
        }
    }

    ValidationReport {
        ok: violations.is_empty(),
        violations,
    }
}

/// Drops tokens at positions `>= max_tokens` and every hyperedge left with
/// fewer than two members, renumbering the survivors in order.
pub fn truncate_remap(g: &TokenizedHypergraph, max_tokens: usize) -> TokenizedHypergraph {
    if max_tokens >= g.token_count {
        return g.clone();
    }
    let mut cut = g.clone();
    cut.tokens.truncate(max_tokens);
    if let Some(lines) = &mut cut.line_of_token {
        lines.truncate(max_tokens);
    }
    cut.token_count = max_tokens;
    cut.incidence.retain(|&(t, _)| t < max_tokens);
    cut.truncated = true;
    cut.retain_hyperedges(|_, _, members| members.len() >= 2)
}

/// Shifts every token id by `offset` and widens the sequence to `new_total`
/// positions. Added positions hold empty token strings and line 0.
pub fn offset_tokens(
    g: &TokenizedHypergraph,
    offset: usize,
    new_total: usize,
) -> Result<TokenizedHypergraph, IncidenceError> {
    let n = g.token_count;
    if offset.checked_add(n).is_none_or(|end| end > new_total) {
        return Err(IncidenceError::OffsetOverflow {
            offset,
            tokens: n,
            new_total,
        });
    }
    let tail = new_total - offset - n;
    let pad = |v: &[String]| {
        let mut out = Vec::with_capacity(new_total);
        out.resize(offset, String::new());
        out.extend_from_slice(v);
        out.resize(new_total, String::new());
        out
    };
    let lines = g.line_of_token.as_ref().map(|lines| {
        let mut out = vec![0; offset];
        out.extend_from_slice(lines);
        out.extend(std::iter::repeat_n(0, tail));
        out
    });
    Ok(TokenizedHypergraph {
        tokens: pad(&g.tokens),
        token_count: new_total,
        incidence: g.incidence.iter().map(|&(t, e)| (t + offset, e)).collect(),
        hyperedge_types: g.hyperedge_types.clone(),
        line_of_token: lines,
        source_language: g.source_language.clone(),
        truncated: g.truncated,
    })
}

/// Removes hyperedges whose type is not in `enabled`.
pub fn filter_types(g: &TokenizedHypergraph, enabled: &BTreeSet<HyperedgeType>) -> TokenizedHypergraph {
    if HyperedgeType::ALL.iter().all(|t| enabled.contains(t)) {
        return g.clone();
    }
    g.retain_hyperedges(|_, ty, _| enabled.contains(&ty))
}

/// First pair of `ty` hyperedges that overlap without one containing the
/// other, or `None` when those hyperedges form a laminar family.
pub fn laminar_conflict(g: &TokenizedHypergraph, ty: HyperedgeType) -> Option<(usize, usize)> {
    let members = g.members();
    let sets: Vec<(usize, BTreeSet<usize>)> = g
        .hyperedge_types
        .iter()
        .enumerate()
        .filter(|&(_, &t)| t == ty)
        .map(|(e, _)| (e, members[e].iter().copied().collect()))
        .collect();
    for (i, (a, sa)) in sets.iter().enumerate() {
        for (b, sb) in &sets[i + 1..] {
            let shared = sa.intersection(sb).count();
            if shared != 0 && shared != sa.len().min(sb.len()) {
                return Some((*a, *b));
            }
        }
    }
    None
}
