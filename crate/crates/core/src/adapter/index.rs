use super::AdapterError;
use crate::incidence::{HyperedgeType, TokenizedHypergraph};
use crate::numerics::SegmentIndex;

/// Incidence pairs arranged for both attention directions.
#[derive(Clone, Debug, PartialEq)]
pub struct IncidenceIndex {
    token_count: usize,
    tokens: Vec<usize>,
    edges: Vec<usize>,
    edge_types: Vec<HyperedgeType>,
    /// Pairs as (token, hyperedge): softmax over the tokens of a hyperedge.
    by_edge: SegmentIndex,
    /// Pairs as (hyperedge, token): softmax over the hyperedges of a token.
    by_token: SegmentIndex,
}

impl IncidenceIndex {
    pub fn new(g: &TokenizedHypergraph) -> Result<Self, AdapterError> {
        Self::from_pairs(g.token_count, &g.incidence, &g.hyperedge_types)
    }

    pub fn from_pairs(
        token_count: usize,
        pairs: &[(usize, usize)],
        edge_types: &[HyperedgeType],
    ) -> Result<Self, AdapterError> {
        for &(t, e) in pairs {
            if t >= token_count {
                return Err(AdapterError::TokenOutOfRange {
                    token: t,
                    count: token_count,
                });
            }
            if e >= edge_types.len() {
                return Err(AdapterError::HyperedgeOutOfRange {
                    edge: e,
                    count: edge_types.len(),
                });
            }
        }
        let flipped: Vec<_> = pairs.iter().map(|&(t, e)| (e, t)).collect();
        Ok(Self {
            token_count,
            tokens: pairs.iter().map(|p| p.0).collect(),
            edges: pairs.iter().map(|p| p.1).collect(),
            edge_types: edge_types.to_vec(),
            by_edge: SegmentIndex::new(pairs, edge_types.len())?,
            by_token: SegmentIndex::new(&flipped, token_count)?,
        })
    }

    pub fn token_count(&self) -> usize {
        self.token_count
    }

    pub fn edge_count(&self) -> usize {
        self.edge_types.len()
    }

    pub fn pair_count(&self) -> usize {
        self.tokens.len()
    }

    pub fn tokens(&self) -> &[usize] {
        &self.tokens
    }

    pub fn edges(&self) -> &[usize] {
        &self.edges
    }

    pub fn edge_types(&self) -> &[HyperedgeType] {
        &self.edge_types
    }

    pub fn by_edge(&self) -> &SegmentIndex {
        &self.by_edge
    }

    pub fn by_token(&self) -> &SegmentIndex {
        &self.by_token
    }

    /// Type of the hyperedge in pair `k`.
    pub fn pair_type(&self, k: usize) -> HyperedgeType {
        self.edge_types[self.edges[k]]
    }
}
