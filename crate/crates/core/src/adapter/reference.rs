//! Scalar-loop restatement of the adapter forward pass, generic over the
//! number type. It shares no code with the matrix kernels, so it serves as
//! an independent oracle; over [`DoubleDouble`](crate::numerics::DoubleDouble)
//! it gives finite differences with ~32 significant digits to work with.

use super::{AdapterLayer, IncidenceIndex};
use crate::numerics::{Matrix, Real};

/// One layer's tensors as nested scalar vectors.
#[derive(Clone, Debug)]
pub struct ReferenceLayer<T> {
    w_down: Vec<Vec<T>>,
    b_down: Vec<T>,
    w_up: Vec<Vec<T>>,
    b_up: Vec<T>,
    q: Vec<Vec<T>>,
    w_type: Vec<Vec<Vec<T>>>,
    b_type: Vec<Vec<T>>,
}

pub fn rows<T: Real>(m: &Matrix) -> Vec<Vec<T>> {
    (0..m.rows())
        .map(|r| m.row(r).iter().map(|&v| T::from_f64(v)).collect())
        .collect()
}

fn vector<T: Real>(m: &Matrix) -> Vec<T> {
    m.as_slice().iter().map(|&v| T::from_f64(v)).collect()
}

impl<T: Real> ReferenceLayer<T> {
    pub fn new(layer: &AdapterLayer) -> Self {
        Self {
            w_down: rows(&layer.w_down),
            b_down: vector(&layer.b_down),
            w_up: rows(&layer.w_up),
            b_up: vector(&layer.b_up),
            q: layer.q.iter().map(vector).collect(),
            w_type: layer.w_type.iter().map(rows).collect(),
            b_type: layer.b_type.iter().map(vector).collect(),
        }
    }
}

/// Membership lists derived from the pair list.
#[derive(Clone, Debug)]
pub struct ReferenceIncidence {
    members: Vec<Vec<usize>>,
    edges_of: Vec<Vec<usize>>,
    types: Vec<usize>,
}

impl ReferenceIncidence {
    pub fn new(index: &IncidenceIndex) -> Self {
        let mut members = vec![Vec::new(); index.edge_count()];
        let mut edges_of = vec![Vec::new(); index.token_count()];
        for (&t, &e) in index.tokens().iter().zip(index.edges()) {
            members[e].push(t);
            edges_of[t].push(e);
        }
        Self {
            members,
            edges_of,
            types: index.edge_types().iter().map(|t| t.index()).collect(),
        }
    }
}

pub struct ReferenceOutput<T> {
    pub h: Vec<Vec<T>>,
    pub o: Vec<Vec<T>>,
    /// Sign of every pre-activation, row-major.
    pub positive: Vec<bool>,
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

fn softmax<T: Real>(scores: &[T]) -> Vec<T> {
    let max = scores.iter().copied().fold(scores[0], T::max);
    let exps: Vec<T> = scores.iter().map(|&s| (s - max).exp()).collect();
    let sum = exps.iter().copied().fold(T::zero(), |a, b| a + b);
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn reference_forward<T: Real>(
    layer: &ReferenceLayer<T>,
    h: &[Vec<T>],
    carry: Option<&[Vec<T>]>,
    inc: &ReferenceIncidence,
) -> ReferenceOutput<T> {
    let cd = layer.b_down.len();
    let scale = T::from_f64(1.0) / T::from_f64(cd as f64).sqrt();
    let mut positive = Vec::new();

    let x: Vec<Vec<T>> = h
        .iter()
        .enumerate()
        .map(|(n, hn)| {
            (0..cd)
                .map(|i| {
                    let mut z = dot(&layer.w_down[i], hn) + layer.b_down[i];
                    if let Some(c) = carry {
                        z = z + c[n][i];
                    }
                    positive.push(z > T::zero());
                    if z > T::zero() {
                        z
                    } else {
                        T::zero()
                    }
                })
                .collect()
        })
        .collect();

    let transformed: Vec<Vec<T>> = inc
        .members
        .iter()
        .zip(&inc.types)
        .map(|(members, &ty)| {
            let scores: Vec<T> = members.iter().map(|&n| dot(&layer.q[ty], &x[n]) * scale).collect();
            let weights = softmax(&scores);
            let pooled: Vec<T> = (0..cd)
                .map(|i| {
                    members
                        .iter()
                        .zip(&weights)
                        .fold(T::zero(), |acc, (&n, &a)| acc + a * x[n][i])
                })
                .collect();
            (0..cd)
                .map(|i| dot(&layer.w_type[ty][i], &pooled) + layer.b_type[ty][i])
                .collect()
        })
        .collect();

    let o: Vec<Vec<T>> = inc
        .edges_of
        .iter()
        .enumerate()
        .map(|(n, edges)| {
            if edges.is_empty() {
                return vec![T::zero(); cd];
            }
            let scores: Vec<T> = edges.iter().map(|&e| dot(&x[n], &transformed[e]) * scale).collect();
            let weights = softmax(&scores);
            (0..cd)
                .map(|i| {
                    edges
                        .iter()
                        .zip(&weights)
                        .fold(T::zero(), |acc, (&e, &a)| acc + a * transformed[e][i])
                })
                .collect()
        })
        .collect();

    let h_out = h
        .iter()
        .zip(&x)
        .map(|(hn, xn)| {
            hn.iter()
                .enumerate()
                .map(|(c, &v)| v + dot(&layer.w_up[c], xn) + layer.b_up[c])
                .collect()
        })
        .collect();

    ReferenceOutput { h: h_out, o, positive }
}
