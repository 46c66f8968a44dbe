//! Segment (grouped) softmax and weighted sums over COO pair lists.
//!
//! A [`SegmentIndex`] is a list of `(element, group)` pairs. Scores and
//! weights are indexed by pair position, not by element, so one element may
//! appear in several groups. Groups without pairs are allowed; they produce
//! zero rows in [`segment_weighted_sum`].

use super::{shape_err, Matrix, NumericsError};

type Result<T> = std::result::Result<T, NumericsError>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SegmentIndex {
    elements: Vec<usize>,
    groups: Vec<usize>,
    num_groups: usize,
}

impl SegmentIndex {
    pub fn new(pairs: &[(usize, usize)], num_groups: usize) -> Result<Self> {
        if let Some(&(_, g)) = pairs.iter().find(|&&(_, g)| g >= num_groups) {
            return Err(NumericsError::IndexOutOfRange {
                op: "segment_index",
                detail: format!("group {g} with {num_groups} groups"),
            });
        }
        Ok(Self {
            elements: pairs.iter().map(|p| p.0).collect(),
            groups: pairs.iter().map(|p| p.1).collect(),
            num_groups,
        })
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn num_groups(&self) -> usize {
        self.num_groups
    }

    pub fn elements(&self) -> &[usize] {
        &self.elements
    }

    pub fn groups(&self) -> &[usize] {
        &self.groups
    }

    /// Number of pairs in each group.
    pub fn group_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_groups];
        for &g in &self.groups {
            sizes[g] += 1;
        }
        sizes
    }

    /// Per-group sums of `values` (indexed by pair).
    pub fn group_sums(&self, values: &[f64]) -> Vec<f64> {
        let mut sums = vec![0.0; self.num_groups];
        for (&g, v) in self.groups.iter().zip(values) {
            sums[g] += v;
        }
        sums
    }

    fn check_elements(&self, op: &'static str, rows: usize) -> Result<()> {
        match self.elements.iter().find(|&&e| e >= rows) {
            Some(e) => Err(NumericsError::IndexOutOfRange {
                op,
                detail: format!("element {e} with {rows} rows"),
            }),
            None => Ok(()),
        }
    }
}

/// Softmax of `scores` within each group, max-shifted per group.
pub fn segment_softmax(scores: &[f64], index: &SegmentIndex) -> Result<Vec<f64>> {
    if scores.len() != index.len() {
        return Err(shape_err(
            "segment_softmax",
            format!("{} scores for {} pairs", scores.len(), index.len()),
        ));
    }
    let mut max = vec![f64::NEG_INFINITY; index.num_groups];
    for (&g, &s) in index.groups.iter().zip(scores) {
        max[g] = max[g].max(s);
    }
    let exps: Vec<f64> = index
        .groups
        .iter()
        .zip(scores)
        .map(|(&g, &s)| (s - max[g]).exp())
        .collect();
    let sums = index.group_sums(&exps);
    Ok(index.groups.iter().zip(exps).map(|(&g, e)| e / sums[g]).collect())
}

/// Backward of [`segment_softmax`] given its output weights.
pub fn segment_softmax_backward(weights: &[f64], grad_weights: &[f64], index: &SegmentIndex) -> Vec<f64> {
    let products: Vec<f64> = weights.iter().zip(grad_weights).map(|(w, g)| w * g).collect();
    let inner = index.group_sums(&products);
    index
        .groups
        .iter()
        .zip(weights.iter().zip(grad_weights))
        .map(|(&g, (w, gw))| w * (gw - inner[g]))
        .collect()
}

/// Row `g` of the result is `Σ weight_k · values[element_k]` over the pairs
/// `k` of group `g`.
pub fn segment_weighted_sum(values: &Matrix, weights: &[f64], index: &SegmentIndex) -> Result<Matrix> {
    if weights.len() != index.len() {
        return Err(shape_err(
            "segment_weighted_sum",
            format!("{} weights for {} pairs", weights.len(), index.len()),
        ));
    }
    index.check_elements("segment_weighted_sum", values.rows())?;
    let mut out = Matrix::zeros(index.num_groups, values.cols());
    for ((&e, &g), &w) in index.elements.iter().zip(&index.groups).zip(weights) {
        for (o, v) in out.row_mut(g).iter_mut().zip(values.row(e)) {
            *o += w * v;
        }
    }
    Ok(out)
}

/// Gradients of [`segment_weighted_sum`] for `values` and `weights`.
pub fn segment_weighted_sum_backward(
    values: &Matrix,
    weights: &[f64],
    index: &SegmentIndex,
    grad: &Matrix,
) -> (Matrix, Vec<f64>) {
    let mut grad_values = Matrix::zeros(values.rows(), values.cols());
    let mut grad_weights = Vec::with_capacity(index.len());
    for ((&e, &g), &w) in index.elements.iter().zip(&index.groups).zip(weights) {
        let gout = grad.row(g);
        grad_weights.push(super::ops::dot(gout, values.row(e)));
        for (gv, go) in grad_values.row_mut(e).iter_mut().zip(gout) {
            *gv += w * go;
        }
    }
    (grad_values, grad_weights)
}

/// `s_k = scale · left[li_k] · right[ri_k]` for aligned index lists.
pub fn pair_dot(
    left: &Matrix,
    left_idx: &[usize],
    right: &Matrix,
    right_idx: &[usize],
    scale: f64,
) -> Result<Vec<f64>> {
    if left.cols() != right.cols() || left_idx.len() != right_idx.len() {
        return Err(shape_err(
            "pair_dot",
            format!(
                "{:?}/{:?} with {} and {} indices",
                left.shape(),
                right.shape(),
                left_idx.len(),
                right_idx.len()
            ),
        ));
    }
    if left_idx.iter().any(|&i| i >= left.rows()) || right_idx.iter().any(|&i| i >= right.rows()) {
        return Err(NumericsError::IndexOutOfRange {
            op: "pair_dot",
            detail: "row index beyond matrix".into(),
        });
    }
    Ok(left_idx
        .iter()
        .zip(right_idx)
        .map(|(&i, &j)| scale * super::ops::dot(left.row(i), right.row(j)))
        .collect())
}

/// Gradients of [`pair_dot`] for `left` and `right`.
pub fn pair_dot_backward(
    left: &Matrix,
    left_idx: &[usize],
    right: &Matrix,
    right_idx: &[usize],
    scale: f64,
    grad: &[f64],
) -> (Matrix, Matrix) {
    let mut gl = Matrix::zeros(left.rows(), left.cols());
    let mut gr = Matrix::zeros(right.rows(), right.cols());
    for ((&i, &j), &g) in left_idx.iter().zip(right_idx).zip(grad) {
        let k = g * scale;
        for c in 0..left.cols() {
            gl[(i, c)] += k * right[(j, c)];
            gr[(j, c)] += k * left[(i, c)];
        }
    }
    (gl, gr)
}
