//! Standard dense ops and their backward passes.

use super::{shape_err, Matrix, NumericsError};

type Result<T> = std::result::Result<T, NumericsError>;

/// `a · b` for `a: m×k`, `b: k×n`.
pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols() != b.rows() {
        return Err(shape_err("matmul", format!("{:?} x {:?}", a.shape(), b.shape())));
    }
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    let mut out = Matrix::zeros(m, n);
    for i in 0..m {
        let a_row = a.row(i);
        let out_row = out.row_mut(i);
        for (p, &a_ip) in a_row.iter().enumerate().take(k) {
            for (o, &b_pj) in out_row.iter_mut().zip(b.row(p)) {
                *o += a_ip * b_pj;
            }
        }
    }
    Ok(out)
}

/// Gradients of [`matmul`] with respect to `a` and `b`.
pub fn matmul_backward(a: &Matrix, b: &Matrix, grad: &Matrix) -> Result<(Matrix, Matrix)> {
    Ok((matmul_nt(grad, b)?, matmul(&a.transpose(), grad)?))
}

/// `a · wᵀ` for `a: m×k`, `w: n×k`; the usual linear-layer product.
pub fn matmul_nt(a: &Matrix, w: &Matrix) -> Result<Matrix> {
    if a.cols() != w.cols() {
        return Err(shape_err("matmul_nt", format!("{:?} x {:?}ᵀ", a.shape(), w.shape())));
    }
    let mut out = Matrix::zeros(a.rows(), w.rows());
    for i in 0..a.rows() {
        let a_row = a.row(i);
        for j in 0..w.rows() {
            out[(i, j)] = dot(a_row, w.row(j));
        }
    }
    Ok(out)
}

/// Gradients of [`matmul_nt`]: `(grad · w, gradᵀ · a)`.
pub fn matmul_nt_backward(a: &Matrix, w: &Matrix, grad: &Matrix) -> Result<(Matrix, Matrix)> {
    Ok((matmul(grad, w)?, matmul(&grad.transpose(), a)?))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn add(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.shape() != b.shape() {
        return Err(shape_err("add", format!("{:?} + {:?}", a.shape(), b.shape())));
    }
    let mut out = a.clone();
    out.add_assign(b);
    Ok(out)
}

/// Adds `bias` to every row.
pub fn add_bias(a: &Matrix, bias: &[f64]) -> Result<Matrix> {
    if a.cols() != bias.len() {
        return Err(shape_err(
            "add_bias",
            format!("{} columns, bias of {}", a.cols(), bias.len()),
        ));
    }
    let mut out = a.clone();
    for r in 0..out.rows() {
        for (x, b) in out.row_mut(r).iter_mut().zip(bias) {
            *x += b;
        }
    }
    Ok(out)
}

/// Column sums; the bias gradient of [`add_bias`].
pub fn column_sums(grad: &Matrix) -> Vec<f64> {
    let mut out = vec![0.0; grad.cols()];
    for r in 0..grad.rows() {
        for (o, g) in out.iter_mut().zip(grad.row(r)) {
            *o += g;
        }
    }
    out
}

/// `a · wᵀ + b`.
pub fn linear(a: &Matrix, w: &Matrix, b: &[f64]) -> Result<Matrix> {
    add_bias(&matmul_nt(a, w)?, b)
}

/// Gradients of [`linear`]: `(grad_a, grad_w, grad_b)`.
pub fn linear_backward(a: &Matrix, w: &Matrix, grad: &Matrix) -> Result<(Matrix, Matrix, Vec<f64>)> {
    let (ga, gw) = matmul_nt_backward(a, w, grad)?;
    Ok((ga, gw, column_sums(grad)))
}

/// NaN passes through so that corrupted inputs still surface downstream.
pub fn relu(a: &Matrix) -> Matrix {
    a.map(|x| if x > 0.0 || x.is_nan() { x } else { 0.0 })
}

/// Passes the gradient where the input was strictly positive; the
/// subgradient at exactly 0 is 0.
pub fn relu_backward(input: &Matrix, grad: &Matrix) -> Matrix {
    let mut out = grad.clone();
    for (g, &x) in out.as_mut_slice().iter_mut().zip(input.as_slice()) {
        if x <= 0.0 {
            *g = 0.0;
        }
    }
    out
}

/// Max-shifted softmax of one vector.
pub fn softmax(v: &[f64]) -> Vec<f64> {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn softmax_backward(y: &[f64], grad: &[f64]) -> Vec<f64> {
    let inner = dot(y, grad);
    y.iter().zip(grad).map(|(yi, gi)| yi * (gi - inner)).collect()
}

pub fn softmax_rows(a: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(a.rows(), a.cols());
    for r in 0..a.rows() {
        out.row_mut(r).copy_from_slice(&softmax(a.row(r)));
    }
    out
}

/// Backward of [`softmax_rows`] given its output `y`.
pub fn softmax_rows_backward(y: &Matrix, grad: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(y.rows(), y.cols());
    for r in 0..y.rows() {
        out.row_mut(r).copy_from_slice(&softmax_backward(y.row(r), grad.row(r)));
    }
    out
}

/// Mean negative log-likelihood of `targets` under row-wise softmax of
/// `logits`. Returns the loss and the softmax probabilities.
pub fn cross_entropy_with_logits(logits: &Matrix, targets: &[usize]) -> Result<(f64, Matrix)> {
    if logits.rows() != targets.len() {
        return Err(shape_err(
            "cross_entropy",
            format!("{} rows, {} targets", logits.rows(), targets.len()),
        ));
    }
    if let Some(&t) = targets.iter().find(|&&t| t >= logits.cols()) {
        return Err(NumericsError::IndexOutOfRange {
            op: "cross_entropy",
            detail: format!("target {t} with {} classes", logits.cols()),
        });
    }
    let mut loss = 0.0;
    for (r, &t) in targets.iter().enumerate() {
        let row = logits.row(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
        loss += lse - row[t];
    }
    let n = targets.len().max(1) as f64;
    Ok((loss / n, softmax_rows(logits)))
}

/// Gradient of the mean cross entropy: `(p − onehot) / rows`.
pub fn cross_entropy_backward(probs: &Matrix, targets: &[usize]) -> Matrix {
    let n = targets.len().max(1) as f64;
    let mut g = probs.clone();
    for (r, &t) in targets.iter().enumerate() {
        g[(r, t)] -= 1.0;
    }
    g.scale(1.0 / n)
}

/// Normalization statistics kept for [`layer_norm_backward`].
#[derive(Clone, Debug)]
pub struct LayerNormCache {
    pub normalized: Matrix,
    pub inv_std: Vec<f64>,
}

/// Per-row layer normalization with affine `gamma`, `beta`.
pub fn layer_norm(x: &Matrix, gamma: &[f64], beta: &[f64], eps: f64) -> Result<(Matrix, LayerNormCache)> {
    let c = x.cols();
    if gamma.len() != c || beta.len() != c {
        return Err(shape_err(
            "layer_norm",
            format!("{c} columns, gamma {}, beta {}", gamma.len(), beta.len()),
        ));
    }
    let mut normalized = Matrix::zeros(x.rows(), c);
    let mut out = Matrix::zeros(x.rows(), c);
    let mut inv_std = Vec::with_capacity(x.rows());
    for r in 0..x.rows() {
        let row = x.row(r);
        let mean = row.iter().sum::<f64>() / c as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
        let istd = 1.0 / (var + eps).sqrt();
        inv_std.push(istd);
        for j in 0..c {
            let n = (row[j] - mean) * istd;
            normalized[(r, j)] = n;
            out[(r, j)] = n * gamma[j] + beta[j];
        }
    }
    Ok((out, LayerNormCache { normalized, inv_std }))
}

/// Gradients of [`layer_norm`]: `(grad_x, grad_gamma, grad_beta)`.
pub fn layer_norm_backward(cache: &LayerNormCache, gamma: &[f64], grad: &Matrix) -> (Matrix, Vec<f64>, Vec<f64>) {
    let (rows, c) = grad.shape();
    let mut gx = Matrix::zeros(rows, c);
    let mut ggamma = vec![0.0; c];
    let mut gbeta = vec![0.0; c];
    for r in 0..rows {
        let g = grad.row(r);
        let n = cache.normalized.row(r);
        let gn: Vec<f64> = g.iter().zip(gamma).map(|(a, b)| a * b).collect();
        let mean_gn = gn.iter().sum::<f64>() / c as f64;
        let mean_gn_n = dot(&gn, n) / c as f64;
        for j in 0..c {
            ggamma[j] += g[j] * n[j];
            gbeta[j] += g[j];
            gx[(r, j)] = cache.inv_std[r] * (gn[j] - mean_gn - n[j] * mean_gn_n);
        }
    }
    (gx, ggamma, gbeta)
}

/// Side-by-side concatenation of two matrices with equal row counts.
pub fn concat_cols(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.rows() != b.rows() {
        return Err(shape_err("concat_cols", format!("{:?} | {:?}", a.shape(), b.shape())));
    }
    let mut out = Matrix::zeros(a.rows(), a.cols() + b.cols());
    for r in 0..a.rows() {
        let row = out.row_mut(r);
        row[..a.cols()].copy_from_slice(a.row(r));
        row[a.cols()..].copy_from_slice(b.row(r));
    }
    Ok(out)
}

/// Splits the gradient of [`concat_cols`] at column `left_cols`.
pub fn concat_cols_backward(grad: &Matrix, left_cols: usize) -> (Matrix, Matrix) {
    let right_cols = grad.cols() - left_cols;
    let mut ga = Matrix::zeros(grad.rows(), left_cols);
    let mut gb = Matrix::zeros(grad.rows(), right_cols);
    for r in 0..grad.rows() {
        ga.row_mut(r).copy_from_slice(&grad.row(r)[..left_cols]);
        gb.row_mut(r).copy_from_slice(&grad.row(r)[left_cols..]);
    }
    (ga, gb)
}
