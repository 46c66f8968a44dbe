//! Pair classifier over two code vectors: concatenate, one hidden ReLU
//! layer of width `2C`, two logits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adapter::Checkpoint;
use crate::numerics::ops;
use crate::numerics::Matrix;

use super::HostError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CloneHead {
    pub w_1: Matrix,
    pub b_1: Vec<f64>,
    pub w_2: Matrix,
    pub b_2: Vec<f64>,
}

/// Intermediate values of one classification, kept for the backward pass.
#[derive(Clone, Debug)]
pub struct HeadPass {
    input: Matrix,
    pre: Matrix,
    hidden: Matrix,
    pub logits: Matrix,
}

impl HeadPass {
    /// Probability of the positive (clone) class.
    pub fn p_clone(&self) -> f64 {
        ops::softmax(self.logits.row(0))[1]
    }
}

impl CloneHead {
    /// Fan-in uniform first layer, all-zero output layer: every pair starts
    /// at p = 0.5.
    pub fn new(hidden: usize, seed: u64) -> Self {
        let width = 2 * hidden;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / (width as f64).sqrt();
        let data = (0..width * width).map(|_| rng.random_range(-bound..bound)).collect();
        Self {
            w_1: Matrix::from_vec(width, width, data).expect("sized"),
            b_1: vec![0.0; width],
            w_2: Matrix::zeros(2, width),
            b_2: vec![0.0; 2],
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            w_1: Matrix::zeros(self.w_1.rows(), self.w_1.cols()),
            b_1: vec![0.0; self.b_1.len()],
            w_2: Matrix::zeros(self.w_2.rows(), self.w_2.cols()),
            b_2: vec![0.0; self.b_2.len()],
        }
    }

    pub fn input_width(&self) -> usize {
        self.w_1.cols()
    }

    pub fn forward(&self, a: &[f64], b: &[f64]) -> Result<HeadPass, HostError> {
        let input = ops::concat_cols(&Matrix::row_vector(a), &Matrix::row_vector(b))?;
        let pre = ops::linear(&input, &self.w_1, &self.b_1)?;
        let hidden = ops::relu(&pre);
        let logits = ops::linear(&hidden, &self.w_2, &self.b_2)?;
        Ok(HeadPass {
            input,
            pre,
            hidden,
            logits,
        })
    }

    /// Head gradients and the gradients for the two input vectors.
    pub fn backward(
        &self,
        pass: &HeadPass,
        grad_logits: &Matrix,
    ) -> Result<(CloneHead, Vec<f64>, Vec<f64>), HostError> {
        let (g_hidden, g_w2, g_b2) = ops::linear_backward(&pass.hidden, &self.w_2, grad_logits)?;
        let g_pre = ops::relu_backward(&pass.pre, &g_hidden);
        let (g_in, g_w1, g_b1) = ops::linear_backward(&pass.input, &self.w_1, &g_pre)?;
        let half = g_in.cols() / 2;
        let (ga, gb) = ops::concat_cols_backward(&g_in, half);
        let grads = CloneHead {
            w_1: g_w1,
            b_1: g_b1,
            w_2: g_w2,
            b_2: g_b2,
        };
        Ok((grads, ga.into_vec(), gb.into_vec()))
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = self.w_1.as_slice().to_vec();
        out.extend_from_slice(&self.b_1);
        out.extend_from_slice(self.w_2.as_slice());
        out.extend_from_slice(&self.b_2);
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.w_1.len() + self.b_1.len() + self.w_2.len() + self.b_2.len()
    }

    pub fn assign_flat(&mut self, values: &[f64]) -> usize {
        let mut at = 0;
        let mut take = |dst: &mut [f64]| {
            dst.copy_from_slice(&values[at..at + dst.len()]);
            at += dst.len();
        };
        take(self.w_1.as_mut_slice());
        take(&mut self.b_1);
        take(self.w_2.as_mut_slice());
        take(&mut self.b_2);
        at
    }

    /// Stores the tensors under `head.*`.
    pub fn add_to(&self, ckpt: &mut Checkpoint) {
        ckpt.insert("head.W_1", &self.w_1);
        ckpt.insert("head.b_1", &Matrix::row_vector(&self.b_1));
        ckpt.insert("head.W_2", &self.w_2);
        ckpt.insert("head.b_2", &Matrix::row_vector(&self.b_2));
    }

    pub fn from_checkpoint(ckpt: &Checkpoint, hidden: usize) -> Result<Self, HostError> {
        let mut head = Self::new(hidden, 0);
        let expect = |name: &str, shape: (usize, usize)| -> Result<Matrix, HostError> {
            let m = ckpt.get(name)?;
            if m.shape() != shape {
                return Err(HostError::Config(format!(
                    "{name} has shape {:?}, expected {shape:?}",
                    m.shape()
                )));
            }
            Ok(m)
        };
        let w = 2 * hidden;
        head.w_1 = expect("head.W_1", (w, w))?;
        head.b_1 = expect("head.b_1", (1, w))?.into_vec();
        head.w_2 = expect("head.W_2", (2, w))?;
        head.b_2 = expect("head.b_2", (1, 2))?.into_vec();
        Ok(head)
    }
}
