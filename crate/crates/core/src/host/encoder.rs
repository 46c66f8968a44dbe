//! A small post-LN transformer encoder with frozen random weights.
//!
//! Only the gradient with respect to each layer's input is ever needed, so
//! the backward pass never materializes weight gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HostError;
use crate::adapter::{adapter_backward, adapter_forward, ActivationTape, AdapterParameters, IncidenceIndex};
use crate::numerics::ops::{self, LayerNormCache};
use crate::numerics::Matrix;

const LN_EPS: f64 = 1e-5;
/// Query/key weights are drawn this many times wider than fan-in scale.
/// At plain fan-in scale the random attention is close to uniform, and the
/// start token's output barely depends on the sequence.
const QK_GAIN: f64 = 4.0;
/// Position codes are kept small next to token embeddings, so that a
/// one-token shift (a renamed identifier splitting differently) does not
/// scramble the whole representation.
const POSITION_STD: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrozenEncoderConfig {
    pub layers: usize,
    pub hidden: usize,
    pub heads: usize,
    pub ffn: usize,
    pub vocab_size: usize,
    pub max_len: usize,
    pub seed: u64,
}

impl Default for FrozenEncoderConfig {
    fn default() -> Self {
        Self {
            layers: 2,
            hidden: 32,
            heads: 2,
            ffn: 64,
            vocab_size: 2048,
            max_len: 128,
            seed: 0,
        }
    }
}

impl FrozenEncoderConfig {
    pub fn check(&self) -> Result<(), HostError> {
        let fail = |m: String| Err(HostError::Config(m));
        if self.layers == 0 || self.hidden == 0 || self.heads == 0 || self.ffn == 0 {
            return fail("layers, hidden, heads and ffn must all be positive".into());
        }
        if !self.hidden.is_multiple_of(self.heads) {
            return fail(format!("hidden {} not divisible by heads {}", self.hidden, self.heads));
        }
        if self.vocab_size < 3 {
            return fail(format!("vocab_size must be at least 3, got {}", self.vocab_size));
        }
        if self.max_len < 2 {
            return fail(format!("max_len must be at least 2, got {}", self.max_len));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderLayer {
    pub w_q: Matrix,
    pub b_q: Vec<f64>,
    pub w_k: Matrix,
    pub b_k: Vec<f64>,
    pub w_v: Matrix,
    pub b_v: Vec<f64>,
    pub w_o: Matrix,
    pub b_o: Vec<f64>,
    pub ln1_gamma: Vec<f64>,
    pub ln1_beta: Vec<f64>,
    pub w_1: Matrix,
    pub b_1: Vec<f64>,
    pub w_2: Matrix,
    pub b_2: Vec<f64>,
    pub ln2_gamma: Vec<f64>,
    pub ln2_beta: Vec<f64>,
}

fn uniform(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    let bound = 1.0 / (cols as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.random_range(-bound..bound)).collect();
    Matrix::from_vec(rows, cols, data).expect("sized")
}

fn small(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-0.1..0.1)).collect()
}

impl EncoderLayer {
    fn init(cfg: &FrozenEncoderConfig, rng: &mut impl Rng) -> Self {
        let (c, f) = (cfg.hidden, cfg.ffn);
        Self {
            w_q: uniform(rng, c, c).scale(QK_GAIN),
            b_q: small(rng, c),
            w_k: uniform(rng, c, c).scale(QK_GAIN),
            b_k: small(rng, c),
            w_v: uniform(rng, c, c),
            b_v: small(rng, c),
            w_o: uniform(rng, c, c),
            b_o: small(rng, c),
            ln1_gamma: vec![1.0; c],
            ln1_beta: vec![0.0; c],
            w_1: uniform(rng, f, c),
            b_1: small(rng, f),
            w_2: uniform(rng, c, f),
            b_2: small(rng, c),
            ln2_gamma: vec![1.0; c],
            ln2_beta: vec![0.0; c],
        }
    }

    fn chunks(&self) -> Vec<&[f64]> {
        vec![
            self.w_q.as_slice(),
            &self.b_q,
            self.w_k.as_slice(),
            &self.b_k,
            self.w_v.as_slice(),
            &self.b_v,
            self.w_o.as_slice(),
            &self.b_o,
            &self.ln1_gamma,
            &self.ln1_beta,
            self.w_1.as_slice(),
            &self.b_1,
            self.w_2.as_slice(),
            &self.b_2,
            &self.ln2_gamma,
            &self.ln2_beta,
        ]
    }
}

/// Everything one encoder layer needs for its input gradient.
#[derive(Clone, Debug)]
struct LayerTape {
    q: Matrix,
    k: Matrix,
    v: Matrix,
    /// Attention weights, one N×N matrix per head.
    attn: Vec<Matrix>,
    ln1: LayerNormCache,
    ffn_pre: Matrix,
    ln2: LayerNormCache,
    adapter: Option<ActivationTape>,
}

/// Final hidden states plus, in training mode, the per-layer tapes.
#[derive(Clone, Debug)]
pub struct EncoderOutput {
    pub hidden: Matrix,
    tapes: Option<Vec<LayerTape>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrozenEncoder {
    pub config: FrozenEncoderConfig,
    pub token_embedding: Matrix,
    pub position_embedding: Matrix,
    pub layers: Vec<EncoderLayer>,
}

impl FrozenEncoder {
    /// Seeded random weights: N(0, 1) token embeddings, N(0, 0.2²) position
    /// embeddings, fan-in uniform linears (queries and keys 4× wider), unit
    /// layer-norm gains.
    pub fn new(config: FrozenEncoderConfig) -> Result<Self, HostError> {
        config.check()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let normal = Normal::new(0.0, 1.0).expect("valid normal");
        let mut embed = |rows: usize| {
            let data = (0..rows * config.hidden).map(|_| normal.sample(&mut rng)).collect();
            Matrix::from_vec(rows, config.hidden, data).expect("sized")
        };
        let token_embedding = embed(config.vocab_size);
        let position_embedding = embed(config.max_len).scale(POSITION_STD);
        let layers = (0..config.layers)
            .map(|_| EncoderLayer::init(&config, &mut rng))
            .collect();
        Ok(Self {
            config,
            token_embedding,
            position_embedding,
            layers,
        })
    }

    /// SHA-256 over every weight, in declaration order, as little-endian bytes.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        let mut feed = |xs: &[f64]| xs.iter().for_each(|v| hasher.update(v.to_le_bytes()));
        feed(self.token_embedding.as_slice());
        feed(self.position_embedding.as_slice());
        for layer in &self.layers {
            layer.chunks().into_iter().for_each(&mut feed);
        }
        hex::encode(hasher.finalize())
    }

    pub fn parameter_count(&self) -> usize {
        self.token_embedding.len()
            + self.position_embedding.len()
            + self
                .layers
                .iter()
                .map(|l| l.chunks().iter().map(|c| c.len()).sum::<usize>())
                .sum::<usize>()
    }

    fn embed(&self, ids: &[usize]) -> Result<Matrix, HostError> {
        let cfg = &self.config;
        if ids.len() > cfg.max_len {
            return Err(HostError::SequenceTooLong {
                len: ids.len(),
                max: cfg.max_len,
            });
        }
        let mut h = Matrix::zeros(ids.len(), cfg.hidden);
        for (n, &id) in ids.iter().enumerate() {
            if id >= cfg.vocab_size {
                return Err(HostError::Config(format!(
                    "token id {id} outside vocabulary of {}",
                    cfg.vocab_size
                )));
            }
            for (x, (a, b)) in h
                .row_mut(n)
                .iter_mut()
                .zip(self.token_embedding.row(id).iter().zip(self.position_embedding.row(n)))
            {
                *x = a + b;
            }
        }
        Ok(h)
    }

    /// Runs the encoder. With `adapters`, layer `l`'s adapter is applied to
    /// layer `l`'s output and its `o` is carried into adapter `l + 1`.
    pub fn forward(
        &self,
        ids: &[usize],
        index: &IncidenceIndex,
        adapters: Option<&AdapterParameters>,
        training: bool,
    ) -> Result<EncoderOutput, HostError> {
        if let Some(a) = adapters {
            if a.layers.len() != self.layers.len() || a.config.hidden != self.config.hidden {
                return Err(HostError::Config(format!(
                    "adapters for {} layers of width {}, encoder has {} of width {}",
                    a.layers.len(),
                    a.config.hidden,
                    self.layers.len(),
                    self.config.hidden
                )));
            }
        }
        let mut h = self.embed(ids)?;
        let mut carry: Option<Matrix> = None;
        let mut tapes = training.then(Vec::new);
        for (l, layer) in self.layers.iter().enumerate() {
            let (out, mut tape) = self.layer_forward(layer, &h)?;
            h = out;
            if let Some(params) = adapters {
                let a = adapter_forward(&h, carry.as_ref(), index, &params.layers[l], training)?;
                h = a.h;
                carry = Some(a.o);
                tape.adapter = a.tape;
            }
            if let Some(t) = &mut tapes {
                t.push(tape);
            }
        }
        Ok(EncoderOutput { hidden: h, tapes })
    }

    fn layer_forward(&self, layer: &EncoderLayer, h: &Matrix) -> Result<(Matrix, LayerTape), HostError> {
        let n = h.rows();
        let heads = self.config.heads;
        let dh = self.config.hidden / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let q = ops::linear(h, &layer.w_q, &layer.b_q)?;
        let k = ops::linear(h, &layer.w_k, &layer.b_k)?;
        let v = ops::linear(h, &layer.w_v, &layer.b_v)?;
        let mut ctx = Matrix::zeros(n, self.config.hidden);
        let mut attn = Vec::with_capacity(heads);
        for head in 0..heads {
            let cols = head * dh..(head + 1) * dh;
            let mut scores = Matrix::zeros(n, n);
            for i in 0..n {
                let qi = &q.row(i)[cols.clone()];
                for j in 0..n {
                    scores[(i, j)] = ops::dot(qi, &k.row(j)[cols.clone()]) * scale;
                }
            }
            let a = ops::softmax_rows(&scores);
            for i in 0..n {
                for j in 0..n {
                    let w = a[(i, j)];
                    let vj = &v.row(j)[cols.clone()];
                    for (c, x) in ctx.row_mut(i)[cols.clone()].iter_mut().zip(vj) {
                        *c += w * x;
                    }
                }
            }
            attn.push(a);
        }
        let attended = ops::linear(&ctx, &layer.w_o, &layer.b_o)?;
        let (h1, ln1) = ops::layer_norm(&ops::add(h, &attended)?, &layer.ln1_gamma, &layer.ln1_beta, LN_EPS)?;
        let ffn_pre = ops::linear(&h1, &layer.w_1, &layer.b_1)?;
        let ffn = ops::linear(&ops::relu(&ffn_pre), &layer.w_2, &layer.b_2)?;
        let (out, ln2) = ops::layer_norm(&ops::add(&h1, &ffn)?, &layer.ln2_gamma, &layer.ln2_beta, LN_EPS)?;
        let tape = LayerTape {
            q,
            k,
            v,
            attn,
            ln1,
            ffn_pre,
            ln2,
            adapter: None,
        };
        Ok((out, tape))
    }

    fn layer_backward(&self, layer: &EncoderLayer, tape: &LayerTape, grad: &Matrix) -> Result<Matrix, HostError> {
        let (g_sum2, _, _) = ops::layer_norm_backward(&tape.ln2, &layer.ln2_gamma, grad);
        let g_relu = ops::matmul(&g_sum2, &layer.w_2)?;
        let g_pre = ops::relu_backward(&tape.ffn_pre, &g_relu);
        let mut g_h1 = g_sum2;
        g_h1.add_assign(&ops::matmul(&g_pre, &layer.w_1)?);

        let (g_sum1, _, _) = ops::layer_norm_backward(&tape.ln1, &layer.ln1_gamma, &g_h1);
        let g_ctx = ops::matmul(&g_sum1, &layer.w_o)?;
        let n = g_ctx.rows();
        let heads = self.config.heads;
        let dh = self.config.hidden / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut g_q = Matrix::zeros(n, self.config.hidden);
        let mut g_k = Matrix::zeros(n, self.config.hidden);
        let mut g_v = Matrix::zeros(n, self.config.hidden);
        for (head, a) in tape.attn.iter().enumerate() {
            let cols = head * dh..(head + 1) * dh;
            let mut g_a = Matrix::zeros(n, n);
            for i in 0..n {
                let gi = &g_ctx.row(i)[cols.clone()];
                for j in 0..n {
                    g_a[(i, j)] = ops::dot(gi, &tape.v.row(j)[cols.clone()]);
                    let w = a[(i, j)];
                    for (gv, g) in g_v.row_mut(j)[cols.clone()].iter_mut().zip(gi) {
                        *gv += w * g;
                    }
                }
            }
            let g_s = ops::softmax_rows_backward(a, &g_a);
            for i in 0..n {
                for j in 0..n {
                    let s = g_s[(i, j)] * scale;
                    if s == 0.0 {
                        continue;
                    }
                    for c in cols.clone() {
                        g_q[(i, c)] += s * tape.k[(j, c)];
                        g_k[(j, c)] += s * tape.q[(i, c)];
                    }
                }
            }
        }
        let mut g_h = g_sum1;
        g_h.add_assign(&ops::matmul(&g_q, &layer.w_q)?);
        g_h.add_assign(&ops::matmul(&g_k, &layer.w_k)?);
        g_h.add_assign(&ops::matmul(&g_v, &layer.w_v)?);
        Ok(g_h)
    }

    /// Adapter gradients for `grad` on the final hidden states of a
    /// training-mode forward.
    pub fn backward(
        &self,
        output: &EncoderOutput,
        adapters: &AdapterParameters,
        grad: &Matrix,
    ) -> Result<AdapterParameters, HostError> {
        let tapes = output.tapes.as_ref().ok_or(crate::adapter::AdapterError::MissingTape)?;
        let mut grads = AdapterParameters::zeros(adapters.config);
        let mut g_h = grad.clone();
        let mut g_o = Matrix::zeros(grad.rows(), adapters.config.bottleneck);
        for l in (0..self.layers.len()).rev() {
            let g = adapter_backward(tapes[l].adapter.as_ref(), &adapters.layers[l], &g_h, &g_o)?;
            grads.layers[l] = g.params;
            g_o = g
                .o_prev
                .unwrap_or_else(|| Matrix::zeros(grad.rows(), adapters.config.bottleneck));
            if l == 0 {
                break;
            }
            g_h = self.layer_backward(&self.layers[l], &tapes[l], &g.h)?;
        }
        Ok(grads)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapter::{check::random_incidence, check::random_layer, init_parameters};
    use crate::numerics::numeric_gradient;

    fn tiny() -> FrozenEncoderConfig {
        FrozenEncoderConfig {
            layers: 2,
            hidden: 8,
            heads: 2,
            ffn: 12,
            vocab_size: 20,
            max_len: 10,
            seed: 5,
        }
    }

    #[test]
    fn shapes_and_determinism() {
        let enc = FrozenEncoder::new(tiny()).unwrap();
        let index = IncidenceIndex::from_pairs(4, &[], &[]).unwrap();
        let out = enc.forward(&[0, 3, 4, 9], &index, None, false).unwrap();
        assert_eq!(out.hidden.shape(), (4, 8));
        assert!(out.hidden.is_finite());
        assert_eq!(enc.digest(), FrozenEncoder::new(tiny()).unwrap().digest());
    }

    #[test]
    fn too_long_is_an_error() {
        let enc = FrozenEncoder::new(tiny()).unwrap();
        let index = IncidenceIndex::from_pairs(11, &[], &[]).unwrap();
        let err = enc.forward(&[1; 11], &index, None, false).unwrap_err();
        assert!(matches!(err, HostError::SequenceTooLong { len: 11, max: 10 }));
    }

    #[test]
    fn fresh_adapters_are_transparent() {
        let enc = FrozenEncoder::new(tiny()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let index = random_incidence(&mut rng, 6, 4);
        let adapters = init_parameters(crate::adapter::PlmShapeConfig::new(2, 8, 4).unwrap(), 9).unwrap();
        let ids = [0, 5, 6, 7, 2, 19];
        let plain = enc.forward(&ids, &index, None, false).unwrap();
        let with = enc.forward(&ids, &index, Some(&adapters), true).unwrap();
        assert_eq!(plain.hidden, with.hidden);
    }

    #[test]
    fn input_gradient_matches_differences() {
        // Loss = Σ r ⊙ hidden; compare adapter gradients with central
        // differences (absolute scale, since weak coordinates exist).
        let enc = FrozenEncoder::new(tiny()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let index = random_incidence(&mut rng, 5, 3);
        let cfg = crate::adapter::PlmShapeConfig::new(2, 8, 4).unwrap();
        let mut adapters = AdapterParameters::zeros(cfg);
        for layer in &mut adapters.layers {
            *layer = random_layer(&mut rng, 8, 4);
        }
        let ids = [0, 1, 2, 3, 4];
        let r = crate::adapter::check::random_matrix(&mut rng, 5, 8, 1.0);
        let out = enc.forward(&ids, &index, Some(&adapters), true).unwrap();
        let analytic = enc.backward(&out, &adapters, &r).unwrap().flatten();
        let numeric = numeric_gradient(
            |w| {
                let mut a = adapters.clone();
                a.assign_flat(w);
                let h = enc.forward(&ids, &index, Some(&a), false).unwrap().hidden;
                ops::dot(h.as_slice(), r.as_slice())
            },
            &adapters.flatten(),
            1e-5,
        )
        .unwrap();
        let scale = analytic.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        let gap = analytic
            .iter()
            .zip(&numeric)
            .fold(0.0f64, |m, (a, n)| m.max((a - n).abs()));
        assert!(scale > 0.1);
        assert!(gap < 1e-6 * scale, "gap {gap:e} scale {scale}");
    }
}
