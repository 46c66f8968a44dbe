use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

use super::{AdapterError, PlmShapeConfig};
use crate::incidence::HyperedgeType;
use crate::numerics::Matrix;

/// Parameters of one adapter layer. Vectors are stored as `1×n` matrices;
/// per-type tensors are indexed by [`HyperedgeType::index`].
#[derive(Clone, Debug, PartialEq)]
pub struct AdapterLayer {
    pub w_down: Matrix,
    pub b_down: Matrix,
    pub w_up: Matrix,
    pub b_up: Matrix,
    pub q: [Matrix; 3],
    pub w_type: [Matrix; 3],
    pub b_type: [Matrix; 3],
}

impl AdapterLayer {
    pub fn zeros(hidden: usize, bottleneck: usize) -> Self {
        let (c, d) = (hidden, bottleneck);
        Self {
            w_down: Matrix::zeros(d, c),
            b_down: Matrix::zeros(1, d),
            w_up: Matrix::zeros(c, d),
            b_up: Matrix::zeros(1, c),
            q: std::array::from_fn(|_| Matrix::zeros(1, d)),
            w_type: std::array::from_fn(|_| Matrix::zeros(d, d)),
            b_type: std::array::from_fn(|_| Matrix::zeros(1, d)),
        }
    }

    /// Fan-in uniform weights, small normal queries, zero biases and a zero
    /// up-projection (so the layer starts as the identity on `h`).
    pub fn init(hidden: usize, bottleneck: usize, rng: &mut impl Rng) -> Self {
        let mut layer = Self::zeros(hidden, bottleneck);
        fill_uniform(&mut layer.w_down, 1.0 / (hidden as f64).sqrt(), rng);
        let normal = Normal::new(0.0, 0.02).expect("valid sigma");
        for q in &mut layer.q {
            for v in q.as_mut_slice() {
                *v = normal.sample(rng);
            }
        }
        for w in &mut layer.w_type {
            fill_uniform(w, 1.0 / (bottleneck as f64).sqrt(), rng);
        }
        layer
    }

    pub fn hidden(&self) -> usize {
        self.w_down.cols()
    }

    pub fn bottleneck(&self) -> usize {
        self.w_down.rows()
    }

    /// Tensors in checkpoint order with their short names.
    pub fn tensors(&self) -> Vec<(String, &Matrix)> {
        let mut out = vec![
            ("W_down".to_string(), &self.w_down),
            ("b_down".to_string(), &self.b_down),
            ("W_up".to_string(), &self.w_up),
            ("b_up".to_string(), &self.b_up),
        ];
        for (prefix, set) in [("q", &self.q), ("W_type", &self.w_type), ("b_type", &self.b_type)] {
            for ty in HyperedgeType::ALL {
                out.push((format!("{prefix}.{}", ty.name()), &set[ty.index()]));
            }
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = vec![&mut self.w_down, &mut self.b_down, &mut self.w_up, &mut self.b_up];
        out.extend(self.q.iter_mut());
        out.extend(self.w_type.iter_mut());
        out.extend(self.b_type.iter_mut());
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, m)| m.len()).sum()
    }

    pub fn add_assign(&mut self, other: &AdapterLayer) {
        for (a, (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.add_assign(b);
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensors()
            .iter()
            .flat_map(|(_, m)| m.as_slice().iter().copied())
            .collect()
    }

    /// Overwrites all tensors from `values` in [`flatten`](Self::flatten)
    /// order and returns the number consumed.
    pub fn assign_flat(&mut self, values: &[f64]) -> usize {
        let mut at = 0;
        for m in self.tensors_mut() {
            let n = m.len();
            m.as_mut_slice().copy_from_slice(&values[at..at + n]);
            at += n;
        }
        at
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, m)| m.is_finite())
    }
}

fn fill_uniform(m: &mut Matrix, bound: f64, rng: &mut impl Rng) {
    for v in m.as_mut_slice() {
        *v = rng.random_range(-bound..bound);
    }
}

/// All adapter layers of one host model.
#[derive(Clone, Debug, PartialEq)]
pub struct AdapterParameters {
    pub config: PlmShapeConfig,
    pub layers: Vec<AdapterLayer>,
}

pub fn init_parameters(cfg: PlmShapeConfig, seed: u64) -> Result<AdapterParameters, AdapterError> {
    cfg.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = (0..cfg.layers)
        .map(|_| AdapterLayer::init(cfg.hidden, cfg.bottleneck, &mut rng))
        .collect();
    Ok(AdapterParameters { config: cfg, layers })
}

impl AdapterParameters {
    pub fn zeros(cfg: PlmShapeConfig) -> Self {
        Self {
            config: cfg,
            layers: (0..cfg.layers)
                .map(|_| AdapterLayer::zeros(cfg.hidden, cfg.bottleneck))
                .collect(),
        }
    }

    /// Fully qualified tensor names, `layer{l}.{name}` with `l` from 1.
    pub fn named_tensors(&self) -> Vec<(String, &Matrix)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(l, layer)| {
                layer
                    .tensors()
                    .into_iter()
                    .map(move |(name, m)| (format!("layer{}.{name}", l + 1), m))
            })
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(AdapterLayer::parameter_count).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.layers.iter().flat_map(AdapterLayer::flatten).collect()
    }

    pub fn assign_flat(&mut self, values: &[f64]) {
        let mut at = 0;
        for layer in &mut self.layers {
            at += layer.assign_flat(&values[at..]);
        }
        assert_eq!(at, values.len(), "flat parameter length");
    }

    /// SHA-256 over the little-endian bytes of [`flatten`](Self::flatten).
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for v in self.flatten() {
            hasher.update(v.to_le_bytes());
        }
        hex::encode(hasher.finalize())
    }
}
