//! Finite-difference verification of [`adapter_backward`] on random
//! instances, for a single layer with carry and for two stacked layers.
//!
//! The differenced function is the scalar-loop reference forward evaluated
//! in double-double, so cancellation in `f(w+h) − f(w−h)` does not swamp
//! weak coordinates: some true gradients are below 1e-8 while the loss is
//! O(1), which f64 differences cannot resolve to 1e-5 relative error.

use std::hash::{DefaultHasher, Hash, Hasher};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::reference::{reference_forward, rows, ReferenceIncidence, ReferenceLayer, ReferenceOutput};
use super::{adapter_backward, adapter_forward, AdapterError, AdapterLayer, IncidenceIndex};
use crate::incidence::HyperedgeType;
use crate::numerics::{grad_check_piecewise, DoubleDouble, GradCheckConfig, GradCheckReport, Matrix, Real};

type Dd = DoubleDouble;

/// Largest tolerated gap between the kernels and the reference forward.
const FORWARD_AGREEMENT: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct InstanceShape {
    pub tokens: usize,
    pub hyperedges: usize,
    pub hidden: usize,
    pub bottleneck: usize,
}

impl InstanceShape {
    /// Tokens in 1..=12, hyperedges in 0..=8, hidden in {2, 8}, bottleneck in {1, 4}.
    pub fn sample(rng: &mut impl Rng) -> Self {
        Self {
            tokens: rng.random_range(1..=12),
            hyperedges: rng.random_range(0..=8),
            hidden: [2, 8][rng.random_range(0..2)],
            bottleneck: [1, 4][rng.random_range(0..2)],
        }
    }
}

/// Random hyperedges (nonempty member sets, random types) over `tokens`.
pub fn random_incidence(rng: &mut impl Rng, tokens: usize, hyperedges: usize) -> IncidenceIndex {
    let mut pairs = Vec::new();
    let mut types = Vec::with_capacity(hyperedges);
    for e in 0..hyperedges {
        types.push(HyperedgeType::ALL[rng.random_range(0..3)]);
        let size = rng.random_range(1..=tokens);
        let mut members: Vec<usize> = (0..tokens).collect();
        for i in 0..size {
            let j = rng.random_range(i..tokens);
            members.swap(i, j);
        }
        let mut members = members[..size].to_vec();
        members.sort_unstable();
        pairs.extend(members.into_iter().map(|t| (t, e)));
    }
    IncidenceIndex::from_pairs(tokens, &pairs, &types).expect("valid random incidence")
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize, bound: f64) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.random_range(-bound..bound)).collect();
    Matrix::from_vec(rows, cols, data).expect("sized")
}

/// Every tensor nonzero, weights at fan-in scale.
pub fn random_layer(rng: &mut impl Rng, hidden: usize, bottleneck: usize) -> AdapterLayer {
    let (c, cd) = (hidden as f64, bottleneck as f64);
    let mut layer = AdapterLayer::zeros(hidden, bottleneck);
    layer.w_down = random_matrix(rng, bottleneck, hidden, 1.0 / c.sqrt());
    layer.b_down = random_matrix(rng, 1, bottleneck, 0.5);
    layer.w_up = random_matrix(rng, hidden, bottleneck, 1.0 / cd.sqrt());
    layer.b_up = random_matrix(rng, 1, hidden, 0.5);
    for t in 0..3 {
        layer.q[t] = random_matrix(rng, 1, bottleneck, 1.0);
        layer.w_type[t] = random_matrix(rng, bottleneck, bottleneck, 1.0 / cd.sqrt());
        layer.b_type[t] = random_matrix(rng, 1, bottleneck, 0.5);
    }
    layer
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialReport {
    pub seed: u64,
    pub shape: InstanceShape,
    pub single_layer: GradCheckReport,
    pub stacked: GradCheckReport,
    /// Max |kernel − reference| over both layers' outputs.
    pub forward_gap: f64,
}

impl TrialReport {
    pub fn passed(&self) -> bool {
        self.single_layer.passed && self.stacked.passed && self.forward_gap <= FORWARD_AGREEMENT
    }

    pub fn max_rel_error(&self) -> f64 {
        self.single_layer.max_rel_error.max(self.stacked.max_rel_error)
    }

    /// Coordinates compared, and those left out because a perturbation
    /// crossed a ReLU kink.
    pub fn coverage(&self) -> (usize, usize) {
        let (a, b) = (&self.single_layer, &self.stacked);
        (a.checked + b.checked, a.crossed.len() + b.crossed.len())
    }
}

/// Identifies the smooth piece of the loss: which pre-activations are positive.
fn relu_pattern<T>(outputs: &[&ReferenceOutput<T>]) -> u64 {
    let mut hasher = DefaultHasher::new();
    for out in outputs {
        out.positive.hash(&mut hasher);
    }
    hasher.finish()
}

fn max_gap(fast: &Matrix, slow: &[Vec<f64>]) -> f64 {
    (0..fast.rows())
        .flat_map(|r| fast.row(r).iter().zip(&slow[r]).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max)
}

struct Problem {
    h: Matrix,
    carry: Matrix,
    index: IncidenceIndex,
    incidence: ReferenceIncidence,
    first: AdapterLayer,
    second: AdapterLayer,
    /// Random projections turning the outputs into a scalar loss.
    r_h: Matrix,
    r_o: Matrix,
}

impl Problem {
    fn draw(rng: &mut impl Rng, shape: InstanceShape) -> Self {
        let (n, c, cd) = (shape.tokens, shape.hidden, shape.bottleneck);
        let h = random_matrix(rng, n, c, 1.0);
        let carry = random_matrix(rng, n, cd, 1.0);
        let index = random_incidence(rng, n, shape.hyperedges);
        Self {
            h,
            carry,
            incidence: ReferenceIncidence::new(&index),
            index,
            first: random_layer(rng, c, cd),
            second: random_layer(rng, c, cd),
            r_h: random_matrix(rng, n, c, 1.0),
            r_o: random_matrix(rng, n, cd, 1.0),
        }
    }

    fn loss<T: Real>(&self, out: &ReferenceOutput<T>) -> T {
        let project = |m: &Matrix, v: &[Vec<T>]| {
            v.iter()
                .enumerate()
                .flat_map(|(r, row)| row.iter().enumerate().map(move |(c, &x)| (r, c, x)))
                .fold(T::zero(), |acc, (r, c, x)| acc + T::from_f64(m[(r, c)]) * x)
        };
        project(&self.r_h, &out.h) + project(&self.r_o, &out.o)
    }

    fn single<T: Real>(&self, layer: &AdapterLayer, h: &Matrix, carry: &Matrix) -> ReferenceOutput<T> {
        reference_forward(
            &ReferenceLayer::new(layer),
            &rows(h),
            Some(&rows(carry)),
            &self.incidence,
        )
    }

    fn stacked<T: Real>(
        &self,
        l1: &AdapterLayer,
        l2: &AdapterLayer,
        h: &Matrix,
    ) -> (ReferenceOutput<T>, ReferenceOutput<T>) {
        let out1 = reference_forward(&ReferenceLayer::new(l1), &rows(h), None, &self.incidence);
        let out2 = reference_forward(&ReferenceLayer::new(l2), &out1.h, Some(&out1.o), &self.incidence);
        (out1, out2)
    }

    /// Kernel forward against the f64 reference, for both computations.
    fn forward_gap(&self) -> Result<f64, AdapterError> {
        let fast = adapter_forward(&self.h, Some(&self.carry), &self.index, &self.first, false)?;
        let slow = self.single::<f64>(&self.first, &self.h, &self.carry);
        let mut gap = max_gap(&fast.h, &slow.h).max(max_gap(&fast.o, &slow.o));
        let f1 = adapter_forward(&self.h, None, &self.index, &self.first, false)?;
        let f2 = adapter_forward(&f1.h, Some(&f1.o), &self.index, &self.second, false)?;
        let (_, s2) = self.stacked::<f64>(&self.first, &self.second, &self.h);
        gap = gap.max(max_gap(&f2.h, &s2.h)).max(max_gap(&f2.o, &s2.o));
        Ok(gap)
    }

    /// Layer with an incoming carry; checks params, `h` and the carry.
    fn check_single(&self, cfg: GradCheckConfig) -> Result<GradCheckReport, AdapterError> {
        let out = adapter_forward(&self.h, Some(&self.carry), &self.index, &self.first, true)?;
        let g = adapter_backward(out.tape.as_ref(), &self.first, &self.r_h, &self.r_o)?;
        let mut analytic = g.params.flatten();
        analytic.extend_from_slice(g.h.as_slice());
        analytic.extend_from_slice(g.o_prev.as_ref().expect("carry gradient").as_slice());

        let mut point = self.first.flatten();
        point.extend_from_slice(self.h.as_slice());
        point.extend_from_slice(self.carry.as_slice());

        let np = self.first.parameter_count();
        let nh = self.h.len();
        let mut layer = self.first.clone();
        let mut h = self.h.clone();
        let mut carry = self.carry.clone();
        Ok(grad_check_piecewise(
            |w| {
                layer.assign_flat(&w[..np]);
                h.as_mut_slice().copy_from_slice(&w[np..np + nh]);
                carry.as_mut_slice().copy_from_slice(&w[np + nh..]);
                let out = self.single::<Dd>(&layer, &h, &carry);
                (self.loss(&out), relu_pattern(&[&out]))
            },
            &point,
            &analytic,
            &[],
            cfg,
        )?)
    }

    /// Two layers joined by the carry; checks both layers' params and `h`.
    fn check_stacked(&self, cfg: GradCheckConfig) -> Result<GradCheckReport, AdapterError> {
        let out1 = adapter_forward(&self.h, None, &self.index, &self.first, true)?;
        let out2 = adapter_forward(&out1.h, Some(&out1.o), &self.index, &self.second, true)?;
        let g2 = adapter_backward(out2.tape.as_ref(), &self.second, &self.r_h, &self.r_o)?;
        let carry_grad = g2.o_prev.as_ref().expect("carry gradient");
        let g1 = adapter_backward(out1.tape.as_ref(), &self.first, &g2.h, carry_grad)?;

        let mut analytic = g1.params.flatten();
        analytic.extend(g2.params.flatten());
        analytic.extend_from_slice(g1.h.as_slice());
        let mut point = self.first.flatten();
        point.extend(self.second.flatten());
        point.extend_from_slice(self.h.as_slice());

        let np = self.first.parameter_count();
        let (mut l1, mut l2, mut h) = (self.first.clone(), self.second.clone(), self.h.clone());
        Ok(grad_check_piecewise(
            |w| {
                l1.assign_flat(&w[..np]);
                l2.assign_flat(&w[np..2 * np]);
                h.as_mut_slice().copy_from_slice(&w[2 * np..]);
                let (o1, o2) = self.stacked::<Dd>(&l1, &l2, &h);
                (self.loss(&o2), relu_pattern(&[&o1, &o2]))
            },
            &point,
            &analytic,
            &[],
            cfg,
        )?)
    }
}

/// One randomized trial; the shape and all values derive from `seed`.
pub fn run_trial(seed: u64, cfg: GradCheckConfig) -> Result<TrialReport, AdapterError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = InstanceShape::sample(&mut rng);
    run_trial_with_shape(seed, shape, cfg)
}

pub fn run_trial_with_shape(
    seed: u64,
    shape: InstanceShape,
    cfg: GradCheckConfig,
) -> Result<TrialReport, AdapterError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let problem = Problem::draw(&mut rng, shape);
    Ok(TrialReport {
        seed,
        shape,
        single_layer: problem.check_single(cfg)?,
        stacked: problem.check_stacked(cfg)?,
        forward_gap: problem.forward_gap()?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub trials: Vec<TrialReport>,
    pub max_rel_error: f64,
    pub max_forward_gap: f64,
    pub failures: usize,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// `trials` trials with seeds `seed, seed + 1, ...`, run in parallel and
/// reported in seed order.
pub fn run_suite(seed: u64, trials: usize, cfg: GradCheckConfig) -> Result<SuiteReport, AdapterError> {
    let trials = (0..trials as u64)
        .into_par_iter()
        .map(|i| run_trial(seed.wrapping_add(i), cfg))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SuiteReport {
        max_rel_error: trials.iter().map(TrialReport::max_rel_error).fold(0.0, f64::max),
        max_forward_gap: trials.iter().map(|t| t.forward_gap).fold(0.0, f64::max),
        failures: trials.iter().filter(|t| !t.passed()).count(),
        trials,
    })
}
