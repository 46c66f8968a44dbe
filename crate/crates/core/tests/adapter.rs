use hgcode::adapter::check::{random_incidence, random_layer, random_matrix, run_trial};
use hgcode::adapter::{
    adapter_backward, adapter_forward, count_parameters, init_parameters, AdapterError, AdapterLayer, AdapterVariant,
    Checkpoint, IncidenceIndex, PlmShapeConfig,
};
use hgcode::numerics::{GradCheckConfig, Matrix};
use hgcode::HyperedgeType;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Straight-line forward written from the layer's definition: per-hyperedge
/// loops for the first attention, per-token loops for the second.
fn loop_forward(
    h: &Matrix,
    carry: Option<&Matrix>,
    pairs: &[(usize, usize)],
    types: &[HyperedgeType],
    p: &AdapterLayer,
) -> (Matrix, Matrix) {
    let (n, c, d) = (h.rows(), p.hidden(), p.bottleneck());
    let scale = 1.0 / (d as f64).sqrt();
    let mut x = vec![vec![0.0; d]; n];
    for t in 0..n {
        for i in 0..d {
            let mut z = p.b_down[(0, i)];
            for j in 0..c {
                z += p.w_down[(i, j)] * h[(t, j)];
            }
            if let Some(o) = carry {
                z += o[(t, i)];
            }
            x[t][i] = z.max(0.0);
        }
    }
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>();
    let softmax = |s: &[f64]| {
        let m = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = s.iter().map(|v| (v - m).exp()).collect();
        let z: f64 = e.iter().sum();
        e.into_iter().map(|v| v / z).collect::<Vec<_>>()
    };

    let mut pp = vec![vec![0.0; d]; types.len()];
    for (e, ty) in types.iter().enumerate() {
        let members: Vec<usize> = pairs.iter().filter(|p| p.1 == e).map(|p| p.0).collect();
        let q = p.q[ty.index()].as_slice();
        let a = softmax(&members.iter().map(|&t| scale * dot(q, &x[t])).collect::<Vec<_>>());
        let mut pe = vec![0.0; d];
        for (&t, w) in members.iter().zip(&a) {
            for i in 0..d {
                pe[i] += w * x[t][i];
            }
        }
        for (i, v) in pp[e].iter_mut().enumerate() {
            *v = p.b_type[ty.index()][(0, i)] + dot(p.w_type[ty.index()].row(i), &pe);
        }
    }

    let mut o = Matrix::zeros(n, d);
    let mut out = h.clone();
    for t in 0..n {
        let edges: Vec<usize> = pairs.iter().filter(|p| p.0 == t).map(|p| p.1).collect();
        if !edges.is_empty() {
            let a = softmax(&edges.iter().map(|&e| scale * dot(&x[t], &pp[e])).collect::<Vec<_>>());
            for (&e, w) in edges.iter().zip(&a) {
                for i in 0..d {
                    o[(t, i)] += w * pp[e][i];
                }
            }
        }
        for j in 0..c {
            out[(t, j)] += p.b_up[(0, j)] + dot(p.w_up.row(j), &x[t]);
        }
    }
    (out, o)
}

fn pairs_of(index: &IncidenceIndex) -> Vec<(usize, usize)> {
    index
        .tokens()
        .iter()
        .copied()
        .zip(index.edges().iter().copied())
        .collect()
}

struct Instance {
    h: Matrix,
    carry: Matrix,
    index: IncidenceIndex,
    layer: AdapterLayer,
}

fn instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, e) = (rng.random_range(1..=10), rng.random_range(0..=6));
    let (c, d) = (8, 4);
    Instance {
        h: random_matrix(&mut rng, n, c, 1.0),
        carry: random_matrix(&mut rng, n, d, 0.5),
        index: random_incidence(&mut rng, n, e),
        layer: random_layer(&mut rng, c, d),
    }
}

fn max_gap(a: &Matrix, b: &Matrix) -> f64 {
    a.max_abs_diff(b)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn forward_matches_the_loop_oracle(seed in any::<u64>(), with_carry in any::<bool>()) {
        let s = instance(seed);
        let carry = with_carry.then_some(&s.carry);
        let out = adapter_forward(&s.h, carry, &s.index, &s.layer, false).unwrap();
        let (h, o) = loop_forward(&s.h, carry, &pairs_of(&s.index), s.index.edge_types(), &s.layer);
        prop_assert!(max_gap(&out.h, &h) <= 1e-12);
        prop_assert!(max_gap(&out.o, &o) <= 1e-12);
    }

    #[test]
    fn attention_weights_are_normalized(seed in any::<u64>()) {
        let s = instance(seed);
        let out = adapter_forward(&s.h, Some(&s.carry), &s.index, &s.layer, true).unwrap();
        let tape = out.tape.unwrap();
        for (idx, alpha) in [(s.index.by_edge(), &tape.alpha_ne), (s.index.by_token(), &tape.alpha_en)] {
            for (size, sum) in idx.group_sizes().into_iter().zip(idx.group_sums(alpha)) {
                if size > 0 {
                    prop_assert!((sum - 1.0).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn token_and_hyperedge_relabeling_is_equivariant(seed in any::<u64>()) {
        let s = instance(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let n = s.h.rows();
        let e = s.index.edge_count();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut eperm: Vec<usize> = (0..e).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        for i in (1..e).rev() {
            eperm.swap(i, rng.random_range(0..=i));
        }
        // Token t moves to perm[t]; hyperedge k moves to eperm[k].
        let mut inverse = vec![0; n];
        for (t, &p) in perm.iter().enumerate() {
            inverse[p] = t;
        }
        let mut types = vec![HyperedgeType::Line; e];
        for (k, &p) in eperm.iter().enumerate() {
            types[p] = s.index.edge_types()[k];
        }
        let pairs: Vec<_> = pairs_of(&s.index).into_iter().rev().map(|(t, k)| (perm[t], eperm[k])).collect();
        let index = IncidenceIndex::from_pairs(n, &pairs, &types).unwrap();
        let h = s.h.select_rows(&inverse);
        let carry = s.carry.select_rows(&inverse);

        let base = adapter_forward(&s.h, Some(&s.carry), &s.index, &s.layer, false).unwrap();
        let moved = adapter_forward(&h, Some(&carry), &index, &s.layer, false).unwrap();
        prop_assert!(max_gap(&moved.h, &base.h.select_rows(&inverse)) <= 1e-12);
        prop_assert!(max_gap(&moved.o, &base.o.select_rows(&inverse)) <= 1e-12);
    }
}

#[test]
fn fresh_layers_are_the_identity() {
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, e) = (rng.random_range(1..=12), rng.random_range(0..=8));
        let params = init_parameters(PlmShapeConfig::new(2, 8, 4).unwrap(), seed).unwrap();
        let mut h = random_matrix(&mut rng, n, 8, 3.0);
        h[(0, 0)] = -0.0;
        let index = random_incidence(&mut rng, n, e);
        let first = adapter_forward(&h, None, &index, &params.layers[0], false).unwrap();
        let second = adapter_forward(&first.h, Some(&first.o), &index, &params.layers[1], false).unwrap();
        let bits = |m: &Matrix| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&second.h), bits(&h), "seed {seed}");
    }
}

#[test]
fn without_hyperedges_it_is_a_plain_bottleneck() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let layer = random_layer(&mut rng, 6, 3);
    let h = random_matrix(&mut rng, 5, 6, 1.0);
    let index = IncidenceIndex::from_pairs(5, &[], &[]).unwrap();
    let out = adapter_forward(&h, None, &index, &layer, false).unwrap();
    assert!(out.o.as_slice().iter().all(|&v| v == 0.0));
    for t in 0..5 {
        let x: Vec<f64> = (0..3)
            .map(|i| (layer.b_down[(0, i)] + (0..6).map(|j| layer.w_down[(i, j)] * h[(t, j)]).sum::<f64>()).max(0.0))
            .collect();
        for j in 0..6 {
            let expected = h[(t, j)] + layer.b_up[(0, j)] + (0..3).map(|i| layer.w_up[(j, i)] * x[i]).sum::<f64>();
            assert!((out.h[(t, j)] - expected).abs() < 1e-12);
        }
    }
}

#[test]
fn tokens_outside_every_hyperedge_receive_nothing() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let layer = random_layer(&mut rng, 4, 2);
    let h = random_matrix(&mut rng, 4, 4, 1.0);
    let index = IncidenceIndex::from_pairs(4, &[(0, 0), (1, 0), (2, 0)], &[HyperedgeType::AstFamily]).unwrap();
    let out = adapter_forward(&h, None, &index, &layer, false).unwrap();
    assert_eq!(out.o.row(3), [0.0, 0.0]);
    assert!(out.o.row(0).iter().any(|&v| v != 0.0));
}

#[test]
fn hyperedge_type_selects_the_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let layer = random_layer(&mut rng, 6, 3);
    let h = random_matrix(&mut rng, 4, 6, 1.0);
    let pairs = [(0, 0), (1, 0), (2, 0), (3, 0)];
    let outputs: Vec<Matrix> = HyperedgeType::ALL
        .iter()
        .map(|&ty| {
            let index = IncidenceIndex::from_pairs(4, &pairs, &[ty]).unwrap();
            adapter_forward(&h, None, &index, &layer, false).unwrap().o
        })
        .collect();
    assert!(max_gap(&outputs[0], &outputs[1]) > 1e-6);
    assert!(max_gap(&outputs[1], &outputs[2]) > 1e-6);
    assert!(max_gap(&outputs[0], &outputs[2]) > 1e-6);
}

#[test]
fn zero_upstream_gradient_gives_zero_gradients() {
    let s = instance(3);
    let out = adapter_forward(&s.h, Some(&s.carry), &s.index, &s.layer, true).unwrap();
    let zeros = |m: &Matrix| Matrix::zeros(m.rows(), m.cols());
    let g = adapter_backward(out.tape.as_ref(), &s.layer, &zeros(&out.h), &zeros(&out.o)).unwrap();
    assert!(g.params.flatten().iter().all(|&v| v == 0.0));
    assert!(g.h.as_slice().iter().all(|&v| v == 0.0));
    assert!(g.o_prev.unwrap().as_slice().iter().all(|&v| v == 0.0));
}

#[test]
fn backward_needs_a_training_forward() {
    let s = instance(4);
    let out = adapter_forward(&s.h, None, &s.index, &s.layer, false).unwrap();
    let err = adapter_backward(out.tape.as_ref(), &s.layer, &out.h, &out.o).unwrap_err();
    assert!(matches!(err, AdapterError::MissingTape));
}

#[test]
fn malformed_inputs_are_rejected() {
    assert!(matches!(
        IncidenceIndex::from_pairs(2, &[(2, 0)], &[HyperedgeType::Line]),
        Err(AdapterError::TokenOutOfRange { token: 2, count: 2 })
    ));
    assert!(matches!(
        IncidenceIndex::from_pairs(2, &[(0, 1)], &[HyperedgeType::Line]),
        Err(AdapterError::HyperedgeOutOfRange { edge: 1, count: 1 })
    ));
    let s = instance(6);
    let short = Matrix::zeros(s.h.rows() + 1, s.layer.bottleneck());
    assert!(matches!(
        adapter_forward(&s.h, Some(&short), &s.index, &s.layer, false),
        Err(AdapterError::CarryMismatch { .. })
    ));
}

#[test]
fn initialization_is_seeded_and_sized() {
    let cfg = PlmShapeConfig::new(3, 16, 4).unwrap();
    let a = init_parameters(cfg, 42).unwrap();
    assert_eq!(a, init_parameters(cfg, 42).unwrap());
    assert_eq!(a.digest(), init_parameters(cfg, 42).unwrap().digest());
    assert_ne!(a.digest(), init_parameters(cfg, 43).unwrap().digest());
    assert_eq!(
        a.parameter_count() as u64,
        count_parameters(&cfg, AdapterVariant::Hypergraph)
    );
    for layer in &a.layers {
        assert!(layer.w_up.as_slice().iter().all(|&v| v == 0.0));
        assert!(layer.b_up.as_slice().iter().all(|&v| v == 0.0));
    }
    let names: Vec<String> = a.named_tensors().into_iter().map(|(n, _)| n).collect();
    assert_eq!(names.len(), 3 * 13);
    assert_eq!(names[0], "layer1.W_down");
    assert_eq!(names[38], "layer3.b_type.line");
}

#[test]
fn checkpoints_round_trip_exactly() {
    let cfg = PlmShapeConfig::new(2, 8, 4).unwrap();
    let mut params = init_parameters(cfg, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    params.layers[1] = random_layer(&mut rng, 8, 4);
    let json = Checkpoint::from_adapters(&params).to_json();
    let back = Checkpoint::from_json(&json).unwrap().adapters(cfg).unwrap();
    assert_eq!(back.digest(), params.digest());
    assert!(Checkpoint::from_json(&json)
        .unwrap()
        .adapters(PlmShapeConfig::new(2, 8, 2).unwrap())
        .is_err());
}

#[test]
fn analytic_gradients_pass_finite_difference_trials() {
    for seed in 0..8 {
        let r = run_trial(seed, GradCheckConfig::default()).unwrap();
        assert!(r.passed(), "seed {seed}: {}", r.max_rel_error());
        assert!(r.forward_gap <= 1e-12);
    }
}
