//! Invariant checks runnable outside the test harness. Each check draws its
//! own randomized instances from the given seed and reports pass/fail with a
//! one-line detail.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::adapter::check::{random_incidence, random_layer, random_matrix, run_suite, InstanceShape};
use crate::adapter::{
    adapter_backward, adapter_forward, init_parameters, AdapterLayer, IncidenceIndex, PlmShapeConfig,
};
use crate::corpus;
use crate::generator::{generate, GeneratorConfig};
use crate::host::{FrozenEncoder, FrozenEncoderConfig, SnippetEncoder};
use crate::incidence::{filter_types, laminar_conflict, validate, HyperedgeType, TokenizedHypergraph};
use crate::numerics::{GradCheckConfig, Matrix};
use crate::parsing::Language;
use crate::tokenizer::Tokenizer;

const NORMALIZATION_TOL: f64 = 1e-12;
const EQUIVARIANCE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SelftestReport {
    pub seed: u64,
    pub checks: Vec<CheckOutcome>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

type Check = fn(&mut ChaCha8Rng) -> Result<String, String>;

const CHECKS: [(&str, Check); 11] = [
    ("identity_at_init", identity_at_init),
    ("attention_normalization", attention_normalization),
    ("permutation_equivariance", permutation_equivariance),
    ("type_sensitivity", type_sensitivity),
    ("heterogeneity_isolation", heterogeneity_isolation),
    ("gradient_completeness", gradient_completeness),
    ("gradient_check", gradient_check),
    ("corpus_extraction", corpus_extraction),
    ("ast_family_laminar", ast_family_laminar),
    ("bpe_round_trip", bpe_round_trip),
    ("ablation_subsets", ablation_subsets),
];

pub fn check_names() -> Vec<&'static str> {
    CHECKS.iter().map(|(n, _)| *n).collect()
}

/// Runs every check; check `k` draws from a generator seeded with `seed + k`.
pub fn run(seed: u64) -> SelftestReport {
    let checks = CHECKS
        .iter()
        .enumerate()
        .map(|(k, (name, check))| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
            let (passed, detail) = match check(&mut rng) {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            CheckOutcome { name, passed, detail }
        })
        .collect();
    SelftestReport { seed, checks }
}

fn fail(e: impl std::fmt::Display) -> String {
    e.to_string()
}

struct Instance {
    h: Matrix,
    carry: Option<Matrix>,
    index: IncidenceIndex,
    layer: AdapterLayer,
}

fn instance(rng: &mut ChaCha8Rng, shape: InstanceShape) -> Instance {
    let index = random_incidence(rng, shape.tokens, shape.hyperedges);
    let h = random_matrix(rng, shape.tokens, shape.hidden, 1.0);
    let carry = rng
        .random_bool(0.5)
        .then(|| random_matrix(rng, shape.tokens, shape.bottleneck, 1.0));
    let layer = random_layer(rng, shape.hidden, shape.bottleneck);
    Instance { h, carry, index, layer }
}

fn bits(m: &Matrix) -> Vec<u64> {
    m.as_slice().iter().map(|v| v.to_bits()).collect()
}

fn identity_at_init(rng: &mut ChaCha8Rng) -> Result<String, String> {
    for i in 0..50 {
        let shape = InstanceShape::sample(rng);
        let mut inst = instance(rng, shape);
        inst.layer = AdapterLayer::init(shape.hidden, shape.bottleneck, rng);
        let out = adapter_forward(&inst.h, inst.carry.as_ref(), &inst.index, &inst.layer, false).map_err(fail)?;
        if bits(&out.h) != bits(&inst.h) {
            return Err(format!("layer instance {i}: fresh adapter changed h"));
        }
    }
    let encoder = FrozenEncoder::new(FrozenEncoderConfig::default()).map_err(fail)?;
    let cfg = encoder.config;
    let adapters = init_parameters(
        PlmShapeConfig::new(cfg.layers, cfg.hidden, 8).map_err(fail)?,
        rng.random(),
    )
    .map_err(fail)?;
    for i in 0..50 {
        let n = rng.random_range(1..=24);
        let ids: Vec<usize> = (0..n).map(|_| rng.random_range(0..cfg.vocab_size)).collect();
        let e = rng.random_range(0..=8);
        let index = random_incidence(rng, n, e);
        let plain = encoder.forward(&ids, &index, None, false).map_err(fail)?;
        let fresh = encoder.forward(&ids, &index, Some(&adapters), false).map_err(fail)?;
        if bits(&plain.hidden) != bits(&fresh.hidden) {
            return Err(format!("encoder instance {i}: fresh adapters changed the output"));
        }
    }
    Ok("50 layer and 50 encoder instances bit-identical".into())
}

fn attention_normalization(rng: &mut ChaCha8Rng) -> Result<String, String> {
    let mut worst = 0.0f64;
    for i in 0..100 {
        let shape = InstanceShape::sample(rng);
        let inst = instance(rng, shape);
        let out = adapter_forward(&inst.h, inst.carry.as_ref(), &inst.index, &inst.layer, true).map_err(fail)?;
        let tape = out.tape.expect("training forward keeps a tape");
        for (alpha, groups) in [
            (&tape.alpha_ne, inst.index.by_edge()),
            (&tape.alpha_en, inst.index.by_token()),
        ] {
            let sizes = groups.group_sizes();
            for (g, sum) in groups.group_sums(alpha).into_iter().enumerate() {
                if sizes[g] > 0 {
                    worst = worst.max((sum - 1.0).abs());
                }
            }
        }
        if worst > NORMALIZATION_TOL {
            return Err(format!("instance {i}: attention sums off by {worst:e}"));
        }
    }
    Ok(format!("100 instances, max |sum - 1| = {worst:e}"))
}

fn permutation_equivariance(rng: &mut ChaCha8Rng) -> Result<String, String> {
    let mut worst = 0.0f64;
    for i in 0..100 {
        let shape = InstanceShape::sample(rng);
        let inst = instance(rng, shape);
        let n = inst.h.rows();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(rng);
        let mut inverse = vec![0; n];
        for (old, &new) in perm.iter().enumerate() {
            inverse[new] = old;
        }
        let h = inst.h.select_rows(&inverse);
        let carry = inst.carry.as_ref().map(|c| c.select_rows(&inverse));
        let pairs: Vec<_> = inst
            .index
            .tokens()
            .iter()
            .zip(inst.index.edges())
            .map(|(&t, &e)| (perm[t], e))
            .collect();
        let index = IncidenceIndex::from_pairs(n, &pairs, inst.index.edge_types()).map_err(fail)?;
        let a = adapter_forward(&inst.h, inst.carry.as_ref(), &inst.index, &inst.layer, false).map_err(fail)?;
        let b = adapter_forward(&h, carry.as_ref(), &index, &inst.layer, false).map_err(fail)?;
        worst = worst
            .max(b.h.max_abs_diff(&a.h.select_rows(&inverse)))
            .max(b.o.max_abs_diff(&a.o.select_rows(&inverse)));
        if worst > EQUIVARIANCE_TOL {
            return Err(format!("instance {i}: permuted outputs differ by {worst:e}"));
        }
    }
    Ok(format!("100 instances, max gap {worst:e}"))
}

fn type_sensitivity(rng: &mut ChaCha8Rng) -> Result<String, String> {
    let shape = InstanceShape {
        tokens: 6,
        hyperedges: 3,
        hidden: 8,
        bottleneck: 4,
    };
    let (mut sensitive, mut degenerate) = (0, 0);
    for _ in 0..20 {
        let inst = instance(rng, shape);
        let a = adapter_forward(&inst.h, inst.carry.as_ref(), &inst.index, &inst.layer, true).map_err(fail)?;
        let tape = a.tape.as_ref().expect("tape");
        if tape.p.row(0).iter().all(|&v| v == 0.0) {
            // An all-zero aggregate only sees the type through its bias.
            degenerate += 1;
        }
        let mut types = inst.index.edge_types().to_vec();
        types[0] = HyperedgeType::ALL[(types[0].index() + 1) % 3];
        let pairs: Vec<_> = inst
            .index
            .tokens()
            .iter()
            .copied()
            .zip(inst.index.edges().iter().copied())
            .collect();
        let index = IncidenceIndex::from_pairs(shape.tokens, &pairs, &types).map_err(fail)?;
        let b = adapter_forward(&inst.h, inst.carry.as_ref(), &index, &inst.layer, false).map_err(fail)?;
        if a.o.max_abs_diff(&b.o) > 1e-9 {
            sensitive += 1;
        }
    }
    if sensitive == 0 {
        return Err("relabelling a hyperedge type never changed o".into());
    }
    Ok(format!(
        "{sensitive}/20 relabelled instances changed o ({degenerate} with a zero aggregate)"
    ))
}

fn heterogeneity_isolation(rng: &mut ChaCha8Rng) -> Result<String, String> {
    for ty in HyperedgeType::ALL {
        let t = ty.index();
        for i in 0..20 {
            let shape = InstanceShape::sample(rng);
            let base = random_incidence(rng, shape.tokens, shape.hyperedges.max(1));
            let pairs: Vec<_> = base
                .tokens()
                .iter()
                .copied()
                .zip(base.edges().iter().copied())
                .collect();
            let index = IncidenceIndex::from_pairs(shape.tokens, &pairs, &vec![ty; base.edge_count()]).map_err(fail)?;
            let mut inst = instance(rng, shape);
            inst.layer.q[t] = Matrix::zeros(1, shape.bottleneck);
            inst.layer.w_type[t] = Matrix::zeros(shape.bottleneck, shape.bottleneck);
            inst.layer.b_type[t] = Matrix::zeros(1, shape.bottleneck);
            let out = adapter_forward(&inst.h, inst.carry.as_ref(), &index, &inst.layer, true).map_err(fail)?;
            let tape = out.tape.expect("tape");
            let sizes = index.by_edge().group_sizes();
            for (k, &a) in tape.alpha_ne.iter().enumerate() {
                let uniform = 1.0 / sizes[index.edges()[k]] as f64;
                if a != uniform {
                    return Err(format!("{ty} instance {i}: alpha {a} instead of {uniform}"));
                }
            }
            if out.o.as_slice().iter().any(|&v| v != 0.0) {
                return Err(format!("{ty} instance {i}: zeroed transform left a nonzero carry"));
            }
        }
    }
    Ok("uniform attention and zero carry for all three types".into())
}

fn gradient_completeness(rng: &mut ChaCha8Rng) -> Result<String, String> {
    let (tokens, edges, hidden, bottleneck) = (8, 6, 8, 4);
    let mut reached: Option<Vec<bool>> = None;
    for _ in 0..20 {
        let base = random_incidence(rng, tokens, edges);
        let pairs: Vec<_> = base
            .tokens()
            .iter()
            .copied()
            .zip(base.edges().iter().copied())
            .collect();
        let types: Vec<_> = (0..edges).map(|e| HyperedgeType::ALL[e % 3]).collect();
        let index = IncidenceIndex::from_pairs(tokens, &pairs, &types).map_err(fail)?;
        let h = random_matrix(rng, tokens, hidden, 1.0);
        let carry = random_matrix(rng, tokens, bottleneck, 1.0);
        let layer = random_layer(rng, hidden, bottleneck);
        let out = adapter_forward(&h, Some(&carry), &index, &layer, true).map_err(fail)?;
        let gh = random_matrix(rng, tokens, hidden, 1.0);
        let go = random_matrix(rng, tokens, bottleneck, 1.0);
        let grads = adapter_backward(out.tape.as_ref(), &layer, &gh, &go).map_err(fail)?;
        let flat = grads.params.flatten();
        let seen = reached.get_or_insert_with(|| vec![false; flat.len()]);
        for (s, g) in seen.iter_mut().zip(flat) {
            *s |= g != 0.0;
        }
    }
    let seen = reached.unwrap_or_default();
    let dead = seen.iter().filter(|&&s| !s).count();
    if dead > 0 {
        return Err(format!("{dead} of {} parameters never received a gradient", seen.len()));
    }
    Ok(format!("all {} parameters received a nonzero gradient", seen.len()))
}

fn gradient_check(rng: &mut ChaCha8Rng) -> Result<String, String> {
    let report = run_suite(rng.random(), 20, GradCheckConfig::default()).map_err(fail)?;
    let detail = format!(
        "20 trials, {} failures, max rel err {:e}, max forward gap {:e}",
        report.failures, report.max_rel_error, report.max_forward_gap
    );
    if report.passed() {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn corpus_graphs() -> Result<Vec<(String, TokenizedHypergraph)>, String> {
    let mut out = Vec::new();
    for tokenizer in [Tokenizer::fallback(), Tokenizer::demo()] {
        for s in corpus::snippets() {
            let g = generate(s.source, s.language, &tokenizer, &GeneratorConfig::default())
                .map_err(|e| format!("{}/{}: {e}", s.language, s.name))?;
            out.push((format!("{}/{}", s.language, s.name), g));
        }
    }
    Ok(out)
}

fn corpus_extraction(_: &mut ChaCha8Rng) -> Result<String, String> {
    let graphs = corpus_graphs()?;
    for (name, g) in &graphs {
        let report = validate(g);
        if !report.ok {
            return Err(format!("{name}: {report}"));
        }
        let back = TokenizedHypergraph::from_json(&g.to_json()).map_err(fail)?;
        if &back != g {
            return Err(format!("{name}: JSON round trip changed the graph"));
        }
    }
    Ok(format!(
        "{} extractions valid and round-trip through JSON",
        graphs.len()
    ))
}

fn ast_family_laminar(_: &mut ChaCha8Rng) -> Result<String, String> {
    let graphs = corpus_graphs()?;
    for (name, g) in &graphs {
        if let Some((a, b)) = laminar_conflict(g, HyperedgeType::AstFamily) {
            return Err(format!("{name}: hyperedges {a} and {b} cross"));
        }
    }
    Ok(format!("{} extractions laminar", graphs.len()))
}

/// Characters from several scripts and widths, whitespace included.
fn random_text(rng: &mut impl Rng) -> String {
    const POOLS: [&[(u32, u32)]; 4] = [
        &[(0x20, 0x7e)],
        &[(0x09, 0x0a), (0x0d, 0x0d), (0x20, 0x20)],
        &[(0xa0, 0x24f), (0x391, 0x3c9), (0x410, 0x44f)],
        &[(0x4e00, 0x4e80), (0x1f600, 0x1f64f), (0x10000, 0x1007f)],
    ];
    let len = rng.random_range(0..40);
    (0..len)
        .map(|_| {
            let pool = POOLS[rng.random_range(0..POOLS.len())];
            let (lo, hi) = pool[rng.random_range(0..pool.len())];
            char::from_u32(rng.random_range(lo..=hi)).expect("ranges avoid surrogates")
        })
        .collect()
}

fn bpe_round_trip(rng: &mut ChaCha8Rng) -> Result<String, String> {
    let tok = Tokenizer::demo();
    for _ in 0..1000 {
        let text = random_text(rng);
        let pieces = tok.tokenize(&text);
        let back = tok.detokenize(&pieces).map_err(fail)?;
        if back != text {
            return Err(format!("{text:?} came back as {back:?}"));
        }
    }
    let split = tok.tokenize("SimpleCalculator");
    if split.len() != 3 {
        return Err(format!("SimpleCalculator split into {split:?}"));
    }
    Ok(format!("1000 strings byte-exact; SimpleCalculator -> {split:?}"))
}

fn ablation_subsets(rng: &mut ChaCha8Rng) -> Result<String, String> {
    let cfg = FrozenEncoderConfig {
        max_len: 64,
        ..FrozenEncoderConfig::default()
    };
    let encoder = FrozenEncoder::new(cfg).map_err(fail)?;
    let adapters = init_parameters(
        PlmShapeConfig::new(cfg.layers, cfg.hidden, 8).map_err(fail)?,
        rng.random(),
    )
    .map_err(fail)?;
    let sources = corpus::snippets_for(Language::Java);
    for mask in 0..8u8 {
        let enabled: BTreeSet<_> = HyperedgeType::ALL
            .into_iter()
            .filter(|t| mask & (1 << t.index()) != 0)
            .collect();
        let mut snippets = SnippetEncoder::new(Language::Java, Tokenizer::demo(), cfg.max_len, cfg.vocab_size);
        snippets.enabled = enabled.clone();
        for s in sources.iter().take(5) {
            let full = generate(s.source, Language::Java, &snippets.tokenizer, &snippets.generator).map_err(fail)?;
            if !validate(&filter_types(&full, &enabled)).ok {
                return Err(format!("{}: filtered graph invalid", s.name));
            }
            let enc = snippets.encode(s.source).map_err(fail)?;
            if enc.graph.hyperedge_types.iter().any(|t| !enabled.contains(t)) {
                return Err(format!("{}: disabled type survived", s.name));
            }
            let out = encoder
                .forward(&enc.ids, &enc.index, Some(&adapters), false)
                .map_err(fail)?;
            if !out.hidden.is_finite() {
                return Err(format!("{}: non-finite encoder output", s.name));
            }
        }
    }
    Ok("8 type subsets encoded and run".into())
}
