use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use hgcode::adapter::check::run_suite;
use hgcode::adapter::{ParameterSummary, PlmShapeConfig, REFERENCE_MODELS};
use hgcode::generator::generate_bytes;
use hgcode::host::{run_clone_demo, DemoConfig, TrainConfig, TrainReport};
use hgcode::incidence::{filter_types, parse_type_set, truncate_remap, validate};
use hgcode::numerics::GradCheckConfig;
use hgcode::parsing::GRAMMAR_VERSIONS;
use hgcode::{
    selftest, AstScope, CorpusStats, GeneratorConfig, HyperedgeType, Language, TokenizedHypergraph, Tokenizer,
};

use crate::{CheckFailed, DemoArgs, ExtractArgs, GradcheckArgs, ParamsArgs, SelftestArgs, StatsArgs, Usage};

pub fn version_text() -> String {
    let mut out = format!("hgcode {}\n", env!("CARGO_PKG_VERSION"));
    for (lang, grammar) in GRAMMAR_VERSIONS {
        let _ = writeln!(out, "  {:<10} {grammar}", lang.name());
    }
    out
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn parse_language(name: &str) -> Result<Language> {
    name.parse().map_err(|e| usage(format!("{e}")))
}

fn load_tokenizer(spec: Option<&str>) -> Result<Tokenizer> {
    match spec {
        None | Some("fallback") => Ok(Tokenizer::fallback()),
        Some("demo") => Ok(Tokenizer::demo()),
        Some(path) => Tokenizer::load_vocabulary(path).map_err(|e| usage(format!("tokenizer {path}: {e}"))),
    }
}

fn generator_config(
    exclude_comments: bool,
    direct_parents_only: bool,
    min_tokens: Option<usize>,
) -> Result<GeneratorConfig> {
    let mut cfg = GeneratorConfig {
        include_comments: !exclude_comments,
        ..GeneratorConfig::default()
    };
    if direct_parents_only {
        cfg.ast_scope = AstScope::DirectParentsOnly;
    }
    if let Some(n) = min_tokens {
        cfg.min_tokens_for_hyperedge = n;
    }
    cfg.check().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn language_of(path: &Path) -> Option<Language> {
    path.extension()
        .and_then(|e| e.to_str())
        .and_then(Language::from_extension)
}

/// Files under `dir` in path order, each with the language it is read as.
/// With an explicit language only files carrying one of its extensions are kept.
fn source_files(dir: &Path, explicit: Option<Language>) -> Result<Vec<(PathBuf, Language)>> {
    let mut out = Vec::new();
    for entry in walkdir::WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.with_context(|| format!("walking {}", dir.display()))?;
        if !entry.file_type().is_file() {
            continue;
        }
        let inferred = language_of(entry.path());
        let keep = match explicit {
            Some(lang) => inferred == Some(lang),
            None => inferred.is_some(),
        };
        if keep {
            out.push((
                entry.path().to_path_buf(),
                explicit.or(inferred).expect("kept files have a language"),
            ));
        }
    }
    Ok(out)
}

fn required_path(path: Option<PathBuf>, what: &str) -> Result<PathBuf> {
    let path = path.ok_or_else(|| usage(format!("missing {what}")))?;
    if !path.exists() {
        return Err(usage(format!("{} does not exist", path.display())));
    }
    Ok(path)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("outputs serialize");
    s.push('\n');
    s
}

fn enabled_types(ablate: Option<&str>) -> Result<BTreeSet<HyperedgeType>> {
    let dropped = match ablate.map(str::trim) {
        None => BTreeSet::new(),
        Some("all") => HyperedgeType::ALL.into_iter().collect(),
        Some(list) => parse_type_set(list).map_err(|e| usage(e.to_string()))?,
    };
    Ok(HyperedgeType::ALL
        .into_iter()
        .filter(|t| !dropped.contains(t))
        .collect())
}

pub fn extract(a: ExtractArgs) -> Result<()> {
    let path = required_path(a.path, "input path")?;
    let explicit = a.language.as_deref().map(parse_language).transpose()?;
    let tokenizer = load_tokenizer(a.tokenizer.as_deref())?;
    let cfg = generator_config(a.exclude_comments, a.direct_parents_only, a.min_tokens)?;
    let enabled = enabled_types(a.ablate.as_deref())?;

    let one = |file: &Path, lang: Language| -> Result<TokenizedHypergraph> {
        let bytes = std::fs::read(file).with_context(|| format!("reading {}", file.display()))?;
        let mut g = generate_bytes(&bytes, lang, &tokenizer, &cfg).with_context(|| file.display().to_string())?;
        if let Some(k) = a.max_tokens {
            g = truncate_remap(&g, k);
        }
        let g = filter_types(&g, &enabled);
        let report = validate(&g);
        if !report.ok {
            return Err(anyhow!("{}: extracted graph is invalid: {report}", file.display()));
        }
        Ok(g)
    };

    let text = if path.is_dir() {
        let files = source_files(&path, explicit)?;
        let graphs = files
            .par_iter()
            .map(|(file, lang)| one(file, *lang))
            .collect::<Result<Vec<_>>>()?;
        let keyed: BTreeMap<String, TokenizedHypergraph> = files
            .iter()
            .map(|(file, _)| {
                let rel = file.strip_prefix(&path).unwrap_or(file);
                rel.components()
                    .map(|c| c.as_os_str().to_string_lossy())
                    .collect::<Vec<_>>()
                    .join("/")
            })
            .zip(graphs)
            .collect();
        to_json(&keyed)
    } else {
        let lang = explicit.or_else(|| language_of(&path)).ok_or_else(|| {
            usage(format!(
                "cannot infer the language of {}; pass --language",
                path.display()
            ))
        })?;
        let mut s = one(&path, lang)?.to_json_pretty();
        s.push('\n');
        s
    };
    emit(a.out.as_deref(), &text)
}

fn stats_table(rows: &[CorpusStats]) -> String {
    let mut out = format!(
        "{:<11}{:>9}{:>8}{:>13}{:>17}{:>12}{:>9}{:>7}\n",
        "Language", "Snippets", "Failed", "Avg. tokens", "Avg. hyperedges", "AST family", "Lexical", "Line"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<11}{:>9}{:>8}{:>13.2}{:>17.2}{:>12.2}{:>9.2}{:>7.2}",
            r.language.name(),
            r.snippet_count,
            r.failed_count,
            r.avg_tokens,
            r.avg_hyperedges,
            r.avg_ast_family,
            r.avg_lexical,
            r.avg_line
        );
    }
    out
}

pub fn stats(a: StatsArgs) -> Result<()> {
    let dir = required_path(a.dir, "corpus directory")?;
    if !dir.is_dir() {
        return Err(usage(format!("{} is not a directory", dir.display())));
    }
    let explicit = a.language.as_deref().map(parse_language).transpose()?;
    let tokenizer = load_tokenizer(a.tokenizer.as_deref())?;
    let cfg = generator_config(a.exclude_comments, a.direct_parents_only, a.min_tokens)?;

    let mut by_language: BTreeMap<Language, Vec<PathBuf>> = BTreeMap::new();
    for (file, lang) in source_files(&dir, explicit)? {
        by_language.entry(lang).or_default().push(file);
    }
    if by_language.is_empty() {
        return Err(usage(format!("no source files under {}", dir.display())));
    }
    let mut rows = Vec::new();
    for (lang, files) in by_language {
        let sources = files
            .par_iter()
            .map(|f| std::fs::read(f).with_context(|| format!("reading {}", f.display())))
            .collect::<Result<Vec<_>>>()?;
        rows.push(hgcode::stats(&sources, lang, &tokenizer, &cfg)?);
    }
    let text = if a.json { to_json(&rows) } else { stats_table(&rows) };
    emit(a.out.as_deref(), &text)
}

/// `1189632` → `1,189,632`.
fn grouped(n: u64) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

/// `125M`, `6.7B`, `1.1e9` or a plain integer.
fn parse_count(s: &str) -> Result<f64> {
    let s = s.trim();
    let (number, scale) = match s.chars().last() {
        Some('K' | 'k') => (&s[..s.len() - 1], 1e3),
        Some('M' | 'm') => (&s[..s.len() - 1], 1e6),
        Some('B' | 'b') => (&s[..s.len() - 1], 1e9),
        _ => (s, 1.0),
    };
    match number.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v * scale),
        _ => Err(usage(format!("cannot read parameter count {s:?}"))),
    }
}

#[derive(Serialize)]
struct ParamsRow {
    name: Option<String>,
    #[serde(flatten)]
    summary: ParameterSummary,
    host_params: Option<f64>,
    hgadapter_share_pct: Option<f64>,
}

pub fn params(a: ParamsArgs) -> Result<()> {
    let bottleneck = a.bottleneck.unwrap_or(PlmShapeConfig::DEFAULT_BOTTLENECK);
    let host = a.plm_params.as_deref().map(parse_count).transpose()?;
    let rows: Vec<ParamsRow> = match (a.layers, a.hidden) {
        (None, None) => REFERENCE_MODELS
            .iter()
            .map(|m| {
                let shape = PlmShapeConfig::new(m.shape.layers, m.shape.hidden, bottleneck)?;
                let summary = ParameterSummary::new(shape);
                let total = host.unwrap_or(m.reported_params_value);
                Ok(ParamsRow {
                    name: Some(m.name.to_string()),
                    hgadapter_share_pct: Some(summary.share_of(total)),
                    host_params: Some(total),
                    summary,
                })
            })
            .collect::<Result<_, hgcode::adapter::AdapterError>>()
            .map_err(|e| usage(e.to_string()))?,
        (Some(layers), Some(hidden)) => {
            let shape = PlmShapeConfig::new(layers, hidden, bottleneck).map_err(|e| usage(e.to_string()))?;
            let summary = ParameterSummary::new(shape);
            vec![ParamsRow {
                name: None,
                hgadapter_share_pct: host.map(|t| summary.share_of(t)),
                host_params: host,
                summary,
            }]
        }
        _ => return Err(usage("--layers and --hidden go together")),
    };
    if a.json {
        print!("{}", to_json(&rows));
        return Ok(());
    }
    let mut out = format!(
        "{:<34}{:>4}{:>6}{:>5}{:>20}{:>20}{:>18}{:>9}\n",
        "Host", "L", "C", "C_d", "Adapter", "HGAdapter", "Overhead", "Share"
    );
    for r in &rows {
        let s = &r.summary;
        let _ = writeln!(
            out,
            "{:<34}{:>4}{:>6}{:>5}{:>20}{:>20}{:>18}{:>9}",
            r.name.as_deref().unwrap_or("-"),
            s.shape.layers,
            s.shape.hidden,
            s.shape.bottleneck,
            format!("{} ({})", grouped(s.adapter), s.adapter_rounded),
            format!("{} ({})", grouped(s.hgadapter), s.hgadapter_rounded),
            format!("{:.2}% ({:.2}%)", s.overhead_exact_pct, s.overhead_rounded_pct),
            r.hgadapter_share_pct.map_or("-".into(), |p| format!("{p:.2}%")),
        );
    }
    out.push_str("Overhead: exact counts (0.1M-rounded counts). Share: HGAdapter size over the host model.\n");
    print!("{out}");
    Ok(())
}

pub fn gradcheck(a: GradcheckArgs) -> Result<()> {
    let seed = a.seed.unwrap_or(0);
    let trials = a.trials.unwrap_or(100);
    if trials == 0 {
        return Err(usage("--trials must be at least 1"));
    }
    let cfg = GradCheckConfig::default();
    let report = run_suite(seed, trials, cfg)?;
    if a.json {
        print!("{}", to_json(&report));
    } else {
        println!(
            "trials {trials}, seed {seed}: {} failed, max rel err {:.3e} (tol {:e}), max forward gap {:.3e}",
            report.failures, report.max_rel_error, cfg.tol, report.max_forward_gap
        );
        for t in report.trials.iter().filter(|t| !t.passed()) {
            println!(
                "  FAIL trial seed {}: {:?}, rel err {:.3e}",
                t.seed,
                t.shape,
                t.max_rel_error()
            );
        }
    }
    if report.passed() {
        Ok(())
    } else {
        Err(CheckFailed.into())
    }
}

#[derive(Serialize)]
struct DemoOutput<'a> {
    demo: &'a DemoConfig,
    report: &'a TrainReport,
}

fn demo_table(cfg: &DemoConfig, r: &TrainReport) -> String {
    let types: Vec<&str> = cfg.enabled.iter().map(|t| t.name()).collect();
    let mut out = format!(
        "seed {}, hyperedge types [{}], {:?} lr {}, batch {}, {} epochs, {} train / {} val pairs\n",
        cfg.seed,
        types.join(","),
        r.config.optimizer,
        r.config.lr,
        r.config.batch_size,
        r.config.epochs,
        cfg.train_size,
        cfg.val_size
    );
    out.push_str("epoch  train loss  val precision  val recall  val F1\n");
    for (i, (loss, m)) in r.epoch_losses.iter().zip(&r.val_per_epoch).enumerate() {
        let _ = writeln!(
            out,
            "{:>5}  {loss:>10.4}  {:>13.4}  {:>10.4}  {:>6.4}",
            i + 1,
            m.precision,
            m.recall,
            m.f1
        );
    }
    let _ = writeln!(
        out,
        "train loss {:.4} -> {:.4}",
        r.initial_train_loss, r.final_train_loss
    );
    let kept = r
        .best_epoch
        .map_or("initial parameters".to_string(), |e| format!("epoch {e}"));
    let v = &r.validation;
    let _ = writeln!(
        out,
        "kept {kept}: precision {:.4}, recall {:.4}, F1 {:.4}",
        v.precision, v.recall, v.f1
    );
    let _ = writeln!(
        out,
        "frozen encoder {} ({})",
        if r.frozen_unchanged() { "unchanged" } else { "CHANGED" },
        &r.frozen_digest_after[..16]
    );
    out
}

pub fn train_clone_demo(a: DemoArgs) -> Result<()> {
    let mut cfg = DemoConfig::default();
    if let Some(name) = a.preset.as_deref() {
        cfg.train = TrainConfig::preset(name)
            .ok_or_else(|| usage(format!("unknown preset {name:?}; one of {:?}", TrainConfig::PRESETS)))?;
    }
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    cfg.enabled = enabled_types(a.ablate.as_deref())?;
    cfg.train.epochs = a.epochs.unwrap_or(cfg.train.epochs);
    cfg.train.lr = a.lr.unwrap_or(cfg.train.lr);
    cfg.train.batch_size = a.batch_size.unwrap_or(cfg.train.batch_size);
    cfg.train_size = a.train_size.unwrap_or(cfg.train_size);
    cfg.val_size = a.val_size.unwrap_or(cfg.val_size);
    cfg.encoder.layers = a.layers.unwrap_or(cfg.encoder.layers);
    cfg.train.check().map_err(|e| usage(e.to_string()))?;
    cfg.encoder.check().map_err(|e| usage(e.to_string()))?;
    if cfg.encoder.layers == 0 {
        return Err(usage("--layers must be at least 1"));
    }

    let (report, checkpoint) = run_clone_demo(&cfg)?;
    let json = to_json(&DemoOutput {
        demo: &cfg,
        report: &report,
    });
    if let Some(path) = &a.out {
        std::fs::write(path, &json).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &a.checkpoint {
        std::fs::write(path, checkpoint.to_json()).with_context(|| format!("writing {}", path.display()))?;
    }
    if a.json {
        print!("{json}");
    } else {
        print!("{}", demo_table(&cfg, &report));
    }
    if !report.frozen_unchanged() {
        eprintln!("frozen encoder parameters changed during training");
        return Err(CheckFailed.into());
    }
    Ok(())
}

pub fn selftest(a: SelftestArgs) -> Result<()> {
    let report = selftest::run(a.seed.unwrap_or(0));
    if a.json {
        print!("{}", to_json(&report));
    } else {
        for c in &report.checks {
            println!("{} {:<26} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
    }
    if report.passed() {
        Ok(())
    } else {
        Err(CheckFailed.into())
    }
}
