use hgcode::corpus::snippets_for;
use hgcode::generator::round2;
use hgcode::{generate, stats, GeneratorConfig, Language, Tokenizer};

/// Totals over the bundled corpus from an independent re-extraction pass:
/// (tokenizer, language, snippets, tokens, AST family, lexical, line).
const GOLDEN: [(&str, Language, usize, u64, u64, u64, u64); 12] = [
    ("fallback", Language::Ruby, 21, 755, 275, 49, 104),
    ("fallback", Language::JavaScript, 21, 1156, 482, 14, 146),
    ("fallback", Language::Java, 30, 1839, 667, 25, 228),
    ("fallback", Language::Go, 21, 1196, 567, 6, 173),
    ("fallback", Language::Php, 21, 1141, 402, 36, 158),
    ("fallback", Language::Python, 22, 1032, 445, 45, 115),
    ("demo", Language::Ruby, 21, 918, 280, 82, 104),
    ("demo", Language::JavaScript, 21, 1414, 486, 83, 146),
    ("demo", Language::Java, 30, 2445, 694, 183, 228),
    ("demo", Language::Go, 21, 1436, 586, 61, 173),
    ("demo", Language::Php, 21, 1323, 421, 73, 158),
    ("demo", Language::Python, 22, 1267, 454, 78, 115),
];

#[test]
fn corpus_statistics_match_golden_values() {
    for (name, lang, count, tokens, ast, lex, line) in GOLDEN {
        let tok = if name == "demo" {
            Tokenizer::demo()
        } else {
            Tokenizer::fallback()
        };
        let sources: Vec<&str> = snippets_for(lang).iter().map(|s| s.source).collect();
        let s = stats(&sources, lang, &tok, &GeneratorConfig::default()).unwrap();
        let tag = format!("{name} {lang}");
        assert_eq!(s.snippet_count, count, "{tag}");
        assert_eq!(s.failed_count, 0, "{tag}");
        assert_eq!(
            (s.total_tokens, s.total_ast_family, s.total_lexical, s.total_line),
            (tokens, ast, lex, line),
            "{tag}"
        );
        assert_eq!(s.total_hyperedges, ast + lex + line, "{tag}");
        let n = count as f64;
        assert_eq!(s.avg_tokens, round2(tokens as f64 / n), "{tag}");
        assert_eq!(s.avg_hyperedges, round2((ast + lex + line) as f64 / n), "{tag}");
        assert_eq!(s.avg_line, round2(line as f64 / n), "{tag}");
    }
}

#[test]
fn demo_ruby_means_to_two_decimals() {
    let sources: Vec<&str> = snippets_for(Language::Ruby).iter().map(|s| s.source).collect();
    let s = stats(
        &sources,
        Language::Ruby,
        &Tokenizer::demo(),
        &GeneratorConfig::default(),
    )
    .unwrap();
    assert_eq!((s.avg_tokens, s.avg_hyperedges), (43.71, 22.19));
}

#[test]
fn means_are_order_independent() {
    let mut sources: Vec<&str> = snippets_for(Language::Go).iter().map(|s| s.source).collect();
    let tok = Tokenizer::demo();
    let forward = stats(&sources, Language::Go, &tok, &GeneratorConfig::default()).unwrap();
    sources.reverse();
    assert_eq!(
        stats(&sources, Language::Go, &tok, &GeneratorConfig::default()).unwrap(),
        forward
    );
}

#[test]
fn unparseable_bytes_are_counted_not_averaged() {
    let good = "def f(x):\n    return x\n";
    let bad: &[u8] = &[0x66, 0xff, 0xfe];
    let corpus: Vec<&[u8]> = vec![good.as_bytes(), bad];
    let s = stats(
        &corpus,
        Language::Python,
        &Tokenizer::fallback(),
        &GeneratorConfig::default(),
    )
    .unwrap();
    assert_eq!((s.snippet_count, s.failed_count), (1, 1));
    let g = generate(
        good,
        Language::Python,
        &Tokenizer::fallback(),
        &GeneratorConfig::default(),
    )
    .unwrap();
    assert_eq!(s.avg_tokens, g.token_count as f64);
}
