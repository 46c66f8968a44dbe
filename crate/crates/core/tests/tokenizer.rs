use hgcode::tokenizer::Tokenizer;
use proptest::prelude::*;
use serde::Deserialize;

#[derive(Deserialize)]
struct Case {
    text: String,
    tokens: Vec<String>,
}

#[test]
fn demo_bpe_matches_reference_segmentation() {
    let cases: Vec<Case> = serde_json::from_str(include_str!("data/bpe_reference.json")).expect("fixture parses");
    assert_eq!(cases.len(), 50);
    let tok = Tokenizer::demo();
    for case in &cases {
        assert_eq!(tok.tokenize(&case.text), case.tokens, "text {:?}", case.text);
    }
}

#[test]
fn demo_vocab_covers_every_byte() {
    let tok = Tokenizer::demo();
    for b in hgcode::tokenizer::bpe::byte_to_char() {
        assert!(tok.token_id(&b.to_string()).is_some(), "{b}");
    }
}

proptest! {
    #[test]
    fn bpe_round_trips(text in "\\PC{0,40}") {
        let tok = Tokenizer::demo();
        let pieces = tok.tokenize(&text);
        prop_assert_eq!(pieces.is_empty(), text.is_empty());
        prop_assert_eq!(tok.detokenize(&pieces).unwrap(), text);
    }

    #[test]
    fn bpe_is_deterministic(text in ".{0,30}") {
        let tok = Tokenizer::demo();
        prop_assert_eq!(tok.tokenize(&text), tok.tokenize(&text));
    }

    #[test]
    fn fallback_pieces_rebuild_text_without_whitespace(text in "[a-zA-Z_ .(),=\t\n0-9]{0,40}") {
        let tok = Tokenizer::fallback();
        let pieces = tok.tokenize(&text);
        prop_assert!(pieces.iter().all(|p| !p.is_empty()));
        let expected: String = text.split_whitespace().collect();
        prop_assert_eq!(tok.detokenize(&pieces).unwrap(), expected);
    }
}
