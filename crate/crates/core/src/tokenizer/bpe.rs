//! Byte-level BPE.
//!
//! Input bytes are mapped onto printable code points with the usual
//! byte-to-unicode table (printable Latin-1 bytes map to themselves, the other
//! 68 bytes to U+0100..U+0143), split with the GPT-2 pre-tokenization pattern,
//! and each piece is merged greedily by merge rank.

use std::collections::HashMap;
use std::sync::OnceLock;

use fancy_regex::Regex;
use serde::Deserialize;

use super::TokenizerError;

const PRETOKENIZE_PATTERN: &str = r"'s|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+";

fn pretokenizer() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(PRETOKENIZE_PATTERN).expect("static pattern compiles"))
}

/// Byte → char table.
pub fn byte_to_char() -> &'static [char; 256] {
    static TABLE: OnceLock<[char; 256]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = ['\0'; 256];
        let printable = |b: u32| {
            (u32::from(b'!')..=u32::from(b'~')).contains(&b) || (0xA1..=0xAC).contains(&b) || (0xAE..=0xFF).contains(&b)
        };
        let mut shifted = 0u32;
        for b in 0u32..256 {
            let cp = if printable(b) {
                b
            } else {
                shifted += 1;
                255 + shifted
            };
            table[b as usize] = char::from_u32(cp).expect("valid code point");
        }
        table
    })
}

fn char_to_byte() -> &'static HashMap<char, u8> {
    static TABLE: OnceLock<HashMap<char, u8>> = OnceLock::new();
    TABLE.get_or_init(|| byte_to_char().iter().enumerate().map(|(b, &c)| (c, b as u8)).collect())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct VocabFile {
    vocab: Option<HashMap<String, u32>>,
    merges: Option<Vec<String>>,
    byte_level: Option<bool>,
}

#[derive(Clone, Debug)]
pub struct ByteLevelBpe {
    vocab: HashMap<String, u32>,
    merges: Vec<(String, String)>,
    ranks: HashMap<(String, String), usize>,
}

impl ByteLevelBpe {
    pub fn from_json(text: &str) -> Result<Self, TokenizerError> {
        let file: VocabFile = serde_json::from_str(text).map_err(|e| TokenizerError::Malformed {
            field: "<file>".into(),
            detail: e.to_string(),
        })?;
        let missing = |field: &str| TokenizerError::Malformed {
            field: field.into(),
            detail: "missing".into(),
        };
        let vocab = file.vocab.ok_or_else(|| missing("vocab"))?;
        let merge_lines = file.merges.ok_or_else(|| missing("merges"))?;
        match file.byte_level {
            Some(true) => {}
            Some(false) => {
                return Err(TokenizerError::Malformed {
                    field: "byte_level".into(),
                    detail: "only byte-level models are supported".into(),
                })
            }
            None => return Err(missing("byte_level")),
        }

        let mut merges = Vec::with_capacity(merge_lines.len());
        let mut ranks = HashMap::with_capacity(merge_lines.len());
        for (i, line) in merge_lines.iter().enumerate() {
            let mut parts = line.split(' ');
            let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(TokenizerError::Malformed {
                    field: format!("merges[{i}]"),
                    detail: format!("expected two space separated symbols, got {line:?}"),
                });
            };
            if a.is_empty() || b.is_empty() {
                return Err(TokenizerError::Malformed {
                    field: format!("merges[{i}]"),
                    detail: format!("empty symbol in {line:?}"),
                });
            }
            let pair = (a.to_string(), b.to_string());
            if ranks.insert(pair.clone(), i).is_some() {
                return Err(TokenizerError::DuplicateMerge(line.clone()));
            }
            merges.push(pair);
        }
        Ok(Self { vocab, merges, ranks })
    }

    pub fn vocab(&self) -> &HashMap<String, u32> {
        &self.vocab
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn tokenize(&self, text: &str) -> Vec<String> {
        let table = byte_to_char();
        let mut out = Vec::new();
        for piece in pretokenizer().find_iter(text) {
            let piece = piece.expect("pre-tokenizer cannot backtrack excessively").as_str();
            let mapped: Vec<String> = piece.bytes().map(|b| table[b as usize].to_string()).collect();
            out.extend(self.merge_word(mapped));
        }
        out
    }

    /// Repeatedly merges the lowest-ranked adjacent pair, all occurrences of
    /// it left to right, until no ranked pair remains.
    fn merge_word(&self, mut symbols: Vec<String>) -> Vec<String> {
        while symbols.len() > 1 {
            let best = symbols
                .windows(2)
                .filter_map(|w| self.ranks.get(&(w[0].clone(), w[1].clone())).copied())
                .min();
            let Some(rank) = best else { break };
            let (a, b) = &self.merges[rank];
            let mut merged = Vec::with_capacity(symbols.len());
            let mut i = 0;
            while i < symbols.len() {
                if i + 1 < symbols.len() && &symbols[i] == a && &symbols[i + 1] == b {
                    merged.push(format!("{a}{b}"));
                    i += 2;
                } else {
                    merged.push(std::mem::take(&mut symbols[i]));
                    i += 1;
                }
            }
            symbols = merged;
        }
        symbols
    }

    /// Maps token strings back to the original bytes.
    pub fn detokenize_bytes<S: AsRef<str>>(tokens: &[S]) -> Result<Vec<u8>, TokenizerError> {
        let table = char_to_byte();
        let mut out = Vec::new();
        for tok in tokens {
            for ch in tok.as_ref().chars() {
                let b = table
                    .get(&ch)
                    .ok_or_else(|| TokenizerError::NotByteLevel(tok.as_ref().to_string()))?;
                out.push(*b);
            }
        }
        Ok(out)
    }
}
