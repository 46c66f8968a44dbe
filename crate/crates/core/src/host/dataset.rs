//! Synthetic Java clone pairs.
//!
//! Each template is one class with one method. A clone pair is the same
//! template twice, each copy with its own consistent identifier renaming
//! and its own whitespace layout; a non-clone pair uses two different
//! templates. Renaming and layout never change the syntax tree's shape.

use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::HostError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CloneLabel {
    Clone,
    NotClone,
}

impl CloneLabel {
    pub fn is_clone(self) -> bool {
        self == Self::Clone
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CloneExample {
    pub code_a: String,
    pub code_b: String,
    pub label: CloneLabel,
}

/// Placeholders `$C` (class), `$f` (method) and `$a`..`$d` (variables).
/// Tokens must be whitespace-separated wherever layout may change.
const TEMPLATES: [&str; 10] = [
    // sum of an array
    "class $C { int $f ( int [ ] $a ) { int $b = 0 ; for ( int $c = 0 ; $c < $a . length ; $c ++ ) { $b += $a [ $c ] ; } return $b ; } }",
    // maximum of an array
    "class $C { int $f ( int [ ] $a ) { int $b = $a [ 0 ] ; for ( int $c : $a ) { if ( $c > $b ) { $b = $c ; } } return $b ; } }",
    // recursive factorial
    "class $C { long $f ( int $a ) { if ( $a <= 1 ) { return 1 ; } return $a * $f ( $a - 1 ) ; } }",
    // iterative fibonacci
    "class $C { int $f ( int $a ) { int $b = 0 ; int $c = 1 ; while ( $a > 0 ) { int $d = $b + $c ; $b = $c ; $c = $d ; $a -- ; } return $b ; } }",
    // count positives
    "class $C { int $f ( int [ ] $a ) { int $b = 0 ; for ( int $c = 0 ; $c < $a . length ; $c ++ ) if ( $a [ $c ] > 0 ) $b ++ ; return $b ; } }",
    // binary search
    "class $C { int $f ( int [ ] $a , int $b ) { int $c = 0 , $d = $a . length - 1 ; while ( $c <= $d ) { int m = ( $c + $d ) / 2 ; if ( $a [ m ] == $b ) return m ; if ( $a [ m ] < $b ) $c = m + 1 ; else $d = m - 1 ; } return - 1 ; } }",
    // bubble sort
    "class $C { void $f ( int [ ] $a ) { for ( int $b = 0 ; $b < $a . length ; $b ++ ) { for ( int $c = 0 ; $c + 1 < $a . length - $b ; $c ++ ) { if ( $a [ $c ] > $a [ $c + 1 ] ) { int $d = $a [ $c ] ; $a [ $c ] = $a [ $c + 1 ] ; $a [ $c + 1 ] = $d ; } } } } }",
    // greatest common divisor
    "class $C { int $f ( int $a , int $b ) { while ( $b != 0 ) { int $c = $a % $b ; $a = $b ; $b = $c ; } return $a ; } }",
    // primality test
    "class $C { boolean $f ( int $a ) { if ( $a < 2 ) return false ; for ( int $b = 2 ; $b * $b <= $a ; $b ++ ) { if ( $a % $b == 0 ) return false ; } return true ; } }",
    // reverse an array in place
    "class $C { void $f ( char [ ] $a ) { int $b = 0 ; int $c = $a . length - 1 ; while ( $b < $c ) { char $d = $a [ $b ] ; $a [ $b ] = $a [ $c ] ; $a [ $c ] = $d ; $b ++ ; $c -- ; } } }",
];

pub const TEMPLATE_COUNT: usize = TEMPLATES.len();

const WORDS: [&str; 16] = [
    "value", "item", "count", "total", "index", "acc", "left", "right", "data", "node", "temp", "result", "cursor",
    "limit", "score", "buffer",
];

const SUFFIXES: [&str; 8] = ["", "Num", "Val", "Idx", "Sum", "Ptr", "Tmp", "Cnt"];

fn fresh_name(rng: &mut impl Rng, taken: &[String], capitalize: bool) -> String {
    loop {
        let word = WORDS[rng.random_range(0..WORDS.len())];
        let mut name = format!("{word}{}", SUFFIXES[rng.random_range(0..SUFFIXES.len())]);
        if rng.random_bool(0.3) {
            name.push_str(&rng.random_range(1..10).to_string());
        }
        if capitalize {
            name[..1].make_ascii_uppercase();
        }
        if !taken.contains(&name) {
            return name;
        }
    }
}

/// One instance of template `t` with fresh names and layout.
fn render(t: usize, rng: &mut impl Rng) -> String {
    let mut names: Vec<(&str, String)> = Vec::new();
    for key in ["$C", "$f", "$a", "$b", "$c", "$d"] {
        let taken: Vec<String> = names.iter().map(|(_, n)| n.clone()).collect();
        names.push((key, fresh_name(rng, &taken, key == "$C")));
    }
    let indent = ["  ", "    ", "\t"][rng.random_range(0..3)];
    let mut out = String::new();
    for (i, word) in TEMPLATES[t].split_whitespace().enumerate() {
        if i > 0 {
            let sep = match rng.random_range(0..10) {
                0..=5 => " ".to_string(),
                6 => "  ".to_string(),
                7 => "\n".to_string(),
                _ => format!("\n{}", indent.repeat(rng.random_range(1..3))),
            };
            out.push_str(&sep);
        }
        match names.iter().find(|(k, _)| *k == word) {
            Some((_, n)) => out.push_str(n),
            None => out.push_str(word),
        }
    }
    out.push('\n');
    out
}

/// `size` labelled pairs, `size / 2` of them clones, in shuffled order.
pub fn make_synthetic_clone_set(seed: u64, size: usize) -> Result<Vec<CloneExample>, HostError> {
    if size < 2 {
        return Err(HostError::Config(format!(
            "synthetic set needs at least 2 pairs, got {size}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clones = size / 2;
    let mut out = Vec::with_capacity(size);
    for i in 0..size {
        let example = if i < clones {
            let t = rng.random_range(0..TEMPLATE_COUNT);
            CloneExample {
                code_a: render(t, &mut rng),
                code_b: render(t, &mut rng),
                label: CloneLabel::Clone,
            }
        } else {
            let t = rng.random_range(0..TEMPLATE_COUNT);
            let u = (t + rng.random_range(1..TEMPLATE_COUNT)) % TEMPLATE_COUNT;
            CloneExample {
                code_a: render(t, &mut rng),
                code_b: render(u, &mut rng),
                label: CloneLabel::NotClone,
            }
        };
        out.push(example);
    }
    out.shuffle(&mut rng);
    Ok(out)
}

pub fn write_jsonl(path: impl AsRef<Path>, examples: &[CloneExample]) -> Result<(), HostError> {
    let path = path.as_ref();
    let io = |source| HostError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut file = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    for ex in examples {
        let line = serde_json::to_string(ex).expect("example serializes");
        writeln!(file, "{line}").map_err(io)?;
    }
    file.flush().map_err(io)
}

/// One example per non-blank line.
pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Vec<CloneExample>, HostError> {
    let path = path.as_ref();
    let io = |source| HostError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = std::io::BufReader::new(std::fs::File::open(path).map_err(io)?);
    let mut out = Vec::new();
    for (i, line) in file.lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| HostError::Json { line: i + 1, source })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parsing::{node_kind_sequence, parse, Language};

    fn shape(src: &str) -> Vec<String> {
        let tree = parse(src, Language::Java).unwrap();
        assert!(!tree.root_node().has_error(), "{src}");
        node_kind_sequence(&tree)
    }

    #[test]
    fn templates_parse_and_differ() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let shapes: Vec<_> = (0..TEMPLATE_COUNT).map(|t| shape(&render(t, &mut rng))).collect();
        for i in 0..TEMPLATE_COUNT {
            for j in i + 1..TEMPLATE_COUNT {
                assert_ne!(shapes[i], shapes[j], "templates {i} and {j}");
            }
        }
    }

    #[test]
    fn balanced_and_deterministic() {
        let a = make_synthetic_clone_set(3, 21).unwrap();
        assert_eq!(a, make_synthetic_clone_set(3, 21).unwrap());
        assert_ne!(a, make_synthetic_clone_set(4, 21).unwrap());
        let clones = a.iter().filter(|e| e.label.is_clone()).count();
        assert_eq!(clones, 10);
        assert!(make_synthetic_clone_set(3, 1).is_err());
    }

    #[test]
    fn jsonl_round_trip() {
        let set = make_synthetic_clone_set(1, 6).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("set.jsonl");
        write_jsonl(&path, &set).unwrap();
        assert_eq!(read_jsonl(&path).unwrap(), set);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.lines().next().unwrap().contains("\"label\":\""));
    }
}
