//! The code corpus bundled with the crate: short functions in each of the six
//! supported languages, used by the statistics golden values, the extraction
//! oracle suite and the tokenizer vocabulary.

use crate::parsing::Language;

include!(concat!(env!("OUT_DIR"), "/corpus_files.rs"));

#[derive(Clone, Copy, Debug)]
pub struct Snippet {
    pub language: Language,
    pub name: &'static str,
    pub source: &'static str,
}

/// Every bundled snippet, ordered by language directory then file name.
pub fn snippets() -> Vec<Snippet> {
    CORPUS_FILES
        .iter()
        .map(|&(lang, name, source)| Snippet {
            language: lang.parse().expect("corpus directories are language names"),
            name,
            source,
        })
        .collect()
}

pub fn snippets_for(language: Language) -> Vec<Snippet> {
    snippets().into_iter().filter(|s| s.language == language).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_language_has_twenty() {
        for lang in Language::ALL {
            assert!(snippets_for(lang).len() >= 20, "{lang}");
        }
        assert_eq!(snippets_for(Language::Java).len(), 30);
    }
}
