//! Vocabulary-free splitter used when no model file is supplied.
//!
//! Rules, applied in order: split on whitespace (dropped); every ASCII
//! punctuation character, underscore included, is a token of its own; the
//! remaining runs split wherever a lowercase letter is followed by an
//! uppercase one. Joining the pieces gives the input minus its whitespace.

pub fn split(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        let mut current = String::new();
        let mut prev_lower = false;
        for ch in word.chars() {
            if ch.is_ascii_punctuation() {
                if !current.is_empty() {
                    out.push(std::mem::take(&mut current));
                }
                out.push(ch.to_string());
                prev_lower = false;
                continue;
            }
            if prev_lower && ch.is_uppercase() && !current.is_empty() {
                out.push(std::mem::take(&mut current));
            }
            current.push(ch);
            prev_lower = ch.is_lowercase();
        }
        if !current.is_empty() {
            out.push(current);
        }
    }
    out
}
