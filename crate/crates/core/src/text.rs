//! Word normalization shared by dictionary construction and segmentation.
//!
//! Text is split on Unicode whitespace, every punctuation character (general
//! categories `Pc`, `Pd`, `Ps`, `Pe`, `Pi`, `Pf`, `Po`) becomes a token of its
//! own, and the remaining runs are lowercased.

use unicode_general_category::{get_general_category, GeneralCategory};

pub fn is_punctuation(c: char) -> bool {
    use GeneralCategory::*;
    matches!(
        get_general_category(c),
        ConnectorPunctuation
            | DashPunctuation
            | OpenPunctuation
            | ClosePunctuation
            | InitialPunctuation
            | FinalPunctuation
            | OtherPunctuation
    )
}

/// Calls `emit` once per normalized word of `text`, in order.
pub fn for_each_word(text: &str, mut emit: impl FnMut(String)) {
    for chunk in text.split_whitespace() {
        let mut start = None;
        for (i, c) in chunk.char_indices() {
            if is_punctuation(c) {
                if let Some(s) = start.take() {
                    emit(chunk[s..i].to_lowercase());
                }
                emit(c.to_string());
            } else if start.is_none() {
                start = Some(i);
            }
        }
        if let Some(s) = start {
            emit(chunk[s..].to_lowercase());
        }
    }
}

pub fn normalize_words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for_each_word(text, |w| out.push(w));
    out
}

/// Canonical form of a single, already split token.
pub fn normalize_token(token: &str) -> String {
    token.trim().to_lowercase()
}
