use unicode_general_category::{get_general_category, GeneralCategory};
use unicode_normalization::UnicodeNormalization;

use super::Token;

/// True for code points in any Unicode punctuation category (P*).
pub fn is_punctuation(c: char) -> bool {
    matches!(
        get_general_category(c),
        GeneralCategory::ConnectorPunctuation
            | GeneralCategory::DashPunctuation
            | GeneralCategory::OpenPunctuation
            | GeneralCategory::ClosePunctuation
            | GeneralCategory::InitialPunctuation
            | GeneralCategory::FinalPunctuation
            | GeneralCategory::OtherPunctuation
    )
}

/// NFC-normalizes a word and strips leading/trailing punctuation. Interior
/// punctuation (hyphens, apostrophes) is kept.
pub fn normalize_word(word: &str) -> String {
    let mut current: String = word.nfc().collect();
    // Stripping can expose a sequence that composes differently; iterate to a
    // fixed point so the result is idempotent.
    loop {
        let stripped: String = current.trim_matches(is_punctuation).nfc().collect();
        if stripped == current {
            return current;
        }
        current = stripped;
    }
}

/// Normalizes raw surface tokens, dropping those that become empty and
/// reassigning indices contiguously.
pub fn normalize_sentence<S: AsRef<str>>(raw: &[S]) -> Vec<Token> {
    raw.iter()
        .filter_map(|w| {
            let normalized = normalize_word(w.as_ref());
            (!normalized.is_empty()).then(|| (w.as_ref().to_string(), normalized))
        })
        .enumerate()
        .map(|(index, (surface, normalized))| Token { surface, normalized, index })
        .collect()
}
