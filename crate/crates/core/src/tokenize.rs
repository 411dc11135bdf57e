//! Rule-based word and sentence tokenization.
//!
//! The word tokenizer splits on whitespace and turns every splitting
//! punctuation character into a token of its own. The sentence tokenizer
//! cuts after runs of sentence terminators (danda, double danda, `?`, `!`,
//! `.`). Neither protects abbreviations or decimal numbers: `ড. রায়` and
//! `3.5` are split at the dot.

use unicode_normalization::UnicodeNormalization;

pub const DANDA: char = '\u{0964}';
pub const DOUBLE_DANDA: char = '\u{0965}';
pub const ABBREVIATION_SIGN: char = '\u{09FD}';

const ASCII_SPLITTING: &str = ".,;:!?()[]{}\"'-";
const TERMINATORS: [char; 5] = [DANDA, DOUBLE_DANDA, '?', '!', '.'];

/// Characters that always form single-character tokens.
pub fn is_splitting_punctuation(c: char) -> bool {
    matches!(c, DANDA | DOUBLE_DANDA | ABBREVIATION_SIGN) || ASCII_SPLITTING.contains(c)
}

pub fn is_sentence_terminator(c: char) -> bool {
    TERMINATORS.contains(&c)
}

/// Splits NFC-normalized `text` into word and punctuation tokens.
pub fn basic_tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for c in text.nfc() {
        if c.is_whitespace() {
            flush_token(&mut current, &mut tokens);
        } else if is_splitting_punctuation(c) {
            flush_token(&mut current, &mut tokens);
            tokens.push(c.to_string());
        } else {
            current.push(c);
        }
    }
    flush_token(&mut current, &mut tokens);
    tokens
}

fn flush_token(current: &mut String, tokens: &mut Vec<String>) {
    if !current.is_empty() {
        tokens.push(std::mem::take(current));
    }
}

/// Splits NFC-normalized `text` into sentences. A sentence ends after a run
/// of consecutive terminators, which stays attached to it; surrounding
/// whitespace is trimmed and empty sentences are dropped.
pub fn sentence_tokenize(text: &str) -> Vec<String> {
    let mut sentences = Vec::new();
    let mut current = String::new();
    let mut in_terminator_run = false;
    for c in text.nfc() {
        if is_sentence_terminator(c) {
            in_terminator_run = true;
        } else if in_terminator_run {
            flush_sentence(&mut current, &mut sentences);
            in_terminator_run = false;
        }
        current.push(c);
    }
    flush_sentence(&mut current, &mut sentences);
    sentences
}

fn flush_sentence(current: &mut String, sentences: &mut Vec<String>) {
    let trimmed = current.trim();
    if !trimmed.is_empty() {
        sentences.push(trimmed.to_string());
    }
    current.clear();
}
