//! Deterministic tokenizer: lowercase, whitespace split, edge punctuation
//! stripped, sentence break after a word ending in `.`, `?` or `!`.

/// Splits a body into non-empty newline-separated blocks.
pub fn split_paragraphs(body: &str) -> Vec<&str> {
    body.split('\n')
        .map(str::trim)
        .filter(|block| !block.is_empty())
        .collect()
}

/// Tokenizes one paragraph into sentences of lowercase tokens.
///
/// Sentences left without tokens after stripping are dropped.
pub fn tokenize_sentences(text: &str) -> Vec<Vec<String>> {
    let mut sentences = Vec::new();
    let mut current = Vec::new();
    for raw in text.split_whitespace() {
        if let Some(token) = normalize_token(raw) {
            current.push(token);
        }
        if ends_sentence(raw) && !current.is_empty() {
            sentences.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        sentences.push(current);
    }
    sentences
}

/// Lowercases and strips leading/trailing non-alphanumeric characters.
pub fn normalize_token(raw: &str) -> Option<String> {
    let trimmed = raw.trim_matches(|c: char| !c.is_alphanumeric());
    if trimmed.is_empty() {
        None
    } else {
        Some(trimmed.to_lowercase())
    }
}

/// Normalizes a phrase (for example a lexicon seed) with the same rules as
/// body text, joining tokens with single spaces.
pub fn normalize_phrase(phrase: &str) -> String {
    phrase
        .split_whitespace()
        .filter_map(normalize_token)
        .collect::<Vec<_>>()
        .join(" ")
}

fn ends_sentence(raw: &str) -> bool {
    let core = raw.trim_end_matches(['"', '\'', ')', ']', '\u{201d}', '\u{2019}']);
    core.ends_with(['.', '?', '!'])
}
