//! Label normalization shared by the label index and the lexical scorers.

/// Lowercases, turns punctuation into word breaks and collapses whitespace.
///
/// `"Martin Luther King, Jr."` and `"martin  luther king jr"` normalize to the
/// same string; `form_of_government` becomes `form of government`.
pub fn normalize(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.extend(ch.to_lowercase());
        } else {
            pending_space = true;
        }
    }
    out
}

/// Whitespace tokens of the normalized text.
pub fn tokens(text: &str) -> Vec<String> {
    normalize(text).split(' ').filter(|t| !t.is_empty()).map(str::to_owned).collect()
}
