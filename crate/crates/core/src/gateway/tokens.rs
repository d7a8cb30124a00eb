/// Deterministic local token count: maximal alphanumeric runs count as one
/// token each, and every other non-whitespace character counts as its own
/// token. `"hello world"` is 2 tokens; `"don't"` is 3.
///
/// Provider-reported counts are preferred wherever they exist; this
/// approximation backs offline clients and table-size estimates, and every
/// report flags which counter produced its numbers.
pub fn count_tokens(text: &str) -> usize {
    let mut count = 0;
    let mut in_word = false;
    for c in text.chars() {
        if c.is_alphanumeric() {
            if !in_word {
                count += 1;
                in_word = true;
            }
        } else {
            in_word = false;
            if !c.is_whitespace() {
                count += 1;
            }
        }
    }
    count
}
