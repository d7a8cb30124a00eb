//! Fuzzy cell-value equivalence: text normalization, numeric tolerance,
//! canonical dates, and null equivalence.
//!
//! All functions here are total and pure. Matching never errors: values that
//! fail to parse as dates or numbers simply fall through to text comparison.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

/// Default relative tolerance for numeric comparison (±0.1%).
pub const DEFAULT_NUMERIC_REL_TOLERANCE: f64 = 0.001;

/// Default set of cell texts treated as null.
pub const DEFAULT_NULLISH_ALIASES: [&str; 4] = ["none", "n/a", "nan", ""];

/// Date patterns tried in order by [`parse_date`], after ordinal suffixes and
/// commas have been stripped (chrono `strftime` syntax).
pub const DEFAULT_DATE_FORMATS: [&str; 6] = [
    "%Y-%m-%d",
    "%m/%d/%Y",
    "%B %d %Y",
    "%d %B %Y",
    "%b %d %Y",
    "%d %b %Y",
];

/// Configuration for cell matching.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatchRule {
    /// Relative tolerance for numeric values, anchored to the gold value.
    #[serde(default = "default_tolerance")]
    pub numeric_rel_tolerance: f64,
    /// Texts treated as null, compared after lowercasing and trimming.
    #[serde(default = "default_aliases")]
    pub nullish_aliases: Vec<String>,
    /// Recognized date patterns, tried in order.
    #[serde(default = "default_formats")]
    pub date_formats: Vec<String>,
}

fn default_tolerance() -> f64 {
    DEFAULT_NUMERIC_REL_TOLERANCE
}

fn default_aliases() -> Vec<String> {
    DEFAULT_NULLISH_ALIASES.iter().map(|s| s.to_string()).collect()
}

fn default_formats() -> Vec<String> {
    DEFAULT_DATE_FORMATS.iter().map(|s| s.to_string()).collect()
}

impl Default for MatchRule {
    fn default() -> Self {
        Self {
            numeric_rel_tolerance: default_tolerance(),
            nullish_aliases: default_aliases(),
            date_formats: default_formats(),
        }
    }
}

impl MatchRule {
    /// A rule with a custom numeric tolerance and default aliases/formats.
    pub fn with_tolerance(numeric_rel_tolerance: f64) -> Self {
        Self { numeric_rel_tolerance, ..Self::default() }
    }
}

/// A calendar date reduced to (year, month, day), independent of rendering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CanonicalDate {
    pub year: i32,
    pub month: u32,
    pub day: u32,
}

/// Lowercases and removes every non-alphanumeric character, including all
/// whitespace. `"Los Angeles!"` becomes `"losangeles"`.
pub fn normalize_text(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

/// Normalization applied to key cells before tuple comparison.
///
/// Keys are matched exact-after-normalization, with no numeric or date
/// fuzziness, so alignment stays deterministic.
pub fn normalize_for_key(s: &str) -> String {
    normalize_text(s)
}

/// Parses a cell as a number: optional sign, comma thousands separators, a
/// decimal point, and a trailing percent sign (percent divides by 100).
/// Returns `None` unless the trimmed text is wholly numeric under these rules.
pub fn parse_number(s: &str) -> Option<f64> {
    let mut t = s.trim();
    if t.is_empty() {
        return None;
    }
    let mut scale = 1.0;
    if let Some(stripped) = t.strip_suffix('%') {
        t = stripped.trim_end();
        scale = 0.01;
    }
    let (sign, digits) = match t.strip_prefix('-') {
        Some(rest) => (-1.0, rest),
        None => (1.0, t.strip_prefix('+').unwrap_or(t)),
    };
    if digits.is_empty() {
        return None;
    }
    // Commas are accepted only between digits.
    let bytes = digits.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        if b == b',' {
            let prev_digit = i > 0 && bytes[i - 1].is_ascii_digit();
            let next_digit = i + 1 < bytes.len() && bytes[i + 1].is_ascii_digit();
            if !prev_digit || !next_digit {
                return None;
            }
        }
    }
    let cleaned: String = digits.chars().filter(|&c| c != ',').collect();
    let mut seen_dot = false;
    let mut seen_digit = false;
    for c in cleaned.chars() {
        match c {
            '0'..='9' => seen_digit = true,
            '.' if !seen_dot => seen_dot = true,
            _ => return None,
        }
    }
    if !seen_digit {
        return None;
    }
    cleaned.parse::<f64>().ok().map(|v| sign * v * scale)
}

/// Parses a cell as a calendar date, trying each pattern of `formats` in
/// order. Ordinal suffixes (`16th`) and commas are stripped first. Bare
/// 4-digit years are not dates; they compare as numbers.
pub fn parse_date_with(s: &str, formats: &[String]) -> Option<CanonicalDate> {
    let cleaned = preprocess_date_text(s);
    if cleaned.is_empty() {
        return None;
    }
    for fmt in formats {
        if let Ok(d) = NaiveDate::parse_from_str(&cleaned, fmt) {
            return Some(CanonicalDate {
                year: chrono::Datelike::year(&d),
                month: chrono::Datelike::month(&d),
                day: chrono::Datelike::day(&d),
            });
        }
    }
    None
}

/// [`parse_date_with`] using the default pattern list.
pub fn parse_date(s: &str) -> Option<CanonicalDate> {
    let formats: Vec<String> = DEFAULT_DATE_FORMATS.iter().map(|s| s.to_string()).collect();
    parse_date_with(s, &formats)
}

/// Strips ordinal day suffixes and commas, collapsing whitespace, so that
/// `"16th, May, 2014"` becomes `"16 May 2014"`.
fn preprocess_date_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let chars: Vec<char> = s.trim().chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == ',' {
            out.push(' ');
            i += 1;
            continue;
        }
        if c.is_ascii_digit() {
            out.push(c);
            // digit followed by st/nd/rd/th, not part of a longer word
            let suffix: String = chars[i + 1..].iter().take(2).collect::<String>().to_ascii_lowercase();
            if matches!(suffix.as_str(), "st" | "nd" | "rd" | "th")
                && chars.get(i + 3).is_none_or(|a| !a.is_alphanumeric())
            {
                i += 3;
                continue;
            }
            i += 1;
            continue;
        }
        out.push(c);
        i += 1;
    }
    out.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// True iff the value is the null marker or its lowercased trim is one of the
/// rule's nullish aliases.
pub fn is_nullish(value: Option<&str>, rule: &MatchRule) -> bool {
    match value {
        None => true,
        Some(s) => {
            let t = s.trim().to_lowercase();
            rule.nullish_aliases.iter().any(|a| a.trim().to_lowercase() == t)
        }
    }
}

/// Decides whether a generated cell matches a gold cell.
///
/// Cascade: null check, then canonical dates, then numbers at the rule's
/// relative tolerance (anchored to the gold value; a gold of zero requires an
/// exact zero), then normalized text. Dates run before numbers so that
/// `"2014-05-16"` is never read as arithmetic.
pub fn cells_match(pred: Option<&str>, gold: Option<&str>, rule: &MatchRule) -> bool {
    let pred_null = is_nullish(pred, rule);
    let gold_null = is_nullish(gold, rule);
    if pred_null || gold_null {
        return pred_null && gold_null;
    }
    let p = pred.expect("non-null checked");
    let g = gold.expect("non-null checked");
    if let (Some(pd), Some(gd)) = (parse_date_with(p, &rule.date_formats), parse_date_with(g, &rule.date_formats)) {
        return pd == gd;
    }
    if let (Some(pn), Some(gn)) = (parse_number(p), parse_number(g)) {
        if gn == 0.0 {
            return pn == 0.0;
        }
        return (pn - gn).abs() <= rule.numeric_rel_tolerance * gn.abs();
    }
    normalize_text(p) == normalize_text(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rule() -> MatchRule {
        MatchRule::default()
    }

    #[test]
    fn normalize_removes_symbols_and_spaces() {
        assert_eq!(normalize_text("Los Angeles!"), "losangeles");
        assert_eq!(normalize_text(""), "");
        assert_eq!(normalize_text("3rd"), "3rd");
        assert_eq!(normalize_text("Birmingham"), normalize_text("birmingham "));
    }

    #[test]
    fn parse_number_grammar() {
        assert_eq!(parse_number("1,234.5"), Some(1234.5));
        assert_eq!(parse_number("abc"), None);
        assert_eq!(parse_number("0"), Some(0.0));
        assert_eq!(parse_number("-12"), Some(-12.0));
        assert_eq!(parse_number("+3"), Some(3.0));
        assert_eq!(parse_number("45%"), Some(0.45));
        assert_eq!(parse_number("1,23"), Some(123.0));
        assert_eq!(parse_number(",123"), None);
        assert_eq!(parse_number("123,"), None);
        assert_eq!(parse_number("1,,2"), None);
        assert_eq!(parse_number("12.5.3"), None);
        assert_eq!(parse_number(".5"), Some(0.5));
        assert_eq!(parse_number(""), None);
        assert_eq!(parse_number("%"), None);
        assert_eq!(parse_number("$100"), None);
    }

    #[test]
    fn parse_number_agrees_with_reference_parser() {
        // Plain decimal forms must agree with the standard float parser.
        for s in ["0", "42", "-17", "3.25", "-0.125", "1000000", "+8"] {
            assert_eq!(parse_number(s), Some(s.parse::<f64>().unwrap()), "{s}");
        }
    }

    #[test]
    fn parse_date_formats() {
        let iso = parse_date("2014-05-16").unwrap();
        assert_eq!(iso, CanonicalDate { year: 2014, month: 5, day: 16 });
        assert_eq!(parse_date("16th, May, 2014"), Some(iso));
        assert_eq!(parse_date("May 16, 2014"), Some(iso));
        assert_eq!(parse_date("16 May 2014"), Some(iso));
        assert_eq!(parse_date("05/16/2014"), Some(iso));
        assert_eq!(parse_date("1987"), None);
        assert_eq!(parse_date("2014-13-16"), None);
        assert_eq!(parse_date("February 30, 2014"), None);
        assert_eq!(parse_date("1st Aug 1999"), Some(CanonicalDate { year: 1999, month: 8, day: 1 }));
    }

    #[test]
    fn parse_date_agrees_with_chrono_reference() {
        // Cross-check the normalized forms against chrono parsed directly.
        let direct = NaiveDate::parse_from_str("May 16, 2014", "%B %d, %Y").unwrap();
        let ours = parse_date("May 16, 2014").unwrap();
        assert_eq!(
            (ours.year, ours.month, ours.day),
            (
                chrono::Datelike::year(&direct),
                chrono::Datelike::month(&direct),
                chrono::Datelike::day(&direct)
            )
        );
    }

    #[test]
    fn nullish_values() {
        assert!(is_nullish(Some("N/A"), &rule()));
        assert!(is_nullish(Some("  none "), &rule()));
        assert!(is_nullish(Some(""), &rule()));
        assert!(is_nullish(None, &rule()));
        assert!(!is_nullish(Some("0"), &rule()));
    }

    #[test]
    fn match_cascade() {
        let r = rule();
        // numeric tolerance anchored to gold
        assert!(cells_match(Some("100.05"), Some("100"), &r));
        assert!(!cells_match(Some("100.2"), Some("100"), &r));
        // dates across formats
        assert!(cells_match(Some("16th, May, 2014"), Some("2014-05-16"), &r));
        // text normalization
        assert!(cells_match(Some("Birmingham"), Some("birmingham "), &r));
        // nulls
        assert!(cells_match(Some("N/A"), None, &r));
        assert!(!cells_match(Some("N/A"), Some("0"), &r));
        // zero gold requires exact zero
        assert!(cells_match(Some("0"), Some("0"), &r));
        assert!(!cells_match(Some("0.0001"), Some("0"), &r));
    }

    #[test]
    fn date_branch_never_leaks_to_text_or_number() {
        let r = rule();
        // Normalized texts differ AND the strings are not numbers, but both
        // parse as dates, so the date branch must decide.
        assert!(!cells_match(Some("2014-05-16"), Some("2014-05-17"), &r));
        assert!(cells_match(Some("2014-05-16"), Some("16 May 2014"), &r));
    }

    #[test]
    fn negative_gold_tolerance_uses_magnitude() {
        let r = rule();
        assert!(cells_match(Some("-100.05"), Some("-100"), &r));
        assert!(!cells_match(Some("-100.2"), Some("-100"), &r));
    }

    #[test]
    fn currency_symbols_fall_through_to_text() {
        let r = rule();
        // "$100" is not wholly numeric, so both sides compare as text.
        assert!(cells_match(Some("$100"), Some("$100"), &r));
        assert!(!cells_match(Some("$100"), Some("100.0"), &r));
        assert!(cells_match(Some("$100"), Some("100"), &r)); // normalize_text strips '$'
    }
}
