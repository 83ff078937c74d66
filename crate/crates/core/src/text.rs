//! Tokenization and lexicon matching shared by the rule analyzers, the
//! keyword classifier and the test-spec generator.
//!
//! All offsets are character offsets (not byte offsets) into the original
//! text. Matching is case-insensitive and ASCII-folded; multi-word lexicon
//! entries match contiguous token sequences.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

/// Half-open `[start, end)` range of character offsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start < end);
        Self { start, end }
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    /// Slice `text` by character offsets.
    pub fn slice<'a>(&self, text: &'a str) -> &'a str {
        let mut indices = text.char_indices().map(|(i, _)| i).chain(std::iter::once(text.len()));
        let begin = indices.nth(self.start).unwrap_or(text.len());
        let end = if self.end > self.start {
            indices.nth(self.end - self.start - 1).unwrap_or(text.len())
        } else {
            begin
        };
        &text[begin..end]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    /// Lowercased, ASCII-folded form used for matching.
    pub norm: String,
    pub span: Span,
}

impl Token {
    pub fn is_word(&self) -> bool {
        self.norm.chars().next().is_some_and(|c| c.is_ascii_alphabetic())
    }

    pub fn is_number(&self) -> bool {
        self.norm.chars().next().is_some_and(|c| c.is_ascii_digit())
    }
}

/// Fold one character to lowercase ASCII. Latin-1 letters lose their
/// diacritics; characters without a mapping are kept lowercased.
pub fn fold_char(c: char) -> String {
    let mut out = String::new();
    push_folded(&mut out, c);
    out
}

fn push_folded(out: &mut String, c: char) {
    if c.is_ascii() {
        out.push(c.to_ascii_lowercase());
        return;
    }
    let folded = match c {
        'À'..='Å' | 'à'..='å' | 'Ā' | 'ā' => "a",
        'Æ' | 'æ' => "ae",
        'Ç' | 'ç' | 'Č' | 'č' => "c",
        'È'..='Ë' | 'è'..='ë' | 'Ē' | 'ē' | 'Ę' | 'ę' => "e",
        'Ì'..='Ï' | 'ì'..='ï' => "i",
        'Ñ' | 'ñ' => "n",
        'Ò'..='Ö' | 'Ø' | 'ò'..='ö' | 'ø' => "o",
        'Ù'..='Ü' | 'ù'..='ü' => "u",
        'Ý' | 'ý' | 'ÿ' => "y",
        'ß' => "ss",
        'Š' | 'š' => "s",
        'Ž' | 'ž' => "z",
        '\u{2018}' | '\u{2019}' => "'",
        _ => {
            out.extend(c.to_lowercase());
            return;
        }
    };
    out.push_str(folded);
}

pub fn fold(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        push_folded(&mut out, c);
    }
    out
}

/// Split text into word, number and symbol tokens.
///
/// Words are runs of letters and digits; an apostrophe between letters stays
/// inside the word. Numbers keep a decimal point between digits (`99.9`).
/// `%` and `°` become single-character symbol tokens. Everything else is a
/// separator, including `-` and `/`, so `user-friendly` is two tokens.
pub fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '%' || c == '°' {
            tokens.push(Token { norm: c.to_string(), span: Span::new(i, i + 1) });
            i += 1;
            continue;
        }
        if !c.is_alphanumeric() {
            i += 1;
            continue;
        }
        let start = i;
        let numeric = c.is_ascii_digit();
        i += 1;
        while i < chars.len() {
            let c = chars[i];
            if c.is_alphanumeric() {
                i += 1;
            } else if numeric
                && c == '.'
                && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit())
                && chars[i - 1].is_ascii_digit()
            {
                i += 1;
            } else if !numeric
                && (c == '\'' || c == '\u{2019}')
                && chars.get(i + 1).is_some_and(|n| n.is_alphabetic())
            {
                i += 1;
            } else {
                break;
            }
        }
        // language names such as C++ and C# keep their suffix
        if !numeric {
            let next = |k: usize| chars.get(i + k).copied();
            if next(0) == Some('+') && next(1) == Some('+') && !next(2).is_some_and(char::is_alphanumeric) {
                i += 2;
            } else if next(0) == Some('#') && !next(1).is_some_and(char::is_alphanumeric) {
                i += 1;
            }
        }
        let mut norm = String::with_capacity(i - start);
        for &c in &chars[start..i] {
            push_folded(&mut norm, c);
        }
        tokens.push(Token { norm, span: Span::new(start, i) });
    }
    tokens
}

/// Normalized token sequence of a lexicon entry.
pub fn entry_tokens(entry: &str) -> Vec<String> {
    tokenize(entry).into_iter().map(|t| t.norm).collect()
}

/// All occurrences of `entry` as a contiguous token sequence. Returned spans
/// run from the first matched token's start to the last one's end.
pub fn find_entry(tokens: &[Token], entry: &[String]) -> Vec<Span> {
    if entry.is_empty() || entry.len() > tokens.len() {
        return Vec::new();
    }
    tokens
        .windows(entry.len())
        .filter(|w| w.iter().zip(entry).all(|(t, e)| t.norm == *e))
        .map(|w| Span::new(w[0].span.start, w[w.len() - 1].span.end))
        .collect()
}

/// A single lexicon hit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconMatch {
    pub entry: String,
    pub span: Span,
}

/// Scan `tokens` for every entry of `lexicon`. Identical spans are reported
/// once, and a span strictly inside another match is dropped. Output is
/// sorted by span.
pub fn scan_lexicon(tokens: &[Token], lexicon: &[String]) -> Vec<LexiconMatch> {
    let mut hits: Vec<LexiconMatch> = Vec::new();
    for entry in lexicon {
        let seq = entry_tokens(entry);
        for span in find_entry(tokens, &seq) {
            hits.push(LexiconMatch { entry: entry.clone(), span });
        }
    }
    hits.sort_by(|a, b| a.span.cmp(&b.span).then_with(|| a.entry.cmp(&b.entry)));
    hits.dedup_by(|b, a| a.span == b.span);
    let spans: Vec<Span> = hits.iter().map(|h| h.span).collect();
    hits.retain(|h| !spans.iter().any(|s| *s != h.span && s.contains(&h.span)));
    hits
}

pub const MODALS: &[&str] = &["shall", "must", "will", "should"];

pub fn is_modal(token: &Token) -> bool {
    MODALS.contains(&token.norm.as_str())
}

/// How a measurable threshold is bounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparator {
    AtMost,
    LessThan,
    AtLeast,
    GreaterThan,
    Equal,
}

impl Comparator {
    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::AtMost => "≤",
            Comparator::LessThan => "<",
            Comparator::AtLeast => "≥",
            Comparator::GreaterThan => ">",
            Comparator::Equal => "=",
        }
    }
}

/// A measurable quantity found in requirement text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantity {
    /// The number with its unit (or the bare number after a comparator),
    /// verbatim from the text.
    pub text: String,
    pub span: Span,
    pub comparator: Option<Comparator>,
    pub has_unit: bool,
}

/// Units recognised after a number. Matching is case-insensitive except for
/// the single-letter SI symbols, which are listed in their usual case.
pub const UNITS: &[&str] = &[
    "milliseconds", "millisecond", "msec", "ms", "microseconds", "us",
    "seconds", "second", "secs", "sec", "s",
    "minutes", "minute", "mins", "min",
    "hours", "hour", "hrs", "hr", "h",
    "days", "day", "weeks", "week", "months", "month", "years", "year",
    "millimeters", "millimetres", "mm", "centimeters", "centimetres", "cm",
    "meters", "metres", "meter", "metre", "m", "kilometers", "kilometres", "km",
    "grams", "gram", "g", "kilograms", "kilogram", "kg",
    "hz", "khz", "mhz", "ghz", "db", "dbm",
    "volts", "volt", "v", "mv", "amperes", "amps", "a", "ma", "watts", "watt", "w", "kw", "mah",
    "bytes", "kb", "mb", "gb", "tb", "kbps", "mbps", "gbps",
    "users", "user", "tags", "tag", "items", "devices", "requests", "transactions",
    "records", "reads", "scans", "cycles", "operations", "events", "percent",
];

const COMPARATORS: &[(&str, Comparator)] = &[
    ("no more than", Comparator::AtMost),
    ("not more than", Comparator::AtMost),
    ("not exceed", Comparator::AtMost),
    ("not to exceed", Comparator::AtMost),
    ("at most", Comparator::AtMost),
    ("up to", Comparator::AtMost),
    ("within", Comparator::AtMost),
    ("maximum of", Comparator::AtMost),
    ("less than", Comparator::LessThan),
    ("fewer than", Comparator::LessThan),
    ("under", Comparator::LessThan),
    ("at least", Comparator::AtLeast),
    ("no less than", Comparator::AtLeast),
    ("not less than", Comparator::AtLeast),
    ("minimum of", Comparator::AtLeast),
    ("more than", Comparator::GreaterThan),
    ("greater than", Comparator::GreaterThan),
    ("exceeding", Comparator::GreaterThan),
    ("exactly", Comparator::Equal),
    ("<=", Comparator::AtMost),
    ("≤", Comparator::AtMost),
    (">=", Comparator::AtLeast),
    ("≥", Comparator::AtLeast),
    ("<", Comparator::LessThan),
    (">", Comparator::GreaterThan),
];

fn quantity_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        let mut units: Vec<&str> = UNITS.to_vec();
        units.sort_by_key(|u| std::cmp::Reverse(u.len()));
        let units = units.join("|");
        let comparators = COMPARATORS
            .iter()
            .map(|(c, _)| regex::escape(c).replace(' ', r"\s+"))
            .collect::<Vec<_>>()
            .join("|");
        Regex::new(&format!(
            r"(?i)(?:(?P<cmp>\b(?:{comparators})|<=|>=|≤|≥|<|>)\s*)?(?P<num>[-+]?\d+(?:[.,]\d+)*)(?:\s*(?P<unit>%|°\s*[CF]\b|(?:{units})\b(?:\s*(?:/|per)\s*(?:second|sec|s|minute|min|hour|h|day)\b)?))?"
        ))
        .expect("quantity pattern compiles")
    })
}

fn comparator_of(text: &str) -> Option<Comparator> {
    let folded: String = text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    COMPARATORS.iter().find(|(c, _)| *c == folded).map(|(_, cmp)| *cmp)
}

fn char_offset(text: &str, byte: usize) -> usize {
    text[..byte].chars().count()
}

/// Left-to-right scan for the first measurable quantity: a number followed
/// by a unit or `%`, or a number introduced by a comparator phrase.
pub fn extract_quantity(text: &str) -> Option<Quantity> {
    for caps in quantity_regex().captures_iter(text) {
        let num = caps.name("num").expect("num group always participates");
        // digits glued to letters (e.g. "SR01", "ISO9001") are identifiers
        if text[..num.start()].chars().next_back().is_some_and(|c| c.is_alphabetic()) {
            continue;
        }
        let unit = caps.name("unit");
        let cmp = caps.name("cmp").and_then(|m| comparator_of(m.as_str()));
        if unit.is_none() && cmp.is_none() {
            continue;
        }
        let end = unit.map_or(num.end(), |u| u.end());
        let start = num.start();
        return Some(Quantity {
            text: text[start..end].to_string(),
            span: Span::new(char_offset(text, start), char_offset(text, end)),
            comparator: cmp,
            has_unit: unit.is_some(),
        });
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norms(text: &str) -> Vec<String> {
        tokenize(text).into_iter().map(|t| t.norm).collect()
    }

    #[test]
    fn tokenizer_splits_hyphens_and_keeps_decimals() {
        assert_eq!(norms("User-friendly UI, 99.9% uptime."), ["user", "friendly", "ui", "99.9", "%", "uptime"]);
        assert_eq!(norms("Operator's badge"), ["operator's", "badge"]);
        assert_eq!(norms("Café déjà"), ["cafe", "deja"]);
        assert_eq!(norms("C++ or C# at 134 °C"), ["c++", "or", "c#", "at", "134", "°", "c"]);
    }

    #[test]
    fn spans_are_char_offsets() {
        let text = "Between -10°C and +50°C shall work";
        let toks = tokenize(text);
        let shall = toks.iter().find(|t| t.norm == "shall").unwrap();
        assert_eq!(shall.span.slice(text), "shall");
    }

    #[test]
    fn multiword_entries_match_contiguous_tokens() {
        let toks = tokenize("Respond quickly and be user-friendly, as applicable.");
        let lex: Vec<String> = ["quickly", "user-friendly", "as applicable", "applicable"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let hits = scan_lexicon(&toks, &lex);
        let entries: Vec<&str> = hits.iter().map(|h| h.entry.as_str()).collect();
        // "applicable" sits inside "as applicable" and is dropped
        assert_eq!(entries, ["quickly", "user-friendly", "as applicable"]);
    }

    #[test]
    fn quantity_extraction() {
        let q = extract_quantity("The system shall respond within 2 seconds.").unwrap();
        assert_eq!(q.text, "2 seconds");
        assert_eq!(q.comparator, Some(Comparator::AtMost));
        let q = extract_quantity("The system shall be available 99.9% of the time.").unwrap();
        assert_eq!(q.text, "99.9%");
        let q = extract_quantity("The device shall operate between -10°C and +50°C.").unwrap();
        assert_eq!(q.text, "-10°C");
        let q = extract_quantity("The reader shall support at least 200 tags.").unwrap();
        assert_eq!((q.text.as_str(), q.comparator), ("200 tags", Some(Comparator::AtLeast)));
        let q = extract_quantity("The queue shall hold no more than 50 entries.").unwrap();
        assert_eq!((q.text.as_str(), q.has_unit), ("50", false));
        assert!(extract_quantity("The UI shall be intuitive.").is_none());
        assert!(extract_quantity("Requirement SR01 shall apply to 3 rooms.").is_none());
    }
}
