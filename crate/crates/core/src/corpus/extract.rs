//! Diagnosis-section extraction and tokenization.
//!
//! Section grammar, line by line:
//! * a header is `DISCHARGE DIAGNOSIS`, `DISCHARGE DIAGNOSES`, `FINAL DIAGNOSIS`
//!   or `FINAL DIAGNOSES` (any case), optionally followed by `:` and text;
//!   text after the header is treated as the section's first line;
//! * inside a section, `N.` or `N)` followed by whitespace starts an item;
//! * any other non-blank line continues the previous item (or starts one if
//!   there is none yet), joined by a single space;
//! * blank lines, and lines without any letter or digit (such as `...`), are
//!   skipped;
//! * the section ends at an upper-case header line ending in `:` or at the
//!   end of the note. Several sections in one note are concatenated.

use std::sync::OnceLock;

use regex::Regex;

fn header_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)^\s*(?:discharge|final)\s+diagnos[ie]s\b\s*:?(.*)$").unwrap())
}

fn item_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*\d{1,3}[.)](?:\s+(.*))?$").unwrap())
}

fn is_section_end(line: &str) -> bool {
    let t = line.trim();
    t.ends_with(':') && t.chars().any(char::is_alphabetic) && !t.chars().any(char::is_lowercase)
}

fn collapse(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Diagnosis descriptions found in a discharge note, in order of appearance.
pub fn extract_descriptions(text: &str) -> Vec<String> {
    let mut items: Vec<String> = Vec::new();
    let mut in_section = false;
    // Whether the last pushed item belongs to the current section.
    let mut open_item = false;

    let push_line = |line: &str, items: &mut Vec<String>, open_item: &mut bool| {
        if !line.chars().any(char::is_alphanumeric) {
            return;
        }
        if let Some(c) = item_re().captures(line) {
            items.push(c.get(1).map_or("", |m| m.as_str()).to_string());
            *open_item = true;
        } else if *open_item {
            let last = items.last_mut().expect("open item");
            last.push(' ');
            last.push_str(line.trim());
        } else {
            items.push(line.trim().to_string());
            *open_item = true;
        }
    };

    for line in text.lines() {
        if let Some(c) = header_re().captures(line) {
            in_section = true;
            open_item = false;
            push_line(&c[1], &mut items, &mut open_item);
            continue;
        }
        if !in_section {
            continue;
        }
        if is_section_end(line) {
            in_section = false;
            open_item = false;
            continue;
        }
        push_line(line, &mut items, &mut open_item);
    }
    items.iter().map(|s| collapse(s)).filter(|s| !s.is_empty()).collect()
}

const PUNCT: &[char] = &[',', '.', ';', ':', '?', '!', '(', ')', '/'];

/// Whitespace split, then leading and trailing punctuation peeled off into
/// single-character tokens. Case is preserved.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let start = chunk.find(|c| !PUNCT.contains(&c));
        let Some(start) = start else {
            out.extend(chunk.chars().map(String::from));
            continue;
        };
        let end = chunk.rfind(|c| !PUNCT.contains(&c)).unwrap();
        let end = end + chunk[end..].chars().next().unwrap().len_utf8();
        out.extend(chunk[..start].chars().map(String::from));
        out.push(chunk[start..end].to_string());
        out.extend(chunk[end..].chars().map(String::from));
    }
    out
}
