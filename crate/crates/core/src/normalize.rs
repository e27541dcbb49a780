//! Report cleaning: section extraction, sentence splitting and text
//! normalization.
//!
//! The pipeline runs in that order. Sentence splitting needs the periods that
//! normalization removes, and normalization runs on each sentence on its own.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Section {
    Findings,
    Impression,
    Whole,
}

impl Section {
    pub fn as_str(self) -> &'static str {
        match self {
            Section::Findings => "findings",
            Section::Impression => "impression",
            Section::Whole => "whole",
        }
    }
}

/// A cleaned sentence with its origin in the report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub text: String,
    pub section: Section,
    pub index: usize,
}

impl Sentence {
    /// Wraps already-normalized text as a standalone sentence.
    pub fn new(text: impl Into<String>) -> Self {
        Sentence {
            text: text.into(),
            section: Section::Whole,
            index: 0,
        }
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.text.split(' ').filter(|t| !t.is_empty())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizedReport {
    pub accession: String,
    pub sentences: Vec<Sentence>,
}

/// Result of section extraction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sections {
    /// At least one header was found. A missing section is empty.
    Split {
        findings: String,
        impression: String,
    },
    /// No header anywhere; the whole text is used.
    Whole(String),
}

// A header is "findings" or "impression" followed by a colon, or alone at the
// start of a line with an optional colon.
static HEADER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?im)^[ \t]*(findings|impression)\b[ \t]*:?|\b(findings|impression)[ \t]*:")
        .unwrap()
});

/// Pulls the Findings and Impression sections out of a raw report, dropping
/// the headers and anything before the first header.
pub fn extract_sections(raw_text: &str) -> Sections {
    let headers: Vec<(usize, usize, bool)> = HEADER
        .captures_iter(raw_text)
        .map(|c| {
            let whole = c.get(0).unwrap();
            let name = c.get(1).or_else(|| c.get(2)).unwrap().as_str();
            (
                whole.start(),
                whole.end(),
                name.eq_ignore_ascii_case("findings"),
            )
        })
        .collect();
    if headers.is_empty() {
        return Sections::Whole(raw_text.trim().to_string());
    }
    let mut findings = String::new();
    let mut impression = String::new();
    for (i, &(_, body_start, is_findings)) in headers.iter().enumerate() {
        let body_end = headers.get(i + 1).map_or(raw_text.len(), |h| h.0);
        let body = raw_text[body_start..body_end].trim();
        let target = if is_findings {
            &mut findings
        } else {
            &mut impression
        };
        if !body.is_empty() {
            if !target.is_empty() {
                target.push(' ');
            }
            target.push_str(body);
        }
    }
    Sections::Split {
        findings,
        impression,
    }
}

fn is_digit_at(chars: &[char], i: Option<usize>) -> bool {
    i.and_then(|i| chars.get(i))
        .is_some_and(|c| c.is_ascii_digit())
}

/// Splits on periods that are not between two digits. Fragments are trimmed
/// and empty ones dropped.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c == '.' && !(is_digit_at(&chars, i.checked_sub(1)) && is_digit_at(&chars, Some(i + 1)))
        {
            push_fragment(&mut out, &mut current);
        } else {
            current.push(c);
        }
    }
    push_fragment(&mut out, &mut current);
    out
}

fn push_fragment(out: &mut Vec<String>, current: &mut String) {
    let trimmed = current.trim();
    if !trimmed.is_empty() {
        out.push(trimmed.to_string());
    }
    current.clear();
}

const MONTHS: &str =
    "january|february|march|april|may|june|july|august|september|october|november|december";
const MONTH_ABBREVS: &str = "jan|feb|mar|apr|jun|jul|aug|sept|sep|oct|nov|dec";

static TIME: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\b\d{1,2}:\d{2}(?::\d{2})?(?:\s*[ap]\.?m\b\.?)?").unwrap());

static DATES: LazyLock<Vec<Regex>> = LazyLock::new(|| {
    vec![
        Regex::new(r"\b\d{4}[/-]\d{1,2}[/-]\d{1,2}\b").unwrap(),
        Regex::new(r"\b\d{1,2}[/-]\d{1,2}[/-](?:\d{4}|\d{2})\b").unwrap(),
        Regex::new(&format!(
            r"\b(?:{MONTHS}|{MONTH_ABBREVS})\.?\s+\d{{1,2}}(?:st|nd|rd|th)?\b(?:,?\s+(?:19|20)\d{{2}}\b)?"
        ))
        .unwrap(),
        Regex::new(&format!(
            r"\b\d{{1,2}}(?:st|nd|rd|th)?\s+(?:{MONTHS})\b(?:,?\s+(?:19|20)\d{{2}}\b)?"
        ))
        .unwrap(),
    ]
});

static YEAR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b(?:19|20)\d{2}\b").unwrap());

const TOKENS: [&str; 3] = ["time", "date", "year"];

/// Replaces standalone years, skipping digit groups that are part of a
/// decimal number such as `2015.5`.
fn replace_years(text: &str) -> String {
    let bytes = text.as_bytes();
    let in_decimal = |dot: Option<usize>, digit: Option<usize>| {
        matches!((dot, digit), (Some(d), Some(g)) if bytes.get(d) == Some(&b'.')
            && bytes.get(g).is_some_and(u8::is_ascii_digit))
    };
    let mut out = String::with_capacity(text.len());
    let mut last = 0;
    for m in YEAR.find_iter(text) {
        let before = in_decimal(m.start().checked_sub(1), m.start().checked_sub(2));
        let after = in_decimal(Some(m.end()), Some(m.end() + 1));
        if before || after {
            continue;
        }
        out.push_str(&text[last..m.start()]);
        out.push_str(" %year ");
        last = m.end();
    }
    out.push_str(&text[last..]);
    out
}

/// Keeps ASCII letters and digits, periods between two digits, and `%` when it
/// opens one of the placeholder tokens. Everything else becomes a space.
fn strip_punctuation(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    for (i, &c) in chars.iter().enumerate() {
        let keep = match c {
            c if c.is_ascii_lowercase() || c.is_ascii_digit() => true,
            '.' => is_digit_at(&chars, i.checked_sub(1)) && is_digit_at(&chars, Some(i + 1)),
            '%' => opens_token(&chars, i),
            _ => false,
        };
        out.push(if keep { c } else { ' ' });
    }
    out
}

fn opens_token(chars: &[char], i: usize) -> bool {
    if i > 0 && chars[i - 1].is_ascii_alphanumeric() {
        return false;
    }
    TOKENS.iter().any(|tok| {
        let end = i + 1 + tok.len();
        end <= chars.len()
            && chars[i + 1..end].iter().copied().eq(tok.chars())
            && !chars.get(end).is_some_and(|c| c.is_ascii_alphanumeric())
    })
}

fn normalize_once(text: &str) -> String {
    let mut s = text.to_lowercase();
    s = TIME.replace_all(&s, " %time ").into_owned();
    for re in DATES.iter() {
        s = re.replace_all(&s, " %date ").into_owned();
    }
    s = replace_years(&s);
    let s = strip_punctuation(&s);
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Lowercases, replaces times, dates and years with `%time`, `%date` and
/// `%year`, removes punctuation except decimal points, and collapses
/// whitespace to single spaces.
///
/// Punctuation removal can expose a new date or year (`jan_5`), so the pass is
/// repeated until the text stops changing. The result is idempotent.
pub fn normalize_text(text: &str) -> String {
    let mut current = normalize_once(text);
    loop {
        let next = normalize_once(&current);
        if next == current {
            return current;
        }
        current = next;
    }
}

/// Full cleaning pipeline for one report: sections, sentences, then text
/// normalization. Sentences that normalize to nothing are dropped.
pub fn normalize_report(accession: &str, raw_text: &str) -> NormalizedReport {
    let parts: Vec<(Section, String)> = match extract_sections(raw_text) {
        Sections::Split {
            findings,
            impression,
        } => vec![
            (Section::Findings, findings),
            (Section::Impression, impression),
        ],
        Sections::Whole(text) => vec![(Section::Whole, text)],
    };
    let mut sentences = Vec::new();
    for (section, body) in parts {
        for fragment in split_sentences(&body) {
            let text = normalize_text(&fragment);
            if !text.is_empty() {
                sentences.push(Sentence {
                    text,
                    section,
                    index: sentences.len(),
                });
            }
        }
    }
    NormalizedReport {
        accession: accession.to_string(),
        sentences,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_with_headers() {
        let s = extract_sections("FINDINGS: lungs clear. IMPRESSION: no change.");
        assert_eq!(
            s,
            Sections::Split {
                findings: "lungs clear.".into(),
                impression: "no change.".into()
            }
        );
    }

    #[test]
    fn sections_fallback_and_empty_body() {
        assert_eq!(
            extract_sections("the lungs are clear."),
            Sections::Whole("the lungs are clear.".into())
        );
        assert_eq!(
            extract_sections("Findings: mass.\nimpression:"),
            Sections::Split {
                findings: "mass.".into(),
                impression: String::new()
            }
        );
    }

    #[test]
    fn preamble_dropped_and_line_headers_without_colon() {
        let raw = "HISTORY: cough.\nFindings\nNo effusion.\nImpression\nStable.";
        assert_eq!(
            extract_sections(raw),
            Sections::Split {
                findings: "No effusion.".into(),
                impression: "Stable.".into()
            }
        );
    }

    #[test]
    fn inline_word_is_not_a_header() {
        assert!(matches!(
            extract_sections("no acute findings. the impression is stable."),
            Sections::Whole(_)
        ));
    }

    #[test]
    fn split_examples() {
        assert_eq!(
            split_sentences("no pneumothorax. stable 1.2 cm nodule."),
            vec!["no pneumothorax", "stable 1.2 cm nodule"]
        );
        assert!(split_sentences("").is_empty());
        assert_eq!(split_sentences("one sentence"), vec!["one sentence"]);
        assert_eq!(split_sentences("a.. b . . c"), vec!["a", "b", "c"]);
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(
            normalize_text("The  LUNGS are   clear"),
            "the lungs are clear"
        );
        assert_eq!(normalize_text("1.2 cm mass"), "1.2 cm mass");
        assert_eq!(
            normalize_text("comparison study from 2015"),
            "comparison study from %year"
        );
    }

    #[test]
    fn times_dates_years() {
        assert_eq!(normalize_text("Scanned at 10:45 AM."), "scanned at %time");
        assert_eq!(normalize_text("at 7:05:12pm today"), "at %time today");
        assert_eq!(normalize_text("compared to 3/14/2016"), "compared to %date");
        assert_eq!(normalize_text("compared to 03-14-16"), "compared to %date");
        assert_eq!(normalize_text("since 2016-03-14"), "since %date");
        assert_eq!(normalize_text("CT of January 5, 2016"), "ct of %date");
        assert_eq!(normalize_text("on 5th March 2015"), "on %date");
        assert_eq!(normalize_text("in march 2015"), "in march %year");
        assert_eq!(normalize_text("x_2015"), "x %year");
    }

    #[test]
    fn punctuation_rules() {
        assert_eq!(
            normalize_text("ground-glass, tree-in-bud"),
            "ground glass tree in bud"
        );
        assert_eq!(normalize_text("size 12.5mm; p.m."), "size 12.5mm p m");
        assert_eq!(normalize_text("50% stenosis"), "50 stenosis");
        assert_eq!(normalize_text("2015.5 value"), "2015.5 value");
        assert_eq!(normalize_text("café"), "caf");
        assert_eq!(normalize_text("%year %years"), "%year years");
    }

    #[test]
    fn report_pipeline_indexes_sentences() {
        let r = normalize_report(
            "A1",
            "FINDINGS: The lungs are clear. 1.2 cm nodule.\nIMPRESSION: No change since 2015.",
        );
        let got: Vec<(&str, Section, usize)> = r
            .sentences
            .iter()
            .map(|s| (s.text.as_str(), s.section, s.index))
            .collect();
        assert_eq!(
            got,
            vec![
                ("the lungs are clear", Section::Findings, 0),
                ("1.2 cm nodule", Section::Findings, 1),
                ("no change since %year", Section::Impression, 2),
            ]
        );
    }
}
