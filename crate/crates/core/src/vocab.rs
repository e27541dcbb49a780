//! Term search: turns the abnormal phrases of a report into a binary label
//! vector.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::Serialize;

use crate::detect::{detect_polarity, PolarityRules};
use crate::error::{Error, Result};
use crate::normalize::{normalize_text, NormalizedReport, Section, Sentence};

/// Number of labels in a complete vocabulary.
pub const LABEL_COUNT: usize = 83;

/// Measurement-driven rules fire only above this size.
pub const SIZE_THRESHOLD_MM: f64 = 10.0;

/// Shipped vocabulary.
pub const DEFAULT_VOCABULARY: &str = include_str!("../data/vocabulary.tsv");

/// A search stem with optional word-boundary requirements on either side.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct BoundedTerm {
    pub stem: String,
    pub left_boundary: bool,
    pub right_boundary: bool,
}

impl BoundedTerm {
    pub fn new(stem: &str) -> Self {
        BoundedTerm {
            stem: stem.to_string(),
            left_boundary: false,
            right_boundary: false,
        }
    }

    /// Reads the quoted-cell convention: a leading space means a left
    /// boundary, a trailing space a right boundary. The stem itself is
    /// normalized like report text.
    pub fn from_quoted(raw: &str) -> Option<Self> {
        let stem = normalize_text(raw);
        if stem.is_empty() {
            return None;
        }
        Some(BoundedTerm {
            stem,
            left_boundary: raw.starts_with(' '),
            right_boundary: raw.ends_with(' '),
        })
    }

    /// The quoted-cell spelling of this term.
    pub fn quoted(&self) -> String {
        format!(
            "'{}{}{}'",
            if self.left_boundary { " " } else { "" },
            self.stem,
            if self.right_boundary { " " } else { "" }
        )
    }
}

/// Substring search honoring the term's boundary flags. A boundary is a space
/// or the edge of `span`.
pub fn match_term(span: &str, term: &BoundedTerm) -> bool {
    let bytes = span.as_bytes();
    span.match_indices(term.stem.as_str()).any(|(start, m)| {
        let end = start + m.len();
        let left_ok = !term.left_boundary || start == 0 || bytes[start - 1] == b' ';
        let right_ok = !term.right_boundary || end == bytes.len() || bytes[end] == b' ';
        left_ok && right_ok
    })
}

fn first_match<'t>(text: &str, terms: &'t [BoundedTerm]) -> Option<&'t BoundedTerm> {
    terms.iter().find(|t| match_term(text, t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Special {
    None,
    /// Anchor stem in an abnormal phrase plus a measurement over the
    /// threshold in the same sentence.
    NoduleGr1cm,
    /// Any-term match, or anchor plus a measurement over the threshold.
    LymphadenopathyMeasure,
}

impl Special {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "" | "none" => Some(Special::None),
            "nodule_gr_1cm" => Some(Special::NoduleGr1cm),
            "lymphadenopathy_measure" => Some(Special::LymphadenopathyMeasure),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TermRule {
    pub label: String,
    pub any_terms: Vec<BoundedTerm>,
    /// For special rules, the anchor stems.
    pub term1: Vec<BoundedTerm>,
    pub term2: Vec<BoundedTerm>,
    pub exclude_terms: Vec<BoundedTerm>,
    pub special: Special,
}

impl TermRule {
    fn validate(&self) -> std::result::Result<(), String> {
        if self.label.is_empty() {
            return Err("empty label".into());
        }
        let pair = !self.term1.is_empty() && !self.term2.is_empty();
        match self.special {
            Special::None if self.any_terms.is_empty() && !pair => Err(format!(
                "rule {:?} needs an any-term or both term1 and term2",
                self.label
            )),
            Special::None if self.term1.is_empty() != self.term2.is_empty() => {
                Err(format!("rule {:?} has only one of term1/term2", self.label))
            }
            Special::NoduleGr1cm | Special::LymphadenopathyMeasure if self.term1.is_empty() => Err(
                format!("special rule {:?} needs anchor stems in term1", self.label),
            ),
            _ => Ok(()),
        }
    }
}

/// Where a term1/term2 pair has to co-occur.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Cooccurrence {
    /// Both stems inside one abnormal phrase.
    #[default]
    Span,
    /// Both stems anywhere in the abnormal text of the sentence.
    Sentence,
}

/// An ordered rule set with its macro lists.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    rules: Vec<TermRule>,
    macros: BTreeMap<String, Vec<BoundedTerm>>,
    pub cooccurrence: Cooccurrence,
}

impl Vocabulary {
    pub fn default_vocabulary() -> Self {
        Self::parse(DEFAULT_VOCABULARY, Path::new("vocabulary.tsv"))
            .expect("shipped vocabulary parses")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Parses the tab-separated vocabulary format (see `data/vocabulary.tsv`).
    /// A vocabulary must hold exactly [`LABEL_COUNT`] uniquely named rules.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut macros: BTreeMap<String, Vec<BoundedTerm>> = BTreeMap::new();
        let mut rules = Vec::new();
        let mut header_seen = false;
        let mut labels = HashSet::new();
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |m: String| Error::parse(path, lineno, m);
            let fields: Vec<&str> = line.split('\t').collect();
            if let Some(name) = fields[0].strip_prefix('@') {
                if fields.len() != 2 || !is_macro_name(name) {
                    return Err(err("macro lines are `@NAME<TAB>terms`".into()));
                }
                let terms = parse_cell(fields[1], &macros).map_err(err)?;
                macros.insert(name.to_string(), terms);
                continue;
            }
            if !header_seen {
                let expected = ["label", "any", "term1", "term2", "exclude", "special"];
                let got: Vec<&str> = fields.iter().map(|f| f.trim()).collect();
                if got != expected {
                    return Err(err(format!("expected header {expected:?}, got {got:?}")));
                }
                header_seen = true;
                continue;
            }
            if fields.len() != 6 {
                return Err(err(format!("expected 6 columns, got {}", fields.len())));
            }
            let label = fields[0].trim().trim_matches('\'').to_string();
            let special = Special::parse(fields[5].trim())
                .ok_or_else(|| err(format!("unknown special {:?}", fields[5].trim())))?;
            let rule = TermRule {
                label,
                any_terms: parse_cell(fields[1], &macros).map_err(err)?,
                term1: parse_cell(fields[2], &macros).map_err(err)?,
                term2: parse_cell(fields[3], &macros).map_err(err)?,
                exclude_terms: parse_cell(fields[4], &macros).map_err(err)?,
                special,
            };
            rule.validate().map_err(err)?;
            if !labels.insert(rule.label.clone()) {
                return Err(err(format!("duplicate label {:?}", rule.label)));
            }
            rules.push(rule);
        }
        if rules.len() != LABEL_COUNT {
            return Err(Error::parse(
                path,
                0,
                format!(
                    "vocabulary has {} rules, expected {LABEL_COUNT}",
                    rules.len()
                ),
            ));
        }
        Ok(Vocabulary {
            rules,
            macros,
            cooccurrence: Cooccurrence::default(),
        })
    }

    pub fn rules(&self) -> &[TermRule] {
        &self.rules
    }

    pub fn macros(&self) -> &BTreeMap<String, Vec<BoundedTerm>> {
        &self.macros
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.rules.iter().map(|r| r.label.as_str())
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.rules.iter().position(|r| r.label == label)
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

fn is_macro_name(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_uppercase() || c == '_' || c.is_ascii_digit())
}

/// Splits a cell into terms: `'quoted stems'` and macro names, separated by
/// commas.
fn parse_cell(
    cell: &str,
    macros: &BTreeMap<String, Vec<BoundedTerm>>,
) -> std::result::Result<Vec<BoundedTerm>, String> {
    let mut out = Vec::new();
    let mut rest = cell;
    loop {
        rest = rest.trim_start_matches(|c: char| c == ',' || c.is_whitespace());
        if rest.is_empty() {
            return Ok(out);
        }
        if let Some(body) = rest.strip_prefix('\'') {
            let close = body
                .find('\'')
                .ok_or_else(|| format!("unterminated quote in {cell:?}"))?;
            let raw = &body[..close];
            let term =
                BoundedTerm::from_quoted(raw).ok_or_else(|| format!("empty stem in {cell:?}"))?;
            out.push(term);
            rest = &body[close + 1..];
        } else {
            let end = rest.find([',', ' ', '\t']).unwrap_or(rest.len());
            let name = &rest[..end];
            if !is_macro_name(name) {
                return Err(format!(
                    "expected a quoted stem or macro name, found {name:?}"
                ));
            }
            let terms = macros
                .get(name)
                .ok_or_else(|| format!("undefined macro {name}"))?;
            out.extend(terms.iter().cloned());
            rest = &rest[end..];
        }
    }
}

/// A size mention converted to millimeters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Measurement {
    pub value_mm: f64,
    pub raw_text: String,
    /// Index of the token holding the number.
    pub position: usize,
}

static MEASUREMENT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\b\d+(?:\.\d+)?(?:\s*x\s*\d+(?:\.\d+)?)*\s*(mm|cm)\b").unwrap());
static NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\d+(?:\.\d+)?").unwrap());

/// Finds `mm`/`cm` sizes, including `a x b cm` forms where the unit applies
/// to every dimension. Values are returned in millimeters.
pub fn parse_measurements(sentence_text: &str) -> Vec<Measurement> {
    let mut out = Vec::new();
    for caps in MEASUREMENT.captures_iter(sentence_text) {
        let whole = caps.get(0).unwrap();
        let scale = if &caps[1] == "cm" { 10.0 } else { 1.0 };
        for num in NUMBER.find_iter(whole.as_str()) {
            let value: f64 = num.as_str().parse().unwrap_or(0.0);
            if value <= 0.0 {
                continue;
            }
            let offset = whole.start() + num.start();
            out.push(Measurement {
                value_mm: value * scale,
                raw_text: whole.as_str().to_string(),
                position: sentence_text[..offset].split_whitespace().count(),
            });
        }
    }
    out
}

/// Why a rule fired.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleHit {
    pub span: String,
    pub terms: Vec<String>,
}

fn pair_in<'a>(text: &str, rule: &'a TermRule) -> Option<(&'a BoundedTerm, &'a BoundedTerm)> {
    Some((
        first_match(text, &rule.term1)?,
        first_match(text, &rule.term2)?,
    ))
}

/// Evaluates one rule against the abnormal spans of one sentence.
/// Exclusion terms are checked against the whole sentence.
pub fn rule_hit(
    spans: &[String],
    sentence_text: &str,
    rule: &TermRule,
    measurements: &[Measurement],
    cooccurrence: Cooccurrence,
) -> Option<RuleHit> {
    if spans.is_empty() || first_match(sentence_text, &rule.exclude_terms).is_some() {
        return None;
    }
    let any_hit = || {
        spans.iter().find_map(|span| {
            first_match(span, &rule.any_terms).map(|t| RuleHit {
                span: span.clone(),
                terms: vec![t.quoted()],
            })
        })
    };
    let largest = measurements
        .iter()
        .filter(|m| m.value_mm > SIZE_THRESHOLD_MM)
        .max_by(|a, b| a.value_mm.total_cmp(&b.value_mm));
    let anchored_size = || {
        let m = largest?;
        spans.iter().find_map(|span| {
            first_match(span, &rule.term1).map(|t| RuleHit {
                span: span.clone(),
                terms: vec![t.quoted(), m.raw_text.clone()],
            })
        })
    };
    match rule.special {
        Special::NoduleGr1cm => anchored_size(),
        Special::LymphadenopathyMeasure => any_hit().or_else(anchored_size),
        Special::None => any_hit().or_else(|| match cooccurrence {
            Cooccurrence::Span => spans.iter().find_map(|span| {
                pair_in(span, rule).map(|(a, b)| RuleHit {
                    span: span.clone(),
                    terms: vec![a.quoted(), b.quoted()],
                })
            }),
            Cooccurrence::Sentence => {
                let joined = spans.join(" | ");
                pair_in(&joined, rule).map(|(a, b)| RuleHit {
                    span: joined.clone(),
                    terms: vec![a.quoted(), b.quoted()],
                })
            }
        }),
    }
}

/// Boolean form of [`rule_hit`] with phrase-level co-occurrence.
pub fn apply_rule(
    spans: &[String],
    sentence_text: &str,
    rule: &TermRule,
    measurements: &[Measurement],
) -> bool {
    rule_hit(spans, sentence_text, rule, measurements, Cooccurrence::Span).is_some()
}

/// Binary abnormality indicators for one report, in vocabulary order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LabelVector {
    pub accession: String,
    pub values: Vec<u8>,
}

impl LabelVector {
    pub fn zeros(accession: &str, len: usize) -> Self {
        LabelVector {
            accession: accession.to_string(),
            values: vec![0; len],
        }
    }

    pub fn count(&self) -> usize {
        self.values.iter().filter(|&&v| v == 1).count()
    }

    pub fn get(&self, vocab: &Vocabulary, label: &str) -> Option<u8> {
        vocab.index_of(label).map(|i| self.values[i])
    }
}

/// One positive label traced back to the text that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub accession: String,
    pub label: String,
    pub sentence_index: usize,
    pub section: Section,
    pub sentence: String,
    pub span: String,
    pub terms: Vec<String>,
}

/// ORs the rule results of every sentence. Each item pairs a sentence with
/// its abnormal spans; sentences without spans contribute nothing.
pub fn labels_from_spans<'s>(
    accession: &str,
    sentences: impl IntoIterator<Item = (&'s Sentence, Vec<String>)>,
    vocab: &Vocabulary,
) -> (LabelVector, Vec<Provenance>) {
    let mut labels = LabelVector::zeros(accession, vocab.len());
    let mut provenance = Vec::new();
    for (sentence, spans) in sentences {
        if spans.is_empty() {
            continue;
        }
        let measurements = parse_measurements(&sentence.text);
        for (i, rule) in vocab.rules.iter().enumerate() {
            if let Some(hit) = rule_hit(
                &spans,
                &sentence.text,
                rule,
                &measurements,
                vocab.cooccurrence,
            ) {
                labels.values[i] = 1;
                provenance.push(Provenance {
                    accession: accession.to_string(),
                    label: rule.label.clone(),
                    sentence_index: sentence.index,
                    section: sentence.section,
                    sentence: sentence.text.clone(),
                    span: hit.span,
                    terms: hit.terms,
                });
            }
        }
    }
    (labels, provenance)
}

/// Rule-based extraction with provenance.
pub fn extract_labels_traced(
    report: &NormalizedReport,
    vocab: &Vocabulary,
    rules: &PolarityRules,
) -> (LabelVector, Vec<Provenance>) {
    let annotated: Vec<(&Sentence, Vec<String>)> = report
        .sentences
        .iter()
        .map(|s| (s, detect_polarity(s, rules).abnormal_spans()))
        .collect();
    labels_from_spans(&report.accession, annotated, vocab)
}

/// Rule-based extraction: polarity detection, then term search over the
/// abnormal phrases of every sentence.
pub fn extract_labels(
    report: &NormalizedReport,
    vocab: &Vocabulary,
    rules: &PolarityRules,
) -> LabelVector {
    extract_labels_traced(report, vocab, rules).0
}
