//! Rule-based phrase polarity: marks every token of a normalized sentence as
//! normal or abnormal.
//!
//! Tokens are abnormal unless a trigger covers them. A trigger ("no",
//! "without", "patent", ...) is normal itself and normalizes the tokens in
//! its direction until it meets a terminator, another trigger, or the edge of
//! the sentence. Scopes only ever set tokens to normal, so overlapping scopes
//! resolve the same way regardless of order.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::normalize::Sentence;

/// Shipped trigger lexicon.
pub const DEFAULT_RULES: &str = include_str!("../data/polarity_rules.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
    Both,
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "forward" => Ok(Direction::Forward),
            "backward" => Ok(Direction::Backward),
            "both" => Ok(Direction::Both),
            other => Err(format!("unknown direction {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolarityRule {
    pub trigger: String,
    pub direction: Direction,
    pub terminators: HashSet<String>,
    words: Vec<String>,
}

impl PolarityRule {
    pub fn new(
        trigger: &str,
        direction: Direction,
        terminators: impl IntoIterator<Item = impl Into<String>>,
    ) -> Result<Self> {
        let words: Vec<String> = trigger.split_whitespace().map(String::from).collect();
        if words.is_empty() {
            return Err(Error::InvalidInput("empty polarity trigger".into()));
        }
        if trigger.chars().any(|c| c.is_uppercase()) {
            return Err(Error::InvalidInput(format!(
                "trigger {trigger:?} must be lowercase"
            )));
        }
        let terminators: HashSet<String> = terminators.into_iter().map(Into::into).collect();
        if let Some(t) = terminators
            .iter()
            .find(|t| t.chars().any(char::is_uppercase))
        {
            return Err(Error::InvalidInput(format!(
                "terminator {t:?} must be lowercase"
            )));
        }
        Ok(PolarityRule {
            trigger: words.join(" "),
            direction,
            terminators,
            words,
        })
    }

    fn matches_at(&self, tokens: &[&str], at: usize) -> bool {
        tokens.len() >= at + self.words.len()
            && self.words.iter().zip(&tokens[at..]).all(|(w, t)| w == t)
    }
}

/// An immutable polarity rule set.
#[derive(Debug, Clone, Default)]
pub struct PolarityRules {
    rules: Vec<PolarityRule>,
    prefix: Option<String>,
    prefix_terminators: HashSet<String>,
}

impl PolarityRules {
    /// No triggers at all: every token stays abnormal.
    pub fn empty() -> Self {
        PolarityRules::default()
    }

    pub fn from_rules(rules: Vec<PolarityRule>, prefix: Option<String>) -> Self {
        let mut rules = rules;
        // longest trigger wins at a given position; stable keeps file order otherwise
        rules.sort_by_key(|r| std::cmp::Reverse(r.words.len()));
        PolarityRules {
            rules,
            prefix,
            prefix_terminators: HashSet::new(),
        }
    }

    pub fn rules(&self) -> &[PolarityRule] {
        &self.rules
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Parses the tab-separated rule format documented in
    /// `data/polarity_rules.txt`.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut defaults: HashSet<String> = HashSet::new();
        let mut prefix = None;
        // (trigger, direction, override, line)
        let mut pending: Vec<(String, Direction, Option<HashSet<String>>, usize)> = Vec::new();
        let split_list = |s: &str| -> HashSet<String> {
            s.split(',')
                .map(|t| t.trim().to_string())
                .filter(|t| !t.is_empty())
                .collect()
        };
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            match fields[0] {
                "@terminators" => {
                    defaults = split_list(fields.get(1).copied().unwrap_or(""));
                }
                "@prefix" => {
                    let p = fields.get(1).copied().unwrap_or("");
                    if p.is_empty() || p.chars().any(|c| !c.is_ascii_lowercase()) {
                        return Err(Error::parse(
                            path,
                            lineno,
                            "prefix must be lowercase letters",
                        ));
                    }
                    prefix = Some(p.to_string());
                }
                directive if directive.starts_with('@') => {
                    return Err(Error::parse(
                        path,
                        lineno,
                        format!("unknown directive {directive}"),
                    ));
                }
                trigger => {
                    let direction = fields
                        .get(1)
                        .ok_or_else(|| Error::parse(path, lineno, "missing direction column"))?
                        .parse::<Direction>()
                        .map_err(|m| Error::parse(path, lineno, m))?;
                    let overrides = fields
                        .get(2)
                        .filter(|s| !s.is_empty())
                        .map(|s| split_list(s));
                    if fields.len() > 3 {
                        return Err(Error::parse(path, lineno, "too many columns"));
                    }
                    pending.push((trigger.to_string(), direction, overrides, lineno));
                }
            }
        }
        let mut rules = Vec::with_capacity(pending.len());
        for (trigger, direction, overrides, lineno) in pending {
            let terms = overrides.unwrap_or_else(|| defaults.clone());
            let rule = PolarityRule::new(&trigger, direction, terms)
                .map_err(|e| Error::parse(path, lineno, e.to_string()))?;
            rules.push(rule);
        }
        let mut set = PolarityRules::from_rules(rules, prefix);
        set.prefix_terminators = defaults;
        Ok(set)
    }

    /// The shipped lexicon.
    pub fn default_rules() -> Self {
        Self::parse(DEFAULT_RULES, Path::new("polarity_rules.txt"))
            .expect("shipped polarity rules parse")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Token {
    pub word: String,
    pub abnormal: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedSentence {
    pub tokens: Vec<Token>,
    pub source: Sentence,
}

impl AnnotatedSentence {
    /// Maximal runs of tokens with equal polarity, in order, as
    /// `(abnormal, text)`.
    pub fn runs(&self) -> Vec<(bool, String)> {
        let mut out: Vec<(bool, String)> = Vec::new();
        for tok in &self.tokens {
            match out.last_mut() {
                Some((abnormal, text)) if *abnormal == tok.abnormal => {
                    text.push(' ');
                    text.push_str(&tok.word);
                }
                _ => out.push((tok.abnormal, tok.word.clone())),
            }
        }
        out
    }

    /// Maximal runs of abnormal tokens joined by single spaces.
    pub fn abnormal_spans(&self) -> Vec<String> {
        self.runs()
            .into_iter()
            .filter_map(|(abnormal, text)| abnormal.then_some(text))
            .collect()
    }

    pub fn is_fully_normal(&self) -> bool {
        self.tokens.iter().all(|t| !t.abnormal)
    }
}

enum Scope<'r> {
    Rule(&'r PolarityRule),
    Prefix { bare: bool },
}

struct Occurrence<'r> {
    start: usize,
    end: usize,
    scope: Scope<'r>,
}

fn find_triggers<'r>(tokens: &[&str], rules: &'r PolarityRules) -> Vec<Occurrence<'r>> {
    let mut found = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        if let Some(rule) = rules.rules.iter().find(|r| r.matches_at(tokens, i)) {
            found.push(Occurrence {
                start: i,
                end: i + rule.words.len(),
                scope: Scope::Rule(rule),
            });
            i += rule.words.len();
            continue;
        }
        if let Some(prefix) = &rules.prefix {
            if tokens[i].starts_with(prefix.as_str()) {
                found.push(Occurrence {
                    start: i,
                    end: i + 1,
                    scope: Scope::Prefix {
                        bare: tokens[i] == prefix,
                    },
                });
            }
        }
        i += 1;
    }
    found
}

/// Tags each token of `sentence` normal or abnormal.
pub fn detect_polarity(sentence: &Sentence, rules: &PolarityRules) -> AnnotatedSentence {
    let words: Vec<&str> = sentence.tokens().collect();
    let n = words.len();
    let mut abnormal = vec![true; n];
    let occurrences = find_triggers(&words, rules);
    let mut is_trigger = vec![false; n];
    for occ in &occurrences {
        is_trigger[occ.start..occ.end].fill(true);
    }

    for occ in &occurrences {
        abnormal[occ.start..occ.end].fill(false);
        let (terminators, forward, backward) = match occ.scope {
            Scope::Rule(rule) => (
                &rule.terminators,
                rule.direction != Direction::Backward,
                rule.direction != Direction::Forward,
            ),
            Scope::Prefix { bare } => (&rules.prefix_terminators, bare, false),
        };
        let stops = |j: usize| is_trigger[j] || terminators.contains(words[j]);
        if forward {
            let limit = match occ.scope {
                Scope::Prefix { .. } => (occ.end + 1).min(n),
                Scope::Rule(_) => n,
            };
            for (j, flag) in abnormal.iter_mut().enumerate().take(limit).skip(occ.end) {
                if stops(j) {
                    break;
                }
                *flag = false;
            }
        }
        if backward {
            for j in (0..occ.start).rev() {
                if stops(j) {
                    break;
                }
                abnormal[j] = false;
            }
        }
    }

    AnnotatedSentence {
        tokens: words
            .into_iter()
            .zip(abnormal)
            .map(|(w, a)| Token {
                word: w.to_string(),
                abnormal: a,
            })
            .collect(),
        source: sentence.clone(),
    }
}

impl fmt::Display for AnnotatedSentence {
    /// Normal tokens in brackets, e.g. `the heart is enlarged [without pericardial effusion]`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let runs = self.runs();
        for (i, (abnormal, text)) in runs.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            if *abnormal {
                f.write_str(text)?;
            } else {
                write!(f, "[{text}]")?;
            }
        }
        Ok(())
    }
}
