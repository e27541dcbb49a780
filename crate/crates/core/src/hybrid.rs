//! Trainable normal/abnormal sentence classifier used in place of the
//! polarity rules.
//!
//! The model averages hashed embeddings of word unigrams, word n-grams and
//! character n-grams, then applies a logistic output unit. It is trained with
//! plain SGD on the logistic loss with a linearly decaying learning rate.
//!
//! Embedding rows start from a uniform draw seeded by `(seed, row)`, so only
//! rows touched by training need to be stored; every other row is recomputed
//! on demand.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::normalize::{NormalizedReport, Sentence};
use crate::vocab::{labels_from_spans, LabelVector, Provenance, Vocabulary};

const MAGIC: &str = "sarle-sentence-classifier";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SentenceClass {
    Normal,
    Abnormal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceExample {
    pub text: String,
    pub label: SentenceClass,
}

pub fn read_examples(path: &Path) -> Result<Vec<SentenceExample>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let ex: SentenceExample =
            serde_json::from_str(&line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        out.push(ex);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub dim: usize,
    /// Longest word n-gram; 1 means unigrams only.
    pub word_ngrams: usize,
    pub min_char_ngram: usize,
    /// 0 disables character n-grams.
    pub max_char_ngram: usize,
    pub buckets: u32,
    pub epochs: usize,
    pub learning_rate: f32,
    pub seed: u64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            dim: 50,
            word_ngrams: 2,
            min_char_ngram: 3,
            max_char_ngram: 6,
            buckets: 1 << 20,
            epochs: 5,
            learning_rate: 0.1,
            seed: 0,
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.dim == 0 {
            return bad("dim must be positive");
        }
        if self.word_ngrams == 0 {
            return bad("word_ngrams must be at least 1");
        }
        if self.max_char_ngram > 0
            && (self.min_char_ngram == 0 || self.min_char_ngram > self.max_char_ngram)
        {
            return bad("character n-gram range must satisfy 1 <= min <= max");
        }
        if self.buckets == 0 {
            return bad("buckets must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning rate must be positive");
        }
        Ok(())
    }
}

fn fnv1a(bytes: &[u8]) -> u32 {
    let mut h: u32 = 2_166_136_261;
    for &b in bytes {
        h ^= b as u32;
        h = h.wrapping_mul(16_777_619);
    }
    h
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentenceClassifier {
    hp: Hyperparameters,
    rows: BTreeMap<u32, Vec<f32>>,
    output: Vec<f32>,
    bias: f32,
}

/// Per-epoch mean logistic loss over the whole training set, measured after
/// each epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingLog {
    pub epoch_losses: Vec<f64>,
}

fn sigmoid(z: f32) -> f32 {
    1.0 / (1.0 + (-z).exp())
}

fn logistic_loss(p: f32, y: f32) -> f64 {
    let p = (p as f64).clamp(1e-12, 1.0 - 1e-12);
    -(y as f64 * p.ln() + (1.0 - y as f64) * (1.0 - p).ln())
}

impl SentenceClassifier {
    pub fn hyperparameters(&self) -> &Hyperparameters {
        &self.hp
    }

    /// Bucket indices of all features of a normalized sentence.
    pub fn features(&self, text: &str) -> Vec<u32> {
        features(text, &self.hp)
    }

    fn initial_row(&self, idx: u32) -> Vec<f32> {
        initial_row(&self.hp, idx)
    }

    fn hidden(&self, feats: &[u32]) -> Vec<f32> {
        let mut h = vec![0f32; self.hp.dim];
        for &f in feats {
            match self.rows.get(&f) {
                Some(row) => h.iter_mut().zip(row).for_each(|(a, b)| *a += b),
                None => h
                    .iter_mut()
                    .zip(self.initial_row(f))
                    .for_each(|(a, b)| *a += b),
            }
        }
        let k = feats.len() as f32;
        h.iter_mut().for_each(|x| *x /= k);
        h
    }

    fn probability(&self, feats: &[u32]) -> f32 {
        let h = self.hidden(feats);
        let z: f32 = self.output.iter().zip(&h).map(|(w, x)| w * x).sum::<f32>() + self.bias;
        sigmoid(z)
    }

    /// Probability that a normalized sentence text is abnormal. Text with no
    /// tokens scores 0.
    pub fn score(&self, text: &str) -> f64 {
        let feats = self.features(text);
        if feats.is_empty() {
            return 0.0;
        }
        self.probability(&feats) as f64
    }

    /// Class and abnormality score; abnormal when the score is at least 0.5.
    pub fn classify(&self, sentence: &Sentence) -> (SentenceClass, f64) {
        let score = self.score(&sentence.text);
        let class = if score >= 0.5 {
            SentenceClass::Abnormal
        } else {
            SentenceClass::Normal
        };
        (class, score)
    }

    pub fn train(examples: &[SentenceExample], hp: &Hyperparameters) -> Result<Self> {
        Ok(Self::train_logged(examples, hp)?.0)
    }

    pub fn train_logged(
        examples: &[SentenceExample],
        hp: &Hyperparameters,
    ) -> Result<(Self, TrainingLog)> {
        hp.validate()?;
        if examples.len() < 2 {
            return Err(Error::DegenerateTraining(format!(
                "need at least 2 examples, got {}",
                examples.len()
            )));
        }
        let has = |c| examples.iter().any(|e| e.label == c);
        if !(has(SentenceClass::Normal) && has(SentenceClass::Abnormal)) {
            return Err(Error::DegenerateTraining(
                "both normal and abnormal examples are required".into(),
            ));
        }
        let data: Vec<(Vec<u32>, f32)> = examples
            .iter()
            .map(|e| {
                let y = if e.label == SentenceClass::Abnormal {
                    1.0
                } else {
                    0.0
                };
                (features(&e.text, hp), y)
            })
            .filter(|(f, _)| !f.is_empty())
            .collect();

        let mut model = SentenceClassifier {
            hp: hp.clone(),
            rows: BTreeMap::new(),
            output: vec![0.0; hp.dim],
            bias: 0.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
        let mut order: Vec<usize> = (0..data.len()).collect();
        let total = (hp.epochs * data.len()).max(1) as f32;
        let mut step = 0usize;
        let mut log = TrainingLog {
            epoch_losses: Vec::with_capacity(hp.epochs),
        };
        for _ in 0..hp.epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                let lr = hp.learning_rate * (1.0 - step as f32 / total);
                step += 1;
                let (feats, y) = &data[i];
                model.update(feats, *y, lr);
            }
            let loss = data
                .iter()
                .map(|(f, y)| logistic_loss(model.probability(f), *y))
                .sum::<f64>()
                / data.len().max(1) as f64;
            log.epoch_losses.push(loss);
        }
        Ok((model, log))
    }

    fn update(&mut self, feats: &[u32], y: f32, lr: f32) {
        let h = self.hidden(feats);
        let z: f32 = self.output.iter().zip(&h).map(|(w, x)| w * x).sum::<f32>() + self.bias;
        let g = sigmoid(z) - y;
        let grad_hidden: Vec<f32> = self.output.iter().map(|w| g * w).collect();
        for (w, x) in self.output.iter_mut().zip(&h) {
            *w -= lr * g * x;
        }
        self.bias -= lr * g;
        let scale = lr / feats.len() as f32;
        for &f in feats {
            let hp = &self.hp;
            let row = self.rows.entry(f).or_insert_with(|| initial_row(hp, f));
            for (r, gh) in row.iter_mut().zip(&grad_hidden) {
                *r -= scale * gh;
            }
        }
    }

    /// Writes the versioned text model format.
    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{MAGIC} {FORMAT_VERSION}")?;
        writeln!(
            out,
            "hyperparameters {}",
            serde_json::to_string(&self.hp).map_err(std::io::Error::other)?
        )?;
        writeln!(out, "bias {}", self.bias)?;
        writeln!(out, "output {}", join_floats(&self.output))?;
        writeln!(out, "rows {}", self.rows.len())?;
        for (idx, row) in &self.rows {
            writeln!(out, "{idx} {}", join_floats(row))?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("model text is ascii")
    }

    /// SHA-256 of the serialized model, hex encoded.
    pub fn checksum(&self) -> String {
        Sha256::digest(self.to_text().as_bytes()).iter().fold(
            String::with_capacity(64),
            |mut s, b| {
                let _ = write!(s, "{b:02x}");
                s
            },
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let mut next = |what: &str| {
            lines
                .next()
                .map(|(i, l)| (i + 1, l))
                .ok_or_else(|| Error::parse(path, 0, format!("missing {what} line")))
        };
        let (n, magic) = next("header")?;
        if magic != format!("{MAGIC} {FORMAT_VERSION}") {
            return Err(Error::parse(
                path,
                n,
                format!("unsupported model header {magic:?}"),
            ));
        }
        let (n, line) = next("hyperparameters")?;
        let hp: Hyperparameters = line
            .strip_prefix("hyperparameters ")
            .ok_or_else(|| Error::parse(path, n, "expected hyperparameters"))
            .and_then(|j| {
                serde_json::from_str(j).map_err(|e| Error::parse(path, n, e.to_string()))
            })?;
        hp.validate()
            .map_err(|e| Error::parse(path, n, e.to_string()))?;
        let (n, line) = next("bias")?;
        let bias = line
            .strip_prefix("bias ")
            .and_then(|v| v.parse::<f32>().ok())
            .ok_or_else(|| Error::parse(path, n, "expected bias"))?;
        let (n, line) = next("output")?;
        let output = line
            .strip_prefix("output ")
            .map(parse_floats)
            .filter(|v| v.as_ref().is_some_and(|v| v.len() == hp.dim))
            .flatten()
            .ok_or_else(|| Error::parse(path, n, format!("expected {} output weights", hp.dim)))?;
        let (n, line) = next("rows")?;
        let count: usize = line
            .strip_prefix("rows ")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::parse(path, n, "expected row count"))?;
        let mut rows = BTreeMap::new();
        for _ in 0..count {
            let (n, line) = next("embedding row")?;
            let (idx, rest) = line
                .split_once(' ')
                .ok_or_else(|| Error::parse(path, n, "malformed row"))?;
            let idx: u32 = idx
                .parse()
                .ok()
                .filter(|&i| i < hp.buckets)
                .ok_or_else(|| Error::parse(path, n, "row index out of range"))?;
            let row = parse_floats(rest)
                .filter(|r| r.len() == hp.dim)
                .ok_or_else(|| Error::parse(path, n, format!("expected {} values", hp.dim)))?;
            rows.insert(idx, row);
        }
        if let Some((n, _)) = lines.next() {
            return Err(Error::parse(path, n + 1, "trailing data after rows"));
        }
        Ok(SentenceClassifier {
            hp,
            rows,
            output,
            bias,
        })
    }
}

fn join_floats(v: &[f32]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn parse_floats(s: &str) -> Option<Vec<f32>> {
    s.split(' ').map(|x| x.parse::<f32>().ok()).collect()
}

fn initial_row(hp: &Hyperparameters, idx: u32) -> Vec<f32> {
    let mut rng =
        ChaCha8Rng::seed_from_u64(hp.seed ^ (idx as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let bound = 1.0 / hp.dim as f32;
    (0..hp.dim)
        .map(|_| rng.random_range(-bound..bound))
        .collect()
}

fn features(text: &str, hp: &Hyperparameters) -> Vec<u32> {
    let words: Vec<&str> = text.split_whitespace().collect();
    let mut out = Vec::new();
    let bucket = |h: u32| h % hp.buckets;
    for n in 1..=hp.word_ngrams {
        for gram in words.windows(n) {
            out.push(bucket(fnv1a(gram.join(" ").as_bytes())));
        }
    }
    if hp.max_char_ngram > 0 {
        for w in &words {
            let padded: Vec<char> = format!("<{w}>").chars().collect();
            for n in hp.min_char_ngram..=hp.max_char_ngram {
                for gram in padded.windows(n) {
                    // leading 0x01 keeps character grams apart from whole words
                    let mut key = vec![1u8];
                    key.extend(gram.iter().collect::<String>().bytes());
                    out.push(bucket(fnv1a(&key)));
                }
            }
        }
    }
    out
}

/// Hybrid extraction with provenance: sentences classified abnormal are
/// searched whole, as a single abnormal span.
pub fn extract_labels_hybrid_traced(
    report: &NormalizedReport,
    classifier: &SentenceClassifier,
    vocab: &Vocabulary,
) -> (LabelVector, Vec<Provenance>) {
    let spans = report.sentences.iter().map(|s| {
        let spans = match classifier.classify(s).0 {
            SentenceClass::Abnormal => vec![s.text.clone()],
            SentenceClass::Normal => Vec::new(),
        };
        (s, spans)
    });
    labels_from_spans(&report.accession, spans, vocab)
}

pub fn extract_labels_hybrid(
    report: &NormalizedReport,
    classifier: &SentenceClassifier,
    vocab: &Vocabulary,
) -> LabelVector {
    extract_labels_hybrid_traced(report, classifier, vocab).0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(text: &str, abnormal: bool) -> SentenceExample {
        SentenceExample {
            text: text.into(),
            label: if abnormal {
                SentenceClass::Abnormal
            } else {
                SentenceClass::Normal
            },
        }
    }

    fn small_hp() -> Hyperparameters {
        Hyperparameters {
            dim: 16,
            buckets: 1 << 16,
            learning_rate: 0.5,
            ..Hyperparameters::default()
        }
    }

    #[test]
    fn degenerate_training_sets() {
        let hp = small_hp();
        assert!(matches!(
            SentenceClassifier::train(&[ex("a", true), ex("b", true)], &hp),
            Err(Error::DegenerateTraining(_))
        ));
        assert!(SentenceClassifier::train(&[ex("a", true)], &hp).is_err());
        let bad = Hyperparameters {
            min_char_ngram: 7,
            ..small_hp()
        };
        assert!(
            SentenceClassifier::train(&[ex("a", true), ex("b", false)], &bad)
                .unwrap_err()
                .is_config()
        );
    }

    #[test]
    fn features_cover_words_bigrams_and_chars() {
        let hp = Hyperparameters {
            buckets: u32::MAX,
            ..Hyperparameters::default()
        };
        // "ab cd": 2 unigrams, 1 bigram, and per word "<ab>" has grams of
        // length 3 (2) and 4 (1)
        assert_eq!(features("ab cd", &hp).len(), 2 + 1 + 3 * 2);
        assert!(features("", &hp).is_empty());
    }

    #[test]
    fn empty_and_unseen_inputs() {
        let data = vec![ex("mass present", true), ex("no mass", false)];
        let m = SentenceClassifier::train(&data, &small_hp()).unwrap();
        assert_eq!(m.classify(&Sentence::new("")), (SentenceClass::Normal, 0.0));
        let s = m.score("zzqx qqzv");
        assert!((0.0..=1.0).contains(&s));
    }

    #[test]
    fn save_load_round_trip() {
        let data = vec![ex("mass present", true), ex("no mass", false)];
        let m = SentenceClassifier::train(&data, &small_hp()).unwrap();
        let text = m.to_text();
        let back = SentenceClassifier::parse(&text, Path::new("m")).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.checksum(), m.checksum());
        assert!(SentenceClassifier::parse("bogus 1\n", Path::new("m")).is_err());
        let truncated: String = text.lines().take(5).collect::<Vec<_>>().join("\n");
        let err = SentenceClassifier::parse(&truncated, Path::new("m")).unwrap_err();
        assert!(err.to_string().contains("missing"), "{err}");
    }
}
