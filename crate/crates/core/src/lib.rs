//! Sentence-level label extraction for chest CT radiology reports.
//!
//! Reports are cleaned and split into sentences ([`normalize`]), each sentence
//! is divided into normal and abnormal phrases, either by directional
//! polarity rules ([`detect`]) or by a trained sentence classifier
//! ([`hybrid`]), and a term-search vocabulary ([`vocab`]) turns the abnormal
//! text into a fixed-length binary label vector. [`corpus`] covers the report
//! ingestion steps that come before labeling and [`metrics`] the evaluation
//! statistics that come after.

pub mod corpus;
pub mod detect;
pub mod error;
pub mod hybrid;
pub mod metrics;
pub mod normalize;
pub mod pipeline;
pub mod synth;
pub mod vocab;

pub use corpus::{ReportRecord, ReportStatus, Split, SplitAssignment, SplitFractions};
pub use detect::{AnnotatedSentence, Direction, PolarityRule, PolarityRules};
pub use error::{Error, Result};
pub use hybrid::{Hyperparameters, SentenceClass, SentenceClassifier, SentenceExample};
pub use normalize::{NormalizedReport, Section, Sentence};
pub use vocab::{BoundedTerm, LabelVector, Measurement, Special, TermRule, Vocabulary};
