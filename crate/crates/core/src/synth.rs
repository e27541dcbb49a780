//! Deterministic template corpus with known labels, used for round-trip
//! testing, benchmarks and seeding the sentence classifier.
//!
//! Every finding phrase declares the exact labels the default vocabulary
//! should assign to it. Those declarations are the ground truth; nothing here
//! consults the extractor.

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{ReportRecord, ReportStatus, DEFAULT_PROTOCOLS};
use crate::hybrid::{SentenceClass, SentenceExample};
use crate::normalize::normalize_text;
use crate::vocab::{LabelVector, Vocabulary};

/// A finding phrase and the labels it carries when stated as abnormal.
#[derive(Debug, Clone, Copy)]
pub struct Phrase {
    pub text: &'static str,
    pub labels: &'static [&'static str],
    /// Labels whose exclusion list this phrase's words trigger when they share
    /// a sentence.
    pub blocks: &'static [&'static str],
    /// Whether the phrase carries a size, which counts for every anchor in
    /// the sentence.
    pub measured: bool,
}

const fn p(text: &'static str, labels: &'static [&'static str]) -> Phrase {
    Phrase {
        text,
        labels,
        blocks: &[],
        measured: false,
    }
}

const fn pb(
    text: &'static str,
    labels: &'static [&'static str],
    blocks: &'static [&'static str],
) -> Phrase {
    Phrase {
        text,
        labels,
        blocks,
        measured: false,
    }
}

const fn pm(text: &'static str, labels: &'static [&'static str]) -> Phrase {
    Phrase {
        text,
        labels,
        blocks: &[],
        measured: true,
    }
}

pub const PHRASES: &[Phrase] = &[
    p("bandlike changes", &["bandlike_or_linear"]),
    p("ground-glass attenuation", &["groundglass"]),
    p("basilar honeycombing", &["honeycombing"]),
    p("reticular changes", &["reticulation"]),
    p("tree-in-bud pattern", &["tree in bud"]),
    p("chronic obstructive airways disease", &["airspace_disease"]),
    p("mosaic air trapping", &["air trapping"]),
    p("findings suggest aspiration", &["aspiration"]),
    p("basilar atelectasis", &["atelectasis"]),
    p("bronchial wall thickening", &["bronchial_wall_thickening"]),
    p("cylindrical bronchiectasis", &["bronchiectasis"]),
    p("peripheral bronchiolectasis", &["bronchiolectasis"]),
    p("respiratory bronchiolitis", &["bronchiolitis"]),
    p("changes of bronchitis", &["bronchitis"]),
    p("centrilobular emphysema", &["emphysema"]),
    p("small hemothorax", &["hemothorax"]),
    p("findings of sarcoidosis", &["interstitial_lung_disease"]),
    p("prior lobectomy", &["lung_resection"]),
    p("mucous plugging", &["mucous_plugging"]),
    p("small pleural effusion", &["pleural_effusion"]),
    p("pleural thickening", &["pleural_thickening"]),
    p("multifocal pneumonia", &["pneumonia"]),
    p("radiation pneumonitis", &["pneumonitis"]),
    p("small pneumothorax", &["pneumothorax"]),
    p("interstitial edema", &["pulmonary edema"]),
    p("septal thickening", &["septal thickening"]),
    p("prior tuberculosis", &["tuberculosis"]),
    p("bypass grafting", &["cabg"]),
    p("cardiac enlargement", &["cardiomegaly"]),
    p("coronary artery disease", &["coronary_artery_disease"]),
    p("heart failure", &["heart_failure"]),
    p("aortic valve replacement", &["heart_valve_replacement"]),
    p("pacemaker in place", &["pacemaker_or_defibrillator"]),
    pb(
        "small pericardial effusion",
        &["pericardial_effusion"],
        &["pleural_effusion"],
    ),
    pb(
        "pericardial thickening",
        &["pericardial_thickening"],
        &["pleural_effusion"],
    ),
    p("median sternotomy", &["sternotomy"]),
    p("degenerative changes of the spine", &["arthritis"]),
    p("aortic atherosclerosis", &["atherosclerosis"]),
    p("ascending aortic aneurysm", &["aneurysm"]),
    p("breast implants", &["breast_implant"]),
    p("prior mastectomy", &["breast_surgery"]),
    p("vascular calcifications", &["calcification"]),
    p("metastatic disease", &["cancer"]),
    p("central venous catheter", &["catheter_or_port"]),
    p("areas of cavitation", &["cavitation"]),
    p("clips in the axilla", &["clip"]),
    p("vascular congestion", &["congestion"]),
    p("dense consolidation", &["consolidation"]),
    p("simple cyst", &["cyst"]),
    p("debris in the trachea", &["debris"]),
    p("chest wall deformity", &["deformity"]),
    p("patchy density", &["density"]),
    p("dilated esophagus", &["dilation_or_ectasia"]),
    p("gastric distention", &["distention"]),
    p("fibrotic changes", &["fibrosis"]),
    p("rib fracture", &["fracture"]),
    p("small granuloma", &["granuloma"]),
    p("spinal hardware", &["hardware"]),
    p("hiatal hernia", &["hernia"]),
    p("findings concerning for infection", &["infection"]),
    p("patchy infiltrates", &["infiltrate"]),
    p("inflammatory changes", &["inflammation"]),
    p("lytic lesion", &["lesion"]),
    p("focal lucency", &["lucency"]),
    p("mediastinal adenopathy", &["lymphadenopathy"]),
    pm("2.5 cm lymph node", &["lymphadenopathy"]),
    p("large mass", &["mass"]),
    p("small nodule", &["nodule"]),
    pm("1.5 cm nodule", &["nodule", "nodulegr1cm"]),
    pm("12 x 8 mm nodule", &["nodule", "nodulegr1cm"]),
    p("patchy opacities", &["opacity"]),
    p("pleural plaque", &["plaque"]),
    p("postoperative changes", &["postsurgical"]),
    p("apical scarring", &["scarring"]),
    p(
        "scattered calcifications",
        &["scattered_calc", "calcification"],
    ),
    p("scattered nodules", &["scattered_nod", "nodule"]),
    p("retained secretions", &["secretion"]),
    p("soft tissue stranding", &["soft tissue"]),
    p("staple line", &["staple"]),
    pb("biliary stent", &["stent"], &["interstitial_lung_disease"]),
    p("suture material", &["suture"]),
    p("lung transplant", &["transplant"]),
    p("right chest tube", &["chest tube"]),
    p("tracheostomy tube in place", &["tracheal_tube"]),
    p("feeding tube in place", &["gi_tube"]),
];

const POSITIVE_TEMPLATES: &[&str] = &[
    "{}",
    "there is {}",
    "{} is again seen",
    "{} is present",
    "stable {}",
    "interval development of {}",
];

const NEGATED_TEMPLATES: &[&str] = &[
    "no {}",
    "there is no {}",
    "negative for {}",
    "no evidence of {}",
    "{} has resolved",
    "free of {}",
];

const MIXED_TEMPLATES: &[&str] = &["{} without {}", "{} and no {}", "{} but no {}"];

const NORMAL_SENTENCES: &[&str] = &[
    "the lungs are clear",
    "the vessels are patent",
    "the airways are patent",
    "the thyroid is unremarkable",
    "the heart size is normal",
    "the previously seen nodule is no longer visualized",
    "the osseous structures are unremarkable",
    "the mediastinum is unremarkable",
];

const FILLER_SENTENCES: &[&str] = &[
    "comparison is made to the prior study from 3/14/2015",
    "the examination was performed at 10:45 am",
    "images were reviewed on january 5, 2019",
    "technique includes axial images and 3d mips",
    "correlation with the study from 2016 was performed",
];

/// A mixed-polarity sentence: one stated finding and one negated finding.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedSentence {
    pub text: String,
    pub stated: &'static [&'static str],
    pub negated: &'static [&'static str],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticReport {
    pub record: ReportRecord,
    /// Labels that are positive for this report.
    pub labels: BTreeSet<&'static str>,
    pub mixed: Vec<MixedSentence>,
    pub sentence_count: usize,
}

impl SyntheticReport {
    pub fn label_vector(&self, vocab: &Vocabulary) -> LabelVector {
        let mut v = LabelVector::zeros(&self.record.accession, vocab.len());
        for label in &self.labels {
            let idx = vocab
                .index_of(label)
                .unwrap_or_else(|| panic!("template label {label:?} missing from vocabulary"));
            v.values[idx] = 1;
        }
        v
    }
}

fn fill(template: &str, args: &[&str]) -> String {
    let mut out = String::new();
    let mut parts = template.split("{}");
    out.push_str(parts.next().unwrap_or(""));
    for (arg, rest) in args.iter().zip(parts) {
        out.push_str(arg);
        out.push_str(rest);
    }
    out
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(first) => first.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn conflicts(a: &Phrase, b: &Phrase) -> bool {
    a.blocks.iter().any(|l| b.labels.contains(l)) || b.blocks.iter().any(|l| a.labels.contains(l))
}

/// A phrase that can be negated next to `stated` without the vocabulary
/// reading it through the stated part or clashing with `positives`.
fn pick_negated<'a>(
    rng: &mut ChaCha8Rng,
    positives: &BTreeSet<&'static str>,
    stated: Option<&Phrase>,
) -> &'a Phrase {
    loop {
        let cand = PHRASES.choose(rng).expect("phrase table is not empty");
        if cand.measured || cand.labels.iter().any(|l| positives.contains(l)) {
            continue;
        }
        if let Some(s) = stated {
            if conflicts(s, cand) {
                continue;
            }
        }
        return cand;
    }
}

/// Generates `n` reports. Report `i` always states phrase `i mod |PHRASES|`,
/// so any `n >= PHRASES.len()` covers every label. Roughly two in three
/// reports contain one mixed-polarity sentence.
pub fn generate_reports(n: usize, seed: u64) -> Vec<SyntheticReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|i| generate_report(i, &mut rng)).collect()
}

fn generate_report(i: usize, rng: &mut ChaCha8Rng) -> SyntheticReport {
    let mut stated: Vec<&Phrase> = vec![&PHRASES[i % PHRASES.len()]];
    for _ in 0..rng.random_range(0..3) {
        stated.push(PHRASES.choose(rng).expect("phrase table is not empty"));
    }
    let mut labels: BTreeSet<&'static str> = stated
        .iter()
        .flat_map(|p| p.labels.iter().copied())
        .collect();

    let mut findings = Vec::new();
    for phrase in &stated {
        let t = POSITIVE_TEMPLATES.choose(rng).unwrap();
        findings.push(fill(t, &[phrase.text]));
    }

    let mut mixed = Vec::new();
    if rng.random_bool(0.67) {
        let s = PHRASES.choose(rng).unwrap();
        labels.extend(s.labels.iter().copied());
        let neg = pick_negated(rng, &labels, Some(s));
        let t = MIXED_TEMPLATES.choose(rng).unwrap();
        let text = fill(t, &[s.text, neg.text]);
        findings.push(text.clone());
        mixed.push(MixedSentence {
            text,
            stated: s.labels,
            negated: neg.labels,
        });
    }

    for _ in 0..rng.random_range(1..4) {
        let neg = pick_negated(rng, &labels, None);
        let t = NEGATED_TEMPLATES.choose(rng).unwrap();
        findings.push(fill(t, &[neg.text]));
    }
    for _ in 0..rng.random_range(1..3) {
        findings.push(NORMAL_SENTENCES.choose(rng).unwrap().to_string());
    }
    // Shuffle sentence order so the stated findings are not always first.
    for k in (1..findings.len()).rev() {
        let j = rng.random_range(0..=k);
        findings.swap(k, j);
    }
    let filler = FILLER_SENTENCES.choose(rng).unwrap();
    let impression = fill(POSITIVE_TEMPLATES.choose(rng).unwrap(), &[stated[0].text]);

    let sentence_count = findings.len() + 2;
    let body: Vec<String> = findings.iter().map(|s| capitalize(s)).collect();
    let text = format!(
        "{}.\nFINDINGS: {}.\nIMPRESSION: {}.",
        capitalize(filler),
        body.join(". "),
        capitalize(&impression)
    );

    SyntheticReport {
        record: ReportRecord {
            accession: format!("SYN{i:05}"),
            mrn: format!("MRN{:05}", i / 2),
            protocol: DEFAULT_PROTOCOLS[i % DEFAULT_PROTOCOLS.len()].to_string(),
            status: ReportStatus::Verified,
            addendum_count: 0,
            text,
        },
        labels,
        mixed,
        sentence_count,
    }
}

/// Normalized sentences labeled abnormal when they state a finding (including
/// mixed sentences) and normal otherwise.
pub fn generate_sentences(n: usize, seed: u64) -> Vec<SentenceExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let (text, label) = match rng.random_range(0..10) {
                0..=3 => {
                    let phrase = PHRASES.choose(&mut rng).unwrap();
                    let t = POSITIVE_TEMPLATES.choose(&mut rng).unwrap();
                    (fill(t, &[phrase.text]), SentenceClass::Abnormal)
                }
                4 => {
                    let s = PHRASES.choose(&mut rng).unwrap();
                    let labels = s.labels.iter().copied().collect();
                    let neg = pick_negated(&mut rng, &labels, Some(s));
                    let t = MIXED_TEMPLATES.choose(&mut rng).unwrap();
                    (fill(t, &[s.text, neg.text]), SentenceClass::Abnormal)
                }
                5..=7 => {
                    let phrase = PHRASES.choose(&mut rng).unwrap();
                    let t = NEGATED_TEMPLATES.choose(&mut rng).unwrap();
                    (fill(t, &[phrase.text]), SentenceClass::Normal)
                }
                8 => (
                    NORMAL_SENTENCES.choose(&mut rng).unwrap().to_string(),
                    SentenceClass::Normal,
                ),
                _ => (
                    FILLER_SENTENCES.choose(&mut rng).unwrap().to_string(),
                    SentenceClass::Normal,
                ),
            };
            SentenceExample {
                text: normalize_text(&text),
                label,
            }
        })
        .collect()
}
