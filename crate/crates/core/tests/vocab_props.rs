use std::sync::LazyLock;

use proptest::prelude::*;
use sarle::normalize::{normalize_report, NormalizedReport};
use sarle::synth::PHRASES;
use sarle::vocab::{extract_labels, match_term, parse_measurements, LABEL_COUNT};
use sarle::{BoundedTerm, PolarityRules, Sentence, Vocabulary};

fn report_of(sentences: &[String]) -> NormalizedReport {
    NormalizedReport {
        accession: "r".into(),
        sentences: sentences
            .iter()
            .enumerate()
            .map(|(i, s)| Sentence {
                index: i,
                ..Sentence::new(s.clone())
            })
            .collect(),
    }
}

fn sentence() -> impl Strategy<Value = String> {
    let phrase = proptest::sample::select(PHRASES).prop_map(|p| p.text.to_string());
    let neg = proptest::sample::select(&["no ", "without ", "", "", "there is "][..]);
    (
        neg,
        phrase,
        proptest::sample::select(
            &["", " is again seen", " and no small cyst", " 3 mm", " 2 cm"][..],
        ),
    )
        .prop_map(|(a, b, c)| sarle::normalize::normalize_text(&format!("{a}{b}{c}")))
}

static VOCAB: LazyLock<Vocabulary> = LazyLock::new(Vocabulary::default_vocabulary);
static RULES: LazyLock<PolarityRules> = LazyLock::new(PolarityRules::default_rules);

fn labels(sentences: &[String]) -> Vec<u8> {
    extract_labels(&report_of(sentences), &VOCAB, &RULES).values
}

fn label(v: &[u8], name: &str) -> u8 {
    v[VOCAB.index_of(name).unwrap()]
}

/// Token scan: a number token (optionally with the unit glued on), optionally
/// followed by `x number` groups, then a unit. The unit scales every number.
fn measurement_oracle(text: &str) -> Vec<f64> {
    let toks: Vec<&str> = text.split(' ').collect();
    let split_unit = |t: &str| -> Option<(f64, Option<f64>)> {
        for (unit, scale) in [("mm", 1.0), ("cm", 10.0)] {
            if let Some(num) = t.strip_suffix(unit) {
                if let Ok(v) = num.parse::<f64>() {
                    return Some((v, Some(scale)));
                }
            }
        }
        t.parse::<f64>().ok().map(|v| (v, None))
    };
    let mut out = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        let mut nums = Vec::new();
        let mut j = i;
        let mut scale = None;
        while let Some((v, s)) = toks.get(j).and_then(|t| split_unit(t)) {
            nums.push(v);
            j += 1;
            if s.is_some() {
                scale = s;
                break;
            }
            match toks.get(j) {
                Some(&"mm") => {
                    scale = Some(1.0);
                    j += 1;
                    break;
                }
                Some(&"cm") => {
                    scale = Some(10.0);
                    j += 1;
                    break;
                }
                Some(&"x") => j += 1,
                _ => break,
            }
        }
        match scale {
            Some(s) if !nums.is_empty() => {
                out.extend(nums.iter().filter(|&&v| v > 0.0).map(|v| v * s));
                i = j;
            }
            _ => i += 1,
        }
    }
    out
}

#[test]
fn measurement_fixtures() {
    let cases = [
        ("1.2 cm", vec![12.0]),
        ("3 mm", vec![3.0]),
        ("1.1 x 0.8 cm nodule", vec![11.0, 8.0]),
        (
            "a 12 x 8 x 4 mm cyst and 2 cm node",
            vec![12.0, 8.0, 4.0, 20.0],
        ),
        ("nodule measuring 15mm", vec![15.0]),
        ("no size given 12 x", vec![]),
        ("0 mm", vec![]),
        ("series 3 image 45", vec![]),
    ];
    for (text, want) in cases {
        let got: Vec<f64> = parse_measurements(text)
            .iter()
            .map(|m| m.value_mm)
            .collect();
        assert_eq!(got, want, "{text}");
        assert_eq!(measurement_oracle(text), want, "oracle {text}");
    }
    let m = parse_measurements("stable 1.1 x 0.8 cm nodule");
    assert_eq!(m[0].position, 1);
    assert_eq!(m[1].position, 3);
}

#[test]
fn boundary_examples() {
    let stent = BoundedTerm::from_quoted(" stent").unwrap();
    assert!(!match_term("consistent with scarring", &stent));
    assert!(match_term("aortic stent placed", &stent));
    let ectatic = BoundedTerm::from_quoted(" ectatic ").unwrap();
    assert!(!match_term("atelectatic", &ectatic));
    assert!(match_term("ectatic", &ectatic));
}

#[test]
fn stem_semantics_without_polarity_rules() {
    let vocab = Vocabulary::default_vocabulary();
    for s in ["nodule", "nodular opacity", "nodularity", "no nodules"] {
        let v = extract_labels(&normalize_report("r", s), &vocab, &PolarityRules::empty());
        assert_eq!(v.get(&vocab, "nodule"), Some(1), "{s}");
    }
    let v = extract_labels(
        &normalize_report("r", "radiation pneumonitis"),
        &vocab,
        &PolarityRules::default_rules(),
    );
    assert_eq!(v.get(&vocab, "pneumonitis"), Some(1));
    assert_eq!(v.get(&vocab, "pneumonia"), Some(0));
}

#[test]
fn measurement_rules() {
    let one = |s: &str| labels(&[sarle::normalize::normalize_text(s)]);
    assert_eq!(label(&one("2.5 cm lymph node"), "lymphadenopathy"), 1);
    assert_eq!(label(&one("3 mm lymph node"), "lymphadenopathy"), 0);
    assert_eq!(label(&one("1.5 cm nodule"), "nodulegr1cm"), 1);
    assert_eq!(label(&one("0.8 cm nodule"), "nodulegr1cm"), 0);
    assert_eq!(label(&one("1.0 cm nodule"), "nodulegr1cm"), 0);
    assert_eq!(label(&one("1.1 cm nodule"), "nodulegr1cm"), 1);
    assert_eq!(label(&one("history of cystic fibrosis"), "cyst"), 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn always_83_labels(s in proptest::collection::vec(sentence(), 0..6)) {
        let v = labels(&s);
        prop_assert_eq!(v.len(), LABEL_COUNT);
        prop_assert!(v.iter().all(|&x| x <= 1));
    }

    #[test]
    fn appending_is_monotone(s in proptest::collection::vec(sentence(), 0..6), extra in sentence()) {
        let before = labels(&s);
        let mut more = s.clone();
        more.push(extra);
        let after = labels(&more);
        for (b, a) in before.iter().zip(&after) {
            prop_assert!(a >= b);
        }
    }

    #[test]
    fn or_idempotent_and_order_free(s in proptest::collection::vec(sentence(), 1..6)) {
        let base = labels(&s);
        let mut doubled = s.clone();
        doubled.extend(s.iter().cloned());
        prop_assert_eq!(labels(&doubled), base.clone());
        let mut rev = s.clone();
        rev.reverse();
        prop_assert_eq!(labels(&rev), base);
    }

    #[test]
    fn large_nodule_implies_nodule(s in proptest::collection::vec(sentence(), 0..6)) {
        let v = labels(&s);
        if label(&v, "nodulegr1cm") == 1 {
            prop_assert_eq!(label(&v, "nodule"), 1);
        }
    }

    #[test]
    fn measurements_match_oracle(nums in proptest::collection::vec((1u32..400, 0u8..3), 1..4), unit in proptest::sample::select(&["mm", "cm"][..]), glue in any::<bool>()) {
        let parts: Vec<String> = nums.iter().map(|(n, d)| match d { 0 => n.to_string(), _ => format!("{}.{}", n / 10, n % 10) }).collect();
        let sep = if glue { "" } else { " " };
        let text = format!("there is a {}{sep}{unit} lesion", parts.join(" x "));
        let got: Vec<f64> = parse_measurements(&text).iter().map(|m| m.value_mm).collect();
        prop_assert_eq!(got, measurement_oracle(&text));
    }
}
