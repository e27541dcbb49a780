use sarle::normalize::normalize_report;
use sarle::synth::{generate_reports, PHRASES};
use sarle::vocab::extract_labels;
use sarle::{PolarityRules, Vocabulary};

#[test]
fn every_phrase_yields_exactly_its_labels() {
    let vocab = Vocabulary::default_vocabulary();
    let rules = PolarityRules::default_rules();
    let mut failures = Vec::new();
    for phrase in PHRASES {
        let v = extract_labels(&normalize_report("p", phrase.text), &vocab, &rules);
        let got: Vec<&str> = vocab
            .labels()
            .zip(&v.values)
            .filter(|(_, &x)| x == 1)
            .map(|(l, _)| l)
            .collect();
        let mut want: Vec<&str> = phrase.labels.to_vec();
        want.sort_by_key(|l| vocab.index_of(l));
        if got != want {
            failures.push(format!("{:?}: got {got:?}, want {want:?}", phrase.text));
        }
        let negated = extract_labels(
            &normalize_report("n", &format!("there is no {}", phrase.text)),
            &vocab,
            &rules,
        );
        if negated.count() != 0 {
            failures.push(format!("negated {:?} fired", phrase.text));
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

#[test]
fn template_reports_round_trip() {
    let vocab = Vocabulary::default_vocabulary();
    let rules = PolarityRules::default_rules();
    for r in generate_reports(600, 11) {
        let got = extract_labels(
            &normalize_report(&r.record.accession, &r.record.text),
            &vocab,
            &rules,
        );
        assert_eq!(got, r.label_vector(&vocab), "{}", r.record.text);
    }
}
