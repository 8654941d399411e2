//! Tests over the bundled sample corpus and lexicon.

mod common;

use std::collections::BTreeSet;

use morphoscore::noise::{load_unimorph, perturb_treebank, FeatureMapping, PerturbOptions};
use morphoscore::rules::{
    agreement_candidates, extract_agreement_rules, extract_assignment_rules, save_rules,
    ExtractionConfig, RuleSet, Side,
};
use morphoscore::scoring::score_corpus;

use common::{load_sample_lexicon_text, load_sample_treebank};

#[test]
fn sample_file_is_serialization_fixed_point() {
    let text = std::fs::read_to_string(common::data_path("sample.conllu")).unwrap();
    let tb = morphoscore::parse_treebank(&text).unwrap();
    assert_eq!(morphoscore::serialize_treebank(&tb), text);
}

#[test]
fn sample_yields_adjective_noun_agreement_rules() {
    let tb = load_sample_treebank();
    let rules = extract_agreement_rules(&tb, &ExtractionConfig::default());
    let mod_features: BTreeSet<&str> = rules
        .iter()
        .filter(|r| r.dep_pos == "ADJ" && r.head_pos == "NOUN" && r.deprel == "mod")
        .map(|r| r.feature.as_str())
        .collect();
    assert_eq!(mod_features, BTreeSet::from(["Case", "Gender", "Number"]));
    for rule in &rules {
        assert!(rule.agree_fraction > 0.9 && rule.agree_fraction <= 1.0);
    }
}

#[test]
fn coverage_pruning_drops_infrequent_candidates() {
    // Pronoun-auxiliary agreement clears the fraction threshold but falls
    // outside the cumulative-coverage cut on this corpus.
    let tb = load_sample_treebank();
    let candidate = agreement_candidates(&tb)
        .into_iter()
        .find(|c| c.dep_pos == "PRON" && c.head_pos == "AUX" && c.feature == "Person")
        .expect("pronoun-auxiliary pattern observed");
    assert!(candidate.fraction() > 0.9);
    let rules = extract_agreement_rules(&tb, &ExtractionConfig::default());
    assert!(rules.iter().all(|r| r.dep_pos != "PRON"));

    let cfg = ExtractionConfig {
        agree_coverage: 1.0,
        ..Default::default()
    };
    let unpruned = extract_agreement_rules(&tb, &cfg);
    assert!(unpruned
        .iter()
        .any(|r| r.dep_pos == "PRON" && r.head_pos == "AUX" && r.feature == "Person"));
}

#[test]
fn extraction_is_deterministic() {
    let tb = load_sample_treebank();
    let cfg = ExtractionConfig::default();
    let build = || {
        let mut rs = RuleSet::new("xx", "SUD");
        rs.agreement = extract_agreement_rules(&tb, &cfg);
        rs.assignment = extract_assignment_rules(&tb, &cfg);
        save_rules(&rs)
    };
    assert_eq!(build(), build());
}

#[test]
fn stricter_thresholds_extract_fewer_rules_here() {
    let tb = load_sample_treebank();
    let base_keys: BTreeSet<String> =
        extract_agreement_rules(&tb, &ExtractionConfig::default())
            .iter()
            .map(|r| r.key())
            .collect();
    let stricter = ExtractionConfig {
        agree_threshold: 0.985,
        ..Default::default()
    };
    let strict_keys: BTreeSet<String> = extract_agreement_rules(&tb, &stricter)
        .iter()
        .map(|r| r.key())
        .collect();
    assert!(strict_keys.is_subset(&base_keys));
    assert!(strict_keys.len() < base_keys.len());

    let base_assignment: BTreeSet<String> =
        extract_assignment_rules(&tb, &ExtractionConfig::default())
            .iter()
            .map(|r| r.key())
            .collect();
    let higher_count = ExtractionConfig {
        min_relation_count: 650,
        ..Default::default()
    };
    let fewer: BTreeSet<String> = extract_assignment_rules(&tb, &higher_count)
        .iter()
        .map(|r| r.key())
        .collect();
    assert!(fewer.is_subset(&base_assignment));
    assert!(fewer.len() < base_assignment.len());
}

#[test]
fn sample_extracts_object_case_rule() {
    let tb = load_sample_treebank();
    let rules = extract_assignment_rules(&tb, &ExtractionConfig::default());
    let rule = rules
        .iter()
        .find(|r| {
            r.target_pos == "NOUN"
                && r.other_pos == "VERB"
                && r.deprel == "comp:obj"
                && r.side == Side::Dependent
                && r.feature == "Case"
        })
        .expect("object case rule");
    assert_eq!(rule.allowed_values[0], "Acc");
    assert!(rule.kl > 0.9);
}

#[test]
fn sample_scores_high_against_its_own_rules() {
    let tb = load_sample_treebank();
    let cfg = ExtractionConfig::default();
    let mut rs = RuleSet::new("xx", "SUD");
    rs.agreement = extract_agreement_rules(&tb, &cfg);
    rs.assignment = extract_assignment_rules(&tb, &cfg);
    let report = score_corpus(&tb, &rs, false);
    let score = report.corpus_score.unwrap();
    assert!((0.9..1.0).contains(&score), "score = {score}");
}

#[test]
fn keep_gold_feats_round_trips_on_sample() {
    let tb = load_sample_treebank();
    let lexicon = load_unimorph(&load_sample_lexicon_text()).unwrap();
    let mapping = FeatureMapping::default_mapping();
    let opts = PerturbOptions {
        concat: false,
        keep_gold_feats: true,
    };
    let (out, report) = perturb_treebank(&tb, &lexicon, mapping, 5, opts);
    assert_eq!(out.sentences.len(), report.altered_sentences);
    assert_eq!(report.records.len(), report.altered_sentences);
    for (sentence, record) in out.sentences.iter().zip(&report.records) {
        let tok = sentence.token(record.token_id).unwrap();
        assert_eq!(tok.form, record.altered_form);
        // Gold features retained: the changed feature still carries the
        // original value.
        let values = tok.feats.get(&record.changed_feature).unwrap();
        assert!(values.contains(&record.original_value));
    }
    let text = morphoscore::serialize_treebank(&out);
    assert_eq!(morphoscore::parse_treebank(&text).unwrap(), out);
}
