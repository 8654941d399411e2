//! Rule-based well-formedness scoring.
//!
//! A segment score is the equal-weight mean, over rules applicable to the
//! sentence, of each rule's within-sentence satisfaction ratio. The corpus
//! score pools per-rule counts over all sentences and macro-averages the
//! per-rule ratios; it is deliberately not a mean of segment scores.
//!
//! An edge where a required feature is missing on a token generates no
//! instance at all: taggers may legitimately omit features, and penalizing
//! absence would conflate tagger coverage with fluency.

use std::collections::BTreeMap;
use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::conllu::{edges, EdgeInstance, Sentence, Treebank};
use crate::rules::{AgreementRule, AssignmentRule, RuleSet, Side};

/// True iff the dependent's and head's value sets for the rule's feature
/// intersect. Callers must ensure the edge matches the rule pattern; a
/// missing feature reads as non-satisfaction.
pub fn check_agreement(rule: &AgreementRule, edge: &EdgeInstance<'_>) -> bool {
    match (
        edge.dependent.feats.get(&rule.feature),
        edge.head.feats.get(&rule.feature),
    ) {
        (Some(dep), Some(head)) => dep.iter().any(|v| head.contains(v)),
        _ => false,
    }
}

/// True iff the constrained token's value set intersects the rule's allowed
/// values.
pub fn check_assignment(rule: &AssignmentRule, edge: &EdgeInstance<'_>) -> bool {
    let constrained = match rule.side {
        Side::Dependent => edge.dependent,
        Side::Head => edge.head,
    };
    match constrained.feats.get(&rule.feature) {
        Some(values) => values.iter().any(|v| rule.allowed_values.iter().any(|a| a == v)),
        None => false,
    }
}

/// One (rule, edge) application with its verdict.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleInstance {
    pub rule_key: String,
    pub sent_id: String,
    pub dependent_id: u32,
    pub head_id: u32,
    pub satisfied: bool,
}

/// Applicable/satisfied tallies for one rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct RuleCount {
    pub applicable: u64,
    pub satisfied: u64,
}

impl RuleCount {
    pub fn ratio(&self) -> Option<f64> {
        if self.applicable == 0 {
            None
        } else {
            Some(self.satisfied as f64 / self.applicable as f64)
        }
    }
}

/// Per-sentence score with its per-rule breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentScore {
    pub sent_id: String,
    pub per_rule: BTreeMap<String, RuleCount>,
    /// Equal-weight mean of per-rule ratios; `None` when no rule applies.
    pub score: Option<f64>,
}

/// Corpus-level report: pooled per-rule counts and the macro-averaged score.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusReport {
    pub per_rule: BTreeMap<String, RuleCount>,
    /// Macro-average over rules with at least one application; `None` when
    /// no rule applied anywhere.
    pub corpus_score: Option<f64>,
    pub segments: Option<Vec<SegmentScore>>,
}

/// Rules indexed by (dep POS, head POS, deprel) for edge lookup.
struct RuleIndex<'a> {
    agreement: HashMap<(&'a str, &'a str, &'a str), Vec<&'a AgreementRule>>,
    assignment: HashMap<(&'a str, &'a str, &'a str), Vec<&'a AssignmentRule>>,
}

impl<'a> RuleIndex<'a> {
    fn build(rs: &'a RuleSet) -> Self {
        let mut agreement: HashMap<_, Vec<&AgreementRule>> = HashMap::new();
        for rule in &rs.agreement {
            agreement
                .entry((rule.dep_pos.as_str(), rule.head_pos.as_str(), rule.deprel.as_str()))
                .or_default()
                .push(rule);
        }
        let mut assignment: HashMap<_, Vec<&AssignmentRule>> = HashMap::new();
        for rule in &rs.assignment {
            assignment
                .entry((rule.dep_pos(), rule.head_pos(), rule.deprel.as_str()))
                .or_default()
                .push(rule);
        }
        RuleIndex { agreement, assignment }
    }

    fn instances(&self, sentence: &Sentence, sent_id: &str) -> Vec<RuleInstance> {
        let mut out = Vec::new();
        for edge in edges(sentence) {
            let key = (
                edge.dependent.upos.as_str(),
                edge.head.upos.as_str(),
                edge.deprel,
            );
            for rule in self.agreement.get(&key).into_iter().flatten() {
                if edge.dependent.feats.contains(&rule.feature)
                    && edge.head.feats.contains(&rule.feature)
                {
                    out.push(RuleInstance {
                        rule_key: rule.key(),
                        sent_id: sent_id.to_string(),
                        dependent_id: edge.dependent.id,
                        head_id: edge.head.id,
                        satisfied: check_agreement(rule, &edge),
                    });
                }
            }
            for rule in self.assignment.get(&key).into_iter().flatten() {
                let constrained = match rule.side {
                    Side::Dependent => edge.dependent,
                    Side::Head => edge.head,
                };
                if constrained.feats.contains(&rule.feature) {
                    out.push(RuleInstance {
                        rule_key: rule.key(),
                        sent_id: sent_id.to_string(),
                        dependent_id: edge.dependent.id,
                        head_id: edge.head.id,
                        satisfied: check_assignment(rule, &edge),
                    });
                }
            }
        }
        out
    }
}

/// All (rule, edge) applications within a sentence. A rule applies to an
/// edge when POS pair and deprel match and the feature-presence precondition
/// holds: both tokens carry the feature for agreement, the constrained token
/// for assignment.
pub fn applicable_instances(sentence: &Sentence, rs: &RuleSet) -> Vec<RuleInstance> {
    let sent_id = sentence.sent_id.clone().unwrap_or_default();
    RuleIndex::build(rs).instances(sentence, &sent_id)
}

fn tally(instances: &[RuleInstance]) -> BTreeMap<String, RuleCount> {
    let mut per_rule: BTreeMap<String, RuleCount> = BTreeMap::new();
    for inst in instances {
        let entry = per_rule.entry(inst.rule_key.clone()).or_default();
        entry.applicable += 1;
        if inst.satisfied {
            entry.satisfied += 1;
        }
    }
    per_rule
}

fn mean_ratio(per_rule: &BTreeMap<String, RuleCount>) -> Option<f64> {
    let ratios: Vec<f64> = per_rule.values().filter_map(|c| c.ratio()).collect();
    if ratios.is_empty() {
        None
    } else {
        Some(ratios.iter().sum::<f64>() / ratios.len() as f64)
    }
}

/// Scores one sentence against a rule set.
pub fn score_segment(sentence: &Sentence, rs: &RuleSet) -> SegmentScore {
    let instances = applicable_instances(sentence, rs);
    let per_rule = tally(&instances);
    let score = mean_ratio(&per_rule);
    SegmentScore {
        sent_id: sentence.sent_id.clone().unwrap_or_default(),
        per_rule,
        score,
    }
}

/// Scores a whole treebank: per-rule counts pooled corpus-wide, then
/// macro-averaged. Every rule of the rule set appears in `per_rule`, with
/// zero counts when it never applied. Segment scores are attached when
/// `with_segments` is set.
pub fn score_corpus(tb: &Treebank, rs: &RuleSet, with_segments: bool) -> CorpusReport {
    let index = RuleIndex::build(rs);
    let per_sentence: Vec<SegmentScore> = tb
        .sentences
        .par_iter()
        .enumerate()
        .map(|(i, sentence)| {
            let sent_id = sentence.sent_id_or(i);
            let instances = index.instances(sentence, &sent_id);
            let per_rule = tally(&instances);
            let score = mean_ratio(&per_rule);
            SegmentScore { sent_id, per_rule, score }
        })
        .collect();

    let mut per_rule: BTreeMap<String, RuleCount> = BTreeMap::new();
    for rule in &rs.agreement {
        per_rule.entry(rule.key()).or_default();
    }
    for rule in &rs.assignment {
        per_rule.entry(rule.key()).or_default();
    }
    for seg in &per_sentence {
        for (key, count) in &seg.per_rule {
            let entry = per_rule.entry(key.clone()).or_default();
            entry.applicable += count.applicable;
            entry.satisfied += count.satisfied;
        }
    }
    let corpus_score = mean_ratio(&per_rule);
    CorpusReport {
        per_rule,
        corpus_score,
        segments: with_segments.then_some(per_sentence),
    }
}

/// Provenance stamped into emitted reports.
#[derive(Debug, Clone, Serialize)]
pub struct ReportMeta {
    pub tool_version: String,
    pub rules_hash: String,
}

impl CorpusReport {
    pub fn total_applicable(&self) -> u64 {
        self.per_rule.values().map(|c| c.applicable).sum()
    }

    pub fn total_satisfied(&self) -> u64 {
        self.per_rule.values().map(|c| c.satisfied).sum()
    }

    /// Number of rules with at least one application.
    pub fn rules_applied(&self) -> usize {
        self.per_rule.values().filter(|c| c.applicable > 0).count()
    }

    /// Full report as JSON text (keys sorted).
    pub fn to_json(&self, meta: &ReportMeta) -> String {
        #[derive(Serialize)]
        struct RuleRow<'a> {
            rule: &'a str,
            applicable: u64,
            satisfied: u64,
            ratio: Option<f64>,
            weight: f64,
        }
        #[derive(Serialize)]
        struct SegmentRow<'a> {
            sent_id: &'a str,
            score: Option<f64>,
            applicable: u64,
            satisfied: u64,
        }
        #[derive(Serialize)]
        struct Report<'a> {
            tool_version: &'a str,
            rules_hash: &'a str,
            corpus_score: Option<f64>,
            rules: Vec<RuleRow<'a>>,
            #[serde(skip_serializing_if = "Option::is_none")]
            segments: Option<Vec<SegmentRow<'a>>>,
        }
        let report = Report {
            tool_version: &meta.tool_version,
            rules_hash: &meta.rules_hash,
            corpus_score: self.corpus_score,
            rules: self
                .per_rule
                .iter()
                .map(|(key, c)| RuleRow {
                    rule: key,
                    applicable: c.applicable,
                    satisfied: c.satisfied,
                    ratio: c.ratio(),
                    weight: 1.0,
                })
                .collect(),
            segments: self.segments.as_ref().map(|segs| {
                segs.iter()
                    .map(|s| SegmentRow {
                        sent_id: &s.sent_id,
                        score: s.score,
                        applicable: s.per_rule.values().map(|c| c.applicable).sum(),
                        satisfied: s.per_rule.values().map(|c| c.satisfied).sum(),
                    })
                    .collect()
            }),
        };
        let mut text = serde_json::to_string_pretty(&report).expect("report serialization");
        text.push('\n');
        text
    }

    /// Per-rule TSV summary with a final corpus_score row.
    pub fn summary_tsv(&self) -> String {
        let mut out = String::from("rule_key\tapplicable\tsatisfied\tratio\n");
        for (key, c) in &self.per_rule {
            let ratio = match c.ratio() {
                Some(r) => format!("{r:.6}"),
                None => "NA".to_string(),
            };
            let _ = writeln!(out, "{key}\t{}\t{}\t{ratio}", c.applicable, c.satisfied);
        }
        let score = match self.corpus_score {
            Some(s) => format!("{s:.6}"),
            None => "NA".to_string(),
        };
        let _ = writeln!(
            out,
            "corpus_score\t{}\t{}\t{score}",
            self.total_applicable(),
            self.total_satisfied()
        );
        out
    }

    /// One TSV row per sentence: sent_id and score or NA.
    pub fn segments_tsv(&self) -> String {
        let mut out = String::from("sent_id\tscore\n");
        if let Some(segments) = &self.segments {
            for seg in segments {
                let score = match seg.score {
                    Some(s) => format!("{s:.6}"),
                    None => "NA".to_string(),
                };
                let _ = writeln!(out, "{}\t{score}", seg.sent_id);
            }
        }
        out
    }
}
