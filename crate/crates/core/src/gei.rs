//! Grammar-error identification evaluation.
//!
//! Rule violations mark tokens as hypothesized errors: a token is flagged
//! when any applicable rule on a link to its head or a dependent is violated.
//! Hypotheses are scored against gold token-level error marks; a false flag
//! costs 0.5 per non-gold violating neighbor, since a violated link could be
//! repaired at either endpoint.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;

use crate::conllu::{Sentence, Token, Treebank};
use crate::error::{Error, Result};
use crate::rules::RuleSet;
use crate::scoring::applicable_instances;

/// Gold token-level error annotations.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GoldErrors {
    pub marks: BTreeSet<(String, u32)>,
}

impl GoldErrors {
    pub fn len(&self) -> usize {
        self.marks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.marks.is_empty()
    }

    pub fn contains(&self, sent_id: &str, token_id: u32) -> bool {
        self.marks.contains(&(sent_id.to_string(), token_id))
    }

    /// Parses a sidecar TSV of `sent_id<TAB>token_id` rows. Blank lines and
    /// `#` comments are skipped.
    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut marks = BTreeSet::new();
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 2 {
                return Err(Error::parse(
                    lineno,
                    format!("expected 2 tab-separated columns, found {}", cols.len()),
                ));
            }
            let token_id: u32 = cols[1]
                .parse()
                .map_err(|_| Error::parse(lineno, format!("non-integer token id `{}`", cols[1])))?;
            marks.insert((cols[0].to_string(), token_id));
        }
        Ok(GoldErrors { marks })
    }

    /// Collects marks from `GoldError=Yes` MISC annotations.
    pub fn from_misc(tb: &Treebank) -> Self {
        let mut marks = BTreeSet::new();
        for (i, sentence) in tb.sentences.iter().enumerate() {
            for tok in &sentence.tokens {
                if tok.misc.has_flag("GoldError", "Yes") {
                    marks.insert((sentence.sent_id_or(i), tok.id));
                }
            }
        }
        GoldErrors { marks }
    }

    /// Checks that every mark resolves to an existing token.
    pub fn validate(&self, tb: &Treebank) -> Result<()> {
        let mut ids: BTreeMap<&str, usize> = BTreeMap::new();
        let fallback: Vec<String> = (0..tb.sentences.len())
            .map(|i| tb.sentences[i].sent_id_or(i))
            .collect();
        for (i, sentence) in tb.sentences.iter().enumerate() {
            ids.insert(fallback[i].as_str(), sentence.tokens.len());
        }
        for (sent_id, token_id) in &self.marks {
            match ids.get(sent_id.as_str()) {
                Some(&n) if *token_id >= 1 && *token_id as usize <= n => {}
                Some(_) => {
                    return Err(Error::Data(format!(
                        "gold mark {sent_id}:{token_id} is outside the sentence"
                    )))
                }
                None => {
                    return Err(Error::Data(format!(
                        "gold mark references unknown sentence `{sent_id}`"
                    )))
                }
            }
        }
        Ok(())
    }
}

/// Precision/recall tallies. False positives accumulate in half steps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PRReport {
    pub tp: f64,
    pub fp: f64,
    #[serde(rename = "fn")]
    pub false_negatives: u64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

impl PRReport {
    fn from_tallies(tp: f64, fp: f64, false_negatives: u64) -> Self {
        let precision = if tp + fp > 0.0 { Some(tp / (tp + fp)) } else { None };
        let fn_f = false_negatives as f64;
        let recall = if tp + fn_f > 0.0 { Some(tp / (tp + fn_f)) } else { None };
        PRReport {
            tp,
            fp,
            false_negatives,
            precision,
            recall,
        }
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serialization");
        text.push('\n');
        text
    }
}

/// Map from token id to the set of neighbor ids connected by at least one
/// violated rule instance.
fn violation_map(sentence: &Sentence, rs: &RuleSet) -> BTreeMap<u32, BTreeSet<u32>> {
    let mut map: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
    for inst in applicable_instances(sentence, rs) {
        if !inst.satisfied {
            map.entry(inst.dependent_id).or_default().insert(inst.head_id);
            map.entry(inst.head_id).or_default().insert(inst.dependent_id);
        }
    }
    map
}

/// Neighbors of `token` (head or dependent) connected through at least one
/// violated applicable rule.
pub fn violating_neighbors(token: &Token, sentence: &Sentence, rs: &RuleSet) -> BTreeSet<u32> {
    violation_map(sentence, rs)
        .remove(&token.id)
        .unwrap_or_default()
}

/// Evaluates token-level error identification against gold marks.
///
/// Per token: a gold hypothesized error counts one true positive; a non-gold
/// hypothesized error adds 0.5 false positive for each violating neighbor
/// that is itself not gold; a gold token without hypothesis counts one false
/// negative.
pub fn evaluate_gei(tb: &Treebank, gold: &GoldErrors, rs: &RuleSet) -> PRReport {
    let tallies: Vec<(f64, f64, u64)> = tb
        .sentences
        .par_iter()
        .enumerate()
        .map(|(i, sentence)| {
            let sent_id = sentence.sent_id_or(i);
            let violations = violation_map(sentence, rs);
            let mut tp = 0.0;
            let mut fp = 0.0;
            let mut false_negatives = 0u64;
            for tok in &sentence.tokens {
                let empty = BTreeSet::new();
                let neighbors = violations.get(&tok.id).unwrap_or(&empty);
                let hypothesized = !neighbors.is_empty();
                let is_gold = gold.contains(&sent_id, tok.id);
                if hypothesized {
                    if is_gold {
                        tp += 1.0;
                    } else {
                        for neighbor in neighbors {
                            if !gold.contains(&sent_id, *neighbor) {
                                fp += 0.5;
                            }
                        }
                    }
                }
                if is_gold && !hypothesized {
                    false_negatives += 1;
                }
            }
            (tp, fp, false_negatives)
        })
        .collect();

    let (tp, fp, false_negatives) = tallies
        .into_iter()
        .fold((0.0, 0.0, 0u64), |acc, t| (acc.0 + t.0, acc.1 + t.1, acc.2 + t.2));
    PRReport::from_tallies(tp, fp, false_negatives)
}
