//! Shared test support: random treebank generation and a naive oracle that
//! recounts extraction statistics from raw edges, independent of the library
//! implementation.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use morphoscore::conllu::{parse_treebank, Treebank};
use morphoscore::rules::ExtractionConfig;

pub const FIG_CONLLU: &str = include_str!("../data/fig_de.conllu");
pub const FIG_RULES: &str = include_str!("../data/fig_de_rules.json");

pub fn data_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

pub fn load_sample_treebank() -> Treebank {
    let text = std::fs::read_to_string(data_path("sample.conllu")).expect("sample treebank");
    parse_treebank(&text).expect("sample treebank parses")
}

pub fn load_sample_lexicon_text() -> String {
    std::fs::read_to_string(data_path("sample_unimorph.tsv")).expect("sample lexicon")
}

const POS_TAGS: &[&str] = &["NOUN", "VERB", "ADJ", "DET", "AUX", "PRON"];
const DEPRELS: &[&str] = &["subj", "mod", "det", "comp:obj", "udep"];
const FEATURES: &[(&str, &[&str])] = &[
    ("Case", &["Nom", "Acc", "Dat"]),
    ("Number", &["Sing", "Plur"]),
    ("Gender", &["Masc", "Fem"]),
];

/// Builds a random valid treebank with up to `max_sentences` sentences of up
/// to `max_tokens` tokens, random trees and random feature bundles
/// (occasionally multi-valued).
pub fn random_treebank(seed: u64, max_sentences: usize, max_tokens: usize) -> Treebank {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_sentences = rng.random_range(1..=max_sentences);
    let mut text = String::new();
    for s in 0..n_sentences {
        text.push_str(&format!("# sent_id = rnd-{s}\n"));
        let n = rng.random_range(1..=max_tokens);
        // Random tree: visit tokens in a random order, attaching each to an
        // already-visited token.
        let mut order: Vec<usize> = (1..=n).collect();
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        let mut head = vec![0u32; n + 1];
        let mut deprel = vec![""; n + 1];
        for k in 1..n {
            head[order[k]] = order[rng.random_range(0..k)] as u32;
            deprel[order[k]] = DEPRELS[rng.random_range(0..DEPRELS.len())];
        }
        deprel[order[0]] = "root";
        for id in 1..=n {
            let upos = POS_TAGS[rng.random_range(0..POS_TAGS.len())];
            let mut feats = Vec::new();
            for (name, values) in FEATURES {
                if rng.random_range(0.0..1.0) < 0.7 {
                    if rng.random_range(0.0..1.0) < 0.05 && values.len() >= 2 {
                        let a = rng.random_range(0..values.len());
                        let mut b = rng.random_range(0..values.len());
                        while b == a {
                            b = rng.random_range(0..values.len());
                        }
                        let (lo, hi) = (a.min(b), a.max(b));
                        feats.push(format!("{name}={},{}", values[lo], values[hi]));
                    } else {
                        let v = values[rng.random_range(0..values.len())];
                        feats.push(format!("{name}={v}"));
                    }
                }
            }
            let feat_col = if feats.is_empty() {
                "_".to_string()
            } else {
                feats.join("|")
            };
            let rel = if head[id] == 0 { "root" } else { deprel[id] };
            text.push_str(&format!(
                "{id}\tw{id}\tl{id}\t{upos}\t_\t{feat_col}\t{}\t{rel}\t_\t_\n",
                head[id]
            ));
        }
        text.push('\n');
    }
    parse_treebank(&text).expect("random treebank is valid")
}

// ---------------------------------------------------------------------------
// Naive oracle: recounts every fraction, distribution and divergence from raw
// edges with nested loops. No code shared with the library implementation.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct OracleAgreementStat {
    pub dep_pos: String,
    pub head_pos: String,
    pub deprel: String,
    pub feature: String,
    pub applicable: u64,
    pub agreeing: u64,
}

type Quad = (String, String, String, String);

fn sentence_edges(sent: &morphoscore::conllu::Sentence) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (i, tok) in sent.tokens.iter().enumerate() {
        if tok.head != 0 {
            out.push((i, tok.head as usize - 1));
        }
    }
    out
}

pub fn oracle_agreement_stats(tb: &Treebank) -> Vec<OracleAgreementStat> {
    // Pass 1: collect distinct keys.
    let mut keys: BTreeSet<Quad> = BTreeSet::new();
    for sent in &tb.sentences {
        for (d, h) in sentence_edges(sent) {
            let dep = &sent.tokens[d];
            let head = &sent.tokens[h];
            for (feature, _) in dep.feats.iter() {
                if head.feats.contains(feature) {
                    keys.insert((
                        dep.upos.clone(),
                        head.upos.clone(),
                        dep.deprel.clone(),
                        feature.to_string(),
                    ));
                }
            }
        }
    }
    // Pass 2: recount each key from scratch.
    let mut out = Vec::new();
    for (x, y, rel, feature) in keys {
        let mut applicable = 0;
        let mut agreeing = 0;
        for sent in &tb.sentences {
            for (d, h) in sentence_edges(sent) {
                let dep = &sent.tokens[d];
                let head = &sent.tokens[h];
                if dep.upos != x || head.upos != y || dep.deprel != rel {
                    continue;
                }
                let (Some(dv), Some(hv)) = (dep.feats.get(&feature), head.feats.get(&feature))
                else {
                    continue;
                };
                applicable += 1;
                if dv.intersection(hv).count() > 0 {
                    agreeing += 1;
                }
            }
        }
        out.push(OracleAgreementStat {
            dep_pos: x,
            head_pos: y,
            deprel: rel,
            feature,
            applicable,
            agreeing,
        });
    }
    out
}

pub fn oracle_agreement_rules(
    tb: &Treebank,
    cfg: &ExtractionConfig,
) -> Vec<OracleAgreementStat> {
    let mut candidates: Vec<OracleAgreementStat> = oracle_agreement_stats(tb)
        .into_iter()
        .filter(|c| c.agreeing as f64 / c.applicable as f64 > cfg.agree_threshold)
        .collect();
    candidates.sort_by(|a, b| {
        b.applicable.cmp(&a.applicable).then_with(|| {
            (&a.dep_pos, &a.head_pos, &a.deprel, &a.feature)
                .cmp(&(&b.dep_pos, &b.head_pos, &b.deprel, &b.feature))
        })
    });
    let total: u64 = candidates.iter().map(|c| c.applicable).sum();
    let target = cfg.agree_coverage * total as f64;
    let mut kept = Vec::new();
    let mut cum = 0u64;
    for c in candidates {
        cum += c.applicable;
        kept.push(c);
        if cum as f64 >= target {
            break;
        }
    }
    kept
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleAssignmentStat {
    pub target_pos: String,
    pub other_pos: String,
    pub deprel: String,
    pub dependent_side: bool,
    pub feature: String,
    pub global: BTreeMap<String, f64>,
    pub local: BTreeMap<String, f64>,
    pub kl: f64,
    pub support: u64,
    pub allowed: Vec<String>,
}

fn normalize(counts: BTreeMap<String, f64>) -> BTreeMap<String, f64> {
    let total: f64 = counts.values().sum();
    counts.into_iter().map(|(k, v)| (k, v / total)).collect()
}

fn oracle_kl(local: &BTreeMap<String, f64>, global: &BTreeMap<String, f64>) -> f64 {
    let eps = 1e-9;
    let mut keys: BTreeSet<&String> = local.keys().collect();
    keys.extend(global.keys());
    let mut total = 0.0;
    for key in keys {
        let l = local.get(key).copied().unwrap_or(0.0);
        if l > 0.0 {
            let g = global.get(key).copied().unwrap_or(0.0);
            total += l * ((l + eps) / (g + eps)).ln();
        }
    }
    if total < 0.0 {
        0.0
    } else {
        total
    }
}

pub fn oracle_assignment_stats(tb: &Treebank, cfg: &ExtractionConfig) -> Vec<OracleAssignmentStat> {
    // Side rank 0 = dependent, 1 = head, matching the library's ordering.
    type Key = (String, String, String, u8, String);
    let mut keys: BTreeSet<Key> = BTreeSet::new();
    for sent in &tb.sentences {
        for (d, h) in sentence_edges(sent) {
            let dep = &sent.tokens[d];
            let head = &sent.tokens[h];
            for (feature, _) in dep.feats.iter() {
                keys.insert((
                    dep.upos.clone(),
                    head.upos.clone(),
                    dep.deprel.clone(),
                    0,
                    feature.to_string(),
                ));
            }
            for (feature, _) in head.feats.iter() {
                keys.insert((
                    head.upos.clone(),
                    dep.upos.clone(),
                    dep.deprel.clone(),
                    1,
                    feature.to_string(),
                ));
            }
        }
    }
    let mut out = Vec::new();
    for (target, other, rel, side_rank, feature) in keys {
        let dependent_side = side_rank == 0;
        // Global: every token of the target POS carrying the feature, one
        // unit of mass per token split across its values.
        let mut global_counts: BTreeMap<String, f64> = BTreeMap::new();
        for sent in &tb.sentences {
            for tok in &sent.tokens {
                if tok.upos != target {
                    continue;
                }
                if let Some(values) = tok.feats.get(&feature) {
                    for v in values {
                        *global_counts.entry(v.clone()).or_insert(0.0) +=
                            1.0 / values.len() as f64;
                    }
                }
            }
        }
        // Local: constrained side of matching edges.
        let mut local_counts: BTreeMap<String, f64> = BTreeMap::new();
        let mut support = 0u64;
        for sent in &tb.sentences {
            for (d, h) in sentence_edges(sent) {
                let dep = &sent.tokens[d];
                let head = &sent.tokens[h];
                if dep.deprel != rel {
                    continue;
                }
                let constrained = if dependent_side {
                    if dep.upos != target || head.upos != other {
                        continue;
                    }
                    dep
                } else {
                    if head.upos != target || dep.upos != other {
                        continue;
                    }
                    head
                };
                if let Some(values) = constrained.feats.get(&feature) {
                    support += 1;
                    for v in values {
                        *local_counts.entry(v.clone()).or_insert(0.0) +=
                            1.0 / values.len() as f64;
                    }
                }
            }
        }
        if local_counts.is_empty() || global_counts.is_empty() {
            continue;
        }
        let global = normalize(global_counts);
        let local = normalize(local_counts);
        let kl = oracle_kl(&local, &global);
        let mut allowed: Vec<(String, f64)> = local
            .iter()
            .filter(|(_, p)| **p >= cfg.value_inclusion_threshold)
            .map(|(v, p)| (v.clone(), *p))
            .collect();
        allowed.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap()
                .then_with(|| a.0.cmp(&b.0))
        });
        out.push(OracleAssignmentStat {
            target_pos: target,
            other_pos: other,
            deprel: rel,
            dependent_side,
            feature,
            global,
            local,
            kl,
            support,
            allowed: allowed.into_iter().map(|(v, _)| v).collect(),
        });
    }
    out
}

pub fn oracle_assignment_rules(
    tb: &Treebank,
    cfg: &ExtractionConfig,
) -> Vec<OracleAssignmentStat> {
    let mut rules: Vec<OracleAssignmentStat> = oracle_assignment_stats(tb, cfg)
        .into_iter()
        .filter(|c| {
            c.kl > cfg.kl_threshold && c.support >= cfg.min_relation_count && !c.allowed.is_empty()
        })
        .collect();
    rules.sort_by(|a, b| {
        let rank = |s: &OracleAssignmentStat| u8::from(!s.dependent_side);
        b.support.cmp(&a.support).then_with(|| {
            (&a.target_pos, &a.other_pos, &a.deprel, rank(a), &a.feature).cmp(&(
                &b.target_pos,
                &b.other_pos,
                &b.deprel,
                rank(b),
                &b.feature,
            ))
        })
    });
    rules
}
