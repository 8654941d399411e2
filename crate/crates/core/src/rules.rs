//! The rule data model, its file format, and the two extraction algorithms.
//!
//! Agreement rules constrain a dependent and head on a given (POS, POS,
//! deprel) pattern to share a morphological feature value. Assignment rules
//! constrain the token on one side of a pattern to draw its feature value
//! from a fixed allowed set; they are mined by comparing the feature-value
//! distribution local to the pattern against the global distribution over
//! all tokens of that POS, keeping patterns whose KL divergence clears a
//! threshold.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conllu::{edges, Sentence, Treebank};
use crate::error::{Error, Result};

/// Sentences per extraction shard. Shard boundaries are fixed so that counter
/// merging (and therefore output) is identical for any worker count.
const EXTRACTION_SHARD: usize = 256;

/// Additive smoothing constant used when extraction computes KL divergence.
pub const KL_EPSILON: f64 = 1e-9;

/// Which side of a dependency edge an assignment rule constrains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Dependent,
    Head,
}

impl Side {
    /// Short form used inside rule keys.
    pub fn short(self) -> &'static str {
        match self {
            Side::Dependent => "depd",
            Side::Head => "head",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Side::Dependent => write!(f, "dependent"),
            Side::Head => write!(f, "head"),
        }
    }
}

/// Thresholds controlling rule extraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractionConfig {
    /// Minimum agreement fraction (strict) for a candidate agreement rule.
    pub agree_threshold: f64,
    /// Fraction of total candidate support the kept agreement rules must cover.
    pub agree_coverage: f64,
    /// Minimum KL divergence (strict) for an assignment rule.
    pub kl_threshold: f64,
    /// Minimum number of feature-bearing edge instances for an assignment rule.
    pub min_relation_count: u64,
    /// Minimum local probability mass for a value to enter `allowed_values`.
    pub value_inclusion_threshold: f64,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            agree_threshold: 0.9,
            agree_coverage: 0.8,
            kl_threshold: 0.9,
            min_relation_count: 100,
            value_inclusion_threshold: 0.05,
        }
    }
}

impl ExtractionConfig {
    pub fn validate(&self) -> Result<()> {
        let frac = |name: &str, v: f64| -> Result<()> {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(Error::Data(format!("{name} must be in (0, 1], got {v}")))
            }
        };
        frac("agree_threshold", self.agree_threshold)?;
        frac("agree_coverage", self.agree_coverage)?;
        frac("value_inclusion_threshold", self.value_inclusion_threshold)?;
        if self.kl_threshold < 0.0 {
            return Err(Error::Data(format!(
                "kl_threshold must be >= 0, got {}",
                self.kl_threshold
            )));
        }
        if self.min_relation_count == 0 {
            return Err(Error::Data("min_relation_count must be >= 1".into()));
        }
        Ok(())
    }
}

/// A constraint that dependent and head share a feature value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgreementRule {
    pub dep_pos: String,
    pub head_pos: String,
    pub deprel: String,
    pub feature: String,
    /// Number of edges where both tokens carried the feature during extraction.
    pub support: u64,
    pub agree_fraction: f64,
}

impl AgreementRule {
    pub fn key(&self) -> String {
        format!(
            "agr-{}-{}-{}:{}",
            self.deprel, self.dep_pos, self.head_pos, self.feature
        )
    }

    fn sort_key(&self) -> (&str, &str, &str, &str) {
        (&self.dep_pos, &self.head_pos, &self.deprel, &self.feature)
    }
}

/// A constraint that the token on one side of a pattern takes its feature
/// value from a fixed set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssignmentRule {
    pub target_pos: String,
    pub other_pos: String,
    pub deprel: String,
    pub side: Side,
    pub feature: String,
    /// Values ordered by descending local probability mass.
    pub allowed_values: Vec<String>,
    pub kl: f64,
    /// Number of pattern edges whose constrained token carried the feature.
    pub support: u64,
}

impl AssignmentRule {
    /// POS of the edge's dependent under this rule's pattern.
    pub fn dep_pos(&self) -> &str {
        match self.side {
            Side::Dependent => &self.target_pos,
            Side::Head => &self.other_pos,
        }
    }

    /// POS of the edge's head under this rule's pattern.
    pub fn head_pos(&self) -> &str {
        match self.side {
            Side::Dependent => &self.other_pos,
            Side::Head => &self.target_pos,
        }
    }

    pub fn key(&self) -> String {
        format!(
            "args-{}-{}-{}:{}:{}",
            self.deprel,
            self.dep_pos(),
            self.head_pos(),
            self.side.short(),
            self.feature
        )
    }

    fn sort_key(&self) -> (&str, &str, &str, Side, &str) {
        (
            &self.target_pos,
            &self.other_pos,
            &self.deprel,
            self.side,
            &self.feature,
        )
    }
}

/// A machine-readable grammar: the extracted rules plus their provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleSet {
    pub language: String,
    pub schema: String,
    pub agreement: Vec<AgreementRule>,
    pub assignment: Vec<AssignmentRule>,
    pub config: ExtractionConfig,
}

impl RuleSet {
    pub fn new(language: impl Into<String>, schema: impl Into<String>) -> Self {
        RuleSet {
            language: language.into(),
            schema: schema.into(),
            agreement: Vec::new(),
            assignment: Vec::new(),
            config: ExtractionConfig::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.agreement.len() + self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agreement.is_empty() && self.assignment.is_empty()
    }
}

/// An empirical distribution over feature values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Distribution {
    mass: BTreeMap<String, f64>,
}

impl Distribution {
    /// Normalizes raw counts into a distribution. Returns `None` when the
    /// total mass is zero.
    pub fn from_counts(counts: &BTreeMap<String, f64>) -> Option<Self> {
        let total: f64 = counts.values().sum();
        if total <= 0.0 {
            return None;
        }
        Some(Distribution {
            mass: counts.iter().map(|(k, v)| (k.clone(), v / total)).collect(),
        })
    }

    /// Builds a distribution from explicit probabilities (testing and
    /// bindings convenience; masses are re-normalized).
    pub fn from_pairs<I, S>(pairs: I) -> Option<Self>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let counts: BTreeMap<String, f64> = pairs.into_iter().map(|(k, v)| (k.into(), v)).collect();
        Self::from_counts(&counts)
    }

    pub fn prob(&self, value: &str) -> f64 {
        self.mass.get(value).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.mass.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }
}

/// KL(local ‖ global) with additive epsilon smoothing, natural log, summed
/// over the union of supports and clamped at zero.
pub fn kl_divergence(local: &Distribution, global: &Distribution, epsilon: f64) -> f64 {
    let mut keys: Vec<&str> = local.mass.keys().map(|s| s.as_str()).collect();
    for k in global.mass.keys() {
        if !local.mass.contains_key(k) {
            keys.push(k);
        }
    }
    let mut sum = 0.0;
    for k in keys {
        let l = local.prob(k);
        if l == 0.0 {
            continue;
        }
        let g = global.prob(k);
        sum += l * ((l + epsilon) / (g + epsilon)).ln();
    }
    sum.max(0.0)
}

/// Per-pattern agreement statistics, before thresholding.
#[derive(Debug, Clone, PartialEq)]
pub struct AgreementCandidate {
    pub dep_pos: String,
    pub head_pos: String,
    pub deprel: String,
    pub feature: String,
    /// Edges matching the pattern where both tokens carry the feature.
    pub applicable: u64,
    /// Of those, edges whose value sets intersect.
    pub agreeing: u64,
}

impl AgreementCandidate {
    pub fn fraction(&self) -> f64 {
        self.agreeing as f64 / self.applicable as f64
    }
}

/// Tallies agreement statistics for every observed (dep POS, head POS,
/// deprel, feature) pattern. Only edges where both tokens carry the feature
/// count; agreement means the two value sets intersect. Counting is sharded
/// by sentence and merged in shard order.
pub fn agreement_candidates(tb: &Treebank) -> Vec<AgreementCandidate> {
    type Counts = BTreeMap<(String, String, String, String), (u64, u64)>;
    let tally = |sentences: &[Sentence]| -> Counts {
        let mut counts = Counts::new();
        for sentence in sentences {
            for edge in edges(sentence) {
                for (feature, dep_values) in edge.dependent.feats.iter() {
                    let Some(head_values) = edge.head.feats.get(feature) else {
                        continue;
                    };
                    let key = (
                        edge.dependent.upos.clone(),
                        edge.head.upos.clone(),
                        edge.deprel.to_string(),
                        feature.to_string(),
                    );
                    let entry = counts.entry(key).or_insert((0, 0));
                    entry.0 += 1;
                    if dep_values.iter().any(|v| head_values.contains(v)) {
                        entry.1 += 1;
                    }
                }
            }
        }
        counts
    };
    let shards: Vec<Counts> = tb
        .sentences
        .par_chunks(EXTRACTION_SHARD)
        .map(tally)
        .collect();
    let mut counts = Counts::new();
    for shard in shards {
        for (key, (applicable, agreeing)) in shard {
            let entry = counts.entry(key).or_insert((0, 0));
            entry.0 += applicable;
            entry.1 += agreeing;
        }
    }
    counts
        .into_iter()
        .map(|((dep_pos, head_pos, deprel, feature), (applicable, agreeing))| {
            AgreementCandidate {
                dep_pos,
                head_pos,
                deprel,
                feature,
                applicable,
                agreeing,
            }
        })
        .collect()
}

/// Extracts agreement rules: candidates with agreement fraction strictly
/// above `agree_threshold`, pruned to the most frequent ones covering
/// `agree_coverage` of the total candidate support. Ties in support break
/// lexicographically on (dep POS, head POS, deprel, feature).
pub fn extract_agreement_rules(tb: &Treebank, cfg: &ExtractionConfig) -> Vec<AgreementRule> {
    let mut candidates: Vec<AgreementRule> = agreement_candidates(tb)
        .into_iter()
        .filter(|c| c.fraction() > cfg.agree_threshold)
        .map(|c| AgreementRule {
            agree_fraction: c.fraction(),
            dep_pos: c.dep_pos,
            head_pos: c.head_pos,
            deprel: c.deprel,
            feature: c.feature,
            support: c.applicable,
        })
        .collect();
    candidates.sort_by(|a, b| {
        b.support
            .cmp(&a.support)
            .then_with(|| a.sort_key().cmp(&b.sort_key()))
    });
    let total: u64 = candidates.iter().map(|c| c.support).sum();
    let target = cfg.agree_coverage * total as f64;
    let mut kept = Vec::new();
    let mut cumulative = 0u64;
    for rule in candidates {
        cumulative += rule.support;
        kept.push(rule);
        if cumulative as f64 >= target {
            break;
        }
    }
    kept
}

/// Per-pattern assignment statistics: the global and local distributions and
/// their divergence, before thresholding.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentCandidate {
    pub target_pos: String,
    pub other_pos: String,
    pub deprel: String,
    pub side: Side,
    pub feature: String,
    pub global: Distribution,
    pub local: Distribution,
    pub kl: f64,
    /// Pattern edges whose constrained token carries the feature.
    pub support: u64,
}

fn add_value_mass(counts: &mut BTreeMap<String, f64>, values: &std::collections::BTreeSet<String>) {
    // A token contributes unit mass, split evenly across a multi-valued
    // annotation.
    let share = 1.0 / values.len() as f64;
    for v in values {
        *counts.entry(v.clone()).or_insert(0.0) += share;
    }
}

/// Computes assignment statistics for every observed (target POS, other POS,
/// deprel, side, feature) pattern. The global distribution pools all tokens
/// of the target POS carrying the feature anywhere in the treebank; the
/// local one is restricted to the constrained side of the pattern's edges.
/// Counting is sharded by sentence and merged in shard order.
pub fn assignment_candidates(tb: &Treebank) -> Vec<AssignmentCandidate> {
    // (pos, feature) -> value mass over every token in the treebank
    type GlobalCounts = BTreeMap<(String, String), (BTreeMap<String, f64>, u64)>;
    // (target, other, deprel, side, feature) -> local value mass
    type LocalKey = (String, String, String, Side, String);
    type LocalCounts = BTreeMap<LocalKey, (BTreeMap<String, f64>, u64)>;

    let tally = |sentences: &[Sentence]| -> (GlobalCounts, LocalCounts) {
        let mut global = GlobalCounts::new();
        let mut local = LocalCounts::new();
        for sentence in sentences {
            for tok in &sentence.tokens {
                for (feature, values) in tok.feats.iter() {
                    let entry = global
                        .entry((tok.upos.clone(), feature.to_string()))
                        .or_default();
                    add_value_mass(&mut entry.0, values);
                    entry.1 += 1;
                }
            }
            for edge in edges(sentence) {
                for (side, target, other) in [
                    (Side::Dependent, edge.dependent, edge.head),
                    (Side::Head, edge.head, edge.dependent),
                ] {
                    for (feature, values) in target.feats.iter() {
                        let key = (
                            target.upos.clone(),
                            other.upos.clone(),
                            edge.deprel.to_string(),
                            side,
                            feature.to_string(),
                        );
                        let entry = local.entry(key).or_default();
                        add_value_mass(&mut entry.0, values);
                        entry.1 += 1;
                    }
                }
            }
        }
        (global, local)
    };
    let shards: Vec<(GlobalCounts, LocalCounts)> = tb
        .sentences
        .par_chunks(EXTRACTION_SHARD)
        .map(tally)
        .collect();
    let mut global = GlobalCounts::new();
    let mut local = LocalCounts::new();
    for (shard_global, shard_local) in shards {
        for (key, (masses, count)) in shard_global {
            let entry = global.entry(key).or_default();
            for (value, mass) in masses {
                *entry.0.entry(value).or_insert(0.0) += mass;
            }
            entry.1 += count;
        }
        for (key, (masses, count)) in shard_local {
            let entry = local.entry(key).or_default();
            for (value, mass) in masses {
                *entry.0.entry(value).or_insert(0.0) += mass;
            }
            entry.1 += count;
        }
    }

    local
        .into_iter()
        .filter_map(|((target_pos, other_pos, deprel, side, feature), (counts, support))| {
            let global_counts = global.get(&(target_pos.clone(), feature.clone()))?;
            let global_dist = Distribution::from_counts(&global_counts.0)?;
            let local_dist = Distribution::from_counts(&counts)?;
            let kl = kl_divergence(&local_dist, &global_dist, KL_EPSILON);
            Some(AssignmentCandidate {
                target_pos,
                other_pos,
                deprel,
                side,
                feature,
                global: global_dist,
                local: local_dist,
                kl,
                support,
            })
        })
        .collect()
}

/// Selects the allowed value set of a candidate: every value with local mass
/// at or above the inclusion threshold, ordered by descending mass with
/// lexicographic tie-breaking.
pub fn allowed_values(local: &Distribution, inclusion_threshold: f64) -> Vec<String> {
    let mut picked: Vec<(&str, f64)> = local
        .iter()
        .filter(|(_, p)| *p >= inclusion_threshold)
        .collect();
    picked.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.0.cmp(b.0))
    });
    picked.into_iter().map(|(v, _)| v.to_string()).collect()
}

/// Extracts assignment rules: candidates whose local distribution diverges
/// from the global one by strictly more than `kl_threshold`, observed on at
/// least `min_relation_count` feature-bearing edges, with a non-empty
/// allowed value set.
pub fn extract_assignment_rules(tb: &Treebank, cfg: &ExtractionConfig) -> Vec<AssignmentRule> {
    let mut rules: Vec<AssignmentRule> = assignment_candidates(tb)
        .into_iter()
        .filter(|c| c.kl > cfg.kl_threshold && c.support >= cfg.min_relation_count)
        .filter_map(|c| {
            let values = allowed_values(&c.local, cfg.value_inclusion_threshold);
            if values.is_empty() {
                return None;
            }
            Some(AssignmentRule {
                target_pos: c.target_pos,
                other_pos: c.other_pos,
                deprel: c.deprel,
                side: c.side,
                feature: c.feature,
                allowed_values: values,
                kl: c.kl,
                support: c.support,
            })
        })
        .collect();
    rules.sort_by(|a, b| {
        b.support
            .cmp(&a.support)
            .then_with(|| a.sort_key().cmp(&b.sort_key()))
    });
    rules
}

const RULE_FILE_VERSION: u64 = 1;

fn esc(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out
}

/// Serializes a rule set to the versioned JSON rule-file format: keys
/// sorted, floats written with six decimal places.
pub fn save_rules(rs: &RuleSet) -> String {
    let mut w = String::new();
    w.push_str("{\n");
    w.push_str("  \"agreement\": [");
    for (i, r) in rs.agreement.iter().enumerate() {
        if i > 0 {
            w.push(',');
        }
        w.push_str(&format!(
            "\n    {{\"agree_fraction\": {:.6}, \"dep_pos\": \"{}\", \"deprel\": \"{}\", \"feature\": \"{}\", \"head_pos\": \"{}\", \"support\": {}}}",
            r.agree_fraction,
            esc(&r.dep_pos),
            esc(&r.deprel),
            esc(&r.feature),
            esc(&r.head_pos),
            r.support
        ));
    }
    if !rs.agreement.is_empty() {
        w.push_str("\n  ");
    }
    w.push_str("],\n");
    w.push_str("  \"assignment\": [");
    for (i, r) in rs.assignment.iter().enumerate() {
        if i > 0 {
            w.push(',');
        }
        let values = r
            .allowed_values
            .iter()
            .map(|v| format!("\"{}\"", esc(v)))
            .collect::<Vec<_>>()
            .join(", ");
        w.push_str(&format!(
            "\n    {{\"allowed_values\": [{}], \"deprel\": \"{}\", \"feature\": \"{}\", \"kl\": {:.6}, \"other_pos\": \"{}\", \"side\": \"{}\", \"support\": {}, \"target_pos\": \"{}\"}}",
            values,
            esc(&r.deprel),
            esc(&r.feature),
            r.kl,
            esc(&r.other_pos),
            r.side,
            r.support,
            esc(&r.target_pos)
        ));
    }
    if !rs.assignment.is_empty() {
        w.push_str("\n  ");
    }
    w.push_str("],\n");
    w.push_str(&format!(
        "  \"config\": {{\"agree_coverage\": {:.6}, \"agree_threshold\": {:.6}, \"kl_threshold\": {:.6}, \"min_relation_count\": {}, \"value_inclusion_threshold\": {:.6}}},\n",
        rs.config.agree_coverage,
        rs.config.agree_threshold,
        rs.config.kl_threshold,
        rs.config.min_relation_count,
        rs.config.value_inclusion_threshold
    ));
    w.push_str(&format!("  \"language\": \"{}\",\n", esc(&rs.language)));
    w.push_str(&format!("  \"schema\": \"{}\",\n", esc(&rs.schema)));
    w.push_str(&format!("  \"version\": {RULE_FILE_VERSION}\n"));
    w.push_str("}\n");
    w
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleFileDto {
    version: u64,
    language: String,
    schema: String,
    config: ExtractionConfig,
    agreement: Vec<AgreementRule>,
    assignment: Vec<AssignmentRule>,
}

/// Loads a rule set from rule-file JSON, enforcing version and key
/// uniqueness.
pub fn load_rules(text: &str) -> Result<RuleSet> {
    let dto: RuleFileDto =
        serde_json::from_str(text).map_err(|e| Error::RuleFile(e.to_string()))?;
    if dto.version != RULE_FILE_VERSION {
        return Err(Error::RuleFile(format!(
            "unknown rule file version {} (expected {RULE_FILE_VERSION})",
            dto.version
        )));
    }
    let mut seen = std::collections::BTreeSet::new();
    for r in &dto.agreement {
        if !seen.insert(r.key()) {
            return Err(Error::RuleFile(format!("duplicate agreement rule `{}`", r.key())));
        }
        if !(0.0..=1.0).contains(&r.agree_fraction) {
            return Err(Error::RuleFile(format!(
                "rule `{}`: agree_fraction outside [0, 1]",
                r.key()
            )));
        }
    }
    let mut seen = std::collections::BTreeSet::new();
    for r in &dto.assignment {
        if !seen.insert(r.key()) {
            return Err(Error::RuleFile(format!("duplicate assignment rule `{}`", r.key())));
        }
        if r.allowed_values.is_empty() {
            return Err(Error::RuleFile(format!(
                "rule `{}`: allowed_values must be non-empty",
                r.key()
            )));
        }
        if r.kl < 0.0 {
            return Err(Error::RuleFile(format!("rule `{}`: kl must be >= 0", r.key())));
        }
    }
    dto.config.validate()?;
    Ok(RuleSet {
        language: dto.language,
        schema: dto.schema,
        agreement: dto.agreement,
        assignment: dto.assignment,
        config: dto.config,
    })
}
