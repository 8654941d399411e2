//! Synthesis of morphology-noised treebanks.
//!
//! For each input sentence, at most one altered copy is produced by swapping
//! a single token's form for an alternate inflection of the same lemma that
//! differs in exactly one morphological feature, looked up in a
//! UniMorph-format lexicon. Token and candidate choices are uniform and
//! seeded, so output is a pure function of (treebank, lexicon, mapping, seed).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::sync::OnceLock;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::conllu::{Sentence, Token, Treebank};
use crate::error::{Error, Result};

/// Default UD-to-UniMorph feature mapping, also shipped as an editable TSV.
pub const DEFAULT_MAPPING_TSV: &str = include_str!("../../../data/ud_unimorph.tsv");

/// Pseudo-feature name under which the UPOS column participates in the
/// mapping.
const POS_FEATURE: &str = "POS";

/// One inflected form with its UniMorph tag set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParadigmEntry {
    pub form: String,
    pub tags: BTreeSet<String>,
}

/// Lemma-indexed paradigm tables loaded from UniMorph TSV.
#[derive(Debug, Clone, Default)]
pub struct InflectionLexicon {
    paradigms: BTreeMap<String, Vec<ParadigmEntry>>,
}

impl InflectionLexicon {
    pub fn lemma_count(&self) -> usize {
        self.paradigms.len()
    }

    pub fn entries(&self, lemma: &str) -> &[ParadigmEntry] {
        self.paradigms.get(lemma).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Parses UniMorph TSV: `lemma<TAB>form<TAB>tag;tag;...` per row.
/// Duplicate (lemma, tag set) rows keep the first form; blank lines are
/// skipped.
pub fn load_unimorph(text: &str) -> Result<InflectionLexicon> {
    let mut lex = InflectionLexicon::default();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 3 {
            return Err(Error::parse(
                lineno,
                format!("expected 3 tab-separated columns, found {}", cols.len()),
            ));
        }
        let tags: BTreeSet<String> = cols[2]
            .split(';')
            .map(|t| t.trim().to_string())
            .filter(|t| !t.is_empty())
            .collect();
        if tags.is_empty() {
            return Err(Error::parse(lineno, "empty tag set"));
        }
        let entries = lex.paradigms.entry(cols[0].to_string()).or_default();
        if entries.iter().any(|e| e.tags == tags) {
            continue;
        }
        entries.push(ParadigmEntry {
            form: cols[1].to_string(),
            tags,
        });
    }
    Ok(lex)
}

/// Bidirectional mapping between UD (feature, value) pairs and UniMorph tags.
#[derive(Debug, Clone, Default)]
pub struct FeatureMapping {
    forward: BTreeMap<(String, String), String>,
    inverse: BTreeMap<String, (String, String)>,
}

impl FeatureMapping {
    /// Parses mapping TSV: `UDFeature<TAB>UDValue<TAB>UniMorphTag` per row;
    /// `#` comments and blank lines are skipped. Tags must be globally
    /// unique so every produced tag inverts unambiguously.
    pub fn parse(text: &str) -> Result<Self> {
        let mut fm = FeatureMapping::default();
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() < 3 {
                return Err(Error::parse(
                    lineno,
                    format!("expected 3 tab-separated columns, found {}", cols.len()),
                ));
            }
            let key = (cols[0].to_string(), cols[1].to_string());
            let tag = cols[2].to_string();
            if fm.forward.contains_key(&key) {
                return Err(Error::parse(
                    lineno,
                    format!("duplicate mapping for {}={}", key.0, key.1),
                ));
            }
            if let Some((f, v)) = fm.inverse.get(&tag) {
                return Err(Error::parse(
                    lineno,
                    format!("tag `{tag}` already maps from {f}={v}"),
                ));
            }
            fm.inverse.insert(tag.clone(), key.clone());
            fm.forward.insert(key, tag);
        }
        Ok(fm)
    }

    /// The built-in default mapping.
    pub fn default_mapping() -> &'static FeatureMapping {
        static DEFAULT: OnceLock<FeatureMapping> = OnceLock::new();
        DEFAULT.get_or_init(|| {
            FeatureMapping::parse(DEFAULT_MAPPING_TSV).expect("built-in mapping is valid")
        })
    }

    pub fn map(&self, feature: &str, value: &str) -> Option<&str> {
        self.forward
            .get(&(feature.to_string(), value.to_string()))
            .map(String::as_str)
    }

    pub fn invert(&self, tag: &str) -> Option<(&str, &str)> {
        self.inverse.get(tag).map(|(f, v)| (f.as_str(), v.as_str()))
    }

    /// Maps a token into UniMorph tag space: the UPOS (via the POS
    /// pseudo-feature) plus every mapped single-valued feature. Multi-valued
    /// and unmapped features contribute nothing and are carried through
    /// unchanged by perturbation.
    pub fn token_tags(&self, token: &Token) -> BTreeSet<String> {
        let mut tags = BTreeSet::new();
        if let Some(tag) = self.map(POS_FEATURE, &token.upos) {
            tags.insert(tag.to_string());
        }
        for (feature, values) in token.feats.iter() {
            if values.len() != 1 {
                continue;
            }
            let value = values.iter().next().unwrap();
            if let Some(tag) = self.map(feature, value) {
                tags.insert(tag.to_string());
            }
        }
        tags
    }
}

/// One admissible substitution for a token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateAlteration {
    pub form: String,
    /// UD feature the substitution changes.
    pub feature: String,
    pub old_value: String,
    pub new_value: String,
}

/// Every paradigm entry for the token's lemma whose tag set differs from the
/// token's mapped tags by exactly one substituted tag within one mapped UD
/// feature, and whose form differs from the token's form.
pub fn candidate_alterations(
    token: &Token,
    lex: &InflectionLexicon,
    fm: &FeatureMapping,
) -> Vec<CandidateAlteration> {
    if token.lemma.is_empty() || token.feats.is_empty() {
        return Vec::new();
    }
    let token_tags = fm.token_tags(token);
    if token_tags.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::new();
    for entry in lex.entries(&token.lemma) {
        if entry.form == token.form {
            continue;
        }
        let removed: Vec<&String> = token_tags.difference(&entry.tags).collect();
        let added: Vec<&String> = entry.tags.difference(&token_tags).collect();
        if removed.len() != 1 || added.len() != 1 {
            continue;
        }
        let Some((old_feature, old_value)) = fm.invert(removed[0]) else {
            continue;
        };
        let Some((new_feature, new_value)) = fm.invert(added[0]) else {
            continue;
        };
        if old_feature != new_feature || old_feature == POS_FEATURE {
            continue;
        }
        out.push(CandidateAlteration {
            form: entry.form.clone(),
            feature: old_feature.to_string(),
            old_value: old_value.to_string(),
            new_value: new_value.to_string(),
        });
    }
    out
}

/// Record of one applied substitution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlterationRecord {
    pub sent_id: String,
    pub token_id: u32,
    pub original_form: String,
    pub altered_form: String,
    pub changed_feature: String,
    pub original_value: String,
    pub altered_value: String,
}

/// Output composition and annotation choices for perturbation.
#[derive(Debug, Clone, Copy, Default)]
pub struct PerturbOptions {
    /// Emit each altered copy right after its original instead of only the
    /// altered copies.
    pub concat: bool,
    /// Keep the original FEATS on the altered token (for tagger training)
    /// instead of the substituted analysis.
    pub keep_gold_feats: bool,
}

/// Result of perturbing a treebank.
#[derive(Debug, Clone)]
pub struct PerturbReport {
    pub records: Vec<AlterationRecord>,
    pub total_sentences: usize,
    pub altered_sentences: usize,
}

impl PerturbReport {
    /// Share of input sentences that received an altered copy, in percent.
    pub fn coverage_percent(&self) -> f64 {
        if self.total_sentences == 0 {
            0.0
        } else {
            100.0 * self.altered_sentences as f64 / self.total_sentences as f64
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D049BB133111EB);
    x ^ (x >> 31)
}

fn sentence_rng(seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(index as u64)))
}

fn alter_sentence(
    sentence: &Sentence,
    index: usize,
    lex: &InflectionLexicon,
    fm: &FeatureMapping,
    seed: u64,
    opts: PerturbOptions,
) -> Option<(Sentence, AlterationRecord)> {
    let with_candidates: Vec<(usize, Vec<CandidateAlteration>)> = sentence
        .tokens
        .iter()
        .enumerate()
        .filter_map(|(i, tok)| {
            let cands = candidate_alterations(tok, lex, fm);
            if cands.is_empty() {
                None
            } else {
                Some((i, cands))
            }
        })
        .collect();
    if with_candidates.is_empty() {
        return None;
    }
    let mut rng = sentence_rng(seed, index);
    let (tok_idx, cands) = &with_candidates[rng.random_range(0..with_candidates.len())];
    let cand = &cands[rng.random_range(0..cands.len())];

    let mut altered = sentence.clone();
    let tok = &mut altered.tokens[*tok_idx];
    let record = AlterationRecord {
        sent_id: sentence.sent_id_or(index),
        token_id: tok.id,
        original_form: tok.form.clone(),
        altered_form: cand.form.clone(),
        changed_feature: cand.feature.clone(),
        original_value: cand.old_value.clone(),
        altered_value: cand.new_value.clone(),
    };
    tok.form = cand.form.clone();
    if !opts.keep_gold_feats {
        tok.feats.set(&cand.feature, [cand.new_value.clone()]);
    }
    tok.misc.push("Altered", "Yes");
    tok.misc.push("OrigForm", record.original_form.clone());
    tok.misc.push("ChangedFeat", record.changed_feature.clone());
    if let Some(orig_id) = &sentence.sent_id {
        altered.set_sent_id(&format!("{orig_id}-alt"));
    }
    Some((altered, record))
}

/// Perturbs a treebank: for each sentence, at most one altered copy with a
/// single substituted token. Sentences without any candidate token yield no
/// copy. With `concat`, output keeps every original followed by its altered
/// copy; otherwise it contains only the altered copies.
pub fn perturb_treebank(
    tb: &Treebank,
    lex: &InflectionLexicon,
    fm: &FeatureMapping,
    seed: u64,
    opts: PerturbOptions,
) -> (Treebank, PerturbReport) {
    let altered: Vec<Option<(Sentence, AlterationRecord)>> = tb
        .sentences
        .par_iter()
        .enumerate()
        .map(|(i, sentence)| alter_sentence(sentence, i, lex, fm, seed, opts))
        .collect();

    let mut sentences = Vec::new();
    let mut records = Vec::new();
    let mut altered_count = 0usize;
    for (original, alt) in tb.sentences.iter().zip(altered) {
        if opts.concat {
            sentences.push(original.clone());
        }
        if let Some((sentence, record)) = alt {
            sentences.push(sentence);
            records.push(record);
            altered_count += 1;
        }
    }
    let out = Treebank {
        sentences,
        origin: tb.origin.clone(),
    };
    let report = PerturbReport {
        records,
        total_sentences: tb.sentences.len(),
        altered_sentences: altered_count,
    };
    (out, report)
}

/// Alteration manifest as TSV.
pub fn manifest_tsv(records: &[AlterationRecord]) -> String {
    let mut out =
        String::from("sent_id\ttoken_id\torig_form\tnew_form\tfeature\torig_value\tnew_value\n");
    for r in records {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.sent_id,
            r.token_id,
            r.original_form,
            r.altered_form,
            r.changed_feature,
            r.original_value,
            r.altered_value
        );
    }
    out
}
