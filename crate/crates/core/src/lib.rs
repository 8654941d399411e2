//! Morphosyntactic rule extraction from dependency treebanks and
//! reference-free grammatical well-formedness scoring.
//!
//! The crate reads CoNLL-U treebanks, mines machine-readable agreement and
//! case-assignment/verb-form rules from them, scores parsed text against a
//! rule set at segment and corpus level, synthesizes morphology-noised
//! treebanks for robust-parser training, evaluates grammar-error
//! identification, and correlates corpus scores with external judgments.

pub mod cli;
pub mod conllu;
pub mod error;
pub mod gei;
pub mod noise;
pub mod rules;
pub mod scoring;
pub mod stats;

pub use conllu::{
    edges, parse_treebank, serialize_treebank, FeatureBundle, Sentence, Token, Treebank,
};
pub use error::{Error, Result};
pub use gei::{evaluate_gei, GoldErrors, PRReport};
pub use noise::{
    candidate_alterations, load_unimorph, perturb_treebank, AlterationRecord, FeatureMapping,
    InflectionLexicon, PerturbOptions,
};
pub use rules::{
    extract_agreement_rules, extract_assignment_rules, kl_divergence, load_rules, save_rules,
    AgreementRule, AssignmentRule, Distribution, ExtractionConfig, RuleSet, Side,
};
pub use scoring::{
    applicable_instances, check_agreement, check_assignment, score_corpus, score_segment,
    CorpusReport, RuleInstance, SegmentScore,
};
pub use stats::{
    correlate_systems, pearson_r, remove_outliers, CorrelationReport, SystemScoreTable,
};
