//! Python bindings: thin wrappers over the core treebank, rule-extraction,
//! scoring, perturbation and evaluation APIs.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use morphoscore::conllu;
use morphoscore::gei;
use morphoscore::noise;
use morphoscore::rules;
use morphoscore::scoring;
use morphoscore::stats;

fn value_error(e: morphoscore::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A parsed dependency treebank.
#[pyclass(module = "morphoscore_py", skip_from_py_object)]
struct Treebank {
    inner: conllu::Treebank,
}

#[pymethods]
impl Treebank {
    /// Parses CoNLL-U text.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(Treebank {
            inner: conllu::parse_treebank(text).map_err(value_error)?,
        })
    }

    /// Serializes back to CoNLL-U text.
    fn to_conllu(&self) -> String {
        conllu::serialize_treebank(&self.inner)
    }

    /// Sentence ids (positional fallbacks where missing).
    fn sentence_ids(&self) -> Vec<String> {
        self.inner
            .sentences
            .iter()
            .enumerate()
            .map(|(i, s)| s.sent_id_or(i))
            .collect()
    }

    /// Strips `:subtype` and `@ext` parts from every relation label.
    fn coarsen_deprels(&mut self) {
        conllu::coarsen_treebank(&mut self.inner);
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Treebank({} sentences)", self.inner.len())
    }
}

/// An extracted or loaded grammar: agreement plus assignment rules.
#[pyclass(module = "morphoscore_py", skip_from_py_object)]
struct RuleSet {
    inner: rules::RuleSet,
}

fn agreement_dict<'py>(py: Python<'py>, r: &rules::AgreementRule) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("key", r.key())?;
    d.set_item("dep_pos", &r.dep_pos)?;
    d.set_item("head_pos", &r.head_pos)?;
    d.set_item("deprel", &r.deprel)?;
    d.set_item("feature", &r.feature)?;
    d.set_item("support", r.support)?;
    d.set_item("agree_fraction", r.agree_fraction)?;
    Ok(d)
}

fn assignment_dict<'py>(py: Python<'py>, r: &rules::AssignmentRule) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("key", r.key())?;
    d.set_item("target_pos", &r.target_pos)?;
    d.set_item("other_pos", &r.other_pos)?;
    d.set_item("deprel", &r.deprel)?;
    d.set_item("side", r.side.to_string())?;
    d.set_item("feature", &r.feature)?;
    d.set_item("allowed_values", r.allowed_values.clone())?;
    d.set_item("kl", r.kl)?;
    d.set_item("support", r.support)?;
    Ok(d)
}

#[pymethods]
impl RuleSet {
    /// Loads a rule file from JSON text.
    #[staticmethod]
    fn load(text: &str) -> PyResult<Self> {
        Ok(RuleSet {
            inner: rules::load_rules(text).map_err(value_error)?,
        })
    }

    /// Serializes to rule-file JSON.
    fn save(&self) -> String {
        rules::save_rules(&self.inner)
    }

    #[getter]
    fn language(&self) -> String {
        self.inner.language.clone()
    }

    #[getter]
    fn schema(&self) -> String {
        self.inner.schema.clone()
    }

    fn agreement<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyList>> {
        let items: PyResult<Vec<_>> = self
            .inner
            .agreement
            .iter()
            .map(|r| agreement_dict(py, r))
            .collect();
        PyList::new(py, items?)
    }

    fn assignment<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyList>> {
        let items: PyResult<Vec<_>> = self
            .inner
            .assignment
            .iter()
            .map(|r| assignment_dict(py, r))
            .collect();
        PyList::new(py, items?)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "RuleSet({} agreement, {} assignment)",
            self.inner.agreement.len(),
            self.inner.assignment.len()
        )
    }
}

/// A lemma-indexed inflection lexicon in UniMorph format.
#[pyclass(module = "morphoscore_py", skip_from_py_object)]
struct InflectionLexicon {
    inner: noise::InflectionLexicon,
}

#[pymethods]
impl InflectionLexicon {
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(InflectionLexicon {
            inner: noise::load_unimorph(text).map_err(value_error)?,
        })
    }

    fn lemma_count(&self) -> usize {
        self.inner.lemma_count()
    }

    fn __repr__(&self) -> String {
        format!("InflectionLexicon({} lemmas)", self.inner.lemma_count())
    }
}

fn build_config(
    agree_threshold: f64,
    agree_coverage: f64,
    kl_threshold: f64,
    min_relation_count: u64,
    value_inclusion_threshold: f64,
) -> PyResult<rules::ExtractionConfig> {
    let cfg = rules::ExtractionConfig {
        agree_threshold,
        agree_coverage,
        kl_threshold,
        min_relation_count,
        value_inclusion_threshold,
    };
    cfg.validate().map_err(value_error)?;
    Ok(cfg)
}

/// Extracts agreement and assignment rules from a treebank.
#[pyfunction]
#[pyo3(signature = (treebank, language="und", schema="SUD", agree_threshold=0.9,
                    agree_coverage=0.8, kl_threshold=0.9, min_relation_count=100,
                    value_inclusion_threshold=0.05))]
#[allow(clippy::too_many_arguments)]
fn extract_rules(
    treebank: &Treebank,
    language: &str,
    schema: &str,
    agree_threshold: f64,
    agree_coverage: f64,
    kl_threshold: f64,
    min_relation_count: u64,
    value_inclusion_threshold: f64,
) -> PyResult<RuleSet> {
    let cfg = build_config(
        agree_threshold,
        agree_coverage,
        kl_threshold,
        min_relation_count,
        value_inclusion_threshold,
    )?;
    let mut rs = rules::RuleSet::new(language, schema);
    rs.agreement = rules::extract_agreement_rules(&treebank.inner, &cfg);
    rs.assignment = rules::extract_assignment_rules(&treebank.inner, &cfg);
    rs.config = cfg;
    Ok(RuleSet { inner: rs })
}

/// KL(local ‖ global) with additive epsilon smoothing over value
/// distributions given as dicts.
#[pyfunction]
#[pyo3(signature = (local, global, epsilon=1e-9))]
fn kl_divergence(
    local: std::collections::BTreeMap<String, f64>,
    global: std::collections::BTreeMap<String, f64>,
    epsilon: f64,
) -> PyResult<f64> {
    let local = rules::Distribution::from_counts(&local)
        .ok_or_else(|| PyValueError::new_err("local distribution has zero mass"))?;
    let global = rules::Distribution::from_counts(&global)
        .ok_or_else(|| PyValueError::new_err("global distribution has zero mass"))?;
    Ok(rules::kl_divergence(&local, &global, epsilon))
}

fn segment_dict<'py>(py: Python<'py>, seg: &scoring::SegmentScore) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("sent_id", &seg.sent_id)?;
    d.set_item("score", seg.score)?;
    let per_rule = PyDict::new(py);
    for (key, count) in &seg.per_rule {
        per_rule.set_item(key, (count.applicable, count.satisfied))?;
    }
    d.set_item("per_rule", per_rule)?;
    Ok(d)
}

/// Scores a treebank against a rule set. Returns a dict with the corpus
/// score, per-rule counts and (optionally) per-segment scores.
#[pyfunction]
#[pyo3(signature = (treebank, rule_set, with_segments=false))]
fn score_corpus<'py>(
    py: Python<'py>,
    treebank: &Treebank,
    rule_set: &RuleSet,
    with_segments: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let report = scoring::score_corpus(&treebank.inner, &rule_set.inner, with_segments);
    let d = PyDict::new(py);
    d.set_item("corpus_score", report.corpus_score)?;
    let per_rule = PyDict::new(py);
    for (key, count) in &report.per_rule {
        let row = PyDict::new(py);
        row.set_item("applicable", count.applicable)?;
        row.set_item("satisfied", count.satisfied)?;
        row.set_item("ratio", count.ratio())?;
        per_rule.set_item(key, row)?;
    }
    d.set_item("per_rule", per_rule)?;
    if let Some(segments) = &report.segments {
        let items: PyResult<Vec<_>> = segments.iter().map(|s| segment_dict(py, s)).collect();
        d.set_item("segments", PyList::new(py, items?)?)?;
    }
    Ok(d)
}

/// Scores one sentence of a treebank; returns its score (or None).
#[pyfunction]
fn score_sentence(treebank: &Treebank, index: usize, rule_set: &RuleSet) -> PyResult<Option<f64>> {
    let sentence = treebank
        .inner
        .sentences
        .get(index)
        .ok_or_else(|| PyValueError::new_err(format!("sentence index {index} out of range")))?;
    Ok(scoring::score_segment(sentence, &rule_set.inner).score)
}

/// Replaces one token per sentence with an alternate inflection differing in
/// exactly one morphological feature. Returns (treebank, records, coverage).
#[pyfunction]
#[pyo3(signature = (treebank, lexicon, mapping=None, seed=0, concat=false, keep_gold_feats=false))]
fn perturb<'py>(
    py: Python<'py>,
    treebank: &Treebank,
    lexicon: &InflectionLexicon,
    mapping: Option<&str>,
    seed: u64,
    concat: bool,
    keep_gold_feats: bool,
) -> PyResult<(Treebank, Bound<'py, PyList>, f64)> {
    let fm = match mapping {
        Some(text) => noise::FeatureMapping::parse(text).map_err(value_error)?,
        None => noise::FeatureMapping::default_mapping().clone(),
    };
    let opts = noise::PerturbOptions {
        concat,
        keep_gold_feats,
    };
    let (out, report) = noise::perturb_treebank(&treebank.inner, &lexicon.inner, &fm, seed, opts);
    let records: PyResult<Vec<_>> = report
        .records
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("sent_id", &r.sent_id)?;
            d.set_item("token_id", r.token_id)?;
            d.set_item("orig_form", &r.original_form)?;
            d.set_item("new_form", &r.altered_form)?;
            d.set_item("feature", &r.changed_feature)?;
            d.set_item("orig_value", &r.original_value)?;
            d.set_item("new_value", &r.altered_value)?;
            Ok(d)
        })
        .collect();
    Ok((
        Treebank { inner: out },
        PyList::new(py, records?)?,
        report.coverage_percent(),
    ))
}

/// Evaluates grammar-error identification. Gold marks are (sent_id,
/// token_id) pairs; when omitted, GoldError=Yes MISC annotations are used.
#[pyfunction]
#[pyo3(signature = (treebank, rule_set, gold=None))]
fn evaluate_gei<'py>(
    py: Python<'py>,
    treebank: &Treebank,
    rule_set: &RuleSet,
    gold: Option<Vec<(String, u32)>>,
) -> PyResult<Bound<'py, PyDict>> {
    let gold = match gold {
        Some(marks) => gei::GoldErrors {
            marks: marks.into_iter().collect(),
        },
        None => gei::GoldErrors::from_misc(&treebank.inner),
    };
    gold.validate(&treebank.inner).map_err(value_error)?;
    let report = gei::evaluate_gei(&treebank.inner, &gold, &rule_set.inner);
    let d = PyDict::new(py);
    d.set_item("tp", report.tp)?;
    d.set_item("fp", report.fp)?;
    d.set_item("fn", report.false_negatives)?;
    d.set_item("precision", report.precision)?;
    d.set_item("recall", report.recall)?;
    Ok(d)
}

/// Sample Pearson correlation; None when undefined.
#[pyfunction]
fn pearson_r(xs: Vec<f64>, ys: Vec<f64>) -> Option<f64> {
    stats::pearson_r(&xs, &ys)
}

/// Correlates (system_id, metric_score, judgment_score) rows, optionally
/// removing outlier systems first.
#[pyfunction]
#[pyo3(signature = (rows, remove_outliers=false, cutoff=2.5))]
fn correlate<'py>(
    py: Python<'py>,
    rows: Vec<(String, f64, f64)>,
    remove_outliers: bool,
    cutoff: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let table = stats::SystemScoreTable {
        rows: rows
            .into_iter()
            .map(|(system_id, metric_score, judgment_score)| stats::SystemScore {
                system_id,
                metric_score,
                judgment_score,
            })
            .collect(),
    };
    let report = stats::correlate_systems(&table, remove_outliers, cutoff);
    let d = PyDict::new(py);
    d.set_item("n_used", report.n_used)?;
    d.set_item("n_removed", report.n_removed)?;
    d.set_item("r", report.r)?;
    Ok(d)
}

/// The built-in UD-to-UniMorph feature mapping as TSV text.
#[pyfunction]
fn default_feature_mapping() -> &'static str {
    noise::DEFAULT_MAPPING_TSV
}

#[pymodule]
fn morphoscore_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Treebank>()?;
    m.add_class::<RuleSet>()?;
    m.add_class::<InflectionLexicon>()?;
    m.add_function(wrap_pyfunction!(extract_rules, m)?)?;
    m.add_function(wrap_pyfunction!(kl_divergence, m)?)?;
    m.add_function(wrap_pyfunction!(score_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(score_sentence, m)?)?;
    m.add_function(wrap_pyfunction!(perturb, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_gei, m)?)?;
    m.add_function(wrap_pyfunction!(pearson_r, m)?)?;
    m.add_function(wrap_pyfunction!(correlate, m)?)?;
    m.add_function(wrap_pyfunction!(default_feature_mapping, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
