//! Reading, validating and writing dependency-parsed text in CoNLL-U format.
//!
//! Parsing is lossless: comments, multiword-token ranges and empty nodes are
//! preserved verbatim so that a parsed treebank serializes back to an
//! equivalent file. Multiword tokens and empty nodes never participate in
//! rule extraction, scoring or perturbation; those operate on syntactic word
//! rows only.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Morphological feature bundle of a token (the FEATS column).
///
/// Feature names map to non-empty value sets; a multi-value annotation like
/// `Gender=Masc,Fem` becomes a two-element set. Serialization is sorted
/// case-insensitively by feature name and value, so it is deterministic
/// regardless of insertion order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FeatureBundle {
    entries: BTreeMap<String, BTreeSet<String>>,
}

fn ci_cmp(a: &str, b: &str) -> std::cmp::Ordering {
    let la = a.to_lowercase();
    let lb = b.to_lowercase();
    la.cmp(&lb).then_with(|| a.cmp(b))
}

impl FeatureBundle {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Value set of `feature`, if the token carries it.
    pub fn get(&self, feature: &str) -> Option<&BTreeSet<String>> {
        self.entries.get(feature)
    }

    pub fn contains(&self, feature: &str) -> bool {
        self.entries.contains_key(feature)
    }

    /// Replaces the value set of `feature`.
    pub fn set<I, S>(&mut self, feature: &str, values: I)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = values.into_iter().map(Into::into).collect();
        assert!(!set.is_empty(), "feature value set must be non-empty");
        self.entries.insert(feature.to_string(), set);
    }

    /// Iterates over `(feature, values)` pairs in map order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &BTreeSet<String>)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Parses the FEATS column; `_` yields an empty bundle.
    pub fn parse(s: &str, line: usize) -> Result<Self> {
        let mut bundle = FeatureBundle::new();
        if s == "_" {
            return Ok(bundle);
        }
        for item in s.split('|') {
            let (name, values) = item
                .split_once('=')
                .ok_or_else(|| Error::parse(line, format!("malformed feature `{item}`")))?;
            if name.is_empty() {
                return Err(Error::parse(line, format!("empty feature name in `{item}`")));
            }
            if bundle.entries.contains_key(name) {
                return Err(Error::parse(line, format!("duplicate feature `{name}`")));
            }
            let set: BTreeSet<String> = values
                .split(',')
                .map(|v| v.to_string())
                .filter(|v| !v.is_empty())
                .collect();
            if set.is_empty() {
                return Err(Error::parse(line, format!("empty value for feature `{name}`")));
            }
            bundle.entries.insert(name.to_string(), set);
        }
        Ok(bundle)
    }

    /// Canonical FEATS column text (`_` when empty).
    pub fn serialize(&self) -> String {
        if self.entries.is_empty() {
            return "_".to_string();
        }
        let mut names: Vec<&String> = self.entries.keys().collect();
        names.sort_by(|a, b| ci_cmp(a, b));
        let mut parts = Vec::with_capacity(names.len());
        for name in names {
            let mut values: Vec<&String> = self.entries[name].iter().collect();
            values.sort_by(|a, b| ci_cmp(a, b));
            parts.push(format!(
                "{}={}",
                name,
                values.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(",")
            ));
        }
        parts.join("|")
    }
}

/// One MISC column entry, either `key=value` or a bare flag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MiscEntry {
    pub key: String,
    pub value: Option<String>,
}

/// The MISC column: ordered entries, preserved verbatim on round trip.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Misc {
    pub entries: Vec<MiscEntry>,
}

impl Misc {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|e| e.key == key)
            .and_then(|e| e.value.as_deref())
    }

    pub fn has_flag(&self, key: &str, value: &str) -> bool {
        self.entries
            .iter()
            .any(|e| e.key == key && e.value.as_deref() == Some(value))
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.entries.push(MiscEntry {
            key: key.into(),
            value: Some(value.into()),
        });
    }

    fn parse(s: &str) -> Self {
        let mut misc = Misc::default();
        if s == "_" {
            return misc;
        }
        for item in s.split('|') {
            match item.split_once('=') {
                Some((k, v)) => misc.entries.push(MiscEntry {
                    key: k.to_string(),
                    value: Some(v.to_string()),
                }),
                None => misc.entries.push(MiscEntry {
                    key: item.to_string(),
                    value: None,
                }),
            }
        }
        misc
    }

    fn serialize(&self) -> String {
        if self.entries.is_empty() {
            return "_".to_string();
        }
        self.entries
            .iter()
            .map(|e| match &e.value {
                Some(v) => format!("{}={}", e.key, v),
                None => e.key.clone(),
            })
            .collect::<Vec<_>>()
            .join("|")
    }
}

/// A syntactic word row.
#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    /// Word index within the sentence, 1-based.
    pub id: u32,
    pub form: String,
    /// Lemma; `_` in the input maps to the empty string.
    pub lemma: String,
    pub upos: String,
    pub xpos: Option<String>,
    pub feats: FeatureBundle,
    /// Head token id; 0 marks the root.
    pub head: u32,
    /// Dependency relation, kept verbatim including `:subtype` and `@ext` parts.
    pub deprel: String,
    /// Enhanced-dependency column, preserved but not interpreted.
    pub deps: Option<String>,
    pub misc: Misc,
}

/// A multiword-token range line (`3-4`), preserved verbatim.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiwordToken {
    pub start: u32,
    pub end: u32,
    pub form: String,
    raw: String,
}

/// An empty-node line (`3.1`), preserved verbatim and anchored to the word
/// id before the decimal point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmptyNode {
    pub anchor: u32,
    raw: String,
}

/// A parsed sentence: comments, word tokens and preserved side structures.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Sentence {
    /// Value of the `# sent_id = ...` comment, when present.
    pub sent_id: Option<String>,
    /// Value of the `# text = ...` comment, when present.
    pub source_text: Option<String>,
    /// All comment lines, verbatim including the leading `#`.
    pub comments: Vec<String>,
    pub tokens: Vec<Token>,
    pub multiword: Vec<MultiwordToken>,
    pub empty_nodes: Vec<EmptyNode>,
}

impl Sentence {
    /// sent_id when present, otherwise a 1-based positional fallback.
    pub fn sent_id_or(&self, index: usize) -> String {
        self.sent_id
            .clone()
            .unwrap_or_else(|| format!("s{}", index + 1))
    }

    pub fn token(&self, id: u32) -> Option<&Token> {
        if id == 0 {
            None
        } else {
            self.tokens.get(id as usize - 1)
        }
    }

    /// Dependents of the token with the given id, in surface order.
    pub fn dependents(&self, id: u32) -> impl Iterator<Item = &Token> {
        self.tokens.iter().filter(move |t| t.head == id)
    }

    /// Replaces the `# sent_id = ...` comment (and field) with a new value.
    pub fn set_sent_id(&mut self, new_id: &str) {
        for c in &mut self.comments {
            if parse_comment_value(c, "sent_id").is_some() {
                *c = format!("# sent_id = {new_id}");
            }
        }
        self.sent_id = Some(new_id.to_string());
    }
}

/// An ordered collection of sentences from one source.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Treebank {
    pub sentences: Vec<Sentence>,
    /// File path or stream name, for diagnostics.
    pub origin: String,
}

impl Treebank {
    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }
}

/// One dependency edge: a non-root token, its head and the relation label.
#[derive(Debug, Clone, Copy)]
pub struct EdgeInstance<'a> {
    pub dependent: &'a Token,
    pub head: &'a Token,
    pub deprel: &'a str,
}

/// Iterates the dependency edges of a sentence, one per non-root token.
pub fn edges(sentence: &Sentence) -> impl Iterator<Item = EdgeInstance<'_>> {
    sentence.tokens.iter().filter_map(move |tok| {
        if tok.head == 0 {
            None
        } else {
            sentence.token(tok.head).map(|head| EdgeInstance {
                dependent: tok,
                head,
                deprel: tok.deprel.as_str(),
            })
        }
    })
}

/// Strips `:subtype` and `@ext` parts from a relation label.
pub fn coarsen_deprel(deprel: &str) -> &str {
    let cut = deprel
        .find(':')
        .into_iter()
        .chain(deprel.find('@'))
        .min()
        .unwrap_or(deprel.len());
    &deprel[..cut]
}

/// Rewrites every token's deprel to its coarse form.
pub fn coarsen_treebank(tb: &mut Treebank) {
    for sent in &mut tb.sentences {
        for tok in &mut sent.tokens {
            tok.deprel = coarsen_deprel(&tok.deprel).to_string();
        }
    }
}

fn parse_comment_value(comment: &str, key: &str) -> Option<String> {
    let body = comment.strip_prefix('#')?.trim_start();
    let (k, v) = body.split_once('=')?;
    if k.trim() == key {
        Some(v.trim().to_string())
    } else {
        None
    }
}

fn opt_column(s: &str) -> Option<String> {
    if s == "_" {
        None
    } else {
        Some(s.to_string())
    }
}

/// Parses CoNLL-U text into a [`Treebank`].
///
/// Sentences are separated by blank lines. Each sentence is validated as a
/// single rooted tree over its word tokens; multiword-token and empty-node
/// lines are retained in side structures and excluded from validation.
pub fn parse_treebank(input: &str) -> Result<Treebank> {
    parse_treebank_named(input, "<memory>")
}

/// Like [`parse_treebank`] with an explicit origin for diagnostics.
pub fn parse_treebank_named(input: &str, origin: &str) -> Result<Treebank> {
    let mut tb = Treebank {
        sentences: Vec::new(),
        origin: origin.to_string(),
    };
    let mut seen_ids = std::collections::BTreeSet::new();
    let mut current = Sentence::default();
    let mut has_content = false;

    for (idx, line) in input.lines().enumerate() {
        let lineno = idx + 1;
        if line.is_empty() {
            if has_content {
                finish_sentence(&mut tb, std::mem::take(&mut current), &mut seen_ids)?;
                has_content = false;
            }
            continue;
        }
        if line.starts_with('#') {
            has_content = true;
            if let Some(v) = parse_comment_value(line, "sent_id") {
                current.sent_id = Some(v);
            } else if let Some(v) = parse_comment_value(line, "text") {
                current.source_text = Some(v);
            }
            current.comments.push(line.to_string());
            continue;
        }
        has_content = true;
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(Error::parse(
                lineno,
                format!("expected 10 tab-separated columns, found {}", cols.len()),
            ));
        }
        let id_col = cols[0];
        if let Some((a, b)) = id_col.split_once('-') {
            let start: u32 = a
                .parse()
                .map_err(|_| Error::parse(lineno, format!("bad multiword range `{id_col}`")))?;
            let end: u32 = b
                .parse()
                .map_err(|_| Error::parse(lineno, format!("bad multiword range `{id_col}`")))?;
            if end < start {
                return Err(Error::parse(lineno, format!("inverted multiword range `{id_col}`")));
            }
            current.multiword.push(MultiwordToken {
                start,
                end,
                form: cols[1].to_string(),
                raw: line.to_string(),
            });
            continue;
        }
        if id_col.contains('.') {
            let anchor = id_col
                .split('.')
                .next()
                .and_then(|a| a.parse::<u32>().ok())
                .ok_or_else(|| Error::parse(lineno, format!("bad empty-node id `{id_col}`")))?;
            current.empty_nodes.push(EmptyNode {
                anchor,
                raw: line.to_string(),
            });
            continue;
        }
        let id: u32 = id_col
            .parse()
            .map_err(|_| Error::parse(lineno, format!("non-integer token id `{id_col}`")))?;
        if id == 0 {
            return Err(Error::parse(lineno, "token id must be >= 1"));
        }
        let head: u32 = cols[6]
            .parse()
            .map_err(|_| Error::parse(lineno, format!("non-integer head `{}`", cols[6])))?;
        current.tokens.push(Token {
            id,
            form: cols[1].to_string(),
            lemma: if cols[2] == "_" { String::new() } else { cols[2].to_string() },
            upos: cols[3].to_string(),
            xpos: opt_column(cols[4]),
            feats: FeatureBundle::parse(cols[5], lineno)?,
            head,
            deprel: cols[7].to_string(),
            deps: opt_column(cols[8]),
            misc: Misc::parse(cols[9]),
        });
    }
    if has_content {
        finish_sentence(&mut tb, current, &mut seen_ids)?;
    }
    Ok(tb)
}

fn finish_sentence(
    tb: &mut Treebank,
    sentence: Sentence,
    seen_ids: &mut std::collections::BTreeSet<String>,
) -> Result<()> {
    validate_sentence(&sentence, tb.sentences.len())?;
    if let Some(id) = &sentence.sent_id {
        if !seen_ids.insert(id.clone()) {
            return Err(Error::structure(id, "duplicate sent_id"));
        }
    }
    tb.sentences.push(sentence);
    Ok(())
}

fn validate_sentence(sentence: &Sentence, index: usize) -> Result<()> {
    let sid = sentence.sent_id_or(index);
    let n = sentence.tokens.len();
    for (i, tok) in sentence.tokens.iter().enumerate() {
        if tok.id as usize != i + 1 {
            return Err(Error::structure(
                &sid,
                format!("token ids not contiguous: expected {}, found {}", i + 1, tok.id),
            ));
        }
        if tok.head as usize > n {
            return Err(Error::structure(
                &sid,
                format!("token {} has head {} outside sentence", tok.id, tok.head),
            ));
        }
        if tok.head == tok.id {
            return Err(Error::structure(&sid, format!("token {} is its own head", tok.id)));
        }
    }
    let roots = sentence.tokens.iter().filter(|t| t.head == 0).count();
    if n > 0 && roots != 1 {
        return Err(Error::structure(&sid, format!("expected exactly one root, found {roots}")));
    }
    for mwt in &sentence.multiword {
        if mwt.start < 1 || mwt.end as usize > n {
            return Err(Error::structure(
                &sid,
                format!("multiword range {}-{} outside sentence", mwt.start, mwt.end),
            ));
        }
    }
    for node in &sentence.empty_nodes {
        if node.anchor as usize > n {
            return Err(Error::structure(
                &sid,
                format!("empty node anchored at nonexistent token {}", node.anchor),
            ));
        }
    }
    // Walk each token to the root; revisiting a token on the path is a cycle.
    for tok in &sentence.tokens {
        let mut seen = vec![false; n + 1];
        let mut cur = tok.id;
        while cur != 0 {
            if seen[cur as usize] {
                return Err(Error::structure(&sid, format!("cycle through token {}", tok.id)));
            }
            seen[cur as usize] = true;
            cur = sentence.tokens[cur as usize - 1].head;
        }
    }
    Ok(())
}

/// Serializes a treebank back to CoNLL-U text.
///
/// Canonical column order is produced: FEATS sorted, multiword ranges
/// emitted before their first covered word, empty nodes after their anchor.
/// `parse_treebank(serialize_treebank(tb))` reproduces `tb` field for field.
pub fn serialize_treebank(tb: &Treebank) -> String {
    let mut out = String::new();
    for sentence in &tb.sentences {
        serialize_sentence(sentence, &mut out);
    }
    out
}

fn serialize_sentence(sentence: &Sentence, out: &mut String) {
    for comment in &sentence.comments {
        out.push_str(comment);
        out.push('\n');
    }
    for node in sentence.empty_nodes.iter().filter(|e| e.anchor == 0) {
        out.push_str(&node.raw);
        out.push('\n');
    }
    for tok in &sentence.tokens {
        for mwt in sentence.multiword.iter().filter(|m| m.start == tok.id) {
            out.push_str(&mwt.raw);
            out.push('\n');
        }
        serialize_token(tok, out);
        for node in sentence.empty_nodes.iter().filter(|e| e.anchor == tok.id) {
            out.push_str(&node.raw);
            out.push('\n');
        }
    }
    out.push('\n');
}

fn serialize_token(tok: &Token, out: &mut String) {
    let lemma = if tok.lemma.is_empty() { "_" } else { &tok.lemma };
    let _ = writeln!(
        out,
        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
        tok.id,
        tok.form,
        lemma,
        tok.upos,
        tok.xpos.as_deref().unwrap_or("_"),
        tok.feats.serialize(),
        tok.head,
        tok.deprel,
        tok.deps.as_deref().unwrap_or("_"),
        tok.misc.serialize(),
    );
}
