//! N-gram vocabularies, IDF weights and sparse document encodings.
//!
//! Two encoders are provided. [`EncodingScheme::TfIdf`] multiplies raw term
//! counts by IDF and L2-normalises the result. [`EncodingScheme::IdfPresence`]
//! writes the term's IDF whenever the term occurs at least once and nothing
//! otherwise, so repeated terms carry no extra weight and rare terms dominate.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::preprocess::{idf, TokenizedDocument};

/// Joins the tokens of a higher-order n-gram. Whitespace tokenisation keeps
/// it out of unigrams only when punctuation stripping is on; collisions are
/// otherwise harmless since the vocabulary is a plain term set.
pub const NGRAM_JOINER: &str = "_";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NgramLevel {
    Unigram,
    Bigram,
    Trigram,
}

impl NgramLevel {
    pub const ALL: [NgramLevel; 3] = [NgramLevel::Unigram, NgramLevel::Bigram, NgramLevel::Trigram];

    pub fn max_order(self) -> usize {
        match self {
            NgramLevel::Unigram => 1,
            NgramLevel::Bigram => 2,
            NgramLevel::Trigram => 3,
        }
    }
}

impl fmt::Display for NgramLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NgramLevel::Unigram => "unigram",
            NgramLevel::Bigram => "bigram",
            NgramLevel::Trigram => "trigram",
        })
    }
}

impl std::str::FromStr for NgramLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unigram" | "1" => Ok(NgramLevel::Unigram),
            "bigram" | "2" => Ok(NgramLevel::Bigram),
            "trigram" | "3" => Ok(NgramLevel::Trigram),
            _ => Err(Error::InvalidParam(format!("unknown n-gram level `{s}`"))),
        }
    }
}

/// A term survives iff its total occurrence count across the training
/// documents is strictly greater than `min_total_occurrences`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PruneRule {
    pub min_total_occurrences: u64,
}

impl PruneRule {
    pub const NONE: PruneRule = PruneRule { min_total_occurrences: 0 };

    pub fn at_most(n: u64) -> Self {
        PruneRule { min_total_occurrences: n }
    }

    pub fn keeps(&self, total_count: u64) -> bool {
        total_count > self.min_total_occurrences
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncodingScheme {
    #[serde(rename = "tfidf", alias = "tf_idf")]
    TfIdf,
    IdfPresence,
}

impl EncodingScheme {
    pub const ALL: [EncodingScheme; 2] = [EncodingScheme::TfIdf, EncodingScheme::IdfPresence];
}

impl fmt::Display for EncodingScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EncodingScheme::TfIdf => "tfidf",
            EncodingScheme::IdfPresence => "idf_presence",
        })
    }
}

impl std::str::FromStr for EncodingScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tfidf" | "tf_idf" => Ok(EncodingScheme::TfIdf),
            "idf_presence" | "idf-presence" | "presence" => Ok(EncodingScheme::IdfPresence),
            _ => Err(Error::InvalidParam(format!("unknown encoding scheme `{s}`"))),
        }
    }
}

/// All n-grams up to `level`: unigrams first, then bigrams, then trigrams,
/// each in document order.
pub fn extract_ngrams(tokens: &[String], level: NgramLevel) -> Vec<String> {
    let mut out = Vec::new();
    for n in 1..=level.max_order() {
        out.extend(tokens.windows(n).map(|w| w.join(NGRAM_JOINER)));
    }
    out
}

/// Lexicographically ordered term index with training-corpus counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, usize>,
    doc_freq: Vec<u32>,
    total_count: Vec<u64>,
    n_docs: usize,
    level: NgramLevel,
    prune: PruneRule,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    n_docs: usize,
    level: NgramLevel,
    prune: PruneRule,
    terms: Vec<String>,
    doc_freq: Vec<u32>,
    total_count: Vec<u64>,
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        VocabularyRepr {
            n_docs: v.n_docs,
            level: v.level,
            prune: v.prune,
            terms: v.terms,
            doc_freq: v.doc_freq,
            total_count: v.total_count,
        }
    }
}

impl TryFrom<VocabularyRepr> for Vocabulary {
    type Error = Error;

    fn try_from(r: VocabularyRepr) -> Result<Self> {
        if r.terms.len() != r.doc_freq.len() || r.terms.len() != r.total_count.len() {
            return Err(Error::InvalidParam("vocabulary arrays differ in length".into()));
        }
        if r.terms.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParam("vocabulary terms are not strictly sorted".into()));
        }
        if r.doc_freq.iter().any(|&df| df == 0 || df as usize > r.n_docs) {
            return Err(Error::InvalidParam("document frequency outside [1, N]".into()));
        }
        let index = r.terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(Vocabulary {
            terms: r.terms,
            index,
            doc_freq: r.doc_freq,
            total_count: r.total_count,
            n_docs: r.n_docs,
            level: r.level,
            prune: r.prune,
        })
    }
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn term(&self, i: usize) -> &str {
        &self.terms[i]
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn doc_freq(&self, i: usize) -> u32 {
        self.doc_freq[i]
    }

    pub fn total_count(&self, i: usize) -> u64 {
        self.total_count[i]
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn level(&self) -> NgramLevel {
        self.level
    }

    pub fn prune(&self) -> PruneRule {
        self.prune
    }

    /// SHA-256 over the ordered term list, hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for t in &self.terms {
            hasher.update(t.as_bytes());
            hasher.update([0u8]);
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// `term,df,total_count,idf` rows in vocabulary order.
    pub fn to_csv(&self, idf: &IdfTable) -> String {
        let mut out = String::from("term,df,total_count,idf\n");
        for (i, term) in self.terms.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                csv_field(term),
                self.doc_freq[i],
                self.total_count[i],
                idf.get(i)
            ));
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn build_vocabulary(docs: &[TokenizedDocument], level: NgramLevel, prune: PruneRule) -> Result<Vocabulary> {
    if docs.is_empty() {
        return Err(Error::EmptyInput("vocabulary needs at least one document"));
    }
    // BTreeMap gives the lexicographic order directly.
    let mut counts: BTreeMap<String, (u32, u64)> = BTreeMap::new();
    for doc in docs {
        let grams = extract_ngrams(&doc.tokens, level);
        let mut seen: HashSet<&str> = HashSet::with_capacity(grams.len());
        for g in &grams {
            let first = seen.insert(g.as_str());
            match counts.get_mut(g.as_str()) {
                Some(entry) => {
                    entry.1 += 1;
                    if first {
                        entry.0 += 1;
                    }
                }
                None => {
                    counts.insert(g.clone(), (1, 1));
                }
            }
        }
    }
    let mut terms = Vec::new();
    let mut doc_freq = Vec::new();
    let mut total_count = Vec::new();
    for (term, (df, total)) in counts {
        if prune.keeps(total) {
            terms.push(term);
            doc_freq.push(df);
            total_count.push(total);
        }
    }
    let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    Ok(Vocabulary {
        terms,
        index,
        doc_freq,
        total_count,
        n_docs: docs.len(),
        level,
        prune,
    })
}

/// IDF weights aligned with vocabulary positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdfTable {
    values: Vec<f64>,
}

impl IdfTable {
    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn compute_idf(vocab: &Vocabulary) -> IdfTable {
    IdfTable {
        values: vocab
            .doc_freq
            .iter()
            .map(|&df| idf(vocab.n_docs, df as usize))
            .collect(),
    }
}

/// Sparse vector with strictly increasing indices and nonzero weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    entries: Vec<(u32, f64)>,
    dim: usize,
}

impl SparseVector {
    pub fn new(dim: usize, mut entries: Vec<(u32, f64)>) -> Result<Self> {
        entries.retain(|&(_, w)| w != 0.0);
        entries.sort_by_key(|&(i, _)| i);
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidParam("duplicate sparse index".into()));
        }
        if let Some(&(i, _)) = entries.last() {
            if i as usize >= dim {
                return Err(Error::InvalidParam(format!("sparse index {i} >= dim {dim}")));
            }
        }
        Ok(SparseVector { entries, dim })
    }

    pub fn from_dense(values: &[f64]) -> Self {
        SparseVector {
            entries: values
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(i, &v)| (i as u32, v))
                .collect(),
            dim: values.len(),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        SparseVector { entries: Vec::new(), dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    /// Absent entries read as 0.0.
    pub fn get(&self, index: usize) -> f64 {
        self.entries
            .binary_search_by_key(&(index as u32), |&(i, _)| i)
            .map(|pos| self.entries[pos].1)
            .unwrap_or(0.0)
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|&(_, w)| w * w).sum::<f64>().sqrt()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(i, w) in &self.entries {
            out[i as usize] = w;
        }
        out
    }
}

/// Encodes one document against a frozen vocabulary. Out-of-vocabulary
/// terms are ignored.
pub fn encode(doc: &TokenizedDocument, vocab: &Vocabulary, idf: &IdfTable, scheme: EncodingScheme) -> SparseVector {
    let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
    for gram in extract_ngrams(&doc.tokens, vocab.level) {
        if let Some(i) = vocab.index_of(&gram) {
            *counts.entry(i as u32).or_default() += 1;
        }
    }
    let mut entries: Vec<(u32, f64)> = counts
        .into_iter()
        .map(|(i, c)| {
            let w = idf.get(i as usize);
            match scheme {
                EncodingScheme::IdfPresence => (i, w),
                EncodingScheme::TfIdf => (i, c as f64 * w),
            }
        })
        .filter(|&(_, w)| w != 0.0)
        .collect();
    if scheme == EncodingScheme::TfIdf {
        let norm = entries.iter().map(|&(_, w)| w * w).sum::<f64>().sqrt();
        if norm > 0.0 {
            for e in &mut entries {
                e.1 /= norm;
            }
        }
    }
    SparseVector {
        entries,
        dim: vocab.len(),
    }
}

pub fn encode_all(
    docs: &[TokenizedDocument],
    vocab: &Vocabulary,
    idf: &IdfTable,
    scheme: EncodingScheme,
) -> Vec<SparseVector> {
    docs.par_iter().map(|d| encode(d, vocab, idf, scheme)).collect()
}
