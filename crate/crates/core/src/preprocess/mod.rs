//! Text normalisation chain applied before feature extraction:
//! lowercase, digit removal, punctuation to space, whitespace tokenisation,
//! IDF-threshold stopword removal and Porter stemming, in that order.

mod porter;

use std::collections::{BTreeSet, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document};
use crate::error::{Error, Result};

pub use porter::stem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub lowercase: bool,
    pub strip_digits: bool,
    pub strip_punct: bool,
    /// Unigrams whose IDF over the fitting corpus falls strictly below this
    /// become stopwords. 0 disables stopword removal.
    pub stopword_idf_threshold: f64,
    pub stemming: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            lowercase: true,
            strip_digits: true,
            strip_punct: true,
            stopword_idf_threshold: 1.0,
            stemming: true,
        }
    }
}

impl PreprocessConfig {
    /// Only whitespace tokenisation.
    pub fn tokenize_only() -> Self {
        PreprocessConfig {
            lowercase: false,
            strip_digits: false,
            strip_punct: false,
            stopword_idf_threshold: 0.0,
            stemming: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.stopword_idf_threshold >= 0.0) {
            return Err(Error::InvalidParam(format!(
                "stopword_idf_threshold must be >= 0, got {}",
                self.stopword_idf_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedDocument {
    pub id: String,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopwordList {
    pub terms: BTreeSet<String>,
    pub threshold: f64,
    pub source_corpus_size: usize,
}

impl StopwordList {
    pub fn empty() -> Self {
        StopwordList {
            terms: BTreeSet::new(),
            threshold: 0.0,
            source_corpus_size: 0,
        }
    }

    pub fn contains(&self, token: &str) -> bool {
        self.terms.contains(token)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Sorted dump, one term per line.
    pub fn to_text(&self) -> String {
        self.terms.iter().map(|t| format!("{t}\n")).collect()
    }
}

fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(c,
            '\u{00A1}' | '\u{00A7}' | '\u{00AB}' | '\u{00B6}' | '\u{00B7}' | '\u{00BB}' | '\u{00BF}'
            | '\u{2010}'..='\u{2027}'
            | '\u{2030}'..='\u{205E}'
            | '\u{3001}'..='\u{3003}'
            | '\u{3008}'..='\u{3011}')
}

pub fn normalize(text: &str, config: &PreprocessConfig) -> String {
    let mut out = String::with_capacity(text.len());
    let mut push = |c: char| {
        if config.strip_digits && c.is_numeric() {
            return;
        }
        if config.strip_punct && is_punctuation(c) {
            out.push(' ');
        } else {
            out.push(c);
        }
    };
    for c in text.chars() {
        if config.lowercase {
            c.to_lowercase().for_each(&mut push);
        } else {
            push(c);
        }
    }
    out
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}

/// Base-2 IDF with no smoothing, shared with the feature encoder.
pub fn idf(n_docs: usize, doc_freq: usize) -> f64 {
    (n_docs as f64 / doc_freq as f64).log2()
}

/// Unigram document frequencies over `docs`.
pub fn document_frequencies(docs: &[TokenizedDocument]) -> HashMap<&str, usize> {
    let mut df: HashMap<&str, usize> = HashMap::new();
    for doc in docs {
        let unique: HashSet<&str> = doc.tokens.iter().map(String::as_str).collect();
        for tok in unique {
            *df.entry(tok).or_default() += 1;
        }
    }
    df
}

pub fn build_stopword_list(docs: &[TokenizedDocument], threshold: f64) -> Result<StopwordList> {
    if docs.is_empty() {
        return Err(Error::EmptyInput("stopword list needs at least one document"));
    }
    let n = docs.len();
    let terms = document_frequencies(docs)
        .into_iter()
        .filter(|&(_, df)| idf(n, df) < threshold)
        .map(|(t, _)| t.to_string())
        .collect();
    Ok(StopwordList {
        terms,
        threshold,
        source_corpus_size: n,
    })
}

pub fn remove_stopwords(doc: &TokenizedDocument, stops: &StopwordList) -> TokenizedDocument {
    TokenizedDocument {
        id: doc.id.clone(),
        tokens: doc
            .tokens
            .iter()
            .filter(|t| !stops.contains(t))
            .cloned()
            .collect(),
    }
}

fn raw_tokens(doc: &Document, config: &PreprocessConfig) -> TokenizedDocument {
    TokenizedDocument {
        id: doc.id.clone(),
        tokens: tokenize(&normalize(&doc.text, config)),
    }
}

fn finish(doc: &TokenizedDocument, stops: &StopwordList, config: &PreprocessConfig) -> TokenizedDocument {
    let mut out = remove_stopwords(doc, stops);
    if config.stemming {
        for tok in &mut out.tokens {
            *tok = stem(tok);
        }
    }
    out
}

/// Runs the full chain over `docs`, deriving the stopword list from the
/// same documents.
pub fn preprocess_documents(
    docs: &[Document],
    config: &PreprocessConfig,
) -> Result<(Vec<TokenizedDocument>, StopwordList)> {
    config.validate()?;
    if docs.is_empty() {
        return Err(Error::EmptyInput("cannot preprocess an empty corpus"));
    }
    let raw: Vec<TokenizedDocument> = docs.par_iter().map(|d| raw_tokens(d, config)).collect();
    let stops = if config.stopword_idf_threshold > 0.0 {
        build_stopword_list(&raw, config.stopword_idf_threshold)?
    } else {
        StopwordList {
            source_corpus_size: raw.len(),
            ..StopwordList::empty()
        }
    };
    let out = raw.par_iter().map(|d| finish(d, &stops, config)).collect();
    Ok((out, stops))
}

pub fn preprocess_corpus(
    corpus: &Corpus,
    config: &PreprocessConfig,
) -> Result<(Vec<TokenizedDocument>, StopwordList)> {
    preprocess_documents(corpus.documents(), config)
}

/// Applies the chain to an unseen document with a frozen stopword list.
pub fn preprocess_with(doc: &Document, config: &PreprocessConfig, stops: &StopwordList) -> TokenizedDocument {
    finish(&raw_tokens(doc, config), stops, config)
}
