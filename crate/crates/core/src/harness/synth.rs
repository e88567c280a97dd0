//! Synthetic scored corpus with a planted vocabulary signal.

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson, Zipf};
use serde::{Deserialize, Serialize};

use crate::corpus::{nearest_rank, Corpus, Document, Provenance};
use crate::error::{Error, Result};
use crate::preprocess::stem;

const ONSETS: &[&str] = &[
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "dr", "gr", "kl", "pl", "st", "tr",
];
const NUCLEI: &[&str] = &["a", "o", "u", "i", "ai", "ou"];
const CODAS: &[&str] = &["", "", "", "n", "r", "k", "m", "t"];
const GRANT_TYPES: &[&str] = &["ideas", "investigator", "synergy", "development"];
const SECTIONS: &[&str] = &["research_plan", "significance", "innovation"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub n_docs: usize,
    pub common_vocab_size: usize,
    pub rare_vocab_size: usize,
    pub planted_terms: usize,
    pub doc_length_mean: f64,
    /// Mean number of rare noise words per document.
    pub rare_per_doc: f64,
    pub score_mean: f64,
    pub score_std: f64,
    pub score_min: f64,
    pub score_max: f64,
    /// Scores are rounded to a multiple of this, which produces the ties
    /// real averaged panel scores have.
    pub score_step: f64,
    pub signal_strength: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_docs: 2000,
            common_vocab_size: 2000,
            rare_vocab_size: 6000,
            planted_terms: 10,
            doc_length_mean: 150.0,
            rare_per_doc: 4.0,
            score_mean: 4.92,
            score_std: 0.65,
            score_min: 1.75,
            score_max: 6.90,
            score_step: 0.125,
            signal_strength: 0.3,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParam(m.to_string()));
        if self.n_docs < 1 || self.common_vocab_size < 1 || self.rare_vocab_size < 1 || self.planted_terms < 1 {
            return bad("synthetic sizes must all be >= 1");
        }
        if !(self.doc_length_mean >= 1.0) || !(self.rare_per_doc >= 0.0) {
            return bad("doc_length_mean must be >= 1 and rare_per_doc >= 0");
        }
        if !(0.0..=1.0).contains(&self.signal_strength) {
            return bad("signal_strength must be in [0, 1]");
        }
        if !(self.score_std > 0.0 && self.score_min < self.score_max && self.score_step >= 0.0) {
            return bad("score distribution needs std > 0, min < max and step >= 0");
        }
        Ok(())
    }
}

/// The three disjoint word lists a spec draws from.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticVocabulary {
    pub common: Vec<String>,
    pub rare: Vec<String>,
    pub planted: Vec<String>,
}

fn pseudo_word(rng: &mut impl Rng) -> String {
    let syllables = rng.random_range(2..=3);
    let mut w = String::new();
    for _ in 0..syllables {
        w.push_str(ONSETS.choose(rng).unwrap());
        w.push_str(NUCLEI.choose(rng).unwrap());
    }
    w.push_str(CODAS.choose(rng).unwrap());
    w
}

/// Stem-stable pseudo-words, so the planted terms survive preprocessing
/// unchanged and can be looked up by name in the vocabulary.
pub fn synthetic_vocabulary(spec: &SyntheticSpec) -> Result<SyntheticVocabulary> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(1);
    let needed = spec.common_vocab_size + spec.rare_vocab_size + spec.planted_terms;
    let mut seen = BTreeSet::new();
    let mut words = Vec::with_capacity(needed);
    let mut attempts = 0usize;
    while words.len() < needed {
        attempts += 1;
        if attempts > needed * 200 {
            return Err(Error::InvalidParam(format!("cannot generate {needed} distinct pseudo-words")));
        }
        let w = pseudo_word(&mut rng);
        if stem(&w) == w && seen.insert(w.clone()) {
            words.push(w);
        }
    }
    let rare = words.split_off(spec.common_vocab_size + spec.planted_terms);
    let common = words.split_off(spec.planted_terms);
    Ok(SyntheticVocabulary {
        common,
        rare,
        planted: words,
    })
}

fn draw_scores(spec: &SyntheticSpec, rng: &mut impl Rng) -> Vec<f64> {
    let normal = Normal::new(spec.score_mean, spec.score_std).expect("validated std");
    (0..spec.n_docs)
        .map(|_| {
            let mut s = normal.sample(rng).clamp(spec.score_min, spec.score_max);
            if spec.score_step > 0.0 {
                s = (s / spec.score_step).round() * spec.score_step;
                s = s.clamp(spec.score_min, spec.score_max);
            }
            // strip representation noise so the JSONL stays short
            (s * 1e6).round() / 1e6
        })
        .collect()
}

fn render(words: &[&str], rng: &mut impl Rng) -> String {
    let mut text = String::new();
    let mut start = true;
    let mut left = 0usize;
    for (i, w) in words.iter().enumerate() {
        if left == 0 {
            left = rng.random_range(6..16);
        }
        if i > 0 {
            text.push(' ');
        }
        if start {
            let mut cs = w.chars();
            if let Some(c) = cs.next() {
                text.extend(c.to_uppercase());
                text.push_str(cs.as_str());
            }
            start = false;
        } else {
            text.push_str(w);
        }
        left -= 1;
        if left == 0 || i + 1 == words.len() {
            text.push('.');
            start = true;
        } else if rng.random::<f64>() < 0.04 {
            text.push(',');
        }
    }
    text
}

/// Generates `spec.n_docs` documents. Documents scoring strictly above the
/// median contain each planted term with probability `signal_strength`; the
/// rest (including those exactly at the median) with a tenth of that.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Corpus> {
    let vocab = synthetic_vocabulary(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let scores = draw_scores(spec, &mut rng);
    let mut sorted = scores.clone();
    sorted.sort_by(f64::total_cmp);
    let median = nearest_rank(&sorted, 0.5);

    let zipf = Zipf::new(spec.common_vocab_size as f64, 1.0).expect("vocab size >= 1");
    let length = Poisson::new(spec.doc_length_mean).expect("mean >= 1");
    let rare_count = (spec.rare_per_doc > 0.0).then(|| Poisson::new(spec.rare_per_doc).expect("positive mean"));
    let width = spec.n_docs.to_string().len().max(5);

    let mut docs = Vec::with_capacity(spec.n_docs);
    for (i, &score) in scores.iter().enumerate() {
        let len = (length.sample(&mut rng) as usize).max(10);
        let mut words: Vec<&str> = (0..len)
            .map(|_| vocab.common[zipf.sample(&mut rng) as usize - 1].as_str())
            .collect();
        let n_rare = rare_count.map_or(0, |p| p.sample(&mut rng) as usize);
        for _ in 0..n_rare {
            let w = vocab.rare.choose(&mut rng).unwrap();
            words.insert(rng.random_range(0..=words.len()), w);
        }
        let p = if score > median {
            spec.signal_strength
        } else {
            spec.signal_strength / 10.0
        };
        for term in &vocab.planted {
            if rng.random::<f64>() < p {
                for _ in 0..rng.random_range(1..=3) {
                    words.insert(rng.random_range(0..=words.len()), term);
                }
            }
        }
        let text = render(&words, &mut rng);
        let mut doc = Document::new(format!("syn-{i:0width$}"), text, Some(score))
            .with_grant_type(*GRANT_TYPES.choose(&mut rng).unwrap());
        if rng.random::<f64>() < 0.8 {
            doc = doc.with_section(*SECTIONS.choose(&mut rng).unwrap());
        }
        docs.push(doc);
    }
    Corpus::new(docs, Provenance::now(format!("synthetic seed {}", spec.seed)))
}
