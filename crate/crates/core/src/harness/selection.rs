use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{nearest_rank, Corpus};
use crate::error::{Error, Result};
use crate::tree::Class;

/// Percentile pair defining the low and high extreme pools.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CutoffSpec {
    pub low_pct: f64,
    pub high_pct: f64,
}

impl CutoffSpec {
    pub fn new(low_pct: f64, high_pct: f64) -> Result<Self> {
        let spec = CutoffSpec { low_pct, high_pct };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.low_pct && self.low_pct < self.high_pct && self.high_pct < 1.0) {
            return Err(Error::InvalidParam(format!("cutoff {self} needs 0 < low < high < 1")));
        }
        Ok(())
    }

    /// 15/85, 20/80, ... 40/60.
    pub fn standard_sweep() -> Vec<CutoffSpec> {
        [15, 20, 25, 30, 35, 40]
            .iter()
            .map(|&p| CutoffSpec {
                low_pct: p as f64 / 100.0,
                high_pct: (100 - p) as f64 / 100.0,
            })
            .collect()
    }
}

impl Default for CutoffSpec {
    fn default() -> Self {
        CutoffSpec {
            low_pct: 0.15,
            high_pct: 0.85,
        }
    }
}

impl fmt::Display for CutoffSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.low_pct * 100.0, self.high_pct * 100.0)
    }
}

/// A document id with its IC score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredId {
    pub id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPool {
    pub spec: CutoffSpec,
    pub low_docs: Vec<ScoredId>,
    pub high_docs: Vec<ScoredId>,
    pub moderate_docs: Vec<ScoredId>,
    pub low_threshold_score: f64,
    pub high_threshold_score: f64,
}

/// Valid-score documents sorted by score, then id.
pub(crate) fn ranked(corpus: &Corpus) -> Vec<ScoredId> {
    let mut docs: Vec<ScoredId> = corpus
        .iter()
        .filter(|d| d.has_valid_score())
        .map(|d| ScoredId {
            id: d.id.clone(),
            score: d.ic_score.expect("valid score"),
        })
        .collect();
    docs.sort_by(|a, b| a.score.total_cmp(&b.score).then_with(|| a.id.cmp(&b.id)));
    docs
}

/// Splits the corpus at nearest-rank thresholds. Documents scoring exactly
/// at a threshold go to the moderate pool.
pub fn rank_and_cut(corpus: &Corpus, spec: CutoffSpec) -> Result<LabeledPool> {
    spec.validate()?;
    let docs = ranked(corpus);
    if docs.len() < 10 {
        return Err(Error::DegeneratePool {
            spec: spec.to_string(),
            message: format!("need at least 10 scored documents, got {}", docs.len()),
        });
    }
    let scores: Vec<f64> = docs.iter().map(|d| d.score).collect();
    let low_t = nearest_rank(&scores, spec.low_pct);
    let high_t = nearest_rank(&scores, spec.high_pct);
    let mut pool = LabeledPool {
        spec,
        low_docs: Vec::new(),
        high_docs: Vec::new(),
        moderate_docs: Vec::new(),
        low_threshold_score: low_t,
        high_threshold_score: high_t,
    };
    for d in docs {
        if d.score < low_t {
            pool.low_docs.push(d);
        } else if d.score > high_t {
            pool.high_docs.push(d);
        } else {
            pool.moderate_docs.push(d);
        }
    }
    for (name, empty) in [("low", pool.low_docs.is_empty()), ("high", pool.high_docs.is_empty())] {
        if empty {
            return Err(Error::DegeneratePool {
                spec: spec.to_string(),
                message: format!("{name} pool is empty (thresholds {low_t} / {high_t})"),
            });
        }
    }
    Ok(pool)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig {
    pub per_class: usize,
    pub train_frac: f64,
    pub moderate_frac: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            per_class: 400,
            train_frac: 0.85,
            moderate_frac: 0.15,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.per_class < 1 {
            return Err(Error::InvalidParam("per_class must be >= 1".into()));
        }
        if !(self.train_frac > 0.0 && self.train_frac < 1.0) {
            return Err(Error::InvalidParam(format!("train_frac must be in (0, 1), got {}", self.train_frac)));
        }
        if !(0.0..=1.0).contains(&self.moderate_frac) {
            return Err(Error::InvalidParam(format!("moderate_frac must be in [0, 1], got {}", self.moderate_frac)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSplit {
    pub train_ids: Vec<String>,
    pub heldout_test_ids: Vec<String>,
    pub moderate_test_ids: Vec<String>,
    pub labels: BTreeMap<String, Class>,
    pub median: f64,
    pub seed: u64,
}

impl SelectionSplit {
    /// Held-out extremes followed by the labelled moderate sample.
    pub fn final_test_ids(&self) -> Vec<String> {
        self.heldout_test_ids.iter().chain(&self.moderate_test_ids).cloned().collect()
    }

    pub fn label(&self, id: &str) -> Option<Class> {
        self.labels.get(id).copied()
    }
}

/// Label by comparison with the median; `None` when exactly at it.
pub fn median_label(score: f64, median: f64) -> Option<Class> {
    if score > median {
        Some(Class::High)
    } else if score < median {
        Some(Class::Low)
    } else {
        None
    }
}

/// Samples up to `per_class` documents from each extreme pool, splits each
/// class into train and held-out test, and draws a median-labelled sample
/// from the moderate pool.
pub fn build_selection_split(pool: &LabeledPool, config: &SelectionConfig, median: f64, seed: u64) -> Result<SelectionSplit> {
    config.validate()?;
    if pool.low_docs.is_empty() || pool.high_docs.is_empty() {
        return Err(Error::DegeneratePool {
            spec: pool.spec.to_string(),
            message: "an extreme pool is empty".into(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = SelectionSplit {
        train_ids: Vec::new(),
        heldout_test_ids: Vec::new(),
        moderate_test_ids: Vec::new(),
        labels: BTreeMap::new(),
        median,
        seed,
    };
    for (docs, class) in [(&pool.low_docs, Class::Low), (&pool.high_docs, Class::High)] {
        let mut ids: Vec<&str> = docs.iter().map(|d| d.id.as_str()).collect();
        ids.shuffle(&mut rng);
        ids.truncate(config.per_class);
        let n_train = (config.train_frac * ids.len() as f64).round() as usize;
        for (i, id) in ids.into_iter().enumerate() {
            split.labels.insert(id.to_string(), class);
            if i < n_train {
                split.train_ids.push(id.to_string());
            } else {
                split.heldout_test_ids.push(id.to_string());
            }
        }
    }
    let mut moderate: Vec<&ScoredId> = pool.moderate_docs.iter().collect();
    moderate.shuffle(&mut rng);
    moderate.truncate((config.moderate_frac * pool.moderate_docs.len() as f64).floor() as usize);
    for d in moderate {
        if let Some(class) = median_label(d.score, median) {
            split.labels.insert(d.id.clone(), class);
            split.moderate_test_ids.push(d.id.clone());
        }
    }
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, Provenance};
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn corpus(scores: &[f64]) -> Corpus {
        let docs = scores
            .iter()
            .enumerate()
            .map(|(i, &s)| Document::new(format!("d{i:03}"), "text", Some(s)))
            .collect();
        Corpus::new(docs, Provenance::now("test")).unwrap()
    }

    fn scores_of(v: &[ScoredId]) -> Vec<f64> {
        v.iter().map(|d| d.score).collect()
    }

    #[test]
    fn twenty_scores_at_15_85() {
        let scores: Vec<f64> = (1..=20).map(|s| 1.0 + s as f64 * 0.25).collect();
        let pool = rank_and_cut(&corpus(&scores), CutoffSpec::default()).unwrap();
        // rank ceil(0.15*20)=3, ceil(0.85*20)=17
        assert_eq!(pool.low_threshold_score, scores[2]);
        assert_eq!(pool.high_threshold_score, scores[16]);
        assert_eq!(scores_of(&pool.low_docs), &scores[..2]);
        assert_eq!(scores_of(&pool.high_docs), &scores[17..]);
        assert_eq!(pool.moderate_docs.len(), 15);
    }

    #[test]
    fn constant_scores_are_degenerate() {
        let err = rank_and_cut(&corpus(&[4.0; 12]), CutoffSpec::default()).unwrap_err();
        assert!(err.to_string().contains("15/85"), "{err}");
        assert!(rank_and_cut(&corpus(&[4.0, 5.0]), CutoffSpec::default()).is_err());
        assert!(CutoffSpec::new(0.5, 0.5).is_err());
    }

    #[test]
    fn invalid_scores_are_not_ranked() {
        let mut scores: Vec<f64> = (1..=20).map(|s| 1.0 + s as f64 * 0.25).collect();
        scores.push(0.0);
        let pool = rank_and_cut(&corpus(&scores), CutoffSpec::default()).unwrap();
        assert_eq!(pool.low_docs.len() + pool.high_docs.len() + pool.moderate_docs.len(), 20);
    }

    #[test]
    fn four_hundred_per_class_split() {
        let scores: Vec<f64> = (0..4000).map(|i| 1.0 + i as f64 / 1000.0).collect();
        let pool = rank_and_cut(&corpus(&scores), CutoffSpec::default()).unwrap();
        let split = build_selection_split(&pool, &SelectionConfig::default(), 3.0, 7).unwrap();
        assert_eq!(split.train_ids.len(), 680);
        assert_eq!(split.heldout_test_ids.len(), 120);
        let high = split.heldout_test_ids.iter().filter(|id| split.label(id) == Some(Class::High)).count();
        assert_eq!(high, 60);
        // floor(0.15 * 2801) drawn, less the median document if it was drawn
        assert_eq!(pool.moderate_docs.len(), 2801);
        assert!((419..=420).contains(&split.moderate_test_ids.len()));
        assert!(!split.moderate_test_ids.iter().any(|id| id == "d2000"));
    }

    #[test]
    fn median_docs_never_reach_the_moderate_test() {
        let mut scores = vec![1.0, 1.5, 2.0];
        scores.extend([5.0; 30]);
        scores.extend([7.0, 7.0, 7.0]);
        let pool = rank_and_cut(&corpus(&scores), CutoffSpec::default()).unwrap();
        let cfg = SelectionConfig { moderate_frac: 1.0, ..SelectionConfig::default() };
        let split = build_selection_split(&pool, &cfg, 5.0, 0).unwrap();
        assert!(split.moderate_test_ids.is_empty());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn splits_are_disjoint_and_stratified(
            scores in prop::collection::vec(1.0f64..7.0, 10..80),
            seed in any::<u64>(),
            per_class in 1usize..30,
        ) {
            let c = corpus(&scores);
            let Ok(pool) = rank_and_cut(&c, CutoffSpec::default()) else { return Ok(()) };
            prop_assert_eq!(pool.low_docs.len() + pool.high_docs.len() + pool.moderate_docs.len(), scores.len());
            let cfg = SelectionConfig { per_class, ..SelectionConfig::default() };
            let split = build_selection_split(&pool, &cfg, 4.0, seed).unwrap();
            prop_assert_eq!(&split, &build_selection_split(&pool, &cfg, 4.0, seed).unwrap());
            let train: BTreeSet<_> = split.train_ids.iter().collect();
            let test: BTreeSet<_> = split.final_test_ids().into_iter().collect::<BTreeSet<_>>();
            prop_assert!(train.iter().all(|id| !test.contains(*id)));
            for (docs, class) in [(&pool.low_docs, Class::Low), (&pool.high_docs, Class::High)] {
                let n = docs.len().min(per_class);
                let tr = split.train_ids.iter().filter(|id| split.label(id) == Some(class)).count();
                let te = split.heldout_test_ids.iter().filter(|id| split.label(id) == Some(class)).count();
                prop_assert_eq!(tr + te, n);
                prop_assert_eq!(tr, (0.85 * n as f64).round() as usize);
            }
            for id in &split.moderate_test_ids {
                let s = c.get(id).unwrap().ic_score.unwrap();
                prop_assert_eq!(split.label(id), median_label(s, 4.0));
            }
        }
    }
}
