use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{compute_statistics, Corpus, Document};
use crate::encoding::{EncodingScheme, NgramLevel, PruneRule};
use crate::error::{Error, Result};
use crate::harness::metrics::EvaluationReport;
use crate::harness::pipeline::{labelled, prepare_training, PipelineConfig, TrainedPipeline};
use crate::harness::selection::{build_selection_split, median_label, rank_and_cut, ranked, CutoffSpec, LabeledPool, SelectionConfig, SelectionSplit};
use crate::preprocess::PreprocessConfig;
use crate::tree::{Class, ClassifierKind, Hyperparams};

/// Settings shared by every experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSettings {
    pub selection: SelectionConfig,
    pub preprocess: PreprocessConfig,
    pub forest: Hyperparams,
    pub tree: Hyperparams,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        ExperimentSettings {
            selection: SelectionConfig::default(),
            preprocess: PreprocessConfig::default(),
            forest: Hyperparams::tuned_forest(),
            tree: Hyperparams::default_tree(),
        }
    }
}

impl ExperimentSettings {
    pub fn params_for(&self, kind: ClassifierKind, seed: u64) -> Hyperparams {
        match kind {
            ClassifierKind::DecisionTree => self.tree.clone(),
            ClassifierKind::RandomForest => self.forest.clone(),
        }
        .with_seed(seed)
    }

    pub fn pipeline(&self, scheme: EncodingScheme, level: NgramLevel, prune: PruneRule, kind: ClassifierKind, seed: u64) -> PipelineConfig {
        PipelineConfig {
            preprocess: self.preprocess.clone(),
            scheme,
            level,
            prune,
            classifier: kind,
            params: self.params_for(kind, seed),
        }
    }
}

/// Nearest-rank median of the valid scores.
pub fn corpus_median(corpus: &Corpus) -> Result<f64> {
    Ok(compute_statistics(corpus)?.median)
}

/// A selection split resolved against its corpus.
#[derive(Debug, Clone)]
pub struct ResolvedSplit<'a> {
    pub pool: LabeledPool,
    pub split: SelectionSplit,
    pub train: Vec<(&'a Document, Class)>,
    pub heldout: Vec<(&'a Document, Class)>,
    pub final_test: Vec<(&'a Document, Class)>,
}

pub fn resolve_split<'a>(corpus: &'a Corpus, spec: CutoffSpec, selection: &SelectionConfig, median: f64, seed: u64) -> Result<ResolvedSplit<'a>> {
    let pool = rank_and_cut(corpus, spec)?;
    let split = build_selection_split(&pool, selection, median, seed)?;
    let label = |id: &str| split.label(id);
    let train = labelled(corpus, &split.train_ids, label)?;
    let heldout = labelled(corpus, &split.heldout_test_ids, label)?;
    let final_test = labelled(corpus, &split.final_test_ids(), label)?;
    Ok(ResolvedSplit {
        pool,
        split,
        train,
        heldout,
        final_test,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutoffRow {
    pub spec: CutoffSpec,
    pub low_threshold: Option<f64>,
    pub high_threshold: Option<f64>,
    pub n_train: usize,
    pub n_test: usize,
    pub report: Option<EvaluationReport>,
    pub error: Option<String>,
}

/// Random forest with TF-IDF unigrams for each cutoff, evaluated on the
/// final test set. Failing specs are recorded and the sweep continues.
pub fn run_cutoff_sweep(corpus: &Corpus, specs: &[CutoffSpec], settings: &ExperimentSettings, seed: u64, config_hash: &str) -> Result<Vec<CutoffRow>> {
    let median = corpus_median(corpus)?;
    let config = settings.pipeline(
        EncodingScheme::TfIdf,
        NgramLevel::Unigram,
        PruneRule::NONE,
        ClassifierKind::RandomForest,
        seed,
    );
    let rows = specs
        .par_iter()
        .map(|&spec| {
            let mut row = CutoffRow {
                spec,
                low_threshold: None,
                high_threshold: None,
                n_train: 0,
                n_test: 0,
                report: None,
                error: None,
            };
            let result = resolve_split(corpus, spec, &settings.selection, median, seed).and_then(|r| {
                row.low_threshold = Some(r.pool.low_threshold_score);
                row.high_threshold = Some(r.pool.high_threshold_score);
                row.n_train = r.train.len();
                row.n_test = r.final_test.len();
                let p = prepare_training(&r.train, &config.preprocess)?.fit(&config)?;
                p.evaluate(&r.final_test, config_hash, seed)
            });
            match result {
                Ok(rep) => row.report = Some(rep),
                Err(e) => row.error = Some(e.to_string()),
            }
            row
        })
        .collect();
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridRow {
    pub scheme: EncodingScheme,
    pub classifier: ClassifierKind,
    pub level: NgramLevel,
    pub prune: PruneRule,
    pub n_features: usize,
    pub report: Option<EvaluationReport>,
    pub error: Option<String>,
    pub best: bool,
}

/// Prune rules in the grid: keep all, drop terms seen once, drop terms
/// seen at most twice.
pub const GRID_PRUNE: [u64; 3] = [0, 1, 2];

/// All 36 encoder and classifier combinations trained and evaluated on one
/// shared split. Rows are ordered by scheme, classifier, level, prune.
pub fn run_encoder_grid(corpus: &Corpus, spec: CutoffSpec, settings: &ExperimentSettings, seed: u64, config_hash: &str) -> Result<Vec<GridRow>> {
    let median = corpus_median(corpus)?;
    let split = resolve_split(corpus, spec, &settings.selection, median, seed)?;
    let prepared = prepare_training(&split.train, &settings.preprocess)?;
    let mut cells = Vec::new();
    for scheme in EncodingScheme::ALL {
        for kind in ClassifierKind::ALL {
            for level in NgramLevel::ALL {
                for prune in GRID_PRUNE {
                    cells.push((scheme, kind, level, PruneRule::at_most(prune)));
                }
            }
        }
    }
    let mut rows: Vec<GridRow> = cells
        .par_iter()
        .map(|&(scheme, classifier, level, prune)| {
            let config = settings.pipeline(scheme, level, prune, classifier, seed);
            let mut row = GridRow {
                scheme,
                classifier,
                level,
                prune,
                n_features: 0,
                report: None,
                error: None,
                best: false,
            };
            let result = prepared.fit(&config).and_then(|p| {
                row.n_features = p.vocabulary.len();
                p.evaluate(&split.final_test, config_hash, seed)
            });
            match result {
                Ok(rep) => row.report = Some(rep),
                Err(e) => row.error = Some(e.to_string()),
            }
            row
        })
        .collect();
    let best = rows
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.report.as_ref().map(|rep| (i, rep.accuracy)))
        .fold(None::<(usize, f64)>, |acc, (i, a)| match acc {
            Some((_, b)) if b >= a => acc,
            _ => Some((i, a)),
        });
    if let Some((i, _)) = best {
        rows[i].best = true;
    }
    Ok(rows)
}

/// Percentile bands selected on either side of the median.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModerateRange {
    pub low: (f64, f64),
    pub high: (f64, f64),
}

impl ModerateRange {
    /// 15-20/80-85 widening by five points a side up to 15-50/50-85.
    pub fn standard() -> Vec<ModerateRange> {
        (20..=50)
            .step_by(5)
            .map(|p| ModerateRange {
                low: (0.15, p as f64 / 100.0),
                high: ((100 - p) as f64 / 100.0, 0.85),
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |(a, b): (f64, f64)| 0.0 <= a && a < b && b <= 1.0;
        if !ok(self.low) || !ok(self.high) {
            return Err(Error::InvalidParam(format!("bad moderate range {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModerateRow {
    pub range: ModerateRange,
    pub n_docs: usize,
    pub n_at_median: usize,
    pub report: Option<EvaluationReport>,
    pub error: Option<String>,
}

fn position_band(n: usize, (a, b): (f64, f64)) -> std::ops::Range<usize> {
    let at = |p: f64| ((p * n as f64 - 1e-9).ceil().max(0.0) as usize).min(n);
    at(a)..at(b)
}

/// Evaluates `model` on documents whose score rank falls in each range,
/// labelled by the median rule. Documents exactly at the median are counted
/// but not evaluated.
pub fn run_moderate_sweep(
    corpus: &Corpus,
    model: &TrainedPipeline,
    ranges: &[ModerateRange],
    median: f64,
    seed: u64,
    config_hash: &str,
) -> Vec<ModerateRow> {
    let docs = ranked(corpus);
    ranges
        .par_iter()
        .map(|&range| {
            let mut row = ModerateRow {
                range,
                n_docs: 0,
                n_at_median: 0,
                report: None,
                error: None,
            };
            let result = range.validate().and_then(|_| {
                let mut test = Vec::new();
                let low = position_band(docs.len(), range.low);
                let high = position_band(docs.len(), range.high);
                let mut picked: Vec<usize> = low.chain(high).collect();
                picked.sort_unstable();
                picked.dedup();
                for i in picked {
                    match median_label(docs[i].score, median) {
                        Some(c) => test.push((corpus.get(&docs[i].id).expect("ranked from corpus"), c)),
                        None => row.n_at_median += 1,
                    }
                }
                row.n_docs = test.len();
                if test.is_empty() {
                    return Err(Error::EmptyInput("moderate range selects no labelled documents"));
                }
                model.evaluate(&test, config_hash, seed)
            });
            match result {
                Ok(rep) => row.report = Some(rep),
                Err(e) => row.error = Some(e.to_string()),
            }
            row
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MedianProportion {
    pub median: f64,
    pub n_docs: usize,
    pub frac_high: f64,
    pub frac_low: f64,
}

/// Share of exactly-median documents predicted High and Low.
pub fn median_proportion(corpus: &Corpus, model: &TrainedPipeline, median: f64) -> Result<MedianProportion> {
    let docs: Vec<&Document> = corpus
        .iter()
        .filter(|d| d.has_valid_score() && d.ic_score == Some(median))
        .collect();
    if docs.is_empty() {
        return Err(Error::EmptyInput("no documents score exactly at the median"));
    }
    let preds = model.predict_all(&docs)?;
    let high = preds.iter().filter(|&&c| c == Class::High).count();
    Ok(MedianProportion {
        median,
        n_docs: docs.len(),
        frac_high: high as f64 / docs.len() as f64,
        frac_low: (docs.len() - high) as f64 / docs.len() as f64,
    })
}

/// Trains the base model on one cutoff split and reports its held-out and
/// final-test performance.
#[derive(Debug, Clone)]
pub struct BaseModel {
    pub pipeline: TrainedPipeline,
    pub split: SelectionSplit,
    pub heldout: EvaluationReport,
    pub final_test: EvaluationReport,
}

pub fn train_base_model(
    corpus: &Corpus,
    spec: CutoffSpec,
    selection: &SelectionConfig,
    config: &PipelineConfig,
    seed: u64,
    config_hash: &str,
) -> Result<BaseModel> {
    let median = corpus_median(corpus)?;
    let split = resolve_split(corpus, spec, selection, median, seed)?;
    let pipeline = prepare_training(&split.train, &config.preprocess)?.fit(config)?;
    let heldout = pipeline.evaluate(&split.heldout, config_hash, seed)?;
    let final_test = pipeline.evaluate(&split.final_test, config_hash, seed)?;
    Ok(BaseModel {
        pipeline,
        split: split.split,
        heldout,
        final_test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Provenance;

    #[test]
    fn standard_ranges_match_the_protocol() {
        let r = ModerateRange::standard();
        assert_eq!(r.len(), 7);
        assert_eq!(r[0].low, (0.15, 0.20));
        assert_eq!(r[0].high, (0.80, 0.85));
        assert_eq!(r[6].low, (0.15, 0.50));
        assert_eq!(r[6].high, (0.50, 0.85));
        assert_eq!(CutoffSpec::standard_sweep().len(), 6);
    }

    #[test]
    fn bands_are_rank_positions() {
        assert_eq!(position_band(2000, (0.15, 0.20)), 300..400);
        assert_eq!(position_band(2000, (0.80, 0.85)), 1600..1700);
        assert_eq!(position_band(20, (0.35, 0.5)), 7..10);
    }

    #[test]
    fn median_docs_only() {
        let docs = (0..12)
            .map(|i| Document::new(format!("d{i}"), if i < 6 { "alpha beta" } else { "gamma delta" }, Some(3.0 + (i % 4) as f64)))
            .collect();
        let corpus = Corpus::new(docs, Provenance::now("t")).unwrap();
        let config = PipelineConfig {
            classifier: ClassifierKind::DecisionTree,
            params: Hyperparams::default_tree(),
            ..PipelineConfig::default()
        };
        let owned: Vec<Document> = corpus.documents().to_vec();
        let train: Vec<(&Document, Class)> = owned.iter().map(|d| (d, if d.text.starts_with('g') { Class::High } else { Class::Low })).collect();
        let p = crate::harness::fit_pipeline(&train, &config).unwrap();
        let m = median_proportion(&corpus, &p, 4.0).unwrap();
        assert_eq!(m.n_docs, 3);
        assert_eq!(m.frac_high + m.frac_low, 1.0);
        assert!(median_proportion(&corpus, &p, 4.5).is_err());
    }
}
