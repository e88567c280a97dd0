use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document};
use crate::encoding::{build_vocabulary, compute_idf, encode, EncodingScheme, IdfTable, NgramLevel, PruneRule, Vocabulary};
use crate::error::{Error, Result};
use crate::harness::metrics::{ConfusionMatrix, EvaluationReport};
use crate::preprocess::{preprocess_documents, preprocess_with, PreprocessConfig, StopwordList};
use crate::tree::{Class, ClassifierKind, Dataset, Hyperparams, Model};

/// Everything needed to turn labelled documents into a fitted classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub preprocess: PreprocessConfig,
    pub scheme: EncodingScheme,
    pub level: NgramLevel,
    pub prune: PruneRule,
    pub classifier: ClassifierKind,
    pub params: Hyperparams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            preprocess: PreprocessConfig::default(),
            scheme: EncodingScheme::IdfPresence,
            level: NgramLevel::Unigram,
            prune: PruneRule::NONE,
            classifier: ClassifierKind::RandomForest,
            params: Hyperparams::tuned_forest(),
        }
    }
}

/// A fitted pipeline. Stopwords, vocabulary and IDF come from the training
/// documents only and are frozen for everything encoded afterwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedPipeline {
    pub config: PipelineConfig,
    pub stopwords: StopwordList,
    pub vocabulary: Vocabulary,
    pub idf: IdfTable,
    pub model: Model,
}

/// Tokenised training documents with their labels and stopword list,
/// shared by every encoder built on the same training set.
#[derive(Debug, Clone)]
pub struct PreparedTraining {
    pub preprocess: PreprocessConfig,
    pub tokens: Vec<crate::preprocess::TokenizedDocument>,
    pub labels: Vec<Class>,
    pub stopwords: StopwordList,
}

pub fn prepare_training(docs: &[(&Document, Class)], preprocess: &PreprocessConfig) -> Result<PreparedTraining> {
    let plain: Vec<Document> = docs.iter().map(|(d, _)| (*d).clone()).collect();
    let (tokens, stopwords) = preprocess_documents(&plain, preprocess)?;
    Ok(PreparedTraining {
        preprocess: preprocess.clone(),
        tokens,
        labels: docs.iter().map(|&(_, c)| c).collect(),
        stopwords,
    })
}

impl PreparedTraining {
    /// Builds the frozen vocabulary and IDF for `config` and encodes the
    /// training documents with them.
    pub fn dataset(&self, config: &PipelineConfig) -> Result<(Vocabulary, IdfTable, Dataset)> {
        if config.preprocess != self.preprocess {
            return Err(Error::InvalidParam("pipeline preprocessing differs from the prepared training set".into()));
        }
        let vocabulary = build_vocabulary(&self.tokens, config.level, config.prune)?;
        if vocabulary.is_empty() {
            return Err(Error::EmptyInput("vocabulary is empty after pruning"));
        }
        let idf = compute_idf(&vocabulary);
        let rows = self
            .tokens
            .par_iter()
            .map(|t| encode(t, &vocabulary, &idf, config.scheme))
            .collect();
        let data = Dataset::new(rows, self.labels.clone(), vocabulary.len())?;
        Ok((vocabulary, idf, data))
    }

    pub fn fit(&self, config: &PipelineConfig) -> Result<TrainedPipeline> {
        let (vocabulary, idf, data) = self.dataset(config)?;
        let model = Model::fit(config.classifier, &data, &config.params)?;
        Ok(TrainedPipeline {
            config: config.clone(),
            stopwords: self.stopwords.clone(),
            vocabulary,
            idf,
            model,
        })
    }
}

pub fn fit_pipeline(docs: &[(&Document, Class)], config: &PipelineConfig) -> Result<TrainedPipeline> {
    prepare_training(docs, &config.preprocess)?.fit(config)
}

impl TrainedPipeline {
    pub fn encode(&self, doc: &Document) -> crate::encoding::SparseVector {
        let tokens = preprocess_with(doc, &self.config.preprocess, &self.stopwords);
        encode(&tokens, &self.vocabulary, &self.idf, self.config.scheme)
    }

    pub fn predict(&self, doc: &Document) -> Result<Class> {
        self.model.predict(&self.encode(doc))
    }

    pub fn predict_all(&self, docs: &[&Document]) -> Result<Vec<Class>> {
        docs.par_iter().map(|d| self.predict(d)).collect()
    }

    pub fn confusion(&self, test: &[(&Document, Class)]) -> Result<ConfusionMatrix> {
        let docs: Vec<&Document> = test.iter().map(|&(d, _)| d).collect();
        let actual: Vec<Class> = test.iter().map(|&(_, c)| c).collect();
        ConfusionMatrix::from_predictions(&actual, &self.predict_all(&docs)?)
    }

    pub fn evaluate(&self, test: &[(&Document, Class)], config_hash: &str, seed: u64) -> Result<EvaluationReport> {
        EvaluationReport::from_confusion(self.confusion(test)?, config_hash, seed)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let p: TrainedPipeline = serde_json::from_str(&text)?;
        if p.model.n_features() != p.vocabulary.len() || p.idf.len() != p.vocabulary.len() {
            return Err(Error::DimensionMismatch {
                expected: p.vocabulary.len(),
                actual: p.model.n_features(),
            });
        }
        Ok(p)
    }
}

/// Resolves ids against the corpus, pairing each with its label.
pub fn labelled<'a>(corpus: &'a Corpus, ids: &[String], label: impl Fn(&str) -> Option<Class>) -> Result<Vec<(&'a Document, Class)>> {
    ids.iter()
        .map(|id| {
            let doc = corpus
                .get(id)
                .ok_or_else(|| Error::InvalidDocument(format!("unknown document id `{id}`")))?;
            let class = label(id).ok_or_else(|| Error::InvalidDocument(format!("document `{id}` has no label")))?;
            Ok((doc, class))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn docs() -> Vec<(Document, Class)> {
        let mut out = Vec::new();
        for i in 0..30 {
            let high = i % 2 == 0;
            let text = if high { "novel daring quantum method study" } else { "routine incremental method study" };
            let class = if high { Class::High } else { Class::Low };
            out.push((Document::new(format!("d{i}"), format!("{text} item{i}"), Some(4.0)), class));
        }
        out
    }

    fn config() -> PipelineConfig {
        PipelineConfig {
            classifier: ClassifierKind::DecisionTree,
            params: Hyperparams::default_tree(),
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn fits_predicts_and_round_trips() {
        let owned = docs();
        let train: Vec<(&Document, Class)> = owned.iter().map(|(d, c)| (d, *c)).collect();
        let p = fit_pipeline(&train, &config()).unwrap();
        let report = p.evaluate(&train, "h", 3).unwrap();
        assert_eq!(report.accuracy, 1.0);
        let unseen = Document::new("x", "A daring new approach", Some(5.0));
        assert_eq!(p.predict(&unseen).unwrap(), Class::High);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        p.save(&path).unwrap();
        assert_eq!(TrainedPipeline::load(&path).unwrap(), p);
    }

    #[test]
    fn vocabulary_excludes_test_only_terms() {
        let owned = docs();
        let train: Vec<(&Document, Class)> = owned.iter().map(|(d, c)| (d, *c)).collect();
        let p = fit_pipeline(&train, &config()).unwrap();
        assert!(p.vocabulary.index_of("unseenword").is_none());
        let v = p.encode(&Document::new("x", "unseenword unseenword", None));
        assert_eq!(v.nnz(), 0);
    }
}
