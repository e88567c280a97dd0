//! Proposal corpus: JSONL loading, validity filtering and score statistics.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Key of the innovation-and-creativity score inside the `scores` object.
pub const IC_KEY: &str = "ic";

/// Proposals scoring below this are treated as unscored.
pub const MIN_VALID_SCORE: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub ic_score: Option<f64>,
    pub other_scores: BTreeMap<String, f64>,
    pub grant_type: String,
    pub section: Option<String>,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>, ic_score: Option<f64>) -> Self {
        Document {
            id: id.into(),
            text: text.into(),
            ic_score,
            other_scores: BTreeMap::new(),
            grant_type: String::new(),
            section: None,
        }
    }

    pub fn with_grant_type(mut self, grant_type: impl Into<String>) -> Self {
        self.grant_type = grant_type.into();
        self
    }

    pub fn with_section(mut self, section: impl Into<String>) -> Self {
        self.section = Some(section.into());
        self
    }

    /// Score present and at least [`MIN_VALID_SCORE`].
    pub fn has_valid_score(&self) -> bool {
        matches!(self.ic_score, Some(s) if s >= MIN_VALID_SCORE)
    }

    fn to_record(&self) -> Record {
        let mut scores = self.other_scores.clone();
        if let Some(ic) = self.ic_score {
            scores.insert(IC_KEY.to_string(), ic);
        }
        Record {
            id: self.id.clone(),
            text: self.text.clone(),
            scores,
            grant_type: self.grant_type.clone(),
            section: self.section.clone(),
        }
    }

    fn from_record(rec: Record) -> std::result::Result<Self, String> {
        if rec.id.is_empty() {
            return Err("empty id".into());
        }
        let mut scores = rec.scores;
        let ic_score = scores.remove(IC_KEY);
        if let Some(ic) = ic_score {
            if !ic.is_finite() || !(0.0..=7.0).contains(&ic) {
                return Err(format!("ic score {ic} outside [0, 7]"));
            }
        }
        Ok(Document {
            id: rec.id,
            text: rec.text,
            ic_score,
            other_scores: scores,
            grant_type: rec.grant_type,
            section: rec.section,
        })
    }
}

/// On-disk line layout.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    id: String,
    text: String,
    scores: BTreeMap<String, f64>,
    grant_type: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    section: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub source: String,
    pub loaded_at_unix: u64,
}

impl Provenance {
    pub fn now(source: impl Into<String>) -> Self {
        let loaded_at_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Provenance {
            source: source.into(),
            loaded_at_unix,
        }
    }
}

/// Ordered, id-unique collection of documents. Iteration order is load order.
#[derive(Debug, Clone)]
pub struct Corpus {
    documents: Vec<Document>,
    index: HashMap<String, usize>,
    provenance: Provenance,
}

impl Corpus {
    pub fn new(documents: Vec<Document>, provenance: Provenance) -> Result<Self> {
        let mut index = HashMap::with_capacity(documents.len());
        for (pos, doc) in documents.iter().enumerate() {
            if doc.id.is_empty() {
                return Err(Error::InvalidDocument(format!("document {pos} has an empty id")));
            }
            if index.insert(doc.id.clone(), pos).is_some() {
                return Err(Error::DuplicateId(doc.id.clone()));
            }
        }
        Ok(Corpus {
            documents,
            index,
            provenance,
        })
    }

    /// Subset of an existing corpus; ids are already known to be unique.
    fn derived(&self, documents: Vec<Document>) -> Corpus {
        let index = documents
            .iter()
            .enumerate()
            .map(|(i, d)| (d.id.clone(), i))
            .collect();
        Corpus {
            documents,
            index,
            provenance: self.provenance.clone(),
        }
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Document> {
        self.documents.iter()
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.index.get(id).map(|&i| &self.documents[i])
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Serializes one document per line in the canonical layout
    /// (`scores` keys sorted, `section` omitted when absent).
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for doc in &self.documents {
            out.push_str(&serde_json::to_string(&doc.to_record()).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut file = fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        file.write_all(self.to_jsonl().as_bytes())
            .map_err(|e| Error::io(path.display().to_string(), e))
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a Document;
    type IntoIter = std::slice::Iter<'a, Document>;

    fn into_iter(self) -> Self::IntoIter {
        self.documents.iter()
    }
}

/// Parses JSONL text. Line numbers in errors are 1-based; blank lines are skipped.
pub fn parse_corpus(reader: impl BufRead, source: &str) -> Result<Corpus> {
    let mut documents = Vec::new();
    let mut seen = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(source, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
            line: line_no,
            message: e.to_string(),
        })?;
        let doc = Document::from_record(record).map_err(|message| Error::MalformedLine {
            line: line_no,
            message,
        })?;
        if seen.insert(doc.id.clone(), line_no).is_some() {
            return Err(Error::DuplicateId(doc.id));
        }
        documents.push(doc);
    }
    Corpus::new(documents, Provenance::now(source))
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let file = fs::File::open(path).map_err(|e| Error::io(name.clone(), e))?;
    parse_corpus(BufReader::new(file), &name)
}

/// Keeps documents whose IC score is present and at least 1.0.
pub fn filter_valid(corpus: &Corpus) -> Corpus {
    corpus.derived(
        corpus
            .iter()
            .filter(|d| d.has_valid_score())
            .cloned()
            .collect(),
    )
}

/// Keeps documents matching every provided filter, in order.
pub fn filter_by(corpus: &Corpus, grant_type: Option<&str>, section: Option<&str>) -> Corpus {
    corpus.derived(
        corpus
            .iter()
            .filter(|d| grant_type.is_none_or(|g| d.grant_type == g))
            .filter(|d| section.is_none_or(|s| d.section.as_deref() == Some(s)))
            .cloned()
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreStatistics {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub median: f64,
    pub mode: f64,
    pub min: f64,
    pub max: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
}

/// Nearest-rank percentile of an ascending slice: the value at 1-based rank
/// `ceil(p * n)`, clamped to `[1, n]`.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "nearest_rank on empty slice");
    let n = sorted.len();
    // the tolerance keeps products like 0.35 * 20 = 7.000000000000001 at rank 7
    let rank = (p * n as f64 - 1e-9).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Population statistics over the valid IC scores of `corpus`.
pub fn compute_statistics(corpus: &Corpus) -> Result<ScoreStatistics> {
    let scores: Vec<f64> = corpus
        .iter()
        .filter(|d| d.has_valid_score())
        .filter_map(|d| d.ic_score)
        .collect();
    statistics_of(&scores)
}

pub fn statistics_of(scores: &[f64]) -> Result<ScoreStatistics> {
    if scores.is_empty() {
        return Err(Error::NoValidScores);
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let var = sorted.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;

    // Runs over the sorted list; strict `>` keeps the smaller value on ties.
    let (mut mode, mut best_run) = (sorted[0], 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|&&v| v == sorted[i]).count();
        if j > best_run {
            best_run = j;
            mode = sorted[i];
        }
        i += j;
    }

    let q50 = nearest_rank(&sorted, 0.5);
    Ok(ScoreStatistics {
        count: sorted.len(),
        mean,
        std: var.sqrt(),
        median: q50,
        mode,
        min: sorted[0],
        max: sorted[sorted.len() - 1],
        q25: nearest_rank(&sorted, 0.25),
        q50,
        q75: nearest_rank(&sorted, 0.75),
    })
}
