//! CART decision trees and random forests for binary Low/High classification.
//!
//! Splits use Gini impurity with midpoint thresholds between consecutive
//! distinct feature values; absent sparse entries read as 0.0. All ties break
//! deterministically (lowest feature, then lowest threshold; Low on votes),
//! and forest randomness is derived from `(seed, tree index)` only, so trees
//! can be grown in parallel without changing the result.

use std::fmt;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoding::{SparseVector, Vocabulary};
use crate::error::{Error, Result};

/// Gains at or below this are treated as zero.
const GAIN_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Class {
    Low,
    High,
}

impl Class {
    pub fn index(self) -> usize {
        match self {
            Class::Low => 0,
            Class::High => 1,
        }
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Class::Low => "low",
            Class::High => "high",
        })
    }
}

/// Encoded documents with binary labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    rows: Vec<SparseVector>,
    labels: Vec<Class>,
    n_features: usize,
}

impl Dataset {
    pub fn new(rows: Vec<SparseVector>, labels: Vec<Class>, n_features: usize) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::InvalidParam(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        if let Some(bad) = rows.iter().find(|r| r.dim() != n_features) {
            return Err(Error::DimensionMismatch {
                expected: n_features,
                actual: bad.dim(),
            });
        }
        Ok(Dataset {
            rows,
            labels,
            n_features,
        })
    }

    /// Dense rows, mainly for tests and small fixtures.
    pub fn from_dense(rows: &[Vec<f64>], labels: Vec<Class>) -> Result<Self> {
        let n_features = rows.first().map_or(0, Vec::len);
        Dataset::new(rows.iter().map(|r| SparseVector::from_dense(r)).collect(), labels, n_features)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn rows(&self) -> &[SparseVector] {
        &self.rows
    }

    pub fn labels(&self) -> &[Class] {
        &self.labels
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            n_features: self.n_features,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// Fraction of features drawn as split candidates at each node.
    pub max_features: f64,
    pub n_estimators: usize,
    pub seed: u64,
    /// Forest only: draw a bootstrap resample per tree.
    #[serde(default = "default_true")]
    pub bootstrap: bool,
}

fn default_true() -> bool {
    true
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            max_depth: usize::MAX,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: 1.0,
            n_estimators: 100,
            seed: 0,
            bootstrap: true,
        }
    }
}

impl Hyperparams {
    /// Best random-forest setting reported for the unigram IDF-presence model.
    pub fn tuned_forest() -> Self {
        Hyperparams {
            max_depth: 22,
            min_samples_split: 67,
            min_samples_leaf: 11,
            max_features: 0.9931,
            n_estimators: 102,
            seed: 0,
            bootstrap: true,
        }
    }

    /// Mid-range decision-tree setting within the tuning bounds for trees.
    pub fn default_tree() -> Self {
        Hyperparams {
            max_depth: 8,
            min_samples_split: 6,
            min_samples_leaf: 3,
            max_features: 1.0,
            n_estimators: 1,
            seed: 0,
            bootstrap: false,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParam(m));
        if self.max_depth < 1 {
            return bad("max_depth must be >= 1".into());
        }
        if self.min_samples_split < 2 {
            return bad(format!("min_samples_split must be >= 2, got {}", self.min_samples_split));
        }
        if self.min_samples_leaf < 1 {
            return bad("min_samples_leaf must be >= 1".into());
        }
        if !(self.max_features > 0.0 && self.max_features <= 1.0) {
            return bad(format!("max_features must be in (0, 1], got {}", self.max_features));
        }
        if self.n_estimators < 1 {
            return bad("n_estimators must be >= 1".into());
        }
        Ok(())
    }

    /// `ceil(max_features * n_features)`, at least 1.
    pub fn features_per_node(&self, n_features: usize) -> usize {
        ((self.max_features * n_features as f64).ceil() as usize).clamp(1, n_features.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Internal {
        feature: usize,
        threshold: f64,
        n_samples: usize,
        impurity: f64,
        gain: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        class: Class,
        class_counts: [usize; 2],
        n_samples: usize,
        impurity: f64,
    },
}

impl TreeNode {
    pub fn n_samples(&self) -> usize {
        match self {
            TreeNode::Internal { n_samples, .. } | TreeNode::Leaf { n_samples, .. } => *n_samples,
        }
    }

    /// Edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaves(&self) -> Vec<&TreeNode> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(node) = stack.pop() {
            match node {
                TreeNode::Leaf { .. } => out.push(node),
                TreeNode::Internal { left, right, .. } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        out
    }

    fn route(&self, v: &SparseVector) -> Class {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { class, .. } => return *class,
                TreeNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => node = if v.get(*feature) <= *threshold { left } else { right },
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceVector {
    values: Vec<f64>,
}

impl ImportanceVector {
    /// Scales to unit sum, leaving an all-zero vector as is.
    pub fn normalized(mut values: Vec<f64>) -> Self {
        let total: f64 = values.iter().sum();
        if total > 0.0 {
            values.iter_mut().for_each(|v| *v /= total);
        }
        ImportanceVector { values }
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

    pub fn nonzero_count(&self) -> usize {
        self.values.iter().filter(|&&v| v > 0.0).count()
    }
}

pub fn gini(class_counts: [usize; 2]) -> Result<f64> {
    let n = class_counts[0] + class_counts[1];
    if n == 0 {
        return Err(Error::InvalidParam("gini of an empty node".into()));
    }
    Ok(gini_unchecked(class_counts[0] as f64, class_counts[1] as f64))
}

fn gini_unchecked(low: f64, high: f64) -> f64 {
    let n = low + high;
    let (p, q) = (low / n, high / n);
    1.0 - p * p - q * q
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Which features a node may split on.
enum Candidates {
    All,
    /// Sorted feature indices to consider.
    Only(Vec<usize>),
    /// Sorted feature indices to skip.
    Except(Vec<usize>),
}

impl Candidates {
    fn allows(&self, f: usize) -> bool {
        match self {
            Candidates::All => true,
            Candidates::Only(v) => v.binary_search(&f).is_ok(),
            Candidates::Except(v) => v.binary_search(&f).is_err(),
        }
    }

    /// Uniform draw of `k` distinct features out of `n`. Large draws sample
    /// the complement instead, which has the same distribution.
    fn draw(n: usize, k: usize, rng: &mut impl Rng) -> Self {
        if k >= n {
            Candidates::All
        } else if k <= n / 2 {
            let mut v = index::sample(rng, n, k).into_vec();
            v.sort_unstable();
            Candidates::Only(v)
        } else {
            let mut v = index::sample(rng, n, n - k).into_vec();
            v.sort_unstable();
            Candidates::Except(v)
        }
    }
}

fn class_counts(data: &Dataset, samples: &[usize]) -> [usize; 2] {
    let mut counts = [0usize; 2];
    for &i in samples {
        counts[data.labels[i].index()] += 1;
    }
    counts
}

/// Best Gini split among `candidates` over the node's `samples` (row indices,
/// repeats allowed). Returns `None` when no split with positive gain
/// satisfies `min_samples_leaf`.
pub fn find_best_split(
    data: &Dataset,
    samples: &[usize],
    candidates: &[usize],
    min_samples_leaf: usize,
) -> Option<SplitChoice> {
    let mut sorted = candidates.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    best_split(data, samples, &Candidates::Only(sorted), min_samples_leaf)
}

fn best_split(data: &Dataset, samples: &[usize], candidates: &Candidates, min_leaf: usize) -> Option<SplitChoice> {
    let parent = class_counts(data, samples);
    let n = samples.len();
    if n < 2 || parent[0] == 0 || parent[1] == 0 {
        return None;
    }
    let parent_impurity = gini_unchecked(parent[0] as f64, parent[1] as f64);
    let nf = n as f64;

    // Nonzero (feature, value, class) triples; every other entry is 0.0.
    let mut triples: Vec<(u32, f64, u8)> = Vec::new();
    for &i in samples {
        let class = data.labels[i].index() as u8;
        for &(f, v) in data.rows[i].entries() {
            if candidates.allows(f as usize) {
                triples.push((f, v, class));
            }
        }
    }
    triples.sort_unstable_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let mut best: Option<SplitChoice> = None;
    let mut groups: Vec<(f64, [usize; 2])> = Vec::new();
    let mut start = 0;
    while start < triples.len() {
        let feature = triples[start].0;
        let end = start + triples[start..].iter().take_while(|t| t.0 == feature).count();

        // distinct values with per-class counts, zeros merged in order
        groups.clear();
        let mut nonzero = [0usize; 2];
        for &(_, v, c) in &triples[start..end] {
            nonzero[c as usize] += 1;
            match groups.last_mut() {
                Some((last, counts)) if *last == v => counts[c as usize] += 1,
                _ => {
                    let mut counts = [0; 2];
                    counts[c as usize] = 1;
                    groups.push((v, counts));
                }
            }
        }
        let zeros = [parent[0] - nonzero[0], parent[1] - nonzero[1]];
        if zeros[0] + zeros[1] > 0 {
            let pos = groups.partition_point(|g| g.0 < 0.0);
            groups.insert(pos, (0.0, zeros));
        }

        let mut left = [0usize; 2];
        for w in groups.windows(2) {
            left[0] += w[0].1[0];
            left[1] += w[0].1[1];
            let n_left = left[0] + left[1];
            let n_right = n - n_left;
            if n_left < min_leaf || n_right < min_leaf {
                continue;
            }
            let right = [parent[0] - left[0], parent[1] - left[1]];
            let gain = parent_impurity
                - (n_left as f64 / nf) * gini_unchecked(left[0] as f64, left[1] as f64)
                - (n_right as f64 / nf) * gini_unchecked(right[0] as f64, right[1] as f64);
            if gain > GAIN_EPS && best.is_none_or(|b| gain > b.gain + GAIN_EPS) {
                best = Some(SplitChoice {
                    feature: feature as usize,
                    threshold: (w[0].0 + w[1].0) / 2.0,
                    gain,
                });
            }
        }
        start = end;
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTreeModel {
    pub root: TreeNode,
    pub params: Hyperparams,
    pub n_features: usize,
    pub importances: ImportanceVector,
    /// Unnormalised sample-weighted gains per feature.
    raw_importances: Vec<f64>,
}

impl DecisionTreeModel {
    pub fn predict(&self, v: &SparseVector) -> Result<Class> {
        if v.dim() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                actual: v.dim(),
            });
        }
        Ok(self.root.route(v))
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }
}

struct TreeBuilder<'a, R> {
    data: &'a Dataset,
    params: &'a Hyperparams,
    rng: &'a mut R,
    k: usize,
    n_root: f64,
    raw: Vec<f64>,
}

impl<R: Rng> TreeBuilder<'_, R> {
    fn build(&mut self, samples: Vec<usize>, depth: usize) -> TreeNode {
        let counts = class_counts(self.data, &samples);
        let n = samples.len();
        let impurity = gini_unchecked(counts[0] as f64, counts[1] as f64);
        let leaf = || TreeNode::Leaf {
            class: if counts[1] > counts[0] { Class::High } else { Class::Low },
            class_counts: counts,
            n_samples: n,
            impurity,
        };
        if depth >= self.params.max_depth || n < self.params.min_samples_split || counts[0] == 0 || counts[1] == 0 {
            return leaf();
        }
        let candidates = Candidates::draw(self.data.n_features, self.k, self.rng);
        let Some(split) = best_split(self.data, &samples, &candidates, self.params.min_samples_leaf) else {
            return leaf();
        };
        let (left, right): (Vec<usize>, Vec<usize>) = samples
            .iter()
            .partition(|&&i| self.data.rows[i].get(split.feature) <= split.threshold);
        self.raw[split.feature] += (n as f64 / self.n_root) * split.gain;
        let left = self.build(left, depth + 1);
        let right = self.build(right, depth + 1);
        TreeNode::Internal {
            feature: split.feature,
            threshold: split.threshold,
            n_samples: n,
            impurity,
            gain: split.gain,
            left: Box::new(left),
            right: Box::new(right),
        }
    }
}

fn fit_on_samples(data: &Dataset, samples: Vec<usize>, params: &Hyperparams, rng: &mut impl Rng) -> DecisionTreeModel {
    let mut builder = TreeBuilder {
        data,
        params,
        k: params.features_per_node(data.n_features),
        n_root: samples.len() as f64,
        raw: vec![0.0; data.n_features],
        rng,
    };
    let root = builder.build(samples, 0);
    let raw = builder.raw;
    DecisionTreeModel {
        root,
        params: params.clone(),
        n_features: data.n_features,
        importances: ImportanceVector::normalized(raw.clone()),
        raw_importances: raw,
    }
}

/// Grows one tree on all of `train`, drawing node feature subsets from `rng`.
pub fn fit_tree(train: &Dataset, params: &Hyperparams, rng: &mut impl Rng) -> Result<DecisionTreeModel> {
    params.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyInput("cannot fit a tree on an empty training set"));
    }
    Ok(fit_on_samples(train, (0..train.len()).collect(), params, rng))
}

/// Tree fit seeded from `params.seed`.
pub fn fit_tree_seeded(train: &Dataset, params: &Hyperparams) -> Result<DecisionTreeModel> {
    fit_tree(train, params, &mut ChaCha8Rng::seed_from_u64(params.seed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForestModel {
    pub trees: Vec<DecisionTreeModel>,
    pub params: Hyperparams,
    pub n_features: usize,
    pub importances: ImportanceVector,
}

/// Per-tree stream: ChaCha keyed by the forest seed, stream = tree index.
fn tree_rng(seed: u64, tree: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree as u64);
    rng
}

pub fn fit_forest(train: &Dataset, params: &Hyperparams) -> Result<RandomForestModel> {
    params.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyInput("cannot fit a forest on an empty training set"));
    }
    let n = train.len();
    let trees: Vec<DecisionTreeModel> = (0..params.n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = tree_rng(params.seed, t);
            let samples = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            fit_on_samples(train, samples, params, &mut rng)
        })
        .collect();
    let mut mean = vec![0.0; train.n_features];
    for tree in &trees {
        for (m, r) in mean.iter_mut().zip(&tree.raw_importances) {
            *m += r;
        }
    }
    mean.iter_mut().for_each(|m| *m /= trees.len() as f64);
    Ok(RandomForestModel {
        trees,
        params: params.clone(),
        n_features: train.n_features,
        importances: ImportanceVector::normalized(mean),
    })
}

impl RandomForestModel {
    /// Majority vote; an exact tie goes to Low.
    pub fn predict(&self, v: &SparseVector) -> Result<Class> {
        if v.dim() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                actual: v.dim(),
            });
        }
        let high = self.trees.iter().filter(|t| t.root.route(v) == Class::High).count();
        Ok(if 2 * high > self.trees.len() { Class::High } else { Class::Low })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    #[serde(alias = "dt")]
    DecisionTree,
    #[serde(alias = "rf")]
    RandomForest,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 2] = [ClassifierKind::DecisionTree, ClassifierKind::RandomForest];
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassifierKind::DecisionTree => "dt",
            ClassifierKind::RandomForest => "rf",
        })
    }
}

impl std::str::FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dt" | "tree" | "decision_tree" => Ok(ClassifierKind::DecisionTree),
            "rf" | "forest" | "random_forest" => Ok(ClassifierKind::RandomForest),
            _ => Err(Error::InvalidParam(format!("unknown classifier `{s}`"))),
        }
    }
}

/// A fitted tree or forest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "classifier", rename_all = "snake_case")]
pub enum Model {
    DecisionTree(DecisionTreeModel),
    RandomForest(RandomForestModel),
}

impl Model {
    pub fn fit(kind: ClassifierKind, train: &Dataset, params: &Hyperparams) -> Result<Model> {
        match kind {
            ClassifierKind::DecisionTree => fit_tree_seeded(train, params).map(Model::DecisionTree),
            ClassifierKind::RandomForest => fit_forest(train, params).map(Model::RandomForest),
        }
    }

    pub fn kind(&self) -> ClassifierKind {
        match self {
            Model::DecisionTree(_) => ClassifierKind::DecisionTree,
            Model::RandomForest(_) => ClassifierKind::RandomForest,
        }
    }

    pub fn predict(&self, v: &SparseVector) -> Result<Class> {
        match self {
            Model::DecisionTree(m) => m.predict(v),
            Model::RandomForest(m) => m.predict(v),
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            Model::DecisionTree(m) => m.n_features,
            Model::RandomForest(m) => m.n_features,
        }
    }

    pub fn importances(&self) -> &ImportanceVector {
        compute_importances(self)
    }
}

/// Mean-decrease-impurity importances, normalised to unit sum.
pub fn compute_importances(model: &Model) -> &ImportanceVector {
    match model {
        Model::DecisionTree(m) => &m.importances,
        Model::RandomForest(m) => &m.importances,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopFeatures {
    pub features: Vec<(String, f64)>,
    pub nonzero_count: usize,
}

/// Up to `k` features with positive weight, descending, ties by term.
pub fn top_k_features(importances: &ImportanceVector, vocab: &Vocabulary, k: usize) -> Result<TopFeatures> {
    if k < 1 {
        return Err(Error::InvalidParam("k must be >= 1".into()));
    }
    if importances.len() != vocab.len() {
        return Err(Error::DimensionMismatch {
            expected: vocab.len(),
            actual: importances.len(),
        });
    }
    let mut ranked: Vec<(usize, f64)> = importances
        .values()
        .iter()
        .copied()
        .enumerate()
        .filter(|&(_, w)| w > 0.0)
        .collect();
    let nonzero_count = ranked.len();
    // vocabulary order is lexicographic, so index order breaks ties by term
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(k);
    Ok(TopFeatures {
        features: ranked
            .into_iter()
            .map(|(i, w)| (vocab.term(i).to_string(), w))
            .collect(),
        nonzero_count,
    })
}
