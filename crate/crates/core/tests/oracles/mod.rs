//! Independent brute-force references used by the integration and
//! acceptance tests. Everything here works on dense rows and recomputes
//! impurities from scratch, sharing no code with the library's split search.

#![allow(dead_code)]

pub const EPS: f64 = 1e-12;

/// Gini impurity straight from the label list (true = High).
pub fn gini(labels: &[bool]) -> f64 {
    let n = labels.len() as f64;
    let high = labels.iter().filter(|&&l| l).count() as f64;
    let p = high / n;
    1.0 - p * p - (1.0 - p) * (1.0 - p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSplit {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Enumerates every (feature, midpoint) pair; keeps the first strictly
/// better gain so ties resolve to the lowest feature, then threshold.
pub fn best_split(rows: &[Vec<f64>], labels: &[bool], min_leaf: usize) -> Option<OracleSplit> {
    let n = rows.len();
    if n < 2 {
        return None;
    }
    let parent = gini(labels);
    let mut best: Option<OracleSplit> = None;
    for f in 0..rows[0].len() {
        let mut values: Vec<f64> = rows.iter().map(|r| r[f]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for pair in values.windows(2) {
            let t = (pair[0] + pair[1]) / 2.0;
            let left: Vec<bool> = (0..n).filter(|&i| rows[i][f] <= t).map(|i| labels[i]).collect();
            let right: Vec<bool> = (0..n).filter(|&i| rows[i][f] > t).map(|i| labels[i]).collect();
            if left.len() < min_leaf || right.len() < min_leaf {
                continue;
            }
            let gain = parent
                - left.len() as f64 / n as f64 * gini(&left)
                - right.len() as f64 / n as f64 * gini(&right);
            if gain > EPS && best.map_or(true, |b| gain > b.gain + EPS) {
                best = Some(OracleSplit { feature: f, threshold: t, gain });
            }
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub enum OracleTree {
    Leaf(bool),
    Split {
        feature: usize,
        threshold: f64,
        left: Box<OracleTree>,
        right: Box<OracleTree>,
    },
}

/// Greedy CART grown with [`best_split`] and the same stopping rules as the
/// library (depth, min split size, purity, no positive gain).
pub fn grow(rows: &[Vec<f64>], labels: &[bool], depth: usize, max_depth: usize, min_split: usize, min_leaf: usize) -> OracleTree {
    let high = labels.iter().filter(|&&l| l).count();
    let majority = high * 2 > labels.len();
    let pure = high == 0 || high == labels.len();
    if depth >= max_depth || labels.len() < min_split || pure {
        return OracleTree::Leaf(majority);
    }
    match best_split(rows, labels, min_leaf) {
        None => OracleTree::Leaf(majority),
        Some(s) => {
            let (mut lr, mut ll, mut rr, mut rl) = (vec![], vec![], vec![], vec![]);
            for (r, &l) in rows.iter().zip(labels) {
                if r[s.feature] <= s.threshold {
                    lr.push(r.clone());
                    ll.push(l);
                } else {
                    rr.push(r.clone());
                    rl.push(l);
                }
            }
            OracleTree::Split {
                feature: s.feature,
                threshold: s.threshold,
                left: Box::new(grow(&lr, &ll, depth + 1, max_depth, min_split, min_leaf)),
                right: Box::new(grow(&rr, &rl, depth + 1, max_depth, min_split, min_leaf)),
            }
        }
    }
}

/// Best training accuracy of any single threshold split (or no split).
pub fn best_stump_accuracy(rows: &[Vec<f64>], labels: &[bool]) -> f64 {
    let n = rows.len() as f64;
    let high = labels.iter().filter(|&&l| l).count() as f64;
    let mut best = high.max(n - high) / n;
    for f in 0..rows[0].len() {
        let mut values: Vec<f64> = rows.iter().map(|r| r[f]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for pair in values.windows(2) {
            let t = (pair[0] + pair[1]) / 2.0;
            for left_high in [false, true] {
                let correct = rows
                    .iter()
                    .zip(labels)
                    .filter(|(r, &l)| (if r[f] <= t { left_high } else { !left_high }) == l)
                    .count() as f64;
                best = best.max(correct / n);
            }
        }
    }
    best
}

/// Calls `visit` once per multiset of `n` (binary feature vector, label)
/// items over `d` features. Split gains do not depend on row order, so
/// multisets cover every dataset up to permutation.
pub fn for_each_binary_dataset(n: usize, d: usize, mut visit: impl FnMut(&[Vec<f64>], &[bool])) {
    let kinds = 1usize << (d + 1);
    let mut choice = vec![0usize; n];
    loop {
        let rows: Vec<Vec<f64>> = choice
            .iter()
            .map(|&c| (0..d).map(|b| ((c >> b) & 1) as f64).collect())
            .collect();
        let labels: Vec<bool> = choice.iter().map(|&c| (c >> d) & 1 == 1).collect();
        visit(&rows, &labels);
        // next nondecreasing sequence
        let mut i = n;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if choice[i] + 1 < kinds {
                let v = choice[i] + 1;
                for c in &mut choice[i..] {
                    *c = v;
                }
                break;
            }
        }
    }
}
