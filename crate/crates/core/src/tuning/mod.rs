//! Bayesian hyperparameter search: random initial exploration followed by
//! GP-UCB acquisitions, scored by stratified k-fold cross-validated accuracy.

mod gp;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::{Class, ClassifierKind, Dataset, Hyperparams, Model};

pub use gp::{gp_fit, matern52, GpPosterior, LENGTH_SCALE, NOISE_VARIANCE, SIGNAL_VARIANCE};

/// Candidates scored per acquisition before local refinement.
pub const ACQUISITION_CANDIDATES: usize = 1000;
const REFINE_STARTS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDim {
    pub name: String,
    pub low: f64,
    pub high: f64,
    pub integer: bool,
}

impl ParamDim {
    pub fn real(name: &str, low: f64, high: f64) -> Self {
        ParamDim {
            name: name.into(),
            low,
            high,
            integer: false,
        }
    }

    pub fn integer(name: &str, low: f64, high: f64) -> Self {
        ParamDim {
            integer: true,
            ..ParamDim::real(name, low, high)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpace {
    dims: Vec<ParamDim>,
}

impl ParamSpace {
    pub fn new(dims: Vec<ParamDim>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidParam("parameter space has no dimensions".into()));
        }
        for (i, d) in dims.iter().enumerate() {
            if !(d.low < d.high) {
                return Err(Error::InvalidParam(format!("dimension `{}` needs low < high", d.name)));
            }
            if dims[..i].iter().any(|o| o.name == d.name) {
                return Err(Error::InvalidParam(format!("duplicate dimension `{}`", d.name)));
            }
        }
        Ok(ParamSpace { dims })
    }

    /// Random-forest search bounds.
    pub fn forest() -> Self {
        ParamSpace::new(vec![
            ParamDim::integer("max_depth", 5.0, 60.0),
            ParamDim::integer("min_samples_split", 10.0, 100.0),
            ParamDim::real("max_features", 0.1, 0.999),
            ParamDim::integer("min_samples_leaf", 10.0, 50.0),
            ParamDim::integer("n_estimators", 100.0, 400.0),
        ])
        .expect("static bounds are valid")
    }

    /// Decision-tree search bounds.
    pub fn tree() -> Self {
        ParamSpace::new(vec![
            ParamDim::integer("max_depth", 3.0, 10.0),
            ParamDim::integer("min_samples_split", 3.0, 10.0),
            ParamDim::real("max_features", 0.1, 0.999),
            ParamDim::integer("min_samples_leaf", 3.0, 10.0),
        ])
        .expect("static bounds are valid")
    }

    pub fn for_classifier(kind: ClassifierKind) -> Self {
        match kind {
            ClassifierKind::DecisionTree => ParamSpace::tree(),
            ClassifierKind::RandomForest => ParamSpace::forest(),
        }
    }

    pub fn dims(&self) -> &[ParamDim] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn to_unit(&self, point: &[f64]) -> Vec<f64> {
        self.dims
            .iter()
            .zip(point)
            .map(|(d, &x)| (x - d.low) / (d.high - d.low))
            .collect()
    }

    pub fn from_unit(&self, unit: &[f64]) -> Vec<f64> {
        self.dims
            .iter()
            .zip(unit)
            .map(|(d, &u)| (d.low + u.clamp(0.0, 1.0) * (d.high - d.low)).clamp(d.low, d.high))
            .collect()
    }

    /// Rounds integer dimensions half-up and clamps into bounds.
    pub fn round(&self, point: &[f64]) -> Vec<f64> {
        self.dims
            .iter()
            .zip(point)
            .map(|(d, &x)| {
                let x = if d.integer { (x + 0.5).floor() } else { x };
                x.clamp(d.low, d.high)
            })
            .collect()
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dims.len()
            && self
                .dims
                .iter()
                .zip(point)
                .all(|(d, &x)| x >= d.low && x <= d.high && (!d.integer || x.fract() == 0.0))
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Vec<f64> {
        let unit: Vec<f64> = (0..self.dims.len()).map(|_| rng.random::<f64>()).collect();
        self.from_unit(&unit)
    }

    /// Overrides the named fields of `base` with the point's coordinates.
    pub fn hyperparams(&self, point: &[f64], base: &Hyperparams) -> Result<Hyperparams> {
        let mut p = base.clone();
        for (d, &x) in self.dims.iter().zip(point) {
            match d.name.as_str() {
                "max_depth" => p.max_depth = x as usize,
                "min_samples_split" => p.min_samples_split = x as usize,
                "min_samples_leaf" => p.min_samples_leaf = x as usize,
                "max_features" => p.max_features = x,
                "n_estimators" => p.n_estimators = x as usize,
                other => return Err(Error::InvalidParam(format!("unknown hyperparameter `{other}`"))),
            }
        }
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub point: Vec<f64>,
    pub score: f64,
    /// The objective failed here and the score was recorded as 0.
    #[serde(default)]
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TuneConfig {
    pub init_points: usize,
    pub n_iter: usize,
    pub kappa: f64,
    pub seed: u64,
    pub folds: usize,
}

impl Default for TuneConfig {
    fn default() -> Self {
        TuneConfig {
            init_points: 5,
            n_iter: 25,
            kappa: 2.576,
            seed: 0,
            folds: 10,
        }
    }
}

impl TuneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.init_points < 1 {
            return Err(Error::InvalidParam("init_points must be >= 1".into()));
        }
        if !(self.kappa > 0.0) {
            return Err(Error::InvalidParam("kappa must be > 0".into()));
        }
        if self.folds < 2 {
            return Err(Error::InvalidParam("folds must be >= 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best_point: Vec<f64>,
    pub best_score: f64,
    pub history: Vec<Observation>,
}

impl TuneResult {
    /// `iteration,<param...>,score` with one row per evaluation.
    pub fn to_csv(&self, space: &ParamSpace) -> String {
        let mut out = String::from("iteration");
        for d in space.dims() {
            out.push(',');
            out.push_str(&d.name);
        }
        out.push_str(",score\n");
        for (i, obs) in self.history.iter().enumerate() {
            out.push_str(&i.to_string());
            for x in &obs.point {
                out.push_str(&format!(",{x}"));
            }
            out.push_str(&format!(",{}\n", obs.score));
        }
        out
    }
}

/// Partitions sample indices into `k` folds, dealing each class's shuffled
/// indices round-robin so per-class fold counts differ by at most one.
pub fn stratified_kfold(labels: &[Class], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidParam(format!("k must be >= 2, got {k}")));
    }
    if k > labels.len() {
        return Err(Error::InvalidParam(format!("k = {k} exceeds {} samples", labels.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for class in [Class::Low, Class::High] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            folds[next % k].push(i);
            next += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Mean held-out accuracy over `k` stratified folds.
pub fn cross_val_score(
    data: &Dataset,
    kind: ClassifierKind,
    params: &Hyperparams,
    k: usize,
    seed: u64,
) -> Result<f64> {
    let folds = stratified_kfold(data.labels(), k, seed)?;
    let scores: Vec<f64> = folds
        .par_iter()
        .enumerate()
        .map(|(f, test)| {
            let train: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|&(g, _)| g != f)
                .flat_map(|(_, idx)| idx.iter().copied())
                .collect();
            let mut train_idx = train;
            train_idx.sort_unstable();
            let model = Model::fit(kind, &data.subset(&train_idx), params)?;
            let correct = test
                .iter()
                .map(|&i| model.predict(&data.rows()[i]).map(|c| c == data.labels()[i]))
                .collect::<Result<Vec<bool>>>()?
                .into_iter()
                .filter(|&ok| ok)
                .count();
            Ok(correct as f64 / test.len() as f64)
        })
        .collect::<Result<_>>()?;
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Maximises the UCB of `gp` over `space`: seeded uniform candidates, then a
/// shrinking coordinate search from the best few. Returns a point in the
/// original (unrounded) coordinates.
pub fn acquire_next(gp: &GpPosterior, space: &ParamSpace, kappa: f64, rng: &mut impl Rng) -> Vec<f64> {
    let d = space.len();
    let mut scored: Vec<(f64, Vec<f64>)> = (0..ACQUISITION_CANDIDATES)
        .map(|_| {
            let u: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
            (gp.ucb(&u, kappa), u)
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    scored.truncate(REFINE_STARTS);

    let mut best = scored[0].clone();
    for (mut value, mut u) in scored {
        let mut step = 0.05;
        while step > 1e-4 {
            let mut improved = false;
            for j in 0..d {
                for dir in [-1.0, 1.0] {
                    let mut cand = u.clone();
                    cand[j] = (cand[j] + dir * step).clamp(0.0, 1.0);
                    let v = gp.ucb(&cand, kappa);
                    if v > value {
                        value = v;
                        u = cand;
                        improved = true;
                    }
                }
            }
            if !improved {
                step /= 2.0;
            }
        }
        if value > best.0 {
            best = (value, u);
        }
    }
    space.from_unit(&best.1)
}

/// Runs `init_points` random evaluations followed by `n_iter` GP-UCB
/// evaluations. Integer dimensions are rounded before evaluation and the
/// rounded point is what gets recorded. A failing objective scores 0.
///
/// Scores are standardised before each GP fit so the unit-variance prior
/// matches the objective's scale.
pub fn optimize<E>(
    mut objective: impl FnMut(&[f64]) -> std::result::Result<f64, E>,
    space: &ParamSpace,
    config: &TuneConfig,
) -> Result<TuneResult> {
    if !(config.init_points >= 1 && config.kappa > 0.0) {
        return Err(Error::InvalidParam("init_points must be >= 1 and kappa > 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut history: Vec<Observation> = Vec::with_capacity(config.init_points + config.n_iter);
    let mut evaluate = |point: Vec<f64>, history: &mut Vec<Observation>| {
        let point = space.round(&point);
        let (score, failed) = match objective(&point) {
            Ok(s) if s.is_finite() => (s, false),
            _ => (0.0, true),
        };
        history.push(Observation { point, score, failed });
    };

    for _ in 0..config.init_points {
        let p = space.sample(&mut rng);
        evaluate(p, &mut history);
    }
    for _ in 0..config.n_iter {
        let units: Vec<Vec<f64>> = history.iter().map(|o| space.to_unit(&o.point)).collect();
        let scores: Vec<f64> = history.iter().map(|o| o.score).collect();
        let mean = scores.iter().sum::<f64>() / scores.len() as f64;
        let sd = (scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / scores.len() as f64).sqrt();
        let scale = if sd > 1e-12 { sd } else { 1.0 };
        let targets: Vec<f64> = scores.iter().map(|s| (s - mean) / scale).collect();
        let gp = gp_fit(&units, &targets)?;
        let next = acquire_next(&gp, space, config.kappa, &mut rng);
        evaluate(next, &mut history);
    }

    // ties keep the earliest evaluation
    let best = history
        .iter()
        .fold(None::<&Observation>, |acc, o| match acc {
            Some(b) if b.score >= o.score => acc,
            _ => Some(o),
        })
        .expect("at least one evaluation");
    Ok(TuneResult {
        best_point: best.point.clone(),
        best_score: best.score,
        history,
    })
}

/// Tunes a classifier's hyperparameters by cross-validated accuracy.
pub fn tune_classifier(
    data: &Dataset,
    kind: ClassifierKind,
    base: &Hyperparams,
    config: &TuneConfig,
) -> Result<(TuneResult, Hyperparams)> {
    config.validate()?;
    let space = ParamSpace::for_classifier(kind);
    let result = optimize(
        |point| {
            let params = space.hyperparams(point, base)?;
            cross_val_score(data, kind, &params, config.folds, config.seed)
        },
        &space,
        config,
    )?;
    let best = space.hyperparams(&result.best_point, base)?;
    Ok((result, best))
}
