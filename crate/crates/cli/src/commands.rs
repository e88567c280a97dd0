use std::path::Path;

use anyhow::{Context, Result};
use grantmine_core::corpus::{compute_statistics, filter_by, load_corpus, Corpus};
use grantmine_core::harness::{
    corpus_median, generate_synthetic, median_proportion, prepare_training, resolve_split, run_cutoff_sweep,
    run_encoder_grid, run_moderate_sweep, synthetic_vocabulary, train_base_model, CutoffSpec, ModerateRange,
    TrainedPipeline,
};
use grantmine_core::tree::top_k_features;
use grantmine_core::tuning::{tune_classifier, ParamSpace};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::report::{eval_cells, num, opt_num, write_json, Artifacts, EVAL_COLUMNS};

/// A trained pipeline together with the configuration that produced it.
#[derive(Serialize, Deserialize)]
pub struct ModelArtifact {
    pub config_hash: String,
    pub seed: u64,
    pub config: RunConfig,
    pub pipeline: TrainedPipeline,
}

impl ModelArtifact {
    fn new(cfg: &RunConfig, pipeline: TrainedPipeline) -> Self {
        ModelArtifact {
            config_hash: cfg.hash(),
            seed: cfg.seed,
            config: cfg.echoed(),
            pipeline,
        }
    }

    fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading model {}", path.display()))?;
        let m: ModelArtifact = serde_json::from_str(&text).with_context(|| format!("parsing model {}", path.display()))?;
        if m.pipeline.model.n_features() != m.pipeline.vocabulary.len() {
            anyhow::bail!("model {} does not match its vocabulary", path.display());
        }
        Ok(m)
    }
}

fn corpus(cfg: &RunConfig) -> Result<Corpus> {
    let path = cfg.corpus_path()?;
    Ok(load_corpus(path)?)
}


pub fn stats(cfg: &RunConfig, grant_type: Option<&str>, section: Option<&str>) -> Result<()> {
    let corpus = filter_by(&corpus(cfg)?, grant_type, section);
    let s = compute_statistics(&corpus)?;
    println!("documents {}", corpus.len());
    println!("count     {}", s.count);
    for (name, v) in [
        ("mean", s.mean),
        ("std", s.std),
        ("median", s.median),
        ("mode", s.mode),
        ("min", s.min),
        ("max", s.max),
        ("q25", s.q25),
        ("q50", s.q50),
        ("q75", s.q75),
    ] {
        println!("{name:<9} {v:.4}");
    }
    Ok(())
}

#[derive(Serialize)]
struct SynthSummary {
    corpus: String,
    n_docs: usize,
    planted_terms: Vec<String>,
    statistics: grantmine_core::corpus::ScoreStatistics,
}

pub fn synth(cfg: &RunConfig) -> Result<()> {
    let art = Artifacts::new(cfg)?;
    let corpus = generate_synthetic(&cfg.synth)?;
    let path = art.path("synthetic.jsonl");
    corpus.write_jsonl(&path)?;
    let summary = SynthSummary {
        corpus: "synthetic.jsonl".into(),
        n_docs: corpus.len(),
        planted_terms: synthetic_vocabulary(&cfg.synth)?.planted,
        statistics: compute_statistics(&corpus)?,
    };
    art.json("synthetic.json", "synth", &summary)?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn cutoff_sweep(cfg: &RunConfig) -> Result<()> {
    let art = Artifacts::new(cfg)?;
    let corpus = corpus(cfg)?;
    let rows = run_cutoff_sweep(&corpus, &CutoffSpec::standard_sweep(), &cfg.settings(), cfg.seed, &art.hash)?;
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let acc = |i: usize| rows[i].report.as_ref().map_or(f64::NEG_INFINITY, |r| r.accuracy);
    order.sort_by(|&a, &b| acc(b).total_cmp(&acc(a)).then(a.cmp(&b)));
    let mut rank = vec![0; rows.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r + 1;
    }
    let mut header = vec!["rank", "low_pct", "high_pct", "low_threshold", "high_threshold", "n_train", "n_test"];
    header.extend(EVAL_COLUMNS);
    header.push("error");
    let table: Vec<Vec<String>> = rows
        .iter()
        .zip(&rank)
        .map(|(row, rank)| {
            let mut rec = vec![
                rank.to_string(),
                num(row.spec.low_pct),
                num(row.spec.high_pct),
                opt_num(row.low_threshold),
                opt_num(row.high_threshold),
                row.n_train.to_string(),
                row.n_test.to_string(),
            ];
            rec.extend(eval_cells(row.report.as_ref()));
            rec.push(row.error.clone().unwrap_or_default());
            rec
        })
        .collect();
    let path = art.csv("cutoff_sweep.csv", &header, &table)?;
    art.json("cutoff_sweep.json", "cutoff-sweep", &rows)?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn grid(cfg: &RunConfig) -> Result<()> {
    let art = Artifacts::new(cfg)?;
    let corpus = corpus(cfg)?;
    let rows = run_encoder_grid(&corpus, cfg.cutoff, &cfg.settings(), cfg.seed, &art.hash)?;
    let mut header = vec!["scheme", "classifier", "level", "prune", "n_features"];
    header.extend(EVAL_COLUMNS);
    header.extend(["best", "error"]);
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|row| {
            let mut rec = vec![
                row.scheme.to_string(),
                row.classifier.to_string(),
                row.level.to_string(),
                row.prune.min_total_occurrences.to_string(),
                row.n_features.to_string(),
            ];
            rec.extend(eval_cells(row.report.as_ref()));
            rec.push(row.best.to_string());
            rec.push(row.error.clone().unwrap_or_default());
            rec
        })
        .collect();
    let path = art.csv("grid.csv", &header, &table)?;
    art.json("grid.json", "grid", &rows)?;
    println!("wrote {}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    n_train: usize,
    n_heldout: usize,
    n_moderate: usize,
    n_features: usize,
    heldout: &'a grantmine_core::harness::EvaluationReport,
    final_test: &'a grantmine_core::harness::EvaluationReport,
}

fn evaluation_table(art: &Artifacts, name: &str, sets: &[(&str, &grantmine_core::harness::EvaluationReport)]) -> Result<()> {
    let mut header = vec!["eval_set", "n"];
    header.extend(EVAL_COLUMNS);
    let table: Vec<Vec<String>> = sets
        .iter()
        .map(|(set, r)| {
            let mut rec = vec![set.to_string(), r.confusion.total().to_string()];
            rec.extend(eval_cells(Some(r)));
            rec
        })
        .collect();
    art.csv(name, &header, &table)?;
    Ok(())
}

pub fn train(cfg: &RunConfig) -> Result<()> {
    let art = Artifacts::new(cfg)?;
    let corpus = corpus(cfg)?;
    let base = train_base_model(&corpus, cfg.cutoff, &cfg.selection, &cfg.pipeline(), cfg.seed, &art.hash)?;
    evaluation_table(&art, "train.csv", &[("heldout", &base.heldout), ("final_test", &base.final_test)])?;
    art.json(
        "train.json",
        "train",
        TrainSummary {
            n_train: base.split.train_ids.len(),
            n_heldout: base.split.heldout_test_ids.len(),
            n_moderate: base.split.moderate_test_ids.len(),
            n_features: base.pipeline.vocabulary.len(),
            heldout: &base.heldout,
            final_test: &base.final_test,
        },
    )?;
    write_json(&art.path("model.json"), &ModelArtifact::new(cfg, base.pipeline))?;
    println!(
        "heldout accuracy {:.4} f1 {:.4}; wrote {}",
        base.heldout.accuracy,
        base.heldout.f1,
        art.path("model.json").display()
    );
    Ok(())
}

#[derive(Serialize)]
struct TuneSummary<'a> {
    best_params: &'a grantmine_core::tree::Hyperparams,
    best_cv_accuracy: f64,
    evaluations: usize,
    failed_evaluations: usize,
    heldout: &'a grantmine_core::harness::EvaluationReport,
    final_test: &'a grantmine_core::harness::EvaluationReport,
}

/// Tunes on the training side of the split only; the vocabulary is built
/// once from all training documents and shared by every fold.
pub fn tune(cfg: &RunConfig) -> Result<()> {
    let art = Artifacts::new(cfg)?;
    let corpus = corpus(cfg)?;
    let median = corpus_median(&corpus)?;
    let split = resolve_split(&corpus, cfg.cutoff, &cfg.selection, median, cfg.seed)?;
    let prepared = prepare_training(&split.train, &cfg.preprocess)?;
    let mut pipeline_cfg = cfg.pipeline();
    let (_, _, data) = prepared.dataset(&pipeline_cfg)?;
    let (result, best) = tune_classifier(&data, pipeline_cfg.classifier, &pipeline_cfg.params, &cfg.tune)?;
    pipeline_cfg.params = best;
    let pipeline = prepared.fit(&pipeline_cfg)?;
    let heldout = pipeline.evaluate(&split.heldout, &art.hash, cfg.seed)?;
    let final_test = pipeline.evaluate(&split.final_test, &art.hash, cfg.seed)?;

    let space = ParamSpace::for_classifier(pipeline_cfg.classifier);
    let mut header = vec!["iteration"];
    header.extend(space.dims().iter().map(|d| d.name.as_str()));
    header.extend(["cv_accuracy", "failed"]);
    let table: Vec<Vec<String>> = result
        .history
        .iter()
        .enumerate()
        .map(|(i, obs)| {
            let mut rec = vec![i.to_string()];
            rec.extend(obs.point.iter().map(|&x| num(x)));
            rec.push(num(obs.score));
            rec.push(obs.failed.to_string());
            rec
        })
        .collect();
    art.csv("tune_trace.csv", &header, &table)?;
    evaluation_table(&art, "tune_eval.csv", &[("heldout", &heldout), ("final_test", &final_test)])?;
    art.json(
        "tune.json",
        "tune",
        TuneSummary {
            best_params: &pipeline_cfg.params,
            best_cv_accuracy: result.best_score,
            evaluations: result.history.len(),
            failed_evaluations: result.history.iter().filter(|o| o.failed).count(),
            heldout: &heldout,
            final_test: &final_test,
        },
    )?;
    write_json(&art.path("model.json"), &ModelArtifact::new(cfg, pipeline))?;
    println!(
        "best cv accuracy {:.4}; heldout accuracy {:.4}; wrote {}",
        result.best_score,
        heldout.accuracy,
        art.path("tune_trace.csv").display()
    );
    Ok(())
}

#[derive(Serialize)]
struct ModerateSummary<'a> {
    model_config_hash: &'a str,
    median: f64,
    rows: &'a [grantmine_core::harness::ModerateRow],
    median_proportion: Option<grantmine_core::harness::MedianProportion>,
    median_proportion_error: Option<String>,
}

pub fn moderate(cfg: &RunConfig, model: Option<&Path>) -> Result<()> {
    let art = Artifacts::new(cfg)?;
    let corpus = corpus(cfg)?;
    let artifact = match model {
        Some(path) => ModelArtifact::load(path)?,
        None => {
            let base = train_base_model(&corpus, cfg.cutoff, &cfg.selection, &cfg.pipeline(), cfg.seed, &art.hash)?;
            let artifact = ModelArtifact::new(cfg, base.pipeline);
            write_json(&art.path("model.json"), &artifact)?;
            artifact
        }
    };
    let median = corpus_median(&corpus)?;
    let rows = run_moderate_sweep(&corpus, &artifact.pipeline, &ModerateRange::standard(), median, cfg.seed, &art.hash);
    let mut header = vec!["row", "low_from", "low_to", "high_from", "high_to", "n_docs", "n_at_median"];
    header.extend(EVAL_COLUMNS);
    header.push("error");
    let table: Vec<Vec<String>> = rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut rec = vec![
                (i + 1).to_string(),
                num(row.range.low.0),
                num(row.range.low.1),
                num(row.range.high.0),
                num(row.range.high.1),
                row.n_docs.to_string(),
                row.n_at_median.to_string(),
            ];
            rec.extend(eval_cells(row.report.as_ref()));
            rec.push(row.error.clone().unwrap_or_default());
            rec
        })
        .collect();
    let path = art.csv("moderate.csv", &header, &table)?;
    let proportion = median_proportion(&corpus, &artifact.pipeline, median);
    art.json(
        "moderate.json",
        "moderate",
        ModerateSummary {
            model_config_hash: &artifact.config_hash,
            median,
            rows: &rows,
            median_proportion_error: proportion.as_ref().err().map(|e| e.to_string()),
            median_proportion: proportion.ok(),
        },
    )?;
    println!("wrote {}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct TopSummary<'a> {
    model_config_hash: &'a str,
    n_features: usize,
    nonzero_count: usize,
    features: &'a [(String, f64)],
}

pub fn top_features(cfg: &RunConfig, model: Option<&Path>, k: usize) -> Result<()> {
    let art = Artifacts::new(cfg)?;
    let path = model.map(Path::to_path_buf).unwrap_or_else(|| art.path("model.json"));
    let artifact = ModelArtifact::load(&path)?;
    let p = &artifact.pipeline;
    let top = top_k_features(p.model.importances(), &p.vocabulary, k)?;
    let table: Vec<Vec<String>> = top
        .features
        .iter()
        .enumerate()
        .map(|(i, (term, w))| vec![(i + 1).to_string(), term.clone(), num(*w)])
        .collect();
    let out = art.csv("top_features.csv", &["rank", "term", "weight"], &table)?;
    art.json(
        "top_features.json",
        "top-features",
        TopSummary {
            model_config_hash: &artifact.config_hash,
            n_features: p.vocabulary.len(),
            nonzero_count: top.nonzero_count,
            features: &top.features,
        },
    )?;
    println!(
        "{} of {} features carry importance; wrote {}",
        top.nonzero_count,
        p.vocabulary.len(),
        out.display()
    );
    Ok(())
}
