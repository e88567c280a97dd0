//! `grantmine`: config-driven runs of the grant text-mining pipeline.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use grantmine_core::encoding::{EncodingScheme, NgramLevel};
use grantmine_core::tree::ClassifierKind;

use crate::config::RunConfig;

#[derive(Parser)]
#[command(name = "grantmine", version, about = "Predict high and low innovation scores from grant proposal text")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Corpus in JSONL format.
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print IC-score statistics of the valid documents.
    Stats {
        #[arg(long)]
        grant_type: Option<String>,
        #[arg(long)]
        section: Option<String>,
    },
    /// Write a synthetic corpus with planted high-score terms.
    Synth {
        #[arg(long)]
        n_docs: Option<usize>,
        #[arg(long)]
        planted_terms: Option<usize>,
        #[arg(long)]
        signal_strength: Option<f64>,
    },
    /// Random forest with TF-IDF over the six standard score cutoffs.
    CutoffSweep,
    /// All 36 encoder and classifier combinations on one split.
    Grid {
        #[command(flatten)]
        cutoff: CutoffArgs,
    },
    /// Train one pipeline and evaluate it.
    Train {
        #[command(flatten)]
        cutoff: CutoffArgs,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Bayesian search for classifier hyperparameters.
    Tune {
        #[command(flatten)]
        cutoff: CutoffArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        init_points: Option<usize>,
        #[arg(long)]
        n_iter: Option<usize>,
        #[arg(long)]
        folds: Option<usize>,
    },
    /// Evaluate a base model on widening bands around the median.
    Moderate {
        /// Trained model; a base model is trained when omitted.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// The most important terms of a trained model.
    TopFeatures {
        /// Defaults to `model.json` in the output directory.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(short, long, default_value_t = 100)]
        k: usize,
    },
}

#[derive(Args)]
struct CutoffArgs {
    #[arg(long)]
    low_pct: Option<f64>,
    #[arg(long)]
    high_pct: Option<f64>,
}

#[derive(Args)]
struct ModelArgs {
    /// `dt` or `rf`.
    #[arg(long)]
    classifier: Option<ClassifierKind>,
    /// `tfidf` or `idf_presence`.
    #[arg(long)]
    scheme: Option<EncodingScheme>,
    #[arg(long)]
    level: Option<NgramLevel>,
    #[arg(long)]
    prune: Option<u64>,
}

impl CutoffArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(v) = self.low_pct {
            cfg.cutoff.low_pct = v;
        }
        if let Some(v) = self.high_pct {
            cfg.cutoff.high_pct = v;
        }
    }
}

impl ModelArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(v) = self.classifier {
            cfg.model.classifier = v;
        }
        if let Some(v) = self.scheme {
            cfg.encoding.scheme = v;
        }
        if let Some(v) = self.level {
            cfg.encoding.level = v;
        }
        if let Some(v) = self.prune {
            cfg.encoding.prune = v;
        }
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if cli.out.is_some() {
        cfg.out = cli.out.clone();
    }
    if cli.corpus.is_some() {
        cfg.corpus = cli.corpus.clone();
    }
    match &cli.command {
        Command::Synth {
            n_docs,
            planted_terms,
            signal_strength,
        } => {
            cfg.synth.seed = cfg.seed;
            if let Some(v) = n_docs {
                cfg.synth.n_docs = *v;
            }
            if let Some(v) = planted_terms {
                cfg.synth.planted_terms = *v;
            }
            if let Some(v) = signal_strength {
                cfg.synth.signal_strength = *v;
            }
        }
        Command::Grid { cutoff } => cutoff.apply(&mut cfg),
        Command::Train { cutoff, model } => {
            cutoff.apply(&mut cfg);
            model.apply(&mut cfg);
        }
        Command::Tune {
            cutoff,
            model,
            init_points,
            n_iter,
            folds,
        } => {
            cutoff.apply(&mut cfg);
            model.apply(&mut cfg);
            cfg.tune.seed = cfg.seed;
            if let Some(v) = init_points {
                cfg.tune.init_points = *v;
            }
            if let Some(v) = n_iter {
                cfg.tune.n_iter = *v;
            }
            if let Some(v) = folds {
                cfg.tune.folds = *v;
            }
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = resolve(&cli)?;
    match cli.command {
        Command::Stats { grant_type, section } => commands::stats(&cfg, grant_type.as_deref(), section.as_deref()),
        Command::Synth { .. } => commands::synth(&cfg),
        Command::CutoffSweep => commands::cutoff_sweep(&cfg),
        Command::Grid { .. } => commands::grid(&cfg),
        Command::Train { .. } => commands::train(&cfg),
        Command::Tune { .. } => commands::tune(&cfg),
        Command::Moderate { model } => commands::moderate(&cfg, model.as_deref()),
        Command::TopFeatures { model, k } => commands::top_features(&cfg, model.as_deref(), k),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
