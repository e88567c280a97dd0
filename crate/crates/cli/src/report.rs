use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use grantmine_core::harness::EvaluationReport;
use serde::Serialize;

use crate::config::RunConfig;

/// Writes reports under the output directory, stamping each with the
/// config hash and seed.
pub struct Artifacts<'a> {
    pub dir: PathBuf,
    pub cfg: &'a RunConfig,
    pub hash: String,
}

#[derive(Serialize)]
struct Summary<'a, T: Serialize> {
    command: &'a str,
    config_hash: &'a str,
    seed: u64,
    config: RunConfig,
    result: T,
}

impl<'a> Artifacts<'a> {
    pub fn new(cfg: &'a RunConfig) -> Result<Self> {
        let dir = cfg.out_dir();
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Artifacts {
            dir,
            cfg,
            hash: cfg.hash(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// CSV with `config_hash` and `seed` appended to every row.
    pub fn csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf> {
        let path = self.path(name);
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(&path)
            .with_context(|| format!("writing {}", path.display()))?;
        let mut head: Vec<&str> = header.to_vec();
        head.extend(["config_hash", "seed"]);
        w.write_record(&head)?;
        let seed = self.cfg.seed.to_string();
        for row in rows {
            let mut rec = row.clone();
            rec.push(self.hash.clone());
            rec.push(seed.clone());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(path)
    }

    pub fn json(&self, name: &str, command: &str, result: impl Serialize) -> Result<PathBuf> {
        let summary = Summary {
            command,
            config_hash: &self.hash,
            seed: self.cfg.seed,
            config: self.cfg.echoed(),
            result,
        };
        write_json(&self.path(name), &summary)
    }
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<PathBuf> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path.to_path_buf())
}

pub fn num(x: f64) -> String {
    x.to_string()
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub const EVAL_COLUMNS: [&str; 7] = ["accuracy", "f1", "f1_undefined", "tp", "fp", "fn", "tn"];

/// The [`EVAL_COLUMNS`] cells, blank when the evaluation failed.
pub fn eval_cells(report: Option<&EvaluationReport>) -> Vec<String> {
    match report {
        Some(r) => vec![
            num(r.accuracy),
            num(r.f1),
            r.f1_undefined.to_string(),
            r.confusion.tp.to_string(),
            r.confusion.fp.to_string(),
            r.confusion.fn_.to_string(),
            r.confusion.tn.to_string(),
        ],
        None => vec![String::new(); EVAL_COLUMNS.len()],
    }
}
