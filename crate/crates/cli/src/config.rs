use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use grantmine_core::encoding::{EncodingScheme, NgramLevel, PruneRule};
use grantmine_core::harness::{CutoffSpec, ExperimentSettings, PipelineConfig, SelectionConfig, SyntheticSpec};
use grantmine_core::preprocess::PreprocessConfig;
use grantmine_core::tree::{ClassifierKind, Hyperparams};
use grantmine_core::tuning::TuneConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Partial hyperparameters; unset fields keep the preset's value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperparamOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_depth: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_samples_split: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_samples_leaf: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_features: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_estimators: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<bool>,
}

impl HyperparamOverrides {
    pub fn apply(&self, mut p: Hyperparams) -> Hyperparams {
        if let Some(v) = self.max_depth {
            p.max_depth = v;
        }
        if let Some(v) = self.min_samples_split {
            p.min_samples_split = v;
        }
        if let Some(v) = self.min_samples_leaf {
            p.min_samples_leaf = v;
        }
        if let Some(v) = self.max_features {
            p.max_features = v;
        }
        if let Some(v) = self.n_estimators {
            p.n_estimators = v;
        }
        if let Some(v) = self.bootstrap {
            p.bootstrap = v;
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncodingSection {
    pub scheme: EncodingScheme,
    pub level: NgramLevel,
    /// Drop terms whose total training count is at most this.
    pub prune: u64,
}

impl Default for EncodingSection {
    fn default() -> Self {
        EncodingSection {
            scheme: EncodingScheme::IdfPresence,
            level: NgramLevel::Unigram,
            prune: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub classifier: ClassifierKind,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            classifier: ClassifierKind::RandomForest,
        }
    }
}

/// The resolved run configuration. Every report embeds it together with its
/// hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub preprocess: PreprocessConfig,
    pub selection: SelectionConfig,
    pub cutoff: CutoffSpec,
    pub encoding: EncodingSection,
    pub model: ModelSection,
    /// Random-forest overrides on top of the tuned published setting.
    pub forest: HyperparamOverrides,
    /// Decision-tree overrides on top of the default tree preset.
    pub tree: HyperparamOverrides,
    pub tune: TuneConfig,
    pub synth: SyntheticSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus: None,
            out: None,
            seed: 0,
            preprocess: PreprocessConfig::default(),
            selection: SelectionConfig::default(),
            cutoff: CutoffSpec::default(),
            encoding: EncodingSection::default(),
            model: ModelSection::default(),
            forest: HyperparamOverrides::default(),
            tree: HyperparamOverrides::default(),
            tune: TuneConfig::default(),
            synth: SyntheticSpec::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        // toml's messages span several lines; keep the diagnostic on one
        toml::from_str(&text).map_err(|e| {
            let msg = e.message().to_string();
            match e.span() {
                Some(span) => {
                    let line = text[..span.start].lines().count().max(1);
                    anyhow::anyhow!("invalid config {} line {line}: {msg}", path.display())
                }
                None => anyhow::anyhow!("invalid config {}: {msg}", path.display()),
            }
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.preprocess.validate()?;
        self.selection.validate()?;
        self.cutoff.validate()?;
        self.settings().forest.validate().context("[forest]")?;
        self.settings().tree.validate().context("[tree]")?;
        self.tune.validate()?;
        self.synth.validate()?;
        Ok(())
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn corpus_path(&self) -> Result<&Path> {
        let Some(p) = self.corpus.as_deref() else {
            bail!("no corpus given (use --corpus or `corpus` in the config)");
        };
        if !p.exists() {
            bail!("corpus {} does not exist", p.display());
        }
        Ok(p)
    }

    pub fn settings(&self) -> ExperimentSettings {
        ExperimentSettings {
            selection: self.selection.clone(),
            preprocess: self.preprocess.clone(),
            forest: self.forest.apply(Hyperparams::tuned_forest()),
            tree: self.tree.apply(Hyperparams::default_tree()),
        }
    }

    pub fn pipeline(&self) -> PipelineConfig {
        self.settings().pipeline(
            self.encoding.scheme,
            self.encoding.level,
            PruneRule::at_most(self.encoding.prune),
            self.model.classifier,
            self.seed,
        )
    }

    /// The config as echoed into artifacts. The output directory is left
    /// out so identical runs into different directories match byte for byte.
    pub fn echoed(&self) -> RunConfig {
        RunConfig {
            out: None,
            ..self.clone()
        }
    }

    pub fn hash(&self) -> String {
        let json = serde_json::to_string(&self.echoed()).expect("config serialises");
        let digest = Sha256::digest(json.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}
