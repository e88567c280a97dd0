//! The score-cutoff experiment protocol: extreme-pool selection, train/test
//! splits, encoder grids, moderate-score sweeps and a synthetic corpus to run
//! them on.

mod experiments;
mod metrics;
mod pipeline;
mod selection;
mod synth;

pub use experiments::*;
pub use metrics::{ConfusionMatrix, EvaluationReport};
pub use pipeline::{fit_pipeline, labelled, prepare_training, PipelineConfig, PreparedTraining, TrainedPipeline};
pub use selection::{
    build_selection_split, median_label, rank_and_cut, CutoffSpec, LabeledPool, ScoredId, SelectionConfig, SelectionSplit,
};
pub use synth::{generate_synthetic, synthetic_vocabulary, SyntheticSpec, SyntheticVocabulary};
