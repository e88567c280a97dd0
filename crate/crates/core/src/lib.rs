//! Mining pipeline for scored grant proposals.
//!
//! The crate is organised bottom-up:
//!
//! - [`corpus`] loads, validates, filters and summarises JSONL proposal corpora.
//! - [`preprocess`] normalises text, builds IDF-threshold stopword lists and
//!   applies the Porter stemmer.
//! - [`encoding`] builds n-gram vocabularies and encodes documents either as
//!   L2-normalised TF-IDF or as IDF-presence vectors.
//! - [`tree`] holds the CART decision tree and random forest with
//!   mean-decrease-impurity importances.
//! - [`tuning`] runs Gaussian-process Bayesian optimisation over
//!   hyperparameters scored by stratified k-fold cross-validation.
//! - [`harness`] reproduces the cutoff, encoder-grid and moderate-score
//!   experiments and generates seeded synthetic corpora.

pub mod corpus;
pub mod encoding;
pub mod error;
pub mod harness;
pub mod preprocess;
pub mod tree;
pub mod tuning;

pub use error::{Error, Result};
