//! Disambiguation of medical abbreviations by token classification.
//!
//! The crate covers the full experiment lifecycle for MeDAL/UMN-style
//! corpora: ingestion of the normalized CSV format, preprocessing and
//! subsampling, feature extraction, a linear-chain CRF trained with
//! orthant-wise L-BFGS, candidate-sense postprocessing of probability
//! outputs, and macro/weighted evaluation under k-fold cross-validation.
//!
//! Module map:
//!
//! - [`corpus`]: raw records, normalization, pruning/subsampling, folds,
//!   statistics, and on-disk formats.
//! - [`features`]: the handcrafted token feature template and feature
//!   indexing.
//! - [`crf`]: scoring, exact inference, training, and decoding.
//! - [`pipeline`]: running a token classifier over a corpus, context
//!   windowing, and the prediction interchange format.
//! - [`postprocess`]: restriction of predicted distributions to an
//!   abbreviation's training-time candidate senses.
//! - [`eval`]: confusion counting, macro/weighted metrics, and the
//!   cross-validation harness.

pub mod corpus;
pub mod crf;
pub mod error;
pub mod eval;
pub mod features;
pub mod pipeline;
pub mod postprocess;

pub use error::{Error, Result};
