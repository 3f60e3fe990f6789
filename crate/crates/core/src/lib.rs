//! Semi-supervised text classification with self-training and task augmentation.
//!
//! The crate is organised as a pipeline:
//!
//! - [`corpus`]: examples, datasets, file formats, data-regime sampling and
//!   deterministic synthetic benchmark corpora.
//! - [`textmodel`]: a hashed n-gram linear classifier/regressor, its SGD trainer
//!   (early stopping or fixed-step checkpoint averaging) and metrics.
//! - [`augmentation`]: synthetic auxiliary-task (NLI) data generation, classifier
//!   filtering, threshold selection and intermediate fine-tuning.
//! - [`selftrain`]: broad-distribution self-training, the confidence-filtering
//!   baseline and unlabeled pool mixing.
//! - [`harness`]: restarts, method arms, sweeps and aggregate reporting.

pub mod augmentation;
pub mod corpus;
mod error;
pub mod harness;
pub mod seed;
pub mod selftrain;
pub mod textmodel;

pub use error::{Error, Result};
