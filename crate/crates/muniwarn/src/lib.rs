//! Early-warning pipeline for municipal financial distress.
//!
//! The crate walks a yearly panel of municipal balance-sheet indicators from
//! raw CSV files to a trained, evaluated classifier:
//!
//! * [`domain`] — core types (years, demographic categories, distress risk
//!   levels, indicator records) and their validation rules.
//! * [`ingest`] — CSV parsing for the financial panel and the distress-event
//!   archive, label/risk merging, and data cleaning.
//! * [`features`] — lagged deltas, one-hot encoding, standardization, and
//!   principal component analysis.
//! * [`models`] — from-scratch class-weighted trainers: penalized logistic
//!   regression, an SMO support-vector machine, a random forest, and
//!   gradient-boosted trees, all behind one serializable model type.
//! * [`eval`] — stratified splits and folds, confusion/threshold metrics,
//!   ROC and precision-recall curves with cross-fold averaging, grid search,
//!   and the final train/test evaluation.
//! * [`analysis`] — forward-looking false-positive follow-up and coefficient
//!   reports for model explanation.
//! * [`synth`] — a calibrated synthetic panel generator with planted ground
//!   truth, used for end-to-end verification.
//! * [`cli`] — the subcommand runner behind the thin `muniwarn` binary.
//!
//! Start with the `examples/` directory for a runnable tour of each stage.

pub mod analysis;
pub mod cli;
pub mod domain;
mod error;
pub mod eval;
pub mod features;
pub mod ingest;
pub mod models;
pub mod report;
pub mod seeding;
pub mod synth;

pub use error::{Error, Result};
