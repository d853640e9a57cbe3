//! Steerable AutoML search.
//!
//! A run explores a hierarchical [`space::SearchSpace`] of classifiers: a
//! [`bandit`] picks the hyperpartition to try next, the [`tuner`] proposes
//! numeric hyperparameters, and [`classifiers`] scores the model by
//! cross-validated F1. The [`orchestrator`] drives that loop, accepts
//! pause/resume/reconfigure commands between trials, and appends everything to a
//! replayable JSON-lines log. [`summary`] turns the trial list into the
//! overview, per-algorithm, per-hyperpartition and per-hyperparameter views;
//! [`api`] serves all of it over HTTP.

pub mod api;
pub mod bandit;
pub mod classifiers;
pub mod cli;
pub mod client;
pub mod data;
pub mod error;
pub mod orchestrator;
pub mod seed;
pub mod service;
pub mod space;
pub mod summary;
pub mod tuner;

pub use error::{ErrorCode, Rejection};
