//! Memory-game experiment machinery and the analysis stack built on top of it.
//!
//! The crate covers the whole path from a user-supplied image corpus to
//! evaluated memorability predictors:
//!
//! - [`corpus`]: image manifests, role pools, scene taxonomy and annotation merging.
//! - [`sequencer`]: seeded level plans honoring the repeat-spacing constraints.
//! - [`game`]: per-session state machine, response classification and the
//!   append-only event log the HTTP service persists to.
//! - [`scoring`]: hit statistics and delay-regularized memorability scores.
//! - [`consistency`]: split-half rank correlation and consistency curves.
//! - [`features`]: HSV statistics, GLCM texture, PQFT saliency and grid pooling.
//! - [`regressor`]: kernel ridge regression with HIK / RBF / sum kernels.
//! - [`evaluation`]: Spearman correlation, permutation p-values, error metrics
//!   and the rank-error / word-frequency reports.
//! - [`simulate`]: synthetic subjects used for oracle tests and fixtures.

pub mod consistency;
pub mod corpus;
pub mod delimited;
pub mod evaluation;
pub mod features;
pub mod game;
pub mod regressor;
pub mod scoring;
pub mod seed;
pub mod sequencer;
pub mod simulate;
