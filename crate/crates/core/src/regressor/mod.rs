//! Kernel ridge regression from feature vectors to memorability scores.
//!
//! Dual weights solve `(K + lambda I) w = y`; a prediction is `sum_i w_i k(x_i, x)`.

mod cv;
mod kernel;

pub use cv::{cv_grid_search, default_gammas, default_lambdas, fold_assignment, CvCell, CvResult, DEFAULT_FOLDS};
pub use kernel::{gram, KernelSpec, SumMember};

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ImageId;

/// Relative diagonal jitter ladder tried when the Cholesky factorization fails.
const JITTER: [f64; 4] = [0.0, 1e-12, 1e-10, 1e-8];

#[derive(Debug, Error, PartialEq)]
pub enum RegressorError {
    #[error("histogram intersection needs nonnegative features (row {row}, column {column})")]
    NegativeFeature { row: usize, column: usize },
    #[error("rbf gamma must be positive and finite, got {0}")]
    InvalidGamma(f64),
    #[error("sum kernel has no members")]
    EmptySum,
    #[error("column range {start}..{end} invalid for dimension {dim}")]
    ColumnRange { start: usize, end: usize, dim: usize },
    #[error("need at least {min} samples, got {found}")]
    TooFewSamples { found: usize, min: usize },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("lambda must be positive and finite, got {0}")]
    BadLambda(f64),
    #[error("expected dimension {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{features} feature rows but {targets} targets")]
    LengthMismatch { features: usize, targets: usize },
    #[error("kernel matrix is not positive definite within jitter tolerance")]
    NotPositiveDefinite,
    #[error("folds must be at least 2 and leave 2 samples per fold (n = {n}, folds = {folds})")]
    BadFolds { n: usize, folds: usize },
    #[error("empty hyperparameter grid")]
    EmptyGrid,
    #[error("every grid cell was degenerate: {0}")]
    AllCellsDegenerate(String),
    #[error("model file: {0}")]
    Format(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for RegressorError {
    fn from(e: std::io::Error) -> Self {
        RegressorError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelModel {
    pub spec: KernelSpec,
    pub lambda: f64,
    pub dim: usize,
    /// Per-column divisors applied inside RBF terms (training standard
    /// deviations, 1 for constant columns).
    pub scale: Vec<f64>,
    pub train_ids: Vec<ImageId>,
    pub train_features: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub raw: f64,
    pub clamped: f64,
}

fn column_scale(features: &[Vec<f64>], dim: usize) -> Vec<f64> {
    let n = features.len() as f64;
    (0..dim)
        .map(|c| {
            let mean = features.iter().map(|f| f[c]).sum::<f64>() / n;
            let var = features.iter().map(|f| (f[c] - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            if sd > 0.0 && sd.is_finite() {
                sd
            } else {
                1.0
            }
        })
        .collect()
}

fn solve_spd(mut a: DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>, RegressorError> {
    let n = a.nrows();
    let base = (a.trace() / n as f64).abs().max(1.0);
    let mut added = 0.0;
    for j in JITTER {
        let extra = j * base - added;
        for i in 0..n {
            a[(i, i)] += extra;
        }
        added = j * base;
        if let Some(ch) = a.clone().cholesky() {
            let w = ch.solve(y);
            if w.iter().all(|v| v.is_finite()) {
                return Ok(w);
            }
        }
    }
    Err(RegressorError::NotPositiveDefinite)
}

/// Fits without image ids (rows are named by index).
pub fn fit(
    features: &[Vec<f64>],
    targets: &[f64],
    spec: &KernelSpec,
    lambda: f64,
) -> Result<KernelModel, RegressorError> {
    let ids = (0..features.len()).map(|i| i.to_string()).collect();
    fit_named(ids, features, targets, spec, lambda)
}

pub fn fit_named(
    ids: Vec<ImageId>,
    features: &[Vec<f64>],
    targets: &[f64],
    spec: &KernelSpec,
    lambda: f64,
) -> Result<KernelModel, RegressorError> {
    if features.len() != targets.len() || ids.len() != targets.len() {
        return Err(RegressorError::LengthMismatch {
            features: features.len(),
            targets: targets.len(),
        });
    }
    if features.len() < 2 {
        return Err(RegressorError::TooFewSamples {
            found: features.len(),
            min: 2,
        });
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(RegressorError::BadLambda(lambda));
    }
    if targets.iter().any(|t| !t.is_finite()) {
        return Err(RegressorError::NonFinite("targets".into()));
    }
    let dim = kernel::validated(features, spec)?;
    let scale = if spec.uses_rbf() {
        column_scale(features, dim)
    } else {
        vec![1.0; dim]
    };
    let mut k = kernel::gram_scaled(features, spec, &scale);
    for i in 0..k.nrows() {
        k[(i, i)] += lambda;
    }
    let w = solve_spd(k, &DVector::from_column_slice(targets))?;
    Ok(KernelModel {
        spec: spec.clone(),
        lambda,
        dim,
        scale,
        train_ids: ids,
        train_features: features.to_vec(),
        weights: w.iter().copied().collect(),
    })
}

impl KernelModel {
    pub fn predict(&self, x: &[f64]) -> Result<Prediction, RegressorError> {
        if x.len() != self.dim {
            return Err(RegressorError::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(RegressorError::NonFinite("query".into()));
        }
        self.spec.check_input(0, x)?;
        let raw: f64 = self
            .train_features
            .iter()
            .zip(&self.weights)
            .map(|(xi, w)| w * self.spec.eval(xi, x, &self.scale))
            .sum();
        Ok(Prediction {
            raw,
            clamped: raw.clamp(0.0, 1.0),
        })
    }

    pub fn weight_norm(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, RegressorError> {
        let m: KernelModel = serde_json::from_str(text).map_err(|e| RegressorError::Format(e.to_string()))?;
        let n = m.weights.len();
        if m.train_features.len() != n || m.train_ids.len() != n || m.scale.len() != m.dim {
            return Err(RegressorError::Format("inconsistent model dimensions".into()));
        }
        if m.train_features.iter().any(|f| f.len() != m.dim) {
            return Err(RegressorError::Format("training row of wrong dimension".into()));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<(), RegressorError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, RegressorError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
