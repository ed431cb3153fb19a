use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use super::kernel::{validated, KernelSpec};
use super::{fit, RegressorError};
use crate::evaluation::{srcc, EvalError};
use crate::seed;

pub const DEFAULT_FOLDS: usize = 5;

/// Mean fold SRCCs closer than this count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

/// `1e-4, 1e-3, ..., 1e2`.
pub fn default_lambdas() -> Vec<f64> {
    (-4..=2).map(|e| 10f64.powi(e)).collect()
}

/// `2^k / d` for `k = -3..=3`. RBF inputs are z-scored, so the per-column
/// variance the usual `1 / (d var)` heuristic divides by is 1.
pub fn default_gammas(dim: usize) -> Vec<f64> {
    let d = dim.max(1) as f64;
    (-3..=3).map(|k| 2f64.powi(k) / d).collect()
}

/// Fold index of every sample: a seeded shuffle dealt round-robin.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed));
    let mut fold = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold[i] = pos % folds;
    }
    fold
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvCell {
    pub spec_index: usize,
    pub spec: KernelSpec,
    pub lambda: f64,
    pub fold_srcc: Vec<f64>,
    pub mean_srcc: Option<f64>,
    /// Why the cell was skipped, if it was.
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvResult {
    pub best: CvCell,
    pub cells: Vec<CvCell>,
    pub folds: usize,
    pub seed: u64,
}

fn run_cell(
    features: &[Vec<f64>],
    targets: &[f64],
    fold_of: &[usize],
    folds: usize,
    spec: &KernelSpec,
    lambda: f64,
) -> Result<Vec<f64>, String> {
    let mut rhos = Vec::with_capacity(folds);
    for f in 0..folds {
        let (mut tr_x, mut tr_y, mut va_x, mut va_y) = (vec![], vec![], vec![], vec![]);
        for i in 0..features.len() {
            if fold_of[i] == f {
                va_x.push(features[i].clone());
                va_y.push(targets[i]);
            } else {
                tr_x.push(features[i].clone());
                tr_y.push(targets[i]);
            }
        }
        if va_y.iter().all(|&y| y == va_y[0]) {
            return Err(format!("fold {f}: constant validation targets"));
        }
        let model = fit(&tr_x, &tr_y, spec, lambda).map_err(|e| format!("fold {f}: {e}"))?;
        let preds: Vec<f64> = va_x
            .iter()
            .map(|x| model.predict(x).map(|p| p.raw))
            .collect::<Result<_, _>>()
            .map_err(|e| format!("fold {f}: {e}"))?;
        match srcc(&preds, &va_y) {
            Ok(r) => rhos.push(r),
            // constant predictions carry no ranking
            Err(EvalError::Constant) => rhos.push(0.0),
            Err(e) => return Err(format!("fold {f}: {e}")),
        }
    }
    Ok(rhos)
}

/// Exhaustive search over `specs x lambdas`, scored by mean validation SRCC.
/// Ties go to the larger lambda, then to the earlier spec.
pub fn cv_grid_search(
    features: &[Vec<f64>],
    targets: &[f64],
    specs: &[KernelSpec],
    lambdas: &[f64],
    folds: usize,
    seed: u64,
) -> Result<CvResult, RegressorError> {
    if specs.is_empty() || lambdas.is_empty() {
        return Err(RegressorError::EmptyGrid);
    }
    if features.len() != targets.len() {
        return Err(RegressorError::LengthMismatch {
            features: features.len(),
            targets: targets.len(),
        });
    }
    let n = features.len();
    if folds < 2 || n < 2 * folds {
        return Err(RegressorError::BadFolds { n, folds });
    }
    for spec in specs {
        validated(features, spec)?;
    }
    if let Some(&l) = lambdas.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
        return Err(RegressorError::BadLambda(l));
    }
    let fold_of = fold_assignment(n, folds, seed);
    let grid: Vec<(usize, f64)> = (0..specs.len())
        .flat_map(|s| lambdas.iter().map(move |&l| (s, l)))
        .collect();
    let cells: Vec<CvCell> = grid
        .par_iter()
        .map(|&(s, lambda)| {
            let spec = &specs[s];
            match run_cell(features, targets, &fold_of, folds, spec, lambda) {
                Ok(rhos) => CvCell {
                    spec_index: s,
                    spec: spec.clone(),
                    lambda,
                    mean_srcc: Some(rhos.iter().sum::<f64>() / rhos.len() as f64),
                    fold_srcc: rhos,
                    skipped: None,
                },
                Err(reason) => CvCell {
                    spec_index: s,
                    spec: spec.clone(),
                    lambda,
                    fold_srcc: vec![],
                    mean_srcc: None,
                    skipped: Some(reason),
                },
            }
        })
        .collect();

    let mut best: Option<&CvCell> = None;
    for cell in &cells {
        let Some(m) = cell.mean_srcc else { continue };
        best = match best {
            None => Some(cell),
            Some(b) => {
                let bm = b.mean_srcc.unwrap();
                let better = m > bm + TIE_TOLERANCE
                    || ((m - bm).abs() <= TIE_TOLERANCE && cell.lambda > b.lambda);
                Some(if better { cell } else { b })
            }
        };
    }
    match best {
        Some(b) => Ok(CvResult {
            best: b.clone(),
            cells: cells.clone(),
            folds,
            seed,
        }),
        None => Err(RegressorError::AllCellsDegenerate(
            cells[0].skipped.clone().unwrap_or_default(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn planted(n: usize, d: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = seed::rng(seed);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
        let y = x.iter().map(|r| r.iter().enumerate().map(|(k, v)| (k + 1) as f64 * v).sum()).collect();
        (x, y)
    }

    #[test]
    fn folds_are_balanced_and_seeded() {
        let f = fold_assignment(23, 5, 9);
        for k in 0..5 {
            let c = f.iter().filter(|&&v| v == k).count();
            assert!(c == 4 || c == 5);
        }
        assert_eq!(f, fold_assignment(23, 5, 9));
        assert_ne!(f, fold_assignment(23, 5, 10));
    }

    #[test]
    fn single_cell_is_returned() {
        let (x, y) = planted(30, 2, 1);
        let spec = KernelSpec::Rbf { gamma: 0.5 };
        let r = cv_grid_search(&x, &y, std::slice::from_ref(&spec), &[0.1], 3, 4).unwrap();
        assert_eq!(r.cells.len(), 1);
        assert_eq!(r.best.spec, spec);
        assert_eq!(r.best.lambda, 0.1);
    }

    #[test]
    fn constant_targets_fail_every_cell() {
        let (x, _) = planted(20, 2, 2);
        let err = cv_grid_search(&x, &[0.4; 20], &[KernelSpec::HistogramIntersection], &[0.1, 1.0], 4, 0).unwrap_err();
        assert!(matches!(err, RegressorError::AllCellsDegenerate(_)));
    }

    #[test]
    fn ties_prefer_larger_lambda() {
        // two samples per fold make every fold SRCC +-1; identical kernels tie
        let (x, y) = planted(8, 1, 3);
        let spec = KernelSpec::Rbf { gamma: 0.5 };
        let r = cv_grid_search(&x, &y, &[spec.clone(), spec], &[1e-3, 1e-2], 4, 1).unwrap();
        let top = r.cells.iter().filter_map(|c| c.mean_srcc).fold(f64::MIN, f64::max);
        let tied: Vec<&CvCell> = r.cells.iter().filter(|c| c.mean_srcc == Some(top)).collect();
        let max_lambda = tied.iter().map(|c| c.lambda).fold(0.0, f64::max);
        assert_eq!(r.best.lambda, max_lambda);
        assert_eq!(r.best.spec_index, tied.iter().filter(|c| c.lambda == max_lambda).map(|c| c.spec_index).min().unwrap());
    }

    #[test]
    fn bad_folds() {
        let (x, y) = planted(5, 1, 3);
        assert_eq!(
            cv_grid_search(&x, &y, &[KernelSpec::HistogramIntersection], &[1.0], 3, 0),
            Err(RegressorError::BadFolds { n: 5, folds: 3 })
        );
    }

    #[test]
    fn default_grids() {
        assert_eq!(default_lambdas().len(), 7);
        assert_eq!(default_lambdas()[0], 1e-4);
        assert_eq!(default_lambdas()[6], 100.0);
        let g = default_gammas(4);
        assert_eq!(g[3], 0.25);
        assert_eq!(g[0], 0.25 / 8.0);
    }
}
