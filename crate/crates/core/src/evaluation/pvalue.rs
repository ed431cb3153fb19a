use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rank::{average_ranks, check_pair, pearson};
use super::EvalError;
use crate::seed;

pub const DEFAULT_PERMUTATIONS: usize = 10_000;
/// Largest `n` accepted by exhaustive enumeration (`10! = 3,628,800`).
pub const MAX_EXHAUSTIVE_N: usize = 10;
/// Permutations per independently seeded chunk.
const CHUNK: usize = 1_000;
/// Permuted statistics this close to the observed one count as ties.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PermutationMode {
    MonteCarlo { permutations: usize, seed: u64 },
    /// Every permutation of `b`; only for `n <= MAX_EXHAUSTIVE_N`.
    Exhaustive,
}

impl Default for PermutationMode {
    fn default() -> Self {
        PermutationMode::MonteCarlo {
            permutations: DEFAULT_PERMUTATIONS,
            seed: 0,
        }
    }
}

/// Two-sided permutation p-value of the Spearman correlation.
///
/// Monte Carlo: `(1 + #{|rho_perm| >= |rho_obs|}) / (M + 1)`. Exhaustive:
/// the fraction of all `n!` orderings of `b` (identity included) reaching
/// `|rho_obs|`. The Monte Carlo stream is split into chunks with derived
/// seeds, so the result does not depend on thread scheduling.
pub fn perm_pvalue(a: &[f64], b: &[f64], mode: PermutationMode) -> Result<f64, EvalError> {
    check_pair(a, b, 2)?;
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    let observed = pearson(&ra, &rb).ok_or(EvalError::Constant)?.abs();
    let threshold = observed - TIE_TOLERANCE;

    match mode {
        PermutationMode::MonteCarlo { permutations, seed } => {
            if permutations < 100 {
                return Err(EvalError::TooFewPermutations(permutations));
            }
            let chunks = permutations.div_ceil(CHUNK);
            let exceed: usize = (0..chunks)
                .into_par_iter()
                .map(|c| {
                    let mut rng = seed::rng(seed::derive(seed, c as u64));
                    let mut perm = rb.clone();
                    let count = CHUNK.min(permutations - c * CHUNK);
                    (0..count)
                        .filter(|_| {
                            perm.shuffle(&mut rng);
                            pearson(&ra, &perm).is_some_and(|r| r.abs() >= threshold)
                        })
                        .count()
                })
                .sum();
            Ok((1 + exceed) as f64 / (permutations + 1) as f64)
        }
        PermutationMode::Exhaustive => {
            let n = rb.len();
            if n > MAX_EXHAUSTIVE_N {
                return Err(EvalError::TooLargeForExhaustive(n));
            }
            let mut perm = rb.clone();
            let (mut total, mut exceed) = (0u64, 0u64);
            heap_permutations(&mut perm, &mut |p| {
                total += 1;
                if pearson(&ra, p).is_some_and(|r| r.abs() >= threshold) {
                    exceed += 1;
                }
            });
            Ok(exceed as f64 / total as f64)
        }
    }
}

/// Visits every ordering of `items` (Heap's algorithm, iterative form).
fn heap_permutations(items: &mut [f64], visit: &mut impl FnMut(&[f64])) {
    let n = items.len();
    let mut c = vec![0usize; n];
    visit(items);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                items.swap(0, i);
            } else {
                items.swap(c[i], i);
            }
            visit(items);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heap_visits_all_orderings_once() {
        let mut v = vec![1.0, 2.0, 3.0, 4.0];
        let mut seen = std::collections::BTreeSet::new();
        heap_permutations(&mut v, &mut |p| {
            seen.insert(p.iter().map(|x| *x as u8).collect::<Vec<_>>());
        });
        assert_eq!(seen.len(), 24);
    }

    #[test]
    fn three_points_by_hand() {
        // orderings of (1,2,3): identity rho 1, reversal rho -1, the other
        // four have |rho| = 0.5, so 2 of 6 reach |rho_obs| = 1
        let p = perm_pvalue(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], PermutationMode::Exhaustive).unwrap();
        assert_eq!(p, 2.0 / 6.0);
        // b = (1,3,2): rho 0.5, reached by the four |0.5| orderings and both extremes
        let p = perm_pvalue(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0], PermutationMode::Exhaustive).unwrap();
        assert_eq!(p, 1.0);
    }

    #[test]
    fn perfect_correlation_gets_minimal_p() {
        let a: Vec<f64> = (0..20).map(f64::from).collect();
        let mode = PermutationMode::MonteCarlo {
            permutations: 10_000,
            seed: 3,
        };
        let p = perm_pvalue(&a, &a, mode).unwrap();
        assert_eq!(p, 1.0 / 10_001.0);
    }

    #[test]
    fn deterministic_given_seed() {
        let a = [0.3, 0.1, 0.7, 0.2, 0.9, 0.5, 0.4];
        let b = [0.2, 0.4, 0.6, 0.1, 0.8, 0.3, 0.9];
        let mode = PermutationMode::MonteCarlo {
            permutations: 2_500,
            seed: 11,
        };
        assert_eq!(perm_pvalue(&a, &b, mode).unwrap(), perm_pvalue(&a, &b, mode).unwrap());
    }

    #[test]
    fn rejects_small_budgets_and_large_exhaustive() {
        let a = [1.0, 2.0, 3.0];
        let mode = PermutationMode::MonteCarlo {
            permutations: 10,
            seed: 0,
        };
        assert!(matches!(perm_pvalue(&a, &a, mode), Err(EvalError::TooFewPermutations(10))));
        let big: Vec<f64> = (0..11).map(f64::from).collect();
        assert!(matches!(
            perm_pvalue(&big, &big, PermutationMode::Exhaustive),
            Err(EvalError::TooLargeForExhaustive(11))
        ));
    }
}
