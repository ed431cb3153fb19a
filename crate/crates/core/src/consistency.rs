//! Human-to-human consistency: split-half rank correlation, consistency
//! curves and top-k cross-group means.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ImageId;
use crate::evaluation::{srcc, EvalError};
use crate::scoring::{score_observations, Observation, ScoringError};
use crate::seed;

pub const DEFAULT_SPLITS: usize = 25;
pub const DEFAULT_FILTER_LEN: usize = 6;

#[derive(Debug, Error)]
pub enum ConsistencyError {
    #[error("need at least 2 subjects, got {0}")]
    TooFewSubjects(usize),
    #[error("score maps cover different image sets ({0} vs {1} images, or differing ids)")]
    MismatchedImages(usize, usize),
    #[error("k = {k} exceeds the {n} available images")]
    KTooLarge { k: usize, n: usize },
    #[error("filter length must be at least 1")]
    BadFilter,
    #[error("split {split}: {source}")]
    Split {
        split: usize,
        #[source]
        source: EvalError,
    },
    #[error(transparent)]
    Scoring(#[from] ScoringError),
}

/// Scores from the two halves of one subject split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfScores {
    pub group1: BTreeMap<ImageId, f64>,
    pub group2: BTreeMap<ImageId, f64>,
    /// Images scored in only one half, left out of both maps.
    pub excluded: usize,
}

impl HalfScores {
    /// Aligned score vectors over the shared image set.
    pub fn vectors(&self) -> (Vec<f64>, Vec<f64>) {
        self.group1.iter().map(|(id, &a)| (a, self.group2[id])).unzip()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub n_splits: usize,
    pub n_subjects: usize,
    pub seed: u64,
    pub rhos: Vec<f64>,
    pub mean_rho: f64,
    /// Images excluded from each split's correlation.
    pub excluded: Vec<usize>,
}

/// Subjects in order of first appearance.
fn subject_order(observations: &[Observation]) -> HashMap<&str, usize> {
    let mut index = HashMap::new();
    for o in observations {
        let next = index.len();
        index.entry(o.subject_id.as_str()).or_insert(next);
    }
    index
}

/// Group membership per subject index for one split; `true` is group 1,
/// which receives the extra subject when the count is odd.
pub fn assign_halves(n_subjects: usize, split: usize, seed: u64) -> Vec<bool> {
    let mut order: Vec<usize> = (0..n_subjects).collect();
    order.shuffle(&mut seed::rng(seed::derive(seed, split as u64)));
    let cut = n_subjects.div_ceil(2);
    let mut group1 = vec![false; n_subjects];
    for &s in &order[..cut] {
        group1[s] = true;
    }
    group1
}

/// Scores each half of split `split` independently, refitting the decay
/// model per half.
pub fn split_scores(
    observations: &[Observation],
    split: usize,
    seed: u64,
    horizon: f64,
) -> Result<HalfScores, ConsistencyError> {
    let subjects = subject_order(observations);
    if subjects.len() < 2 {
        return Err(ConsistencyError::TooFewSubjects(subjects.len()));
    }
    let group1 = assign_halves(subjects.len(), split, seed);
    let mut halves: [BTreeMap<ImageId, Vec<Observation>>; 2] = Default::default();
    for o in observations {
        let g = usize::from(!group1[subjects[o.subject_id.as_str()]]);
        halves[g].entry(o.image_id.clone()).or_default().push(o.clone());
    }
    let score = |h: &BTreeMap<ImageId, Vec<Observation>>| -> Result<BTreeMap<ImageId, f64>, ConsistencyError> {
        if h.is_empty() {
            return Ok(BTreeMap::new());
        }
        let (_, scores) = score_observations(h, horizon)?;
        Ok(scores.into_iter().map(|s| (s.image_id, s.score)).collect())
    };
    let mut g1 = score(&halves[0])?;
    let mut g2 = score(&halves[1])?;
    let before = g1.len() + g2.len();
    g1.retain(|id, _| g2.contains_key(id));
    g2.retain(|id, _| g1.contains_key(id));
    let shared = g1.len();
    // every image excluded from the pair appears in exactly one half
    let excluded = before - 2 * shared;
    Ok(HalfScores {
        group1: g1,
        group2: g2,
        excluded,
    })
}

/// Spearman correlation between half scores over `n_splits` seeded random
/// subject splits.
pub fn split_half_srcc(
    observations: &[Observation],
    n_splits: usize,
    seed: u64,
    horizon: f64,
) -> Result<SplitReport, ConsistencyError> {
    let n_subjects = subject_order(observations).len();
    if n_subjects < 2 {
        return Err(ConsistencyError::TooFewSubjects(n_subjects));
    }
    let per_split: Vec<(f64, usize)> = (0..n_splits)
        .into_par_iter()
        .map(|split| {
            let halves = split_scores(observations, split, seed, horizon)?;
            let (a, b) = halves.vectors();
            let rho = srcc(&a, &b).map_err(|source| ConsistencyError::Split { split, source })?;
            Ok((rho, halves.excluded))
        })
        .collect::<Result<_, ConsistencyError>>()?;
    let rhos: Vec<f64> = per_split.iter().map(|p| p.0).collect();
    let mean_rho = if rhos.is_empty() {
        f64::NAN
    } else {
        rhos.iter().sum::<f64>() / rhos.len() as f64
    };
    Ok(SplitReport {
        n_splits,
        n_subjects,
        seed,
        mean_rho,
        rhos,
        excluded: per_split.iter().map(|p| p.1).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveMode {
    /// Centered moving average of `filter_len` points.
    #[default]
    BoxFilter,
    /// Mean of all points up to and including each rank.
    Cumulative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// 1-based rank by group-1 score, descending.
    pub rank: usize,
    pub group1: f64,
    pub group2: f64,
    pub chance: f64,
}

/// Centered moving average with truncated windows at the edges. For even
/// lengths the window reaches one further to the right.
pub fn box_filter(values: &[f64], len: usize) -> Vec<f64> {
    let n = values.len();
    let left = (len - 1) / 2;
    let right = len / 2;
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(left);
            let hi = (i + right).min(n - 1);
            values[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

pub fn cumulative_mean(values: &[f64]) -> Vec<f64> {
    let mut sum = 0.0;
    values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            sum += v;
            sum / (i + 1) as f64
        })
        .collect()
}

fn check_same_images(a: &BTreeMap<ImageId, f64>, b: &BTreeMap<ImageId, f64>) -> Result<(), ConsistencyError> {
    if a.len() != b.len() || a.keys().any(|k| !b.contains_key(k)) {
        return Err(ConsistencyError::MismatchedImages(a.len(), b.len()));
    }
    Ok(())
}

/// Image ids ordered by descending group-1 score, ties by id.
fn ranked_ids(scores: &BTreeMap<ImageId, f64>) -> Vec<&ImageId> {
    let mut ids: Vec<&ImageId> = scores.keys().collect();
    ids.sort_by(|a, b| scores[*b].total_cmp(&scores[*a]).then_with(|| a.cmp(b)));
    ids
}

/// Group-2 scores in group-1 rank order, smoothed, alongside the sorted
/// group-1 curve and a chance curve (group-2 scores shuffled with `seed`).
pub fn consistency_curve(
    group1: &BTreeMap<ImageId, f64>,
    group2: &BTreeMap<ImageId, f64>,
    filter_len: usize,
    mode: CurveMode,
    seed: u64,
) -> Result<Vec<CurvePoint>, ConsistencyError> {
    if filter_len == 0 {
        return Err(ConsistencyError::BadFilter);
    }
    check_same_images(group1, group2)?;
    let ids = ranked_ids(group1);
    let g1: Vec<f64> = ids.iter().map(|id| group1[*id]).collect();
    let g2: Vec<f64> = ids.iter().map(|id| group2[*id]).collect();
    let mut chance = g2.clone();
    chance.shuffle(&mut seed::rng(seed));
    let smooth = |v: &[f64]| match mode {
        CurveMode::BoxFilter => box_filter(v, filter_len),
        CurveMode::Cumulative => cumulative_mean(v),
    };
    let (g1, g2, chance) = (smooth(&g1), smooth(&g2), smooth(&chance));
    Ok((0..ids.len())
        .map(|i| CurvePoint {
            rank: i + 1,
            group1: g1[i],
            group2: g2[i],
            chance: chance[i],
        })
        .collect())
}

/// Pointwise mean of curves, cut to the shortest one (splits may exclude
/// different images).
pub fn mean_curve(curves: &[Vec<CurvePoint>]) -> Vec<CurvePoint> {
    let Some(len) = curves.iter().map(Vec::len).min() else {
        return Vec::new();
    };
    let k = curves.len() as f64;
    (0..len)
        .map(|i| {
            let sum = |f: fn(&CurvePoint) -> f64| curves.iter().map(|c| f(&c[i])).sum::<f64>() / k;
            CurvePoint {
                rank: i + 1,
                group1: sum(|p| p.group1),
                group2: sum(|p| p.group2),
                chance: sum(|p| p.chance),
            }
        })
        .collect()
}

/// Mean group-2 score over the `k` images group 1 ranks highest.
pub fn top_k_cross_mean(
    group1: &BTreeMap<ImageId, f64>,
    group2: &BTreeMap<ImageId, f64>,
    k: usize,
) -> Result<f64, ConsistencyError> {
    check_same_images(group1, group2)?;
    if k > group1.len() || k == 0 {
        return Err(ConsistencyError::KTooLarge { k, n: group1.len() });
    }
    Ok(ranked_ids(group1).into_iter().take(k).map(|id| group2[id]).sum::<f64>() / k as f64)
}
