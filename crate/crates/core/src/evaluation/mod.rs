//! Prediction metrics and the analysis reports built on them.

mod pvalue;
mod rank;

pub use pvalue::{perm_pvalue, PermutationMode, DEFAULT_PERMUTATIONS, MAX_EXHAUSTIVE_N};
pub use rank::{average_ranks, pearson, srcc};

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CategoryId, CorpusIndex, ImageId};
use crate::delimited;
use crate::features::GlcmStats;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {min} values, got {len}")]
    TooShort { len: usize, min: usize },
    #[error("input contains non-finite values")]
    NonFinite,
    #[error("constant input: rank correlation undefined")]
    Constant,
    #[error("at least 100 permutations required, got {0}")]
    TooFewPermutations(usize),
    #[error("exhaustive permutation limited to n <= 10, got {0}")]
    TooLargeForExhaustive(usize),
    #[error("predictions missing for {} image(s): {}", .0.len(), .0.join(", "))]
    MissingImages(Vec<ImageId>),
    #[error("duplicate image_id `{0}`")]
    DuplicateImage(ImageId),
    #[error("no GLCM statistics for image `{0}`")]
    MissingGlcm(ImageId),
    #[error("invalid group bounds: {0}")]
    BadBounds(String),
    #[error("category `{0}` missing from the frequency table")]
    MissingFrequency(CategoryId),
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub fn mae(a: &[f64], b: &[f64]) -> Result<f64, EvalError> {
    rank::check_pair(a, b, 1)?;
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64)
}

pub fn mse(a: &[f64], b: &[f64]) -> Result<f64, EvalError> {
    rank::check_pair(a, b, 1)?;
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankError {
    pub image_id: ImageId,
    pub truth: f64,
    pub predicted: f64,
    pub rank_truth: f64,
    pub rank_predicted: f64,
    pub rank_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub rho: f64,
    pub p_value: f64,
    pub mae: f64,
    pub mse: f64,
    /// Sorted by image id.
    pub rank_errors: Vec<RankError>,
}

/// Reads an `image_id, score` prediction file. Duplicate ids and
/// non-numeric scores are errors.
pub fn load_predictions(path: &Path) -> Result<BTreeMap<ImageId, f64>, EvalError> {
    let p = path.display().to_string();
    let (header, rows) = delimited::read_table(path).map_err(|source| EvalError::Io {
        path: p.clone(),
        source,
    })?;
    let cols = delimited::column_indices(&header, &["image_id", "score"]).map_err(|message| {
        EvalError::Format {
            path: p.clone(),
            message,
        }
    })?;
    let mut out = BTreeMap::new();
    for (line, rec) in rows {
        let id = rec.get(cols[0]).unwrap_or_default().to_owned();
        let raw = rec.get(cols[1]).unwrap_or_default();
        let v: f64 = raw.parse().map_err(|_| EvalError::Format {
            path: p.clone(),
            message: format!("line {line}: bad score `{raw}`"),
        })?;
        if !v.is_finite() {
            return Err(EvalError::NonFinite);
        }
        if out.insert(id.clone(), v).is_some() {
            return Err(EvalError::DuplicateImage(id));
        }
    }
    Ok(out)
}

pub fn write_predictions(path: &Path, predictions: &BTreeMap<ImageId, f64>) -> std::io::Result<()> {
    delimited::write_table(
        path,
        &["image_id", "score"],
        predictions.iter().map(|(id, v)| vec![id.clone(), v.to_string()]),
    )
}

/// Joins predictions with ground truth on image id and computes every metric.
/// Predictions for images outside `truth` are ignored.
pub fn evaluate_predictor(
    predictions: &BTreeMap<ImageId, f64>,
    truth: &BTreeMap<ImageId, f64>,
    mode: PermutationMode,
) -> Result<EvalReport, EvalError> {
    let missing: Vec<ImageId> = truth.keys().filter(|id| !predictions.contains_key(*id)).cloned().collect();
    if !missing.is_empty() {
        return Err(EvalError::MissingImages(missing));
    }
    let ids: Vec<&ImageId> = truth.keys().collect();
    let t: Vec<f64> = ids.iter().map(|id| truth[*id]).collect();
    let p: Vec<f64> = ids.iter().map(|id| predictions[*id]).collect();
    let rho = srcc(&p, &t)?;
    let p_value = perm_pvalue(&p, &t, mode)?;
    let rt = average_ranks(&t);
    let rp = average_ranks(&p);
    let rank_errors = ids
        .iter()
        .enumerate()
        .map(|(i, id)| RankError {
            image_id: (*id).clone(),
            truth: t[i],
            predicted: p[i],
            rank_truth: rt[i],
            rank_predicted: rp[i],
            rank_error: (rp[i] - rt[i]).abs(),
        })
        .collect();
    Ok(EvalReport {
        n: ids.len(),
        rho,
        p_value,
        mae: mae(&p, &t)?,
        mse: mse(&p, &t)?,
        rank_errors,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlcmGroup {
    /// 1-based inclusive rank-error positions covered by the group.
    pub first: usize,
    pub last: usize,
    pub contrast: f64,
    pub homogeneity: f64,
    pub correlation: f64,
}

/// Upper bounds matching groups 1-100, 101-200, 201-300 and 301-n.
pub fn default_group_bounds(n: usize) -> Vec<usize> {
    let mut b: Vec<usize> = [100, 200, 300].into_iter().filter(|&x| x < n).collect();
    b.push(n);
    b
}

/// Orders images by ascending rank error (ties by id), cuts the order at
/// the cumulative `group_bounds` and averages the GLCM statistics per group.
pub fn rank_error_groups(
    report: &EvalReport,
    glcm: &BTreeMap<ImageId, GlcmStats>,
    group_bounds: &[usize],
) -> Result<Vec<GlcmGroup>, EvalError> {
    let n = report.rank_errors.len();
    if group_bounds.is_empty() {
        return Err(EvalError::BadBounds("no bounds given".into()));
    }
    let mut prev = 0;
    for &b in group_bounds {
        if b > n {
            return Err(EvalError::BadBounds(format!("bound {b} exceeds {n} images")));
        }
        if b <= prev {
            return Err(EvalError::BadBounds(format!("bounds must increase strictly, got {group_bounds:?}")));
        }
        prev = b;
    }
    let mut order: Vec<&RankError> = report.rank_errors.iter().collect();
    order.sort_by(|a, b| a.rank_error.total_cmp(&b.rank_error).then_with(|| a.image_id.cmp(&b.image_id)));

    let mut out = Vec::with_capacity(group_bounds.len());
    let mut start = 0;
    for &end in group_bounds {
        let members = &order[start..end];
        let mut sums = [0.0; 3];
        for r in members {
            let g = glcm.get(&r.image_id).ok_or_else(|| EvalError::MissingGlcm(r.image_id.clone()))?;
            sums[0] += g.contrast;
            sums[1] += g.homogeneity;
            sums[2] += g.correlation;
        }
        let k = members.len() as f64;
        out.push(GlcmGroup {
            first: start + 1,
            last: end,
            contrast: sums[0] / k,
            homogeneity: sums[1] / k,
            correlation: sums[2] / k,
        });
        start = end;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryStats {
    pub category_id: CategoryId,
    pub n_images: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub sd: f64,
}

/// Mean and SD of memorability per category, ordered by descending mean
/// (ties by category id). Categories without scored images are omitted.
pub fn category_memorability(corpus: &CorpusIndex, scores: &BTreeMap<ImageId, f64>) -> Vec<CategoryStats> {
    let mut by_cat: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for rec in &corpus.images {
        if let Some(&s) = scores.get(&rec.image_id) {
            for c in &rec.categories {
                by_cat.entry(c).or_default().push(s);
            }
        }
    }
    let mut out: Vec<CategoryStats> = by_cat
        .into_iter()
        .map(|(c, v)| {
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
            CategoryStats {
                category_id: c.to_owned(),
                n_images: v.len(),
                mean,
                sd,
            }
        })
        .collect();
    out.sort_by(|a, b| b.mean.total_cmp(&a.mean).then_with(|| a.category_id.cmp(&b.category_id)));
    out
}

/// Term frequencies (percent) keyed by category id.
pub type FrequencyTable = BTreeMap<CategoryId, f64>;

/// Reads a `term, frequency` table.
pub fn load_frequency_table(path: &Path) -> Result<FrequencyTable, EvalError> {
    let p = path.display().to_string();
    let (header, rows) = delimited::read_table(path).map_err(|source| EvalError::Io {
        path: p.clone(),
        source,
    })?;
    let cols = delimited::column_indices(&header, &["term", "frequency"]).map_err(|message| {
        EvalError::Format {
            path: p.clone(),
            message,
        }
    })?;
    let mut out = BTreeMap::new();
    for (line, rec) in rows {
        let raw = rec.get(cols[1]).unwrap_or_default();
        let v: f64 = raw.parse().ok().filter(|v: &f64| v.is_finite() && *v >= 0.0).ok_or_else(|| {
            EvalError::Format {
                path: p.clone(),
                message: format!("line {line}: bad frequency `{raw}`"),
            }
        })?;
        out.insert(rec.get(cols[0]).unwrap_or_default().to_owned(), v);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyBand {
    /// 1-based inclusive rank range.
    pub first: usize,
    pub last: usize,
    pub categories: Vec<CategoryId>,
    pub mean_frequency: f64,
}

/// Ranks categories by descending mean memorability (ties by id) and
/// averages their word frequencies within each 1-based inclusive band.
pub fn word_frequency_report(
    category_means: &BTreeMap<CategoryId, f64>,
    frequencies: &FrequencyTable,
    bands: &[(usize, usize)],
) -> Result<Vec<FrequencyBand>, EvalError> {
    if let Some(c) = category_means.keys().find(|c| !frequencies.contains_key(*c)) {
        return Err(EvalError::MissingFrequency(c.clone()));
    }
    let mut ranked: Vec<(&CategoryId, f64)> = category_means.iter().map(|(c, &m)| (c, m)).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let n = ranked.len();
    let mut seen = BTreeSet::new();
    bands
        .iter()
        .map(|&(first, last)| {
            if first == 0 || first > last || last > n {
                return Err(EvalError::BadBounds(format!("band {first}-{last} invalid for {n} categories")));
            }
            if !(first..=last).all(|r| seen.insert(r)) {
                return Err(EvalError::BadBounds(format!("band {first}-{last} overlaps another band")));
            }
            let members = &ranked[first - 1..last];
            let mean_frequency = members.iter().map(|(c, _)| frequencies[*c]).sum::<f64>() / members.len() as f64;
            Ok(FrequencyBand {
                first,
                last,
                categories: members.iter().map(|(c, _)| (*c).clone()).collect(),
                mean_frequency,
            })
        })
        .collect()
}

/// Bands 1-20, 21-50, 51-n (clipped to the category count).
pub fn default_frequency_bands(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut first = 1;
    for last in [20, 50, n] {
        let last = last.min(n);
        if first <= last {
            out.push((first, last));
            first = last + 1;
        }
    }
    out
}
