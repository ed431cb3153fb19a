//! Memorability scores from response logs.
//!
//! Each target repeat yields one observation (hit or miss at some repeat
//! interval). Hit probability is modeled as linear in `ln(interval)` with one
//! pooled slope; every image's raw hit rate is then shifted along that slope
//! from its own mean interval to the common horizon `T`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ImageId;
use crate::delimited;
use crate::game::{summarize, SessionLog, SessionStatus};
use crate::sequencer::SlotRole;

/// Delay, in slots, every score is regularized to.
pub const DEFAULT_HORIZON: f64 = 100.0;

#[derive(Debug, Error)]
pub enum ScoringError {
    #[error("session `{session}` slot {slot}: {message}")]
    UnmatchedResponse {
        session: String,
        slot: usize,
        message: String,
    },
    #[error("degenerate design: all {n} observations share interval {interval}")]
    DegenerateDesign { n: usize, interval: u32 },
    #[error("no observations")]
    NoObservations,
    #[error("no valid sessions among {0}")]
    NoValidSessions(usize),
    #[error("horizon must be positive, got {0}")]
    BadHorizon(f64),
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterThresholds {
    /// Minimum vigilance hit rate, inclusive.
    pub vigilance_min: f64,
    /// Maximum false-alarm rate, inclusive.
    pub false_alarm_max: f64,
}

impl Default for FilterThresholds {
    fn default() -> Self {
        FilterThresholds {
            vigilance_min: 0.75,
            false_alarm_max: 0.50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoringConfig {
    pub thresholds: FilterThresholds,
    pub horizon: f64,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        ScoringConfig {
            thresholds: FilterThresholds::default(),
            horizon: DEFAULT_HORIZON,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub image_id: ImageId,
    pub subject_id: String,
    pub hit: bool,
    /// Slots between the first view and the repeat.
    pub interval: u32,
}

/// Keeps finished sessions whose attention checks pass.
pub fn filter_sessions<'a>(sessions: &'a [SessionLog], thresholds: &FilterThresholds) -> Vec<&'a SessionLog> {
    sessions
        .iter()
        .filter(|s| s.status != SessionStatus::Active)
        .filter(|s| {
            summarize(&s.session_id, &s.subject_id, s.status, &s.plan, &s.events, thresholds).valid
        })
        .collect()
}

/// One observation per target-repeat response, grouped by image.
pub fn collect_observations<'a, I>(sessions: I) -> Result<BTreeMap<ImageId, Vec<Observation>>, ScoringError>
where
    I: IntoIterator<Item = &'a SessionLog>,
{
    let mut out: BTreeMap<ImageId, Vec<Observation>> = BTreeMap::new();
    for s in sessions {
        for e in &s.events {
            let unmatched = |message: String| ScoringError::UnmatchedResponse {
                session: s.session_id.clone(),
                slot: e.slot,
                message,
            };
            let planned = s
                .plan
                .slots
                .get(e.slot)
                .ok_or_else(|| unmatched("slot outside the plan".into()))?;
            if planned.image_id != e.image_id || planned.role != e.role {
                return Err(unmatched(format!(
                    "response for `{}` ({:?}) but plan shows `{}` ({:?})",
                    e.image_id, e.role, planned.image_id, planned.role
                )));
            }
            if e.role != SlotRole::TargetRepeat {
                continue;
            }
            let first = s
                .plan
                .first_view_of(planned)
                .ok_or_else(|| unmatched("repeat without a first view".into()))?;
            out.entry(e.image_id.clone()).or_default().push(Observation {
                image_id: e.image_id.clone(),
                subject_id: s.subject_id.clone(),
                hit: e.pressed,
                interval: (e.slot - first) as u32,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayModel {
    /// Hit probability at interval 1 (`ln t = 0`).
    pub alpha: f64,
    /// Change in hit probability per unit of `ln t`.
    pub beta: f64,
    pub n_obs: usize,
}

impl DecayModel {
    pub fn flat(hit_rate: f64, n_obs: usize) -> Self {
        DecayModel {
            alpha: hit_rate,
            beta: 0.0,
            n_obs,
        }
    }

    pub fn predict(&self, interval: f64) -> f64 {
        self.alpha + self.beta * interval.ln()
    }
}

/// Ordinary least squares of the 0/1 hit indicator on `(1, ln t)`.
///
/// Observations are first tallied per interval, so the result depends only
/// on the observation multiset.
pub fn fit_decay<'a, I>(observations: I) -> Result<DecayModel, ScoringError>
where
    I: IntoIterator<Item = &'a Observation>,
{
    let mut tally: BTreeMap<u32, (u64, u64)> = BTreeMap::new();
    for o in observations {
        let e = tally.entry(o.interval).or_default();
        e.0 += 1;
        e.1 += u64::from(o.hit);
    }
    let n: u64 = tally.values().map(|v| v.0).sum();
    if n == 0 {
        return Err(ScoringError::NoObservations);
    }
    if tally.len() < 2 {
        let (&interval, _) = tally.iter().next().expect("non-empty");
        return Err(ScoringError::DegenerateDesign {
            n: n as usize,
            interval,
        });
    }
    let nf = n as f64;
    let hits: u64 = tally.values().map(|v| v.1).sum();
    let y_mean = hits as f64 / nf;
    let x_mean = tally.iter().map(|(&t, &(c, _))| c as f64 * f64::from(t).ln()).sum::<f64>() / nf;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (&t, &(c, h)) in &tally {
        let dx = f64::from(t).ln() - x_mean;
        sxx += c as f64 * dx * dx;
        sxy += dx * (h as f64 - c as f64 * y_mean);
    }
    let beta = sxy / sxx;
    Ok(DecayModel {
        alpha: y_mean - beta * x_mean,
        beta,
        n_obs: n as usize,
    })
}

/// Like [`fit_decay`], but a single shared interval yields a flat model
/// instead of an error.
pub fn fit_decay_or_flat<'a, I>(observations: I) -> Result<DecayModel, ScoringError>
where
    I: IntoIterator<Item = &'a Observation> + Clone,
{
    match fit_decay(observations.clone()) {
        Err(ScoringError::DegenerateDesign { n, .. }) => {
            let hits = observations.into_iter().filter(|o| o.hit).count();
            Ok(DecayModel::flat(hits as f64 / n as f64, n))
        }
        other => other,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageStats {
    pub n_obs: usize,
    pub raw_hit_rate: f64,
    pub mean_interval: f64,
}

pub fn image_stats(observations: &[Observation]) -> Result<ImageStats, ScoringError> {
    if observations.is_empty() {
        return Err(ScoringError::NoObservations);
    }
    let n = observations.len();
    let hits = observations.iter().filter(|o| o.hit).count();
    let total: u64 = observations.iter().map(|o| u64::from(o.interval)).sum();
    Ok(ImageStats {
        n_obs: n,
        raw_hit_rate: hits as f64 / n as f64,
        mean_interval: total as f64 / n as f64,
    })
}

/// Raw hit rate shifted along the decay slope from the image's mean interval
/// to `horizon`, clamped to [0, 1].
pub fn regularize(stats: &ImageStats, decay: &DecayModel, horizon: f64) -> f64 {
    let shift = horizon.ln() - stats.mean_interval.ln();
    (stats.raw_hit_rate + decay.beta * shift).clamp(0.0, 1.0)
}

pub fn memorability_score(
    observations: &[Observation],
    decay: &DecayModel,
    horizon: f64,
) -> Result<f64, ScoringError> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(ScoringError::BadHorizon(horizon));
    }
    Ok(regularize(&image_stats(observations)?, decay, horizon))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageScore {
    pub image_id: ImageId,
    pub n_obs: usize,
    pub raw_hit_rate: f64,
    pub mean_interval: f64,
    pub score: f64,
}

/// Fits the pooled decay on all observations and scores every image.
pub fn score_observations(
    observations: &BTreeMap<ImageId, Vec<Observation>>,
    horizon: f64,
) -> Result<(DecayModel, Vec<ImageScore>), ScoringError> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(ScoringError::BadHorizon(horizon));
    }
    let decay = fit_decay_or_flat(observations.values().flatten())?;
    let mut scores = Vec::with_capacity(observations.len());
    for (id, obs) in observations {
        if obs.is_empty() {
            continue;
        }
        let stats = image_stats(obs)?;
        scores.push(ImageScore {
            image_id: id.clone(),
            n_obs: stats.n_obs,
            raw_hit_rate: stats.raw_hit_rate,
            mean_interval: stats.mean_interval,
            score: regularize(&stats, &decay, horizon),
        });
    }
    Ok((decay, scores))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemorabilityTable {
    pub images: Vec<ImageScore>,
    pub decay: DecayModel,
    pub horizon: f64,
    pub n_sessions: usize,
    pub n_valid_sessions: usize,
    /// Mean over images of the raw hit rate.
    pub mean_hit_rate: f64,
    /// Sample standard deviation over images of the raw hit rate.
    pub sd_hit_rate: f64,
    /// Mean over valid sessions of the session false-alarm rate.
    pub mean_false_alarm_rate: f64,
}

impl MemorabilityTable {
    pub fn scores(&self) -> BTreeMap<ImageId, f64> {
        self.images.iter().map(|s| (s.image_id.clone(), s.score)).collect()
    }

    /// `image_id, n_obs, raw_hit_rate, score`, sorted by image id.
    pub fn write_tsv(&self, path: &Path) -> Result<(), ScoringError> {
        delimited::write_table(
            path,
            &["image_id", "n_obs", "raw_hit_rate", "score"],
            self.images.iter().map(|s| {
                vec![
                    s.image_id.clone(),
                    s.n_obs.to_string(),
                    s.raw_hit_rate.to_string(),
                    s.score.to_string(),
                ]
            }),
        )?;
        Ok(())
    }
}

/// One row of a persisted score table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub n_obs: usize,
    pub raw_hit_rate: f64,
    pub score: f64,
}

/// Reads a table written by [`MemorabilityTable::write_tsv`].
pub fn load_score_table(path: &Path) -> Result<BTreeMap<ImageId, ScoreRow>, ScoringError> {
    let fmt = |message: String| ScoringError::Format {
        path: path.display().to_string(),
        message,
    };
    let (header, rows) = delimited::read_table(path)?;
    let cols = delimited::column_indices(&header, &["image_id", "n_obs", "raw_hit_rate", "score"])
        .map_err(fmt)?;
    let mut out = BTreeMap::new();
    for (line, rec) in rows {
        let get = |i: usize| rec.get(cols[i]).unwrap_or_default();
        let parse_f = |i: usize| {
            get(i)
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| fmt(format!("line {line}: bad number `{}`", get(i))))
        };
        let row = ScoreRow {
            n_obs: get(1)
                .parse()
                .map_err(|_| fmt(format!("line {line}: bad count `{}`", get(1))))?,
            raw_hit_rate: parse_f(2)?,
            score: parse_f(3)?,
        };
        if out.insert(get(0).to_owned(), row).is_some() {
            return Err(fmt(format!("line {line}: duplicate image_id `{}`", get(0))));
        }
    }
    Ok(out)
}

/// Filter, collect, fit and score, plus corpus-level aggregates.
pub fn score_table(sessions: &[SessionLog], config: &ScoringConfig) -> Result<MemorabilityTable, ScoringError> {
    let valid = filter_sessions(sessions, &config.thresholds);
    if valid.is_empty() {
        return Err(ScoringError::NoValidSessions(sessions.len()));
    }
    let observations = collect_observations(valid.iter().copied())?;
    let (decay, images) = score_observations(&observations, config.horizon)?;
    if images.is_empty() {
        return Err(ScoringError::NoObservations);
    }

    let n = images.len() as f64;
    let mean_hit_rate = images.iter().map(|s| s.raw_hit_rate).sum::<f64>() / n;
    let sd_hit_rate = if images.len() > 1 {
        (images.iter().map(|s| (s.raw_hit_rate - mean_hit_rate).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mean_false_alarm_rate = valid
        .iter()
        .map(|s| summarize(&s.session_id, &s.subject_id, s.status, &s.plan, &s.events, &config.thresholds).false_alarm_rate)
        .sum::<f64>()
        / valid.len() as f64;

    Ok(MemorabilityTable {
        images,
        decay,
        horizon: config.horizon,
        n_sessions: sessions.len(),
        n_valid_sessions: valid.len(),
        mean_hit_rate,
        sd_hit_rate,
        mean_false_alarm_rate,
    })
}
