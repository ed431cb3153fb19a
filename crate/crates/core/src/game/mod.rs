//! Live memory-game sessions.
//!
//! [`GameEngine`] owns every session, the per-subject exposure ledger and the
//! append-only [`EventLog`]. All state changes go through log records, so a
//! replay of the log rebuilds the engine exactly.

mod engine;
mod log;

pub use engine::{snapshot_path, EngineState, GameConfig, GameEngine, Pools};
pub use log::{
    load_sessions, read_records, records_for_sessions, sessions_from_records, write_records, EventLog, LogBody, LogRecord,
    SessionLog, LOG_VERSION,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ImageId;
use crate::scoring::FilterThresholds;
use crate::sequencer::{SequencerError, SessionPlan, SlotRole};

#[derive(Debug, Error)]
pub enum GameError {
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("session `{0}` is completed")]
    SessionCompleted(String),
    #[error("session `{0}` was abandoned")]
    SessionAbandoned(String),
    #[error("session `{0}` is still active")]
    SessionActive(String),
    #[error("response for slot {got} is out of order; expected slot {expected}")]
    OutOfOrder { expected: usize, got: usize },
    #[error("slot {0} already has a response")]
    DuplicateResponse(usize),
    #[error("subject `{subject}` has {available} unexposed targets, a level needs {needed}")]
    PoolExhausted {
        subject: String,
        available: usize,
        needed: usize,
    },
    #[error("subject id must be non-empty")]
    InvalidSubject,
    #[error(transparent)]
    Sequencer(#[from] SequencerError),
    #[error("event log i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("event log line {line}: {message}")]
    Corrupt { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Active,
    Completed,
    Abandoned,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionState {
    pub session_id: String,
    pub subject_id: String,
    pub plan: SessionPlan,
    /// Index of the next slot awaiting a response.
    pub cursor: usize,
    pub started_at: u64,
    pub last_activity: u64,
    pub status: SessionStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StimulusDescriptor {
    pub session_id: String,
    pub slot: usize,
    pub image_ref: String,
    pub display_duration_ms: u32,
    pub isi_ms: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Hit,
    Miss,
    FalseAlarm,
    CorrectRejection,
}

/// Signal-detection outcome of one keypress decision.
pub fn classify(role: SlotRole, pressed: bool) -> Classification {
    match (role.is_repeat(), pressed) {
        (true, true) => Classification::Hit,
        (true, false) => Classification::Miss,
        (false, true) => Classification::FalseAlarm,
        (false, false) => Classification::CorrectRejection,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseEvent {
    pub session_id: String,
    pub slot: usize,
    pub image_id: ImageId,
    pub role: SlotRole,
    pub pressed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reaction_time_ms: Option<u32>,
    pub classification: Classification,
    /// Server clock, milliseconds since the Unix epoch.
    pub timestamp_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ResponseCounts {
    pub hits: usize,
    pub misses: usize,
    pub false_alarms: usize,
    pub correct_rejections: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub subject_id: String,
    pub status: SessionStatus,
    pub responses: usize,
    pub counts: ResponseCounts,
    /// Hits over answered vigilance repeats.
    pub vigilance_hit_rate: f64,
    /// Hits over answered target repeats.
    pub target_hit_rate: f64,
    /// Presses over answered target first views and fillers.
    pub false_alarm_rate: f64,
    pub valid: bool,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Attention statistics for one session. Vigilance first views are counted
/// in the classification totals but not in the false-alarm rate.
pub fn summarize(
    session_id: &str,
    subject_id: &str,
    status: SessionStatus,
    plan: &SessionPlan,
    events: &[ResponseEvent],
    thresholds: &FilterThresholds,
) -> SessionSummary {
    let mut counts = ResponseCounts::default();
    let (mut vig_hits, mut vig_total) = (0, 0);
    let (mut tgt_hits, mut tgt_total) = (0, 0);
    let (mut fa, mut fa_total) = (0, 0);
    for e in events {
        match e.classification {
            Classification::Hit => counts.hits += 1,
            Classification::Miss => counts.misses += 1,
            Classification::FalseAlarm => counts.false_alarms += 1,
            Classification::CorrectRejection => counts.correct_rejections += 1,
        }
        match e.role {
            SlotRole::VigilanceRepeat => {
                vig_total += 1;
                vig_hits += usize::from(e.pressed);
            }
            SlotRole::TargetRepeat => {
                tgt_total += 1;
                tgt_hits += usize::from(e.pressed);
            }
            SlotRole::TargetFirst | SlotRole::Filler => {
                fa_total += 1;
                fa += usize::from(e.pressed);
            }
            SlotRole::VigilanceFirst => {}
        }
    }
    let vigilance_hit_rate = ratio(vig_hits, vig_total);
    let false_alarm_rate = ratio(fa, fa_total);
    let vigilance_ok = plan.count(SlotRole::VigilanceRepeat) == 0
        || (vig_total > 0 && vigilance_hit_rate >= thresholds.vigilance_min);
    SessionSummary {
        session_id: session_id.to_owned(),
        subject_id: subject_id.to_owned(),
        status,
        responses: events.len(),
        counts,
        vigilance_hit_rate,
        target_hit_rate: ratio(tgt_hits, tgt_total),
        false_alarm_rate,
        valid: status != SessionStatus::Active
            && vigilance_ok
            && false_alarm_rate <= thresholds.false_alarm_max,
    }
}
