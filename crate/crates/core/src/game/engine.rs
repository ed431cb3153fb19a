use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::log::{read_records, EventLog, LogBody, LogRecord};
use super::{
    classify, summarize, GameError, ResponseEvent, SessionState, SessionStatus, SessionSummary,
    StimulusDescriptor,
};
use crate::corpus::{CorpusIndex, ImageId, Pool};
use crate::scoring::FilterThresholds;
use crate::seed;
use crate::sequencer::{plan_level, SequencerConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GameConfig {
    /// Level composition; its `seed` field is ignored, plans are seeded per
    /// session from `master_seed`.
    pub sequencer: SequencerConfig,
    pub master_seed: u64,
    pub display_duration_ms: u32,
    pub isi_ms: u32,
    pub idle_timeout_ms: u64,
    pub thresholds: FilterThresholds,
    /// Prefix joined with the image id to form `StimulusDescriptor::image_ref`.
    pub image_url_prefix: String,
    /// Write a state snapshot every this many log records; 0 disables.
    pub snapshot_every: u64,
    pub sync: bool,
}

impl Default for GameConfig {
    fn default() -> Self {
        GameConfig {
            sequencer: SequencerConfig::default(),
            master_seed: 0,
            display_duration_ms: 1400,
            isi_ms: 400,
            idle_timeout_ms: 10 * 60 * 1000,
            thresholds: FilterThresholds::default(),
            image_url_prefix: "/images/".into(),
            snapshot_every: 500,
            sync: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Pools {
    pub targets: Vec<ImageId>,
    pub fillers: Vec<ImageId>,
    pub vigilance: Vec<ImageId>,
}

impl Pools {
    pub fn from_corpus(corpus: &CorpusIndex) -> Self {
        Pools {
            targets: corpus.pool(Pool::Target),
            fillers: corpus.pool(Pool::Filler),
            vigilance: corpus.pool(Pool::Vigilance),
        }
    }
}

/// Everything a replay must reproduce.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineState {
    pub sessions: BTreeMap<String, SessionState>,
    pub events: BTreeMap<String, Vec<ResponseEvent>>,
    /// Per-subject set of images already used as targets.
    pub exposed: BTreeMap<String, BTreeSet<ImageId>>,
    pub subject_sessions: BTreeMap<String, u64>,
    pub next_session: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Snapshot {
    version: u32,
    log_records: u64,
    state: EngineState,
}

pub struct GameEngine {
    config: GameConfig,
    pools: Pools,
    state: EngineState,
    log: Option<EventLog>,
}

impl GameEngine {
    /// An engine without persistence.
    pub fn in_memory(config: GameConfig, pools: Pools) -> Self {
        GameEngine {
            config,
            pools,
            state: EngineState::default(),
            log: None,
        }
    }

    /// Opens an engine backed by the log at `path`, replaying whatever the
    /// log already holds (from the latest snapshot when one is present).
    pub fn open(config: GameConfig, pools: Pools, path: &Path) -> Result<Self, GameError> {
        let mut engine = Self::in_memory(config, pools);
        if path.exists() {
            let records = read_records(path)?;
            let mut skip = 0usize;
            if let Some(snap) = load_snapshot(&snapshot_path(path))? {
                if snap.log_records as usize <= records.len() {
                    engine.state = snap.state;
                    skip = snap.log_records as usize;
                }
            }
            for rec in &records[skip..] {
                engine.apply(&rec.body)?;
            }
        }
        engine.log = Some(EventLog::open(path, engine.config.sync)?);
        Ok(engine)
    }

    /// Rebuilds state from the log alone, ignoring any snapshot.
    pub fn replay(config: GameConfig, pools: Pools, path: &Path) -> Result<Self, GameError> {
        let mut engine = Self::in_memory(config, pools);
        for rec in read_records(path)? {
            engine.apply(&rec.body)?;
        }
        Ok(engine)
    }

    pub fn config(&self) -> &GameConfig {
        &self.config
    }

    pub fn state(&self) -> &EngineState {
        &self.state
    }

    pub fn session(&self, session_id: &str) -> Option<&SessionState> {
        self.state.sessions.get(session_id)
    }

    pub fn events(&self, session_id: &str) -> &[ResponseEvent] {
        self.state.events.get(session_id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Targets this subject has not yet seen, in pool order.
    pub fn unexposed_targets(&self, subject_id: &str) -> Vec<ImageId> {
        let seen = self.state.exposed.get(subject_id);
        self.pools
            .targets
            .iter()
            .filter(|t| seen.is_none_or(|s| !s.contains(*t)))
            .cloned()
            .collect()
    }

    pub fn start_session(&mut self, subject_id: &str, now: u64) -> Result<SessionState, GameError> {
        if subject_id.trim().is_empty() {
            return Err(GameError::InvalidSubject);
        }
        let available = self.unexposed_targets(subject_id);
        let needed = self.config.sequencer.n_targets;
        if available.len() < needed {
            return Err(GameError::PoolExhausted {
                subject: subject_id.to_owned(),
                available: available.len(),
                needed,
            });
        }
        let counter = self.state.subject_sessions.get(subject_id).copied().unwrap_or(0);
        let plan_seed = seed::derive_keyed(self.config.master_seed, subject_id, counter);
        let plan = plan_level(
            &available,
            &self.pools.fillers,
            &self.pools.vigilance,
            &self.config.sequencer.with_seed(plan_seed),
        )?;
        let session_id = format!("sess-{:06}", self.state.next_session + 1);
        self.commit(LogBody::SessionStarted {
            session_id: session_id.clone(),
            subject_id: subject_id.to_owned(),
            subject_session: counter,
            plan,
            at: now,
        })?;
        Ok(self.state.sessions[&session_id].clone())
    }

    pub fn next_stimulus(&mut self, session_id: &str, now: u64) -> Result<StimulusDescriptor, GameError> {
        self.expire_if_idle(session_id, now)?;
        let s = self.active(session_id)?;
        let slot = &s.plan.slots[s.cursor];
        Ok(StimulusDescriptor {
            session_id: session_id.to_owned(),
            slot: slot.position,
            image_ref: format!("{}{}", self.config.image_url_prefix, slot.image_id),
            display_duration_ms: self.config.display_duration_ms,
            isi_ms: self.config.isi_ms,
        })
    }

    /// Records the keypress decision for `slot`, which must be the current
    /// cursor. A response for an already answered slot is rejected and the
    /// first one stands.
    pub fn record_response(
        &mut self,
        session_id: &str,
        slot: usize,
        pressed: bool,
        reaction_time_ms: Option<u32>,
        now: u64,
    ) -> Result<ResponseEvent, GameError> {
        let s = self
            .state
            .sessions
            .get(session_id)
            .ok_or_else(|| GameError::UnknownSession(session_id.to_owned()))?;
        if slot < s.cursor {
            return Err(GameError::DuplicateResponse(slot));
        }
        self.expire_if_idle(session_id, now)?;
        let s = self.active(session_id)?;
        if slot != s.cursor {
            return Err(GameError::OutOfOrder {
                expected: s.cursor,
                got: slot,
            });
        }
        let planned = &s.plan.slots[slot];
        let event = ResponseEvent {
            session_id: session_id.to_owned(),
            slot,
            image_id: planned.image_id.clone(),
            role: planned.role,
            pressed,
            reaction_time_ms: if pressed { reaction_time_ms } else { None },
            classification: classify(planned.role, pressed),
            timestamp_ms: now,
        };
        self.commit(LogBody::Response {
            event: event.clone(),
        })?;
        Ok(event)
    }

    pub fn session_summary(&self, session_id: &str) -> Result<SessionSummary, GameError> {
        let s = self
            .state
            .sessions
            .get(session_id)
            .ok_or_else(|| GameError::UnknownSession(session_id.to_owned()))?;
        if s.status == SessionStatus::Active {
            return Err(GameError::SessionActive(session_id.to_owned()));
        }
        Ok(summarize(
            &s.session_id,
            &s.subject_id,
            s.status,
            &s.plan,
            self.events(session_id),
            &self.config.thresholds,
        ))
    }

    /// Marks every session idle for longer than the timeout as abandoned and
    /// returns their ids.
    pub fn sweep_idle(&mut self, now: u64) -> Result<Vec<String>, GameError> {
        let idle: Vec<String> = self
            .state
            .sessions
            .values()
            .filter(|s| self.is_idle(s, now))
            .map(|s| s.session_id.clone())
            .collect();
        for id in &idle {
            self.commit(LogBody::Abandoned {
                session_id: id.clone(),
                at: now,
            })?;
        }
        Ok(idle)
    }

    fn is_idle(&self, s: &SessionState, now: u64) -> bool {
        s.status == SessionStatus::Active
            && now.saturating_sub(s.last_activity) > self.config.idle_timeout_ms
    }

    fn expire_if_idle(&mut self, session_id: &str, now: u64) -> Result<(), GameError> {
        let idle = self
            .state
            .sessions
            .get(session_id)
            .is_some_and(|s| self.is_idle(s, now));
        if idle {
            self.commit(LogBody::Abandoned {
                session_id: session_id.to_owned(),
                at: now,
            })?;
        }
        Ok(())
    }

    fn active(&self, session_id: &str) -> Result<&SessionState, GameError> {
        let s = self
            .state
            .sessions
            .get(session_id)
            .ok_or_else(|| GameError::UnknownSession(session_id.to_owned()))?;
        match s.status {
            SessionStatus::Active => Ok(s),
            SessionStatus::Completed => Err(GameError::SessionCompleted(session_id.to_owned())),
            SessionStatus::Abandoned => Err(GameError::SessionAbandoned(session_id.to_owned())),
        }
    }

    /// Persists a record, then applies it.
    fn commit(&mut self, body: LogBody) -> Result<(), GameError> {
        if let Some(log) = self.log.as_mut() {
            log.append(&LogRecord::new(body.clone()))?;
        }
        self.apply(&body)?;
        if let Some(log) = self.log.as_ref() {
            let every = self.config.snapshot_every;
            if every > 0 && log.records() % every == 0 {
                write_snapshot(&snapshot_path(log.path()), log.records(), &self.state)?;
            }
        }
        Ok(())
    }

    fn apply(&mut self, body: &LogBody) -> Result<(), GameError> {
        let st = &mut self.state;
        match body {
            LogBody::SessionStarted {
                session_id,
                subject_id,
                subject_session,
                plan,
                at,
            } => {
                let exposed = st.exposed.entry(subject_id.clone()).or_default();
                exposed.extend(plan.target_ids());
                st.subject_sessions.insert(subject_id.clone(), subject_session + 1);
                st.next_session += 1;
                st.events.insert(session_id.clone(), Vec::new());
                st.sessions.insert(
                    session_id.clone(),
                    SessionState {
                        session_id: session_id.clone(),
                        subject_id: subject_id.clone(),
                        plan: plan.clone(),
                        cursor: 0,
                        started_at: *at,
                        last_activity: *at,
                        status: if plan.is_empty() {
                            SessionStatus::Completed
                        } else {
                            SessionStatus::Active
                        },
                    },
                );
            }
            LogBody::Response { event } => {
                let s = st
                    .sessions
                    .get_mut(&event.session_id)
                    .ok_or_else(|| GameError::UnknownSession(event.session_id.clone()))?;
                if event.slot != s.cursor || s.status != SessionStatus::Active {
                    return Err(GameError::OutOfOrder {
                        expected: s.cursor,
                        got: event.slot,
                    });
                }
                s.cursor += 1;
                s.last_activity = event.timestamp_ms;
                if s.cursor == s.plan.len() {
                    s.status = SessionStatus::Completed;
                }
                st.events.entry(event.session_id.clone()).or_default().push(event.clone());
            }
            LogBody::Abandoned { session_id, .. } => {
                let s = st
                    .sessions
                    .get_mut(session_id)
                    .ok_or_else(|| GameError::UnknownSession(session_id.clone()))?;
                s.status = SessionStatus::Abandoned;
            }
        }
        Ok(())
    }
}

pub fn snapshot_path(log: &Path) -> PathBuf {
    let mut name = log.file_name().unwrap_or_default().to_os_string();
    name.push(".snapshot.json");
    log.with_file_name(name)
}

fn write_snapshot(path: &Path, log_records: u64, state: &EngineState) -> Result<(), GameError> {
    let snap = Snapshot {
        version: super::LOG_VERSION,
        log_records,
        state: state.clone(),
    };
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, serde_json::to_vec(&snap).map_err(std::io::Error::other)?)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn load_snapshot(path: &Path) -> Result<Option<Snapshot>, GameError> {
    if !path.exists() {
        return Ok(None);
    }
    let bytes = std::fs::read(path)?;
    let snap: Snapshot = serde_json::from_slice(&bytes).map_err(|e| GameError::Corrupt {
        line: 0,
        message: format!("snapshot: {e}"),
    })?;
    Ok((snap.version == super::LOG_VERSION).then_some(snap))
}
