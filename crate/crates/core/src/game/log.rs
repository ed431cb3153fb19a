use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{GameError, ResponseEvent, SessionStatus};
use crate::sequencer::SessionPlan;

/// Schema version written into every record.
pub const LOG_VERSION: u32 = 1;

/// One line of the event log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogRecord {
    pub version: u32,
    #[serde(flatten)]
    pub body: LogBody,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogBody {
    SessionStarted {
        session_id: String,
        subject_id: String,
        /// Per-subject session counter used in seed derivation.
        subject_session: u64,
        plan: SessionPlan,
        at: u64,
    },
    Response {
        event: ResponseEvent,
    },
    Abandoned {
        session_id: String,
        at: u64,
    },
}

impl LogRecord {
    pub fn new(body: LogBody) -> Self {
        LogRecord {
            version: LOG_VERSION,
            body,
        }
    }
}

/// Append-only, line-delimited JSON log.
#[derive(Debug)]
pub struct EventLog {
    path: PathBuf,
    file: File,
    sync: bool,
    records: u64,
}

impl EventLog {
    /// Opens (creating if needed) a log for appending. `sync` forces every
    /// record to stable storage before the append returns.
    pub fn open(path: &Path, sync: bool) -> Result<Self, GameError> {
        let records = if path.exists() {
            let n = read_records(path)?.len() as u64;
            drop_torn_tail(path)?;
            n
        } else {
            0
        };
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(EventLog {
            path: path.to_owned(),
            file,
            sync,
            records,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Number of records in the log, including those present before opening.
    pub fn records(&self) -> u64 {
        self.records
    }

    pub fn append(&mut self, record: &LogRecord) -> Result<(), GameError> {
        let mut line = serde_json::to_string(record).map_err(std::io::Error::other)?;
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.flush()?;
        if self.sync {
            self.file.sync_data()?;
        }
        self.records += 1;
        Ok(())
    }
}

/// Cuts a partial final line so the next append starts on a fresh line.
fn drop_torn_tail(path: &Path) -> Result<(), GameError> {
    let bytes = std::fs::read(path)?;
    if bytes.is_empty() || bytes.ends_with(b"\n") {
        return Ok(());
    }
    let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    let tail = std::str::from_utf8(&bytes[keep..]).unwrap_or("");
    if serde_json::from_str::<LogRecord>(tail).is_ok() {
        // complete record missing only its newline
        OpenOptions::new().append(true).open(path)?.write_all(b"\n")?;
    } else {
        OpenOptions::new().write(true).open(path)?.set_len(keep as u64)?;
    }
    Ok(())
}

/// Reads every record. A torn final line (a crash mid-append) is ignored; a
/// bad line anywhere else is an error.
pub fn read_records(path: &Path) -> Result<Vec<LogRecord>, GameError> {
    let reader = BufReader::new(File::open(path)?);
    let lines: Vec<String> = reader.lines().collect::<Result<_, _>>()?;
    let last = lines.iter().rposition(|l| !l.trim().is_empty());
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<LogRecord>(line) {
            Ok(rec) if rec.version == LOG_VERSION => out.push(rec),
            Ok(rec) => {
                return Err(GameError::Corrupt {
                    line: i + 1,
                    message: format!("unsupported record version {}", rec.version),
                })
            }
            Err(_) if Some(i) == last && !line.ends_with('}') => break,
            Err(e) => {
                return Err(GameError::Corrupt {
                    line: i + 1,
                    message: e.to_string(),
                })
            }
        }
    }
    Ok(out)
}

/// Everything the log holds about one session, for offline analysis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionLog {
    pub session_id: String,
    pub subject_id: String,
    pub plan: SessionPlan,
    pub events: Vec<ResponseEvent>,
    pub status: SessionStatus,
}

/// Groups the records of one or more logs by session, in order of first
/// appearance.
pub fn sessions_from_records(records: &[LogRecord]) -> Result<Vec<SessionLog>, GameError> {
    let mut out: Vec<SessionLog> = Vec::new();
    let mut index = std::collections::HashMap::new();
    for (i, rec) in records.iter().enumerate() {
        match &rec.body {
            LogBody::SessionStarted {
                session_id,
                subject_id,
                plan,
                ..
            } => {
                if index.insert(session_id.clone(), out.len()).is_some() {
                    return Err(GameError::Corrupt {
                        line: i + 1,
                        message: format!("session `{session_id}` started twice"),
                    });
                }
                out.push(SessionLog {
                    session_id: session_id.clone(),
                    subject_id: subject_id.clone(),
                    plan: plan.clone(),
                    events: Vec::new(),
                    status: if plan.is_empty() {
                        SessionStatus::Completed
                    } else {
                        SessionStatus::Active
                    },
                });
            }
            LogBody::Response { event } => {
                let s = index.get(&event.session_id).map(|&k| &mut out[k]).ok_or_else(|| {
                    GameError::Corrupt {
                        line: i + 1,
                        message: format!("response for unknown session `{}`", event.session_id),
                    }
                })?;
                s.events.push(event.clone());
                if s.events.len() == s.plan.len() {
                    s.status = SessionStatus::Completed;
                }
            }
            LogBody::Abandoned { session_id, .. } => {
                let s = index.get(session_id).map(|&k| &mut out[k]).ok_or_else(|| {
                    GameError::Corrupt {
                        line: i + 1,
                        message: format!("abandonment of unknown session `{session_id}`"),
                    }
                })?;
                s.status = SessionStatus::Abandoned;
            }
        }
    }
    Ok(out)
}

/// The records that rebuild `sessions` through [`sessions_from_records`].
pub fn records_for_sessions(sessions: &[SessionLog]) -> Vec<LogRecord> {
    let mut counters: std::collections::HashMap<&str, u64> = std::collections::HashMap::new();
    let mut out = Vec::new();
    for s in sessions {
        let counter = counters.entry(&s.subject_id).or_insert(0);
        let at = s.events.first().map_or(0, |e| e.timestamp_ms);
        out.push(LogRecord::new(LogBody::SessionStarted {
            session_id: s.session_id.clone(),
            subject_id: s.subject_id.clone(),
            subject_session: *counter,
            plan: s.plan.clone(),
            at,
        }));
        *counter += 1;
        out.extend(s.events.iter().map(|e| LogRecord::new(LogBody::Response { event: e.clone() })));
        if s.status == SessionStatus::Abandoned {
            out.push(LogRecord::new(LogBody::Abandoned {
                session_id: s.session_id.clone(),
                at: s.events.last().map_or(at, |e| e.timestamp_ms),
            }));
        }
    }
    out
}

/// Writes a fresh log holding exactly `records`.
pub fn write_records(path: &Path, records: &[LogRecord]) -> Result<(), GameError> {
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r).map_err(std::io::Error::other)?;
        buf.push(b'\n');
    }
    std::fs::write(path, buf)?;
    Ok(())
}

/// Loads the sessions recorded in a log file.
pub fn load_sessions(path: &Path) -> Result<Vec<SessionLog>, GameError> {
    sessions_from_records(&read_records(path)?)
}
