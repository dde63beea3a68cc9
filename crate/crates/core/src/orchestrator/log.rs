//! Append-only session log, one JSON record per line.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::Stage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Actor {
    System,
    Primary,
    Advisor,
    Tool,
    User,
}

/// Event names used in [`LogRecord::action`].
pub mod event {
    pub const SESSION_START: &str = "session_start";
    pub const SESSION_END: &str = "session_end";
    pub const ACTION: &str = "action";
    pub const REJECTED: &str = "rejected";
    pub const TOOL_RESULT: &str = "tool_result";
    pub const CRITIQUE: &str = "critique";
    pub const TRANSITION: &str = "transition";
    pub const ASK_USER: &str = "ask_user";
    pub const USER_INPUT: &str = "user_input";
    pub const REPORT: &str = "report";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub seq: u64,
    pub stage: Stage,
    pub actor: Actor,
    pub action: String,
    pub payload: Value,
    pub wall_ms: u64,
}

pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

/// Always 0, so logs of identical runs are byte-identical.
#[derive(Debug, Default, Clone, Copy)]
pub struct ZeroClock;

impl Clock for ZeroClock {
    fn now_ms(&self) -> u64 {
        0
    }
}

/// Milliseconds since the clock was created.
#[derive(Debug)]
pub struct WallClock(Instant);

impl Default for WallClock {
    fn default() -> Self {
        WallClock(Instant::now())
    }
}

impl Clock for WallClock {
    fn now_ms(&self) -> u64 {
        self.0.elapsed().as_millis() as u64
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionLog {
    pub records: Vec<LogRecord>,
}

impl SessionLog {
    pub fn push(&mut self, clock: &dyn Clock, stage: Stage, actor: Actor, action: &str, payload: Value) {
        let seq = self.records.len() as u64;
        self.records.push(LogRecord {
            seq,
            stage,
            actor,
            action: action.to_string(),
            payload,
            wall_ms: clock.now_ms(),
        });
    }

    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for r in &self.records {
            s.push_str(&serde_json::to_string(r).expect("log record serializes"));
            s.push('\n');
        }
        s
    }

    pub fn from_jsonl(text: &str) -> Result<Self, serde_json::Error> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<_, _>>()?;
        Ok(SessionLog { records })
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir)?;
            }
        }
        std::fs::write(path, self.to_jsonl())
    }

    pub fn read(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_jsonl(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    pub fn events<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a LogRecord> + 'a {
        self.records.iter().filter(move |r| r.action == name)
    }

    /// Copy with every `wall_ms` set to zero.
    pub fn normalized(&self) -> SessionLog {
        SessionLog {
            records: self
                .records
                .iter()
                .map(|r| LogRecord {
                    wall_ms: 0,
                    ..r.clone()
                })
                .collect(),
        }
    }
}
