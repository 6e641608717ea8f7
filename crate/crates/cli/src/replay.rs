//! Command logs: one JSON object per line.
//!
//! ```text
//! {"world_hash":"0x9d458e2aae1d2c77","seed":42,"version":1}
//! {"tick":17,"session":1,"command":{"type":"operate_lock","lock_id":0}}
//! ...
//! {"end":{"final_tick":1000,"final_hash":"0x..."}}
//! ```
//!
//! A command logged at tick `t` was applied at the boundary that started
//! from tick `t`. The `end` line is optional and lets a replay check itself.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nbca_core::Command;
use serde::{Deserialize, Serialize};

pub const LOG_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("log i/o: {0}")]
    Io(#[from] io::Error),
    #[error("log line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error("log line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error("log was recorded against world {logged}, this world is {actual}")]
    WorldMismatch { logged: String, actual: String },
    #[error("log version {0} not supported (expected {LOG_VERSION})")]
    VersionMismatch(u32),
}

pub fn hex64(v: u64) -> String {
    format!("{v:#018x}")
}

fn parse_hex64(s: &str) -> Option<u64> {
    u64::from_str_radix(s.strip_prefix("0x")?, 16).ok()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub world_hash: String,
    pub seed: u64,
    pub version: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entry {
    pub tick: u64,
    pub session: u32,
    pub command: Command,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct End {
    pub final_tick: u64,
    pub final_hash: String,
}

#[derive(Serialize, Deserialize)]
struct EndLine {
    end: End,
}

pub struct Recorder {
    out: BufWriter<File>,
}

impl Recorder {
    pub fn create(path: &Path, world_hash: u64, seed: u64) -> io::Result<Recorder> {
        let mut out = BufWriter::new(File::create(path)?);
        let header = Header { world_hash: hex64(world_hash), seed, version: LOG_VERSION };
        writeln!(out, "{}", serde_json::to_string(&header)?)?;
        Ok(Recorder { out })
    }

    pub fn command(&mut self, tick: u64, session: u32, command: &Command) -> io::Result<()> {
        let entry = Entry { tick, session, command: command.clone() };
        writeln!(self.out, "{}", serde_json::to_string(&entry)?)
    }

    pub fn finish(mut self, final_tick: u64, final_hash: u64) -> io::Result<()> {
        let end = EndLine { end: End { final_tick, final_hash: hex64(final_hash) } };
        writeln!(self.out, "{}", serde_json::to_string(&end)?)?;
        self.out.flush()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReplayLog {
    pub header: Header,
    /// In file order, which is tick order for recorder output.
    pub entries: Vec<Entry>,
    pub end: Option<End>,
}

impl ReplayLog {
    pub fn read(path: &Path) -> Result<ReplayLog, ReplayError> {
        Self::parse(BufReader::new(File::open(path)?))
    }

    pub fn parse(input: impl BufRead) -> Result<ReplayLog, ReplayError> {
        let mut header = None;
        let mut entries = Vec::new();
        let mut end = None;
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let n = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let value: serde_json::Value =
                serde_json::from_str(&line).map_err(|source| ReplayError::Parse { line: n, source })?;
            if header.is_none() {
                let h: Header = serde_json::from_value(value).map_err(|source| ReplayError::Parse { line: n, source })?;
                if h.version != LOG_VERSION {
                    return Err(ReplayError::VersionMismatch(h.version));
                }
                if parse_hex64(&h.world_hash).is_none() {
                    return Err(ReplayError::Format { line: n, reason: "world_hash is not 0x-hex".into() });
                }
                header = Some(h);
            } else if end.is_some() {
                return Err(ReplayError::Format { line: n, reason: "content after end line".into() });
            } else if value.get("end").is_some() {
                let e: EndLine = serde_json::from_value(value).map_err(|source| ReplayError::Parse { line: n, source })?;
                end = Some(e.end);
            } else {
                let e: Entry = serde_json::from_value(value).map_err(|source| ReplayError::Parse { line: n, source })?;
                if entries.last().is_some_and(|p: &Entry| p.tick > e.tick) {
                    return Err(ReplayError::Format { line: n, reason: "ticks go backwards".into() });
                }
                entries.push(e);
            }
        }
        let header = header.ok_or(ReplayError::Format { line: 0, reason: "empty log".into() })?;
        Ok(ReplayLog { header, entries, end })
    }

    /// Refuse a log recorded against a different world.
    pub fn check_world(&self, world_hash: u64) -> Result<(), ReplayError> {
        if parse_hex64(&self.header.world_hash) == Some(world_hash) {
            Ok(())
        } else {
            Err(ReplayError::WorldMismatch { logged: self.header.world_hash.clone(), actual: hex64(world_hash) })
        }
    }

    pub fn expected_hash(&self) -> Option<u64> {
        self.end.as_ref().and_then(|e| parse_hex64(&e.final_hash))
    }
}
