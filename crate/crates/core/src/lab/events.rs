use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::{Arm, LabError};
use crate::text::MatchMethod;

/// Where a told curiosity came from. Fallback picks are logged with
/// method `text` and `fallback: true`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TellSource {
    Semantic,
    Text,
    Fallback,
}

impl TellSource {
    pub fn method(self) -> MatchMethod {
        match self {
            TellSource::Semantic => MatchMethod::Semantic,
            TellSource::Text | TellSource::Fallback => MatchMethod::Text,
        }
    }
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    Turn,
    Offer,
    Accept,
    Deny,
    Ignore,
    Tell {
        method: MatchMethod,
        curiosity_id: String,
        #[serde(default, skip_serializing_if = "is_false")]
        fallback: bool,
    },
    Rating {
        value: u8,
    },
}

/// One line of the experiment log. `ts` is the session's turn number, which
/// keeps logs reproducible.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentEvent {
    pub session_id: String,
    pub arm: Arm,
    pub ts: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

/// Parses a JSONL log. Blank lines are skipped; errors carry the 1-based line.
pub fn parse_events(input: &str) -> Result<Vec<ExperimentEvent>, LabError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let ev: ExperimentEvent = serde_json::from_str(line).map_err(|e| LabError::Malformed {
            offset: i + 1,
            message: e.to_string(),
        })?;
        out.push(ev);
    }
    Ok(out)
}

/// Append-only JSONL writer.
pub struct EventWriter<W: Write> {
    inner: W,
    written: u64,
}

impl<W: Write> EventWriter<W> {
    pub fn new(inner: W) -> Self {
        EventWriter { inner, written: 0 }
    }

    pub fn append(&mut self, ev: &ExperimentEvent) -> io::Result<()> {
        let line = serde_json::to_string(ev).map_err(io::Error::other)?;
        self.inner.write_all(line.as_bytes())?;
        self.inner.write_all(b"\n")?;
        self.written += 1;
        Ok(())
    }

    pub fn append_all<'a>(&mut self, evs: impl IntoIterator<Item = &'a ExperimentEvent>) -> io::Result<()> {
        for ev in evs {
            self.append(ev)?;
        }
        self.inner.flush()
    }

    pub fn written(&self) -> u64 {
        self.written
    }

    pub fn into_inner(self) -> W {
        self.inner
    }
}
