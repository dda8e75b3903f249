//! Line-delimited JSON episode traces.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{state_hash, EventLog, GameState, Phase};

/// One decision of an episode, recorded before the action is applied; the
/// hash is of the state after it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub turn: u32,
    pub phase: Phase,
    pub decision_player: usize,
    pub action: usize,
    pub events: EventLog,
    pub state_hash: u64,
}

impl TraceRecord {
    pub fn new(before: &GameState, action: usize, events: EventLog, after: &GameState) -> Self {
        TraceRecord {
            turn: before.turn,
            phase: before.phase,
            decision_player: before.decision_player,
            action,
            events,
            state_hash: state_hash(after),
        }
    }
}

/// Writes records one JSON object per line.
pub struct TraceWriter<W: Write> {
    out: W,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(out: W) -> Self {
        TraceWriter { out }
    }

    pub fn write(&mut self, rec: &TraceRecord) -> io::Result<()> {
        serde_json::to_writer(&mut self.out, rec)?;
        self.out.write_all(b"\n")
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

pub fn read_trace<R: BufRead>(input: R) -> io::Result<Vec<TraceRecord>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(io::Error::other)?);
    }
    Ok(out)
}

/// Order-sensitive digest of a whole trace.
pub fn trace_digest(records: &[TraceRecord]) -> u64 {
    use std::hash::Hasher;
    let mut h = fnv::FnvHasher::default();
    for r in records {
        h.write_u64(r.state_hash);
        h.write_u64(r.action as u64);
    }
    h.finish()
}
