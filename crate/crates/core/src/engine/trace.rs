use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{TupleId, TxnId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    RunInfo,
    Arrival,
    Suspended,
    Commit,
    BtRelease,
    Detection,
    ResponseDone,
    AnalysisDone,
    RecoveryPhaseDone,
    Signal,
    RecoveryDone,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuspendReason {
    BoundaryLock,
    Corrupted,
    IbLock,
}

/// One line of the JSONL trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub tick: u64,
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub txn: Option<TxnId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tuples: Vec<TupleId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub txns: Vec<TxnId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<SuspendReason>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fairness: Option<f64>,
}

impl Event {
    pub fn new(tick: u64, kind: EventKind) -> Self {
        Event {
            tick,
            kind,
            txn: None,
            tuples: Vec::new(),
            txns: Vec::new(),
            reason: None,
            phase: None,
            boundary: None,
            fairness: None,
        }
    }

    pub fn txn(mut self, t: TxnId) -> Self {
        self.txn = Some(t);
        self
    }

    pub fn tuples(mut self, tuples: impl IntoIterator<Item = TupleId>) -> Self {
        self.tuples = tuples.into_iter().collect();
        self
    }
}

pub fn write_trace(events: &[Event], mut out: impl Write) -> Result<()> {
    for e in events {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_trace(input: impl BufRead) -> Result<Vec<Event>> {
    let mut events = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let e = serde_json::from_str(&line).map_err(|e| Error::Parse(format!("trace line {}: {e}", i + 1)))?;
        events.push(e);
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_roundtrip() {
        let mut s = Event::new(4, EventKind::Suspended).txn(TxnId(2)).tuples([TupleId(9)]);
        s.reason = Some(SuspendReason::BoundaryLock);
        let events = vec![Event::new(3, EventKind::Arrival).txn(TxnId(2)), s];
        let mut buf = Vec::new();
        write_trace(&events, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), r#"{"tick":3,"kind":"arrival","txn":2}"#);
        assert_eq!(read_trace(&buf[..]).unwrap(), events);
    }

    #[test]
    fn bad_line_reports_position() {
        let err = read_trace(&b"{\"tick\":1,\"kind\":\"commit\"}\nnope\n"[..]).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }
}
