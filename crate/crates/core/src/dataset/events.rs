//! Session files: JSON lines, one event object per line, discriminated by
//! a `"kind"` field.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attention_map::Answer;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SessionEvent {
    SessionOpened {
        session: String,
        participant_id: String,
        /// Seed of this participant's item permutation.
        seed: u64,
        item_order: Vec<String>,
        /// Bubble radius in image pixels after applying `radius_scale`.
        bubble_radius: f64,
        radius_scale: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        screen_w: Option<u32>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        screen_h: Option<u32>,
        server_ms: u64,
    },
    ItemStarted {
        item: String,
        index: usize,
        server_ms: u64,
    },
    Click {
        item: String,
        /// Dense per-session sequence number.
        seq: u64,
        x: u32,
        y: u32,
        /// Client-reported milliseconds since item onset.
        t: u64,
        server_ms: u64,
    },
    Answer {
        item: String,
        choice: Answer,
        /// Server-measured milliseconds since the item started.
        elapsed_ms: u64,
        server_ms: u64,
    },
    Sgl {
        responses: Vec<u8>,
        server_ms: u64,
    },
    Finalized {
        server_ms: u64,
    },
}

/// Appends events to a session file and syncs it to disk before returning.
pub fn append_events(path: &Path, events: &[SessionEvent]) -> Result<()> {
    let mut buf = Vec::new();
    for e in events {
        serde_json::to_writer(&mut buf, e)?;
        buf.push(b'\n');
    }
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))?;
    f.sync_data().map_err(|e| Error::io(path, e))
}

pub fn read_events(path: &Path) -> Result<Vec<SessionEvent>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_events(BufReader::new(f))
}

pub fn parse_events<R: BufRead>(input: R) -> Result<Vec<SessionEvent>> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::format("session file", e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let event = serde_json::from_str(&line)
            .map_err(|e| Error::format("session file", format!("line {}: {e}", n + 1)))?;
        out.push(event);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_format() {
        let e = SessionEvent::Answer {
            item: "V1".into(),
            choice: Answer::Skipped,
            elapsed_ms: 91000,
            server_ms: 5,
        };
        let s = serde_json::to_string(&e).unwrap();
        assert_eq!(s, r#"{"kind":"answer","item":"V1","choice":"SKIPPED","elapsed_ms":91000,"server_ms":5}"#);
        let c: SessionEvent = serde_json::from_str(r#"{"kind":"click","item":"V1","seq":0,"x":3,"y":4,"t":10,"server_ms":1}"#).unwrap();
        assert!(matches!(c, SessionEvent::Click { x: 3, y: 4, .. }));
        assert!(serde_json::from_str::<SessionEvent>(r#"{"kind":"nope"}"#).is_err());
    }

    #[test]
    fn append_then_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        let a = SessionEvent::ItemStarted { item: "V1".into(), index: 0, server_ms: 1 };
        let b = SessionEvent::Finalized { server_ms: 2 };
        append_events(&path, std::slice::from_ref(&a)).unwrap();
        append_events(&path, std::slice::from_ref(&b)).unwrap();
        assert_eq!(read_events(&path).unwrap(), vec![a, b]);
    }
}
