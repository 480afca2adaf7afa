//! Dataset export (one JSON-lines file per participant plus a checksummed
//! manifest) and ingestion back into session logs.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::StudyConfig;
use super::events::{parse_events, read_events, SessionEvent};
use super::Dataset;
use crate::attention_map::{ClickEvent, SessionLog};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub participant_id: String,
    pub file: String,
    pub sha256: String,
    pub sessions: usize,
    pub events: usize,
    pub clicks: usize,
    pub answers: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: u32,
    pub participants: Vec<ManifestEntry>,
    pub total_clicks: usize,
}

/// Participant ids double as file names, so they are restricted to
/// ASCII letters, digits, `_`, `-` and `.` (not leading).
pub fn valid_participant_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn session_owner(events: &[SessionEvent]) -> Option<(&str, u64, &str)> {
    match events.first() {
        Some(SessionEvent::SessionOpened {
            participant_id,
            server_ms,
            session,
            ..
        }) => Some((participant_id, *server_ms, session)),
        _ => None,
    }
}

/// Groups the session files (`*.jsonl`) in `store` by participant and
/// writes one file per participant to `out`, sessions in opening order.
pub fn export_dataset(store: &Path, out: &Path) -> Result<Manifest> {
    let mut sessions = Vec::new();
    if store.exists() {
        for entry in fs::read_dir(store).map_err(|e| Error::io(store, e))? {
            let path = entry.map_err(|e| Error::io(store, e))?.path();
            if path.extension().is_some_and(|x| x == "jsonl") {
                sessions.push(read_events(&path)?);
            }
        }
    }
    let mut by_participant: BTreeMap<String, Vec<(u64, String, Vec<SessionEvent>)>> = BTreeMap::new();
    for events in sessions {
        let Some((pid, opened, token)) = session_owner(&events) else {
            return Err(Error::format("session file", "does not start with session_opened"));
        };
        if !valid_participant_id(pid) {
            return Err(Error::format("session file", format!("unsafe participant id {pid:?}")));
        }
        let key = (opened, token.to_string());
        by_participant.entry(pid.to_string()).or_default().push((key.0, key.1, events));
    }

    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut entries = Vec::new();
    let mut total_clicks = 0;
    for (pid, mut list) in by_participant {
        list.sort_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)));
        let mut bytes = Vec::new();
        let (mut events, mut clicks, mut answers) = (0, 0, 0);
        for (_, _, evs) in &list {
            for e in evs {
                serde_json::to_writer(&mut bytes, e)?;
                bytes.push(b'\n');
                events += 1;
                clicks += usize::from(matches!(e, SessionEvent::Click { .. }));
                answers += usize::from(matches!(e, SessionEvent::Answer { .. }));
            }
        }
        let file = format!("{pid}.jsonl");
        let path = out.join(&file);
        fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
        total_clicks += clicks;
        entries.push(ManifestEntry {
            participant_id: pid,
            file,
            sha256: sha256_hex(&bytes),
            sessions: list.len(),
            events,
            clicks,
            answers,
        });
    }
    let manifest = Manifest {
        format: MANIFEST_FORMAT,
        participants: entries,
        total_clicks,
    };
    let path = out.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// What one participant's events amount to.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticipantRecord {
    pub sessions: Vec<SessionLog>,
    pub sgl: Option<Vec<u8>>,
}

/// Rebuilds session logs from one participant's events. Clicks timed after
/// the item's limit are logged by the service but excluded here; duration
/// is the server-measured time to answer, capped at the limit and never
/// shorter than the last kept click.
pub fn sessions_from_events(events: &[SessionEvent], config: &StudyConfig) -> Result<ParticipantRecord> {
    let mut pid: Option<String> = None;
    let mut radius = config.bubble_radius;
    let mut clicks: BTreeMap<String, Vec<(u64, ClickEvent)>> = BTreeMap::new();
    let mut sessions: Vec<SessionLog> = Vec::new();
    let mut sgl = None;
    for e in events {
        match e {
            SessionEvent::SessionOpened {
                participant_id,
                bubble_radius,
                ..
            } => {
                if pid.as_ref().is_some_and(|p| p != participant_id) {
                    return Err(Error::format("session file", "mixes participants"));
                }
                pid = Some(participant_id.clone());
                radius = *bubble_radius;
                clicks.clear();
            }
            SessionEvent::Click { item, seq, x, y, t, .. } => {
                clicks
                    .entry(item.clone())
                    .or_default()
                    .push((*seq, ClickEvent { x: *x, y: *y, t: *t }));
            }
            SessionEvent::Answer {
                item,
                choice,
                elapsed_ms,
                ..
            } => {
                let participant = pid
                    .clone()
                    .ok_or_else(|| Error::format("session file", "answer before session_opened"))?;
                let q = config
                    .item(item)
                    .ok_or_else(|| Error::format("session file", format!("unknown item {item}")))?;
                if sessions.iter().any(|s| &s.chart_id == item) {
                    return Err(Error::format("session file", format!("item {item} answered twice")));
                }
                let limit_ms = (config.time_limit(q) * 1000.0).round() as u64;
                let mut item_clicks = clicks.remove(item).unwrap_or_default();
                item_clicks.sort_by_key(|c| c.0);
                let kept: Vec<ClickEvent> = item_clicks
                    .into_iter()
                    .map(|c| c.1)
                    .filter(|c| c.t <= limit_ms)
                    .collect();
                let last_t = kept.iter().map(|c| c.t).max().unwrap_or(0);
                let duration_ms = (*elapsed_ms).min(limit_ms).max(last_t);
                sessions.push(SessionLog {
                    participant_id: participant,
                    chart_id: item.clone(),
                    clicks: kept,
                    answer: *choice,
                    duration_s: duration_ms as f64 / 1000.0,
                    image_w: q.width,
                    image_h: q.height,
                    bubble_radius: Some(radius),
                });
            }
            SessionEvent::Sgl { responses, .. } => sgl = Some(responses.clone()),
            SessionEvent::ItemStarted { .. } | SessionEvent::Finalized { .. } => {}
        }
    }
    for (item, c) in &clicks {
        if !c.is_empty() {
            log::warn!("{} clicks on unanswered item {item} dropped", c.len());
        }
    }
    sessions.sort_by(|a, b| a.chart_id.cmp(&b.chart_id));
    Ok(ParticipantRecord { sessions, sgl })
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let m: Manifest = serde_json::from_str(&text)?;
    if m.format != MANIFEST_FORMAT {
        return Err(Error::format("manifest", format!("unsupported format {}", m.format)));
    }
    Ok(m)
}

/// Reads an exported dataset, verifying every file against its checksum.
pub fn ingest_dataset(dir: &Path, config: &StudyConfig) -> Result<Dataset> {
    let manifest = read_manifest(dir)?;
    let mut sessions = Vec::new();
    let mut sgl = BTreeMap::new();
    for entry in &manifest.participants {
        if !valid_participant_id(&entry.participant_id) || entry.file != format!("{}.jsonl", entry.participant_id) {
            return Err(Error::format("manifest", format!("bad entry for {:?}", entry.participant_id)));
        }
        let path = dir.join(&entry.file);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        if sha256_hex(&bytes) != entry.sha256 {
            return Err(Error::ChecksumMismatch(entry.file.clone()));
        }
        let events = parse_events(bytes.as_slice())?;
        let record = sessions_from_events(&events, config)?;
        if record.sessions.iter().any(|s| s.participant_id != entry.participant_id) {
            return Err(Error::format("dataset", format!("{} holds another participant's sessions", entry.file)));
        }
        sessions.extend(record.sessions);
        if let Some(r) = record.sgl {
            sgl.insert(entry.participant_id.clone(), r);
        }
    }
    Ok(Dataset {
        config: config.clone(),
        sessions,
        sgl,
    })
}
