//! Session state and append-only persistence.
//!
//! Every session owns one JSON-lines file named `{token}.jsonl` in the store
//! directory. Each acknowledged request is appended and synced before the
//! response goes out, so a crash loses at most the request in flight.
//! Opening a store replays the existing files to restore live sessions.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};

use attnlit::attention_map::Answer;
use attnlit::dataset::{append_events, parse_events, valid_participant_id, SessionEvent, StudyConfig};
use attnlit::stats::{SGL_ITEMS, SGL_MAX, SGL_MIN};
use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clock::Clock;
use crate::error::CaptureError;

pub type Result<T> = std::result::Result<T, CaptureError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenRequest {
    pub participant_id: String,
    /// Client display scale; the stored bubble radius is the configured
    /// radius times this factor.
    #[serde(default = "one")]
    pub radius_scale: f64,
    #[serde(default)]
    pub screen_w: Option<u32>,
    #[serde(default)]
    pub screen_h: Option<u32>,
}

fn one() -> f64 {
    1.0
}

/// Where a session stands; returned by most endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionStatus {
    pub token: String,
    pub participant_id: String,
    pub seed: u64,
    pub item_order: Vec<String>,
    pub bubble_radius: f64,
    /// Index into `item_order` of the item awaiting an answer; equals the
    /// item count once every item is answered.
    pub index: usize,
    pub current_item: Option<String>,
    /// Server milliseconds left before only SKIPPED is accepted.
    pub remaining_ms: Option<u64>,
    pub clicks: u64,
    pub sgl_recorded: bool,
    pub finalized: bool,
    /// True when `POST /sessions` returned an existing open session.
    pub resumed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClickIn {
    pub x: i64,
    pub y: i64,
    pub t: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClickAck {
    pub item: String,
    pub accepted: usize,
    /// Sequence number of the first accepted click, if any.
    pub first_seq: Option<u64>,
    pub next_seq: u64,
}

struct Session {
    token: String,
    path: PathBuf,
    participant_id: String,
    seed: u64,
    order: Vec<String>,
    bubble_radius: f64,
    index: usize,
    item_started_ms: u64,
    next_seq: u64,
    sgl_recorded: bool,
    finalized: bool,
}

impl Session {
    fn current(&self) -> Option<&str> {
        self.order.get(self.index).map(String::as_str)
    }

    fn append(&self, events: &[SessionEvent]) -> Result<()> {
        append_events(&self.path, events).map_err(CaptureError::Storage)
    }

    fn ensure_open(&self) -> Result<()> {
        if self.finalized {
            Err(CaptureError::SessionFinalized)
        } else {
            Ok(())
        }
    }

    /// Rebuilds state from a session file's events.
    fn replay(path: PathBuf, events: &[SessionEvent]) -> std::result::Result<Session, String> {
        let Some(SessionEvent::SessionOpened {
            session,
            participant_id,
            seed,
            item_order,
            bubble_radius,
            ..
        }) = events.first()
        else {
            return Err("does not start with session_opened".into());
        };
        let mut s = Session {
            token: session.clone(),
            path,
            participant_id: participant_id.clone(),
            seed: *seed,
            order: item_order.clone(),
            bubble_radius: *bubble_radius,
            index: 0,
            item_started_ms: 0,
            next_seq: 0,
            sgl_recorded: false,
            finalized: false,
        };
        for e in &events[1..] {
            match e {
                SessionEvent::SessionOpened { .. } => return Err("repeated session_opened".into()),
                SessionEvent::ItemStarted { index, server_ms, .. } => {
                    s.index = *index;
                    s.item_started_ms = *server_ms;
                }
                SessionEvent::Click { seq, .. } => s.next_seq = seq + 1,
                SessionEvent::Answer { server_ms, .. } => {
                    s.index += 1;
                    s.item_started_ms = *server_ms;
                }
                SessionEvent::Sgl { .. } => s.sgl_recorded = true,
                SessionEvent::Finalized { .. } => s.finalized = true,
            }
        }
        Ok(s)
    }
}

pub struct Store {
    dir: PathBuf,
    config: Arc<StudyConfig>,
    config_dir: PathBuf,
    clock: Arc<dyn Clock>,
    rng: Mutex<ChaCha8Rng>,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    // A panic while holding a session lock cannot leave the file and the
    // in-memory state disagreeing by more than the request in flight.
    m.lock().unwrap_or_else(|e| e.into_inner())
}

impl Store {
    /// Opens (or creates) a store directory and restores its sessions.
    /// `config_dir` resolves the chart image paths in `config`.
    pub fn open(dir: &Path, config: StudyConfig, config_dir: &Path, clock: Arc<dyn Clock>) -> Result<Store> {
        config.validate()?;
        fs::create_dir_all(dir).map_err(|e| attnlit::Error::io(dir, e))?;
        let mut sessions = HashMap::new();
        for entry in fs::read_dir(dir).map_err(|e| attnlit::Error::io(dir, e))? {
            let path = entry.map_err(|e| attnlit::Error::io(dir, e))?.path();
            if !path.extension().is_some_and(|x| x == "jsonl") {
                continue;
            }
            let events = read_recovering(&path)?;
            if events.is_empty() {
                warn!("{}: empty session file ignored", path.display());
                continue;
            }
            let session = Session::replay(path.clone(), &events)
                .map_err(|d| attnlit::Error::format("session file", format!("{}: {d}", path.display())))?;
            sessions.insert(session.token.clone(), Arc::new(Mutex::new(session)));
        }
        if !sessions.is_empty() {
            info!("restored {} sessions from {}", sessions.len(), dir.display());
        }
        Ok(Store {
            dir: dir.to_path_buf(),
            config: Arc::new(config),
            config_dir: config_dir.to_path_buf(),
            clock,
            rng: Mutex::new(ChaCha8Rng::from_os_rng()),
            sessions: Mutex::new(sessions),
        })
    }

    /// Replaces the token/seed generator with a seeded one, for reproducible tests.
    pub fn with_rng_seed(self, seed: u64) -> Store {
        *lock(&self.rng) = ChaCha8Rng::seed_from_u64(seed);
        self
    }

    pub fn config(&self) -> &StudyConfig {
        &self.config
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Path of a chart image, if `code` names a configured item.
    pub fn chart_path(&self, code: &str) -> Option<PathBuf> {
        self.config.item(code).map(|i| self.config_dir.join(&i.image))
    }

    fn session(&self, token: &str) -> Result<Arc<Mutex<Session>>> {
        lock(&self.sessions).get(token).cloned().ok_or(CaptureError::UnknownSession)
    }

    fn status(&self, s: &Session, resumed: bool) -> SessionStatus {
        let remaining_ms = s.current().filter(|_| !s.finalized).map(|code| {
            let limit = self.limit_ms(code);
            limit.saturating_sub(self.clock.now_ms().saturating_sub(s.item_started_ms))
        });
        SessionStatus {
            token: s.token.clone(),
            participant_id: s.participant_id.clone(),
            seed: s.seed,
            item_order: s.order.clone(),
            bubble_radius: s.bubble_radius,
            index: s.index,
            current_item: s.current().map(str::to_owned),
            remaining_ms,
            clicks: s.next_seq,
            sgl_recorded: s.sgl_recorded,
            finalized: s.finalized,
            resumed,
        }
    }

    fn limit_ms(&self, code: &str) -> u64 {
        let item = self.config.item(code).expect("session items come from the config");
        (self.config.time_limit(item) * 1000.0).round() as u64
    }

    /// Starts a session, or returns the participant's open session if one
    /// exists so a reloaded client can continue where it stopped.
    pub fn open_session(&self, req: &OpenRequest) -> Result<SessionStatus> {
        if !valid_participant_id(&req.participant_id) {
            return Err(CaptureError::InvalidParticipant(req.participant_id.clone()));
        }
        if !(req.radius_scale.is_finite() && req.radius_scale > 0.0) {
            return Err(CaptureError::InvalidRequest("radius_scale must be positive".into()));
        }
        // Holding the map lock serializes concurrent opens for one participant.
        let mut sessions = lock(&self.sessions);
        for s in sessions.values() {
            let s = lock(s);
            if s.participant_id == req.participant_id {
                if s.finalized {
                    return Err(CaptureError::ParticipantDone(req.participant_id.clone()));
                }
                return Ok(self.status(&s, true));
            }
        }
        let (token, seed) = {
            let mut rng = lock(&self.rng);
            (format!("{:032x}", rng.random::<u128>()), rng.random::<u64>())
        };
        let order = self.config.item_order(seed);
        let now = self.clock.now_ms();
        let session = Session {
            token: token.clone(),
            path: self.dir.join(format!("{token}.jsonl")),
            participant_id: req.participant_id.clone(),
            seed,
            order: order.clone(),
            bubble_radius: self.config.bubble_radius * req.radius_scale,
            index: 0,
            item_started_ms: now,
            next_seq: 0,
            sgl_recorded: false,
            finalized: false,
        };
        session.append(&[
            SessionEvent::SessionOpened {
                session: token.clone(),
                participant_id: req.participant_id.clone(),
                seed,
                item_order: order.clone(),
                bubble_radius: session.bubble_radius,
                radius_scale: req.radius_scale,
                screen_w: req.screen_w,
                screen_h: req.screen_h,
                server_ms: now,
            },
            SessionEvent::ItemStarted {
                item: order[0].clone(),
                index: 0,
                server_ms: now,
            },
        ])?;
        info!("opened session for {}", req.participant_id);
        let status = self.status(&session, false);
        sessions.insert(token, Arc::new(Mutex::new(session)));
        Ok(status)
    }

    pub fn get_status(&self, token: &str) -> Result<SessionStatus> {
        let s = self.session(token)?;
        let s = lock(&s);
        Ok(self.status(&s, false))
    }

    /// Appends a batch of clicks on the current item. A single invalid
    /// click rejects the whole batch and leaves the session unchanged.
    pub fn record_clicks(&self, token: &str, batch: &[ClickIn]) -> Result<ClickAck> {
        let s = self.session(token)?;
        let mut s = lock(&s);
        s.ensure_open()?;
        let item = s.current().ok_or(CaptureError::NoCurrentItem)?.to_owned();
        let q = self.config.item(&item).expect("session items come from the config");
        for (index, c) in batch.iter().enumerate() {
            let reason = if c.x < 0 || c.x >= i64::from(q.width) {
                format!("x = {} outside 0..{}", c.x, q.width)
            } else if c.y < 0 || c.y >= i64::from(q.height) {
                format!("y = {} outside 0..{}", c.y, q.height)
            } else if c.t < 0 {
                format!("t = {} is negative", c.t)
            } else {
                continue;
            };
            return Err(CaptureError::InvalidClick { index, reason });
        }
        let now = self.clock.now_ms();
        let first = s.next_seq;
        let events: Vec<SessionEvent> = batch
            .iter()
            .zip(first..)
            .map(|(c, seq)| SessionEvent::Click {
                item: item.clone(),
                seq,
                x: c.x as u32,
                y: c.y as u32,
                t: c.t as u64,
                server_ms: now,
            })
            .collect();
        if !events.is_empty() {
            s.append(&events)?;
        }
        s.next_seq = first + batch.len() as u64;
        Ok(ClickAck {
            item,
            accepted: batch.len(),
            first_seq: (!batch.is_empty()).then_some(first),
            next_seq: s.next_seq,
        })
    }

    /// Closes the current item and advances to the next one.
    pub fn record_answer(&self, token: &str, item: &str, choice: Answer) -> Result<SessionStatus> {
        let s = self.session(token)?;
        let mut s = lock(&s);
        s.ensure_open()?;
        let Some(position) = s.order.iter().position(|c| c == item) else {
            return Err(CaptureError::UnknownItem(item.to_owned()));
        };
        let current = s.current().map(str::to_owned);
        if position != s.index {
            let current = current.unwrap_or_default();
            return Err(if position < s.index {
                CaptureError::BacktrackRejected { item: item.to_owned(), current }
            } else {
                CaptureError::ItemNotCurrent { item: item.to_owned(), current }
            });
        }
        let q = self.config.item(item).expect("session items come from the config");
        let now = self.clock.now_ms();
        let elapsed_ms = now.saturating_sub(s.item_started_ms);
        let limit_ms = self.limit_ms(item);
        if let Answer::Choice(c) = choice {
            if c as usize >= q.choices.len() {
                return Err(CaptureError::InvalidChoice { item: item.to_owned(), choice: c });
            }
            if elapsed_ms > limit_ms {
                return Err(CaptureError::TimeExpired { limit_ms, elapsed_ms });
            }
        }
        let mut events = vec![SessionEvent::Answer {
            item: item.to_owned(),
            choice,
            elapsed_ms,
            server_ms: now,
        }];
        let next = s.index + 1;
        if let Some(code) = s.order.get(next) {
            events.push(SessionEvent::ItemStarted {
                item: code.clone(),
                index: next,
                server_ms: now,
            });
        }
        s.append(&events)?;
        s.index = next;
        s.item_started_ms = now;
        Ok(self.status(&s, false))
    }

    pub fn record_sgl(&self, token: &str, responses: &[i64]) -> Result<SessionStatus> {
        let s = self.session(token)?;
        let mut s = lock(&s);
        s.ensure_open()?;
        if s.current().is_some() {
            return Err(CaptureError::SglNotReady);
        }
        if s.sgl_recorded {
            return Err(CaptureError::SglAlreadyRecorded);
        }
        if responses.len() != SGL_ITEMS {
            return Err(CaptureError::InvalidSgl(format!(
                "expected {SGL_ITEMS} responses, got {}",
                responses.len()
            )));
        }
        if let Some(i) = responses
            .iter()
            .position(|r| !(i64::from(SGL_MIN)..=i64::from(SGL_MAX)).contains(r))
        {
            return Err(CaptureError::InvalidSgl(format!(
                "response {i} = {} outside {SGL_MIN}..={SGL_MAX}",
                responses[i]
            )));
        }
        s.append(&[SessionEvent::Sgl {
            responses: responses.iter().map(|&r| r as u8).collect(),
            server_ms: self.clock.now_ms(),
        }])?;
        s.sgl_recorded = true;
        Ok(self.status(&s, false))
    }

    /// Seals the session; later writes fail with `SESSION_FINALIZED`.
    pub fn finalize(&self, token: &str) -> Result<SessionStatus> {
        let s = self.session(token)?;
        let mut s = lock(&s);
        s.ensure_open()?;
        s.append(&[SessionEvent::Finalized { server_ms: self.clock.now_ms() }])?;
        s.finalized = true;
        info!("finalized session for {}", s.participant_id);
        Ok(self.status(&s, false))
    }
}

/// Reads a session file, cutting off a torn final line left by a crash
/// mid-write. That line belonged to a request that was never acknowledged.
fn read_recovering(path: &Path) -> Result<Vec<SessionEvent>> {
    let mut bytes = fs::read(path).map_err(|e| attnlit::Error::io(path, e))?;
    if !bytes.is_empty() && bytes.last() != Some(&b'\n') {
        let keep = bytes.iter().rposition(|b| *b == b'\n').map_or(0, |i| i + 1);
        warn!("{}: dropping {} bytes of a torn final line", path.display(), bytes.len() - keep);
        bytes.truncate(keep);
        fs::write(path, &bytes).map_err(|e| attnlit::Error::io(path, e))?;
    }
    Ok(parse_events(bytes.as_slice())?)
}
