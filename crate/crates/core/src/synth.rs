//! Seeded synthetic studies: participants with a latent literacy, answers
//! that follow it on a Guttman scale, and clicks that favour a per-chart
//! "expert" area in proportion to it. Output is the same session-event
//! stream the capture service records, so it exercises the real ingest path.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::attention_map::{Answer, ClickEvent, SessionLog};
use crate::dataset::{append_events, QuestionItem, RegionSpec, SessionEvent, StudyConfig, TestKind};
use crate::error::{Error, Result};
use crate::metrics::RegionKind;
use crate::stats::SGL_ITEMS;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub participants: usize,
    pub vlat_items: usize,
    pub calvi_items: usize,
    pub width: u32,
    pub height: u32,
    pub bubble_radius: f64,
    /// Inclusive range of clicks per session.
    pub clicks: (usize, usize),
    /// Item codes whose click locations ignore literacy. Empty means every
    /// chart is informative.
    pub uninformative: Vec<String>,
    /// Fraction of sessions that run out of time and are skipped.
    pub timeout_rate: f64,
    pub time_limit_s: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            participants: 300,
            vlat_items: 12,
            calvi_items: 15,
            width: 96,
            height: 64,
            bubble_radius: 5.0,
            clicks: (6, 12),
            uninformative: Vec::new(),
            timeout_rate: 0.02,
            time_limit_s: 90.0,
            seed: 0,
        }
    }
}

/// A generated study: its config, the ground-truth session logs and SGL
/// responses, and the per-session event streams that encode them.
#[derive(Debug, Clone)]
pub struct SynthStudy {
    pub config: StudyConfig,
    pub latent: BTreeMap<String, f64>,
    /// Sorted by participant, then chart.
    pub sessions: Vec<SessionLog>,
    pub sgl: BTreeMap<String, Vec<u8>>,
    /// `(session token, events)`.
    pub event_streams: Vec<(String, Vec<SessionEvent>)>,
}

/// Where the expert and novice clicks of one chart land, as half-open
/// rectangles `[x0, y0, x1, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Hotspots {
    expert: [u32; 4],
    novice: [u32; 4],
}

fn item_codes(cfg: &SynthConfig) -> Vec<(String, TestKind, usize)> {
    let v = (0..cfg.vlat_items).map(|i| (format!("V{}", i + 1), TestKind::Vlat, i));
    let c = (0..cfg.calvi_items).map(|i| (format!("C{}", i + 1), TestKind::Calvi, i));
    v.chain(c).collect()
}

/// Chart elements follow a fixed layout scaled to the image: title strip on
/// top, axis labels on the left and bottom, legend top right.
fn layout(w: u32, h: u32) -> Vec<RegionSpec> {
    let (tw, th) = (w, h / 8);
    vec![
        RegionSpec { kind: RegionKind::Title, rect: [0, 0, tw, th] },
        RegionSpec { kind: RegionKind::Labels, rect: [0, th, w / 10, h] },
        RegionSpec { kind: RegionKind::Labels, rect: [w / 10, h - h / 8, w, h] },
        RegionSpec { kind: RegionKind::Legend, rect: [w - w / 5, th, w, th + h / 4] },
    ]
}

fn hotspots(w: u32, h: u32, index: usize) -> Hotspots {
    // Experts look at the contextual elements, novices at the plot body;
    // which element and where in the body rotates with the chart index.
    let expert = match index % 3 {
        0 => [w / 4, 0, w / 2, h / 8],
        1 => [w - w / 5, h / 8, w, h / 8 + h / 4],
        _ => [0, h / 4, w / 10, h - h / 4],
    };
    let bx = w / 6 + (index as u32 * 7) % (w / 3);
    let by = h / 3 + (index as u32 * 5) % (h / 4);
    Hotspots {
        expert,
        novice: [bx, by, bx + w / 4, by + h / 4],
    }
}

fn validate(cfg: &SynthConfig) -> Result<()> {
    if cfg.participants < 2 || cfg.vlat_items == 0 || cfg.calvi_items == 0 {
        return Err(Error::InvalidParameter(
            "need at least 2 participants and one item of each test".into(),
        ));
    }
    if cfg.width < 20 || cfg.height < 16 {
        return Err(Error::InvalidParameter("synthetic charts must be at least 20x16".into()));
    }
    if cfg.clicks.0 > cfg.clicks.1 || !(0.0..=1.0).contains(&cfg.timeout_rate) || !(cfg.time_limit_s >= 1.0) {
        return Err(Error::InvalidParameter("invalid click range, timeout rate or time limit".into()));
    }
    Ok(())
}

pub fn study_config(cfg: &SynthConfig) -> StudyConfig {
    let items = item_codes(cfg)
        .into_iter()
        .map(|(code, test, _)| {
            let choices = match test {
                TestKind::Vlat => 4,
                TestKind::Calvi => 3,
            };
            QuestionItem {
                image: format!("charts/{code}.png"),
                question: format!("Synthetic question for {code}"),
                choices: (0..choices).map(|c| format!("option {}", c + 1)).collect(),
                correct: 0,
                time_limit_s: None,
                width: cfg.width,
                height: cfg.height,
                regions: layout(cfg.width, cfg.height),
                code,
                test,
            }
        })
        .collect();
    StudyConfig {
        study_id: format!("synthetic-{}", cfg.seed),
        time_limit_s: cfg.time_limit_s,
        bubble_radius: cfg.bubble_radius,
        blur_preview_sigma: cfg.bubble_radius * 0.6,
        randomize: true,
        items,
        sgl_items: (0..SGL_ITEMS).map(|i| format!("Self-assessment prompt {}", i + 1)).collect(),
    }
}

fn point_in(rng: &mut ChaCha8Rng, r: [u32; 4]) -> (u32, u32) {
    (rng.random_range(r[0]..r[2]), rng.random_range(r[1]..r[3]))
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthStudy> {
    validate(cfg)?;
    let config = study_config(cfg);
    let codes = item_codes(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let answer_noise = Normal::new(0.0, 0.03).expect("valid normal");
    let sgl_noise = Normal::new(0.0, 0.05).expect("valid normal");
    let limit_ms = (cfg.time_limit_s * 1000.0) as u64;

    // Two well-separated modes of equal size.
    let mut high: Vec<bool> = (0..cfg.participants).map(|i| i < cfg.participants / 2).collect();
    high.shuffle(&mut rng);
    let width = cfg.participants.to_string().len().max(3);

    let mut latent = BTreeMap::new();
    let mut sessions = Vec::new();
    let mut sgl = BTreeMap::new();
    let mut event_streams = Vec::new();
    for (p, is_high) in high.iter().enumerate() {
        let pid = format!("P{:0width$}", p + 1);
        let l: f64 = if *is_high {
            rng.random_range(0.65..0.95)
        } else {
            rng.random_range(0.05..0.35)
        };
        latent.insert(pid.clone(), l);

        let order_seed: u64 = rng.random();
        let item_order = config.item_order(order_seed);
        let order: Vec<usize> = item_order
            .iter()
            .map(|c| codes.iter().position(|k| &k.0 == c).expect("generated item"))
            .collect();
        let token = format!("s{}", p + 1);
        let mut server_ms = 1_000_000 * (p as u64 + 1);
        let mut events = vec![SessionEvent::SessionOpened {
            session: token.clone(),
            participant_id: pid.clone(),
            seed: order_seed,
            item_order,
            bubble_radius: cfg.bubble_radius,
            radius_scale: 1.0,
            screen_w: Some(cfg.width),
            screen_h: Some(cfg.height),
            server_ms,
        }];
        let mut seq = 0u64;
        for (index, &i) in order.iter().enumerate() {
            let (code, test, within) = &codes[i];
            let item = config.item(code).expect("generated item");
            let n_items = match test {
                TestKind::Vlat => cfg.vlat_items,
                TestKind::Calvi => cfg.calvi_items,
            };
            let difficulty = (*within as f64 + 0.5) / n_items as f64;
            let timed_out = rng.random::<f64>() < cfg.timeout_rate;
            let answer = if timed_out {
                Answer::Skipped
            } else if l + answer_noise.sample(&mut rng) > difficulty {
                Answer::Choice(item.correct)
            } else {
                Answer::Choice((item.correct + 1 + rng.random_range(0..item.choices.len() as u32 - 1)) % item.choices.len() as u32)
            };
            let elapsed_ms = if timed_out {
                limit_ms
            } else {
                rng.random_range(limit_ms / 6..limit_ms * 9 / 10)
            };
            let spots = hotspots(cfg.width, cfg.height, i);
            let p_expert = if cfg.uninformative.contains(code) { 0.5 } else { l };
            let n_clicks = rng.random_range(cfg.clicks.0..=cfg.clicks.1);
            let mut times: Vec<u64> = (0..n_clicks).map(|_| rng.random_range(0..=elapsed_ms)).collect();
            times.sort_unstable();
            let clicks: Vec<ClickEvent> = times
                .iter()
                .map(|&t| {
                    let area = if rng.random::<f64>() < p_expert { spots.expert } else { spots.novice };
                    let (x, y) = point_in(&mut rng, area);
                    ClickEvent { x, y, t }
                })
                .collect();

            events.push(SessionEvent::ItemStarted {
                item: code.clone(),
                index,
                server_ms,
            });
            for c in &clicks {
                events.push(SessionEvent::Click {
                    item: code.clone(),
                    seq,
                    x: c.x,
                    y: c.y,
                    t: c.t,
                    server_ms: server_ms + c.t,
                });
                seq += 1;
            }
            if timed_out {
                // Logged by the service but past the limit, so not analysed.
                let (x, y) = point_in(&mut rng, spots.novice);
                events.push(SessionEvent::Click {
                    item: code.clone(),
                    seq,
                    x,
                    y,
                    t: limit_ms + 500,
                    server_ms: server_ms + limit_ms + 500,
                });
                seq += 1;
            }
            server_ms += elapsed_ms + 1_000;
            events.push(SessionEvent::Answer {
                item: code.clone(),
                choice: answer,
                elapsed_ms,
                server_ms,
            });
            sessions.push(SessionLog {
                participant_id: pid.clone(),
                chart_id: code.clone(),
                clicks,
                answer,
                duration_s: elapsed_ms as f64 / 1000.0,
                image_w: cfg.width,
                image_h: cfg.height,
                bubble_radius: Some(cfg.bubble_radius),
            });
        }
        let responses: Vec<u8> = (0..SGL_ITEMS)
            .map(|_| 1 + (5.0 * (l + sgl_noise.sample(&mut rng)).clamp(0.0, 1.0)).round() as u8)
            .collect();
        server_ms += 5_000;
        events.push(SessionEvent::Sgl {
            responses: responses.clone(),
            server_ms,
        });
        events.push(SessionEvent::Finalized { server_ms: server_ms + 10 });
        sgl.insert(pid.clone(), responses);
        event_streams.push((token, events));
    }
    sessions.sort_by(|a, b| (&a.participant_id, &a.chart_id).cmp(&(&b.participant_id, &b.chart_id)));
    Ok(SynthStudy {
        config,
        latent,
        sessions,
        sgl,
        event_streams,
    })
}

impl SynthStudy {
    /// Writes one `<token>.jsonl` session file per participant, as the
    /// capture service would.
    pub fn write_store(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (token, events) in &self.event_streams {
            let path = dir.join(format!("{token}.jsonl"));
            if path.exists() {
                return Err(Error::InvalidParameter(format!("{} already exists", path.display())));
            }
            append_events(&path, events)?;
        }
        Ok(())
    }
}
