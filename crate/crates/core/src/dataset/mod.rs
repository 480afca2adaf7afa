//! Study configuration, capture session files, exported datasets and the
//! per-item responses derived from them.

mod config;
mod events;
mod export;
mod responses;

use std::collections::{BTreeMap, BTreeSet};

pub use config::{
    QuestionItem, RegionSpec, StudyConfig, TestKind, DEFAULT_BUBBLE_RADIUS, DEFAULT_PREVIEW_SIGMA,
    DEFAULT_TIME_LIMIT_S,
};
pub use events::{append_events, parse_events, read_events, SessionEvent};
pub use export::{
    export_dataset, ingest_dataset, read_manifest, sessions_from_events, sha256_hex, valid_participant_id, Manifest,
    ManifestEntry, ParticipantRecord, MANIFEST_FILE, MANIFEST_FORMAT,
};
pub use responses::{read_responses_csv, score_responses, sgl_item_id, write_responses_csv, ResponseRow};

use crate::attention_map::{Answer, SessionLog};
use crate::error::Result;
use crate::stats::LiteracyScores;

/// An ingested dataset: every answered chart session plus the
/// self-assessment responses.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub config: StudyConfig,
    /// Sorted by participant, then chart.
    pub sessions: Vec<SessionLog>,
    pub sgl: BTreeMap<String, Vec<u8>>,
}

impl Dataset {
    pub fn participants(&self) -> Vec<String> {
        let ids: BTreeSet<&str> = self
            .sessions
            .iter()
            .map(|s| s.participant_id.as_str())
            .chain(self.sgl.keys().map(String::as_str))
            .collect();
        ids.into_iter().map(str::to_string).collect()
    }

    /// Whether the session's answer is the item's correct choice. Sessions
    /// on unknown items count as wrong.
    pub fn is_correct(&self, log: &SessionLog) -> bool {
        self.config
            .item(&log.chart_id)
            .is_some_and(|q| log.answer == Answer::Choice(q.correct))
    }

    pub fn responses(&self) -> Vec<ResponseRow> {
        let mut rows: Vec<ResponseRow> = self
            .sessions
            .iter()
            .map(|s| ResponseRow {
                participant_id: s.participant_id.clone(),
                item_id: s.chart_id.clone(),
                response: match s.answer {
                    Answer::Choice(c) => c.to_string(),
                    Answer::Skipped => "SKIPPED".into(),
                },
                correct_flag: Some(u8::from(self.is_correct(s))),
            })
            .collect();
        for (pid, values) in &self.sgl {
            rows.extend(values.iter().enumerate().map(|(i, v)| ResponseRow {
                participant_id: pid.clone(),
                item_id: sgl_item_id(i),
                response: v.to_string(),
                correct_flag: None,
            }));
        }
        rows.sort_by(|a, b| (&a.participant_id, &a.item_id).cmp(&(&b.participant_id, &b.item_id)));
        rows
    }

    pub fn scores(&self) -> Result<BTreeMap<String, LiteracyScores>> {
        score_responses(&self.responses(), &self.config)
    }
}

#[cfg(test)]
mod tests {
    use super::config::tests::sample;
    use super::*;
    use crate::attention_map::ClickEvent;
    use crate::error::Error;

    fn opened(session: &str, pid: &str, server_ms: u64) -> SessionEvent {
        SessionEvent::SessionOpened {
            session: session.into(),
            participant_id: pid.into(),
            seed: 1,
            item_order: vec!["V1".into()],
            bubble_radius: 16.0,
            radius_scale: 0.5,
            screen_w: None,
            screen_h: None,
            server_ms,
        }
    }

    fn click(seq: u64, x: u32, t: u64) -> SessionEvent {
        SessionEvent::Click {
            item: "V1".into(),
            seq,
            x,
            y: 1,
            t,
            server_ms: 0,
        }
    }

    fn answer(choice: Answer, elapsed_ms: u64) -> SessionEvent {
        SessionEvent::Answer {
            item: "V1".into(),
            choice,
            elapsed_ms,
            server_ms: 0,
        }
    }

    #[test]
    fn late_clicks_dropped_and_duration_capped() {
        let cfg = sample();
        let events = vec![
            opened("a", "p1", 0),
            click(1, 3, 89_000),
            click(0, 2, 10),
            click(2, 4, 90_001),
            answer(Answer::Choice(1), 95_000),
        ];
        let rec = sessions_from_events(&events, &cfg).unwrap();
        let s = &rec.sessions[0];
        assert_eq!(
            s.clicks,
            vec![ClickEvent { x: 2, y: 1, t: 10 }, ClickEvent { x: 3, y: 1, t: 89_000 }]
        );
        assert_eq!(s.duration_s, 90.0);
        assert_eq!(s.bubble_radius, Some(16.0));
        assert_eq!((s.image_w, s.image_h), (20, 10));

        // A click later than the reported answer time stretches the duration.
        let rec = sessions_from_events(&[opened("a", "p1", 0), click(0, 1, 5_000), answer(Answer::Skipped, 4_000)], &cfg).unwrap();
        assert_eq!(rec.sessions[0].duration_s, 5.0);
    }

    #[test]
    fn duplicate_answers_rejected() {
        let events = vec![opened("a", "p1", 0), answer(Answer::Skipped, 1), answer(Answer::Skipped, 2)];
        assert!(matches!(sessions_from_events(&events, &sample()), Err(Error::Format { .. })));
    }

    #[test]
    fn export_then_ingest_round_trips_and_detects_tampering() {
        let cfg = sample();
        let store = tempfile::tempdir().unwrap();
        let out = tempfile::tempdir().unwrap();
        let sgl: Vec<u8> = (0..10).map(|i| 1 + (i % 6) as u8).collect();
        append_events(
            &store.path().join("tok2.jsonl"),
            &[
                opened("tok2", "p1", 50),
                SessionEvent::Sgl { responses: sgl.clone(), server_ms: 60 },
                SessionEvent::Finalized { server_ms: 61 },
            ],
        )
        .unwrap();
        let first = vec![opened("tok1", "p1", 10), click(0, 5, 100), answer(Answer::Choice(1), 2_000)];
        append_events(&store.path().join("tok1.jsonl"), &first).unwrap();
        append_events(
            &store.path().join("tok3.jsonl"),
            &[opened("tok3", "p2", 5), answer(Answer::Choice(0), 1_000)],
        )
        .unwrap();

        let manifest = export_dataset(store.path(), out.path()).unwrap();
        assert_eq!(manifest.participants.len(), 2);
        assert_eq!(manifest.total_clicks, 1);
        let p1 = &manifest.participants[0];
        assert_eq!((p1.sessions, p1.events, p1.answers), (2, 6, 1));
        assert_eq!(read_manifest(out.path()).unwrap(), manifest);

        let ds = ingest_dataset(out.path(), &cfg).unwrap();
        let direct = sessions_from_events(&first, &cfg).unwrap();
        assert_eq!(ds.sessions[0], direct.sessions[0]);
        assert_eq!(ds.sgl["p1"], sgl);
        assert_eq!(ds.participants(), vec!["p1", "p2"]);
        assert!(ds.is_correct(&ds.sessions[0]));
        assert!(!ds.is_correct(&ds.sessions[1]));

        let path = out.path().join("p2.jsonl");
        let mut text = std::fs::read_to_string(&path).unwrap();
        text = text.replace("\"choice\":0", "\"choice\":1");
        std::fs::write(&path, text).unwrap();
        assert!(matches!(ingest_dataset(out.path(), &cfg), Err(Error::ChecksumMismatch(f)) if f == "p2.jsonl"));
    }

    #[test]
    fn responses_csv_round_trip_and_scoring() {
        let cfg = sample();
        let ds = Dataset {
            config: cfg.clone(),
            sessions: vec![SessionLog {
                participant_id: "p1".into(),
                chart_id: "V1".into(),
                clicks: vec![],
                answer: Answer::Choice(1),
                duration_s: 1.0,
                image_w: 20,
                image_h: 10,
                bubble_radius: None,
            }],
            sgl: BTreeMap::from([("p1".to_string(), vec![6; 10]), ("p2".to_string(), vec![1; 10])]),
        };
        let rows = ds.responses();
        assert_eq!(rows.len(), 21);
        let mut buf = Vec::new();
        write_responses_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("participant_id,item_id,response,correct_flag\n"));
        assert!(text.contains("p1,SGL1,6,\n"));
        assert!(text.contains("p1,V1,1,1\n"));
        assert_eq!(read_responses_csv(buf.as_slice()).unwrap(), rows);

        // The sample config has no CALVI items, so scoring reports that.
        assert!(matches!(ds.scores(), Err(Error::Empty(_))));
        let mut cfg2 = cfg;
        let mut calvi = cfg2.items[0].clone();
        calvi.code = "C1".into();
        calvi.test = TestKind::Calvi;
        cfg2.items.push(calvi);
        let scores = score_responses(&rows, &cfg2).unwrap();
        // p1: VLAT right (normalized 1), CALVI unanswered (0), SGL all 6 (1).
        assert_eq!(scores["p1"].normalized(), [1.0, 0.0, 1.0]);
        // p2 answered nothing: VLAT worst case, SGL all 1.
        assert_eq!(scores["p2"].normalized(), [0.0, 0.0, 0.0]);
    }
}
