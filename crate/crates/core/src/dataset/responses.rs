//! Per-item responses as CSV and their conversion to literacy scores.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::config::{StudyConfig, TestKind};
use crate::error::{Error, Result};
use crate::features::csv_err;
use crate::stats::{correct_and_normalize, LiteracyScores, ScoredItem, SGL_ITEMS};

/// Item ids of the self-assessment prompts are `SGL1` to `SGL10`.
pub fn sgl_item_id(index: usize) -> String {
    format!("SGL{}", index + 1)
}

/// One row of the responses table. `response` holds a choice index,
/// `SKIPPED` or a Likert value; `correct_flag` is empty for SGL rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseRow {
    pub participant_id: String,
    pub item_id: String,
    pub response: String,
    pub correct_flag: Option<u8>,
}

pub fn write_responses_csv<W: Write>(rows: &[ResponseRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::format("responses csv", e.to_string()))?;
    Ok(())
}

pub fn read_responses_csv<R: Read>(input: R) -> Result<Vec<ResponseRow>> {
    let mut r = csv::Reader::from_reader(input);
    let rows: Vec<ResponseRow> = r.deserialize().collect::<std::result::Result<_, _>>().map_err(csv_err)?;
    if let Some(bad) = rows.iter().find(|r| r.correct_flag.is_some_and(|f| f > 1)) {
        return Err(Error::format("responses csv", format!("correct_flag {:?} is not 0 or 1", bad.correct_flag)));
    }
    Ok(rows)
}

/// Scores every participant who answered all SGL prompts. Test items with
/// no response row count as wrong; participants with incomplete SGL
/// responses are left out with a warning.
pub fn score_responses(rows: &[ResponseRow], config: &StudyConfig) -> Result<BTreeMap<String, LiteracyScores>> {
    let mut by_pid: BTreeMap<&str, BTreeMap<&str, &ResponseRow>> = BTreeMap::new();
    for r in rows {
        if by_pid
            .entry(r.participant_id.as_str())
            .or_default()
            .insert(r.item_id.as_str(), r)
            .is_some()
        {
            return Err(Error::format(
                "responses",
                format!("duplicate response for {} on {}", r.participant_id, r.item_id),
            ));
        }
    }
    let mut out = BTreeMap::new();
    for (pid, answers) in by_pid {
        let correct = |code: &str| answers.get(code).is_some_and(|r| r.correct_flag == Some(1));
        let mut sgl = Vec::with_capacity(SGL_ITEMS);
        for i in 0..SGL_ITEMS {
            match answers.get(sgl_item_id(i).as_str()).and_then(|r| r.response.parse::<u8>().ok()) {
                Some(v) => sgl.push(v),
                None => break,
            }
        }
        if sgl.len() != SGL_ITEMS {
            log::warn!("participant {pid} has incomplete SGL responses; not scored");
            continue;
        }
        let vlat: Vec<ScoredItem> = config
            .items
            .iter()
            .filter(|q| q.test == TestKind::Vlat)
            .map(|q| ScoredItem {
                correct: correct(&q.code),
                choices: q.choices.len() as u32,
            })
            .collect();
        let calvi: Vec<bool> = config
            .items
            .iter()
            .filter(|q| q.test == TestKind::Calvi)
            .map(|q| correct(&q.code))
            .collect();
        out.insert(pid.to_string(), correct_and_normalize(pid, &vlat, &calvi, &sgl)?);
    }
    Ok(out)
}
