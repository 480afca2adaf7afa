use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SGL_ITEMS: usize = 10;
pub const SGL_MIN: u8 = 1;
pub const SGL_MAX: u8 = 6;

/// One scored multiple-choice item.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScoredItem {
    pub correct: bool,
    /// Number of answer choices offered.
    pub choices: u32,
}

/// Raw and [0, 1]-normalized scores of one participant on the three tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiteracyScores {
    pub participant_id: String,
    /// Guessing-corrected mini-VLAT score.
    pub vlat_raw: f64,
    /// CALVI correct count.
    pub calvi_raw: f64,
    /// Sum of the SGL Likert responses, in [10, 60].
    pub sgl_raw: f64,
    pub vlat: f64,
    pub calvi: f64,
    pub sgl: f64,
}

impl LiteracyScores {
    /// The normalized scores in (mini-VLAT, CALVI, SGL) order.
    pub fn normalized(&self) -> [f64; 3] {
        [self.vlat, self.calvi, self.sgl]
    }

    /// Mean of the three normalized scores.
    pub fn composite(&self) -> f64 {
        (self.vlat + self.calvi + self.sgl) / 3.0
    }
}

/// Guessing correction R − W/(C − 1) applied per item: each wrong (or
/// skipped) item costs 1/(Cᵢ − 1). Returns `(raw, normalized)` where the
/// normalization spans the worst case (everything wrong) to all correct.
pub fn corrected_score(items: &[ScoredItem]) -> Result<(f64, f64)> {
    if items.is_empty() {
        return Err(Error::Empty("scored items"));
    }
    let mut raw = 0.0;
    let mut min_possible = 0.0;
    for (i, item) in items.iter().enumerate() {
        if item.choices < 2 {
            return Err(Error::InvalidParameter(format!(
                "item {i} has {} choices; at least 2 required",
                item.choices
            )));
        }
        let penalty = 1.0 / (item.choices as f64 - 1.0);
        min_possible -= penalty;
        raw += if item.correct { 1.0 } else { -penalty };
    }
    let max_possible = items.len() as f64;
    Ok((raw, (raw - min_possible) / (max_possible - min_possible)))
}

pub fn correct_and_normalize(
    participant_id: &str,
    vlat: &[ScoredItem],
    calvi: &[bool],
    sgl: &[u8],
) -> Result<LiteracyScores> {
    let (vlat_raw, vlat_norm) = corrected_score(vlat)?;
    if calvi.is_empty() {
        return Err(Error::Empty("CALVI responses"));
    }
    let calvi_raw = calvi.iter().filter(|c| **c).count() as f64;
    if sgl.len() != SGL_ITEMS {
        return Err(Error::InvalidParameter(format!(
            "expected {SGL_ITEMS} SGL responses, got {}",
            sgl.len()
        )));
    }
    if let Some(bad) = sgl.iter().find(|r| !(SGL_MIN..=SGL_MAX).contains(*r)) {
        return Err(Error::InvalidParameter(format!("SGL response {bad} outside 1..=6")));
    }
    let sgl_raw = sgl.iter().map(|r| *r as f64).sum::<f64>();
    let sgl_lo = (SGL_ITEMS as f64) * SGL_MIN as f64;
    let sgl_hi = (SGL_ITEMS as f64) * SGL_MAX as f64;
    Ok(LiteracyScores {
        participant_id: participant_id.to_string(),
        vlat_raw,
        calvi_raw,
        sgl_raw,
        vlat: vlat_norm,
        calvi: calvi_raw / calvi.len() as f64,
        sgl: (sgl_raw - sgl_lo) / (sgl_hi - sgl_lo),
    })
}

/// SGL Likert responses binarized for MCA: 1–3 low, 4–6 high.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SglLevel {
    Low,
    High,
}

pub fn binarize_sgl(response: u8) -> Result<SglLevel> {
    match response {
        1..=3 => Ok(SglLevel::Low),
        4..=6 => Ok(SglLevel::High),
        r => Err(Error::InvalidParameter(format!("SGL response {r} outside 1..=6"))),
    }
}

fn moments(values: &[f64]) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::Empty("need at least two values"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    if sd <= 0.0 {
        return Err(Error::Undefined("skewness of constant data"));
    }
    Ok((mean, sd))
}

/// Standardized third central moment, population moments.
pub fn skewness(values: &[f64]) -> Result<f64> {
    let (mean, sd) = moments(values)?;
    Ok(values.iter().map(|v| ((v - mean) / sd).powi(3)).sum::<f64>() / values.len() as f64)
}

/// Pearson's median skewness 3(mean − median)/σ.
pub fn skewness_median(values: &[f64]) -> Result<f64> {
    let (mean, sd) = moments(values)?;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    Ok(3.0 * (mean - median) / sd)
}
