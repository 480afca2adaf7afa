use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attention_map::BinaryMask;
use crate::error::{Error, Result};
use crate::metrics::{RegionKind, RegionMask};
use crate::stats::SGL_ITEMS;

pub const DEFAULT_TIME_LIMIT_S: f64 = 90.0;
pub const DEFAULT_BUBBLE_RADIUS: f64 = 32.0;
pub const DEFAULT_PREVIEW_SIGMA: f64 = 19.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum TestKind {
    Vlat,
    Calvi,
}

/// Axis-aligned chart region, half-open pixel bounds `[x0, x1) × [y0, y1)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub kind: RegionKind,
    pub rect: [u32; 4],
}

/// One timed multiple-choice question shown over a chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionItem {
    pub code: String,
    pub test: TestKind,
    /// PNG path relative to the study config file.
    pub image: String,
    pub width: u32,
    pub height: u32,
    pub question: String,
    pub choices: Vec<String>,
    /// Index into `choices`.
    pub correct: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_limit_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub regions: Vec<RegionSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub study_id: String,
    #[serde(default = "default_time_limit")]
    pub time_limit_s: f64,
    #[serde(default = "default_radius")]
    pub bubble_radius: f64,
    /// Blur applied to the unrevealed chart in the capture client only.
    #[serde(default = "default_preview_sigma")]
    pub blur_preview_sigma: f64,
    /// Present question items in a per-participant seeded random order.
    #[serde(default = "default_true")]
    pub randomize: bool,
    pub items: Vec<QuestionItem>,
    /// The ten self-assessment prompts, answered on a 1–6 scale.
    pub sgl_items: Vec<String>,
}

fn default_time_limit() -> f64 {
    DEFAULT_TIME_LIMIT_S
}

fn default_radius() -> f64 {
    DEFAULT_BUBBLE_RADIUS
}

fn default_preview_sigma() -> f64 {
    DEFAULT_PREVIEW_SIGMA
}

fn default_true() -> bool {
    true
}

impl StudyConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: StudyConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |d: String| Err(Error::format("study config", d));
        if !(self.time_limit_s > 0.0) {
            return bad("time_limit_s must be positive".into());
        }
        if !(self.bubble_radius > 0.0) {
            return bad("bubble_radius must be positive".into());
        }
        if self.items.is_empty() {
            return bad("no question items".into());
        }
        if self.sgl_items.len() != SGL_ITEMS {
            return bad(format!("expected {SGL_ITEMS} SGL prompts, got {}", self.sgl_items.len()));
        }
        let mut seen = BTreeSet::new();
        for item in &self.items {
            if !seen.insert(item.code.as_str()) {
                return bad(format!("duplicate item code {}", item.code));
            }
            if item.code.is_empty() || item.code.starts_with("SGL") {
                return bad(format!("item code {:?} is reserved or empty", item.code));
            }
            if item.choices.len() < 2 {
                return bad(format!("item {} has fewer than two choices", item.code));
            }
            if item.correct as usize >= item.choices.len() {
                return bad(format!("item {} marks a non-existent choice correct", item.code));
            }
            if item.width == 0 || item.height == 0 {
                return bad(format!("item {} has an empty image", item.code));
            }
            if item.time_limit_s.is_some_and(|t| !(t > 0.0)) {
                return bad(format!("item {} has a non-positive time limit", item.code));
            }
            for r in &item.regions {
                let [x0, y0, x1, y1] = r.rect;
                if x0 >= x1 || y0 >= y1 || x1 > item.width || y1 > item.height {
                    return bad(format!("item {} has an invalid {:?} region", item.code, r.kind));
                }
            }
        }
        Ok(())
    }

    pub fn item(&self, code: &str) -> Option<&QuestionItem> {
        self.items.iter().find(|i| i.code == code)
    }

    pub fn time_limit(&self, item: &QuestionItem) -> f64 {
        item.time_limit_s.unwrap_or(self.time_limit_s)
    }

    pub fn codes(&self) -> Vec<String> {
        self.items.iter().map(|i| i.code.clone()).collect()
    }

    /// Presentation order for a participant: a permutation seeded by
    /// `seed`, or config order when randomization is off.
    pub fn item_order(&self, seed: u64) -> Vec<String> {
        let mut codes = self.codes();
        if self.randomize {
            codes.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        }
        codes
    }
}

impl QuestionItem {
    /// Region masks, merging rectangles of the same kind.
    pub fn region_masks(&self) -> Vec<RegionMask> {
        let (w, h) = (self.width as usize, self.height as usize);
        let mut out: Vec<RegionMask> = Vec::new();
        for r in &self.regions {
            let [x0, y0, x1, y1] = r.rect.map(|v| v as usize);
            let rect = BinaryMask::from_rect(w, h, x0, y0, x1, y1);
            match out.iter_mut().find(|m| m.kind == r.kind) {
                Some(m) => m.mask.union_with(&rect),
                None => out.push(RegionMask { kind: r.kind, mask: rect }),
            }
        }
        out
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn sample() -> StudyConfig {
        StudyConfig {
            study_id: "s".into(),
            time_limit_s: 90.0,
            bubble_radius: 32.0,
            blur_preview_sigma: 19.0,
            randomize: true,
            items: vec![QuestionItem {
                code: "V1".into(),
                test: TestKind::Vlat,
                image: "charts/V1.png".into(),
                width: 20,
                height: 10,
                question: "q".into(),
                choices: vec!["a".into(), "b".into()],
                correct: 1,
                time_limit_s: None,
                regions: vec![
                    RegionSpec { kind: RegionKind::Title, rect: [0, 0, 20, 2] },
                    RegionSpec { kind: RegionKind::Title, rect: [0, 8, 5, 10] },
                ],
            }],
            sgl_items: (0..10).map(|i| format!("prompt {i}")).collect(),
        }
    }

    #[test]
    fn json_defaults_and_validation() {
        let text = r#"{"study_id":"x","items":[{"code":"V1","test":"VLAT","image":"a.png","width":4,"height":3,
            "question":"?","choices":["a","b","c","d"],"correct":2}],"sgl_items":["1","2","3","4","5","6","7","8","9","10"]}"#;
        let cfg: StudyConfig = serde_json::from_str(text).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.time_limit_s, 90.0);
        assert_eq!(cfg.bubble_radius, 32.0);
        assert!(cfg.randomize);

        let mut dup = sample();
        dup.items.push(dup.items[0].clone());
        assert!(dup.validate().is_err());
        let mut bad = sample();
        bad.items[0].correct = 2;
        assert!(bad.validate().is_err());
        let mut zero = sample();
        zero.time_limit_s = 0.0;
        assert!(zero.validate().is_err());
    }

    #[test]
    fn regions_merge_by_kind() {
        let masks = sample().items[0].region_masks();
        assert_eq!(masks.len(), 1);
        assert_eq!(masks[0].mask.count(), 40 + 10);
    }
}
