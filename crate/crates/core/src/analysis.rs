//! Group-level attention descriptors: saliency coverage, within-group
//! pairwise IoU and IoU with chart-element regions, compared between
//! correct/incorrect answers and expert/novice participants.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::attention_map::{binarize, Binarize, BinaryMask};
use crate::error::{Error, Result};
use crate::features::{quartiles, ChartSession};
use crate::metrics::{iou, saliency_coverage, RegionKind, RegionMask};
use crate::stats::{welch_t_test, LiteracyScores, TTest};

pub const REGION_KINDS: [RegionKind; 3] = [RegionKind::Title, RegionKind::Labels, RegionKind::Legend];
pub const COLUMNS: [&str; 5] = ["coverage", "iou_pair", "iou_title", "iou_labels", "iou_legend"];

/// Per-observation samples of each descriptor for one group.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroupSamples {
    /// One value per session.
    pub coverage: Vec<f64>,
    /// One value per pair of sessions on the same chart.
    pub pair_iou: Vec<f64>,
    /// One value per session on charts that define the region.
    pub region_iou: [Vec<f64>; 3],
}

impl GroupSamples {
    pub fn columns(&self) -> [&[f64]; 5] {
        [
            &self.coverage,
            &self.pair_iou,
            &self.region_iou[0],
            &self.region_iou[1],
            &self.region_iou[2],
        ]
    }

    pub fn means(&self) -> [Option<f64>; 5] {
        self.columns()
            .map(|c| (!c.is_empty()).then(|| c.iter().sum::<f64>() / c.len() as f64))
    }
}

/// Descriptor samples over `sessions`. Sessions without clicks count
/// towards coverage (as 0) but have no attended region, so they are left
/// out of IoU.
pub fn group_samples(
    sessions: &[&ChartSession],
    regions: &BTreeMap<String, Vec<RegionMask>>,
    strategy: Binarize,
) -> Result<GroupSamples> {
    let mut out = GroupSamples::default();
    let mut masks: BTreeMap<&str, Vec<BinaryMask>> = BTreeMap::new();
    for s in sessions {
        out.coverage.push(saliency_coverage(&s.map, None));
        if s.map.total() <= 0.0 {
            continue;
        }
        let mask = binarize(&s.map, strategy)?;
        if let Some(rs) = regions.get(&s.log.chart_id) {
            for (k, kind) in REGION_KINDS.iter().enumerate() {
                if let Some(r) = rs.iter().find(|r| r.kind == *kind) {
                    out.region_iou[k].push(iou(&mask, &r.mask)?);
                }
            }
        }
        masks.entry(s.log.chart_id.as_str()).or_default().push(mask);
    }
    for list in masks.values() {
        for i in 0..list.len() {
            for j in i + 1..list.len() {
                out.pair_iou.push(iou(&list[i], &list[j])?);
            }
        }
    }
    Ok(out)
}

/// Two contrasted groups and the Welch t-test of each descriptor.
#[derive(Debug, Clone, Serialize)]
pub struct Contrast {
    pub category: String,
    pub groups: [String; 2],
    pub means: [[Option<f64>; 5]; 2],
    /// `None` where either side has fewer than two samples or no variance.
    pub tests: [Option<TTest>; 5],
}

fn contrast(category: &str, names: [&str; 2], a: &GroupSamples, b: &GroupSamples) -> Contrast {
    let tests = std::array::from_fn(|i| welch_t_test(a.columns()[i], b.columns()[i]).ok());
    Contrast {
        category: category.to_string(),
        groups: names.map(str::to_string),
        means: [a.means(), b.means()],
        tests,
    }
}

/// Correct vs incorrect answers, then expert vs novice quartiles for each
/// test score.
pub fn group_contrasts(
    sessions: &[ChartSession],
    scores: &BTreeMap<String, LiteracyScores>,
    regions: &BTreeMap<String, Vec<RegionMask>>,
    strategy: Binarize,
) -> Result<Vec<Contrast>> {
    if sessions.is_empty() {
        return Err(Error::Empty("sessions"));
    }
    let pick = |f: &dyn Fn(&ChartSession) -> bool| -> Vec<&ChartSession> { sessions.iter().filter(|s| f(s)).collect() };
    let mut out = vec![contrast(
        "accuracy",
        ["correct", "incorrect"],
        &group_samples(&pick(&|s| s.correct), regions, strategy)?,
        &group_samples(&pick(&|s| !s.correct), regions, strategy)?,
    )];
    for (t, name) in ["mini-VLAT", "CALVI", "SGL"].iter().enumerate() {
        let ranked: Vec<(String, f64)> = scores.iter().map(|(p, s)| (p.clone(), s.normalized()[t])).collect();
        let (experts, novices) = quartiles(&ranked)?;
        let experts: BTreeSet<String> = experts.into_iter().collect();
        let novices: BTreeSet<String> = novices.into_iter().collect();
        out.push(contrast(
            name,
            ["experts", "novices"],
            &group_samples(&pick(&|s| experts.contains(&s.log.participant_id)), regions, strategy)?,
            &group_samples(&pick(&|s| novices.contains(&s.log.participant_id)), regions, strategy)?,
        ));
    }
    Ok(out)
}

pub fn write_contrasts_csv<W: std::io::Write>(rows: &[Contrast], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["category".to_string(), "group".to_string()];
    header.extend(COLUMNS.iter().map(|c| c.to_string()));
    header.extend(COLUMNS.iter().map(|c| format!("p_{c}")));
    w.write_record(&header).map_err(crate::features::csv_err)?;
    let fmt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for c in rows {
        for g in 0..2 {
            let mut rec = vec![c.category.clone(), c.groups[g].clone()];
            rec.extend(c.means[g].iter().map(|m| fmt(*m)));
            rec.extend(c.tests.iter().map(|t| fmt(t.as_ref().map(|t| t.p_two_tailed))));
            w.write_record(&rec).map_err(crate::features::csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::format("analysis CSV", e.to_string()))
}
