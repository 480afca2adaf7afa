//! The 24 literacy-predictive features: four descriptors of a participant's
//! own map plus five similarity metrics against each of four group maps.

mod scale;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attention_map::{aggregate, AttentionMap, NormMode, SessionLog};
use crate::error::{Error, Result};
use crate::metrics::{
    kl_divergence, mse, mutual_information, saliency_coverage, shannon_entropy, spearman_rank, ssim,
    DEFAULT_KL_EPSILON, DEFAULT_MI_BINS,
};
use crate::split::Split;
use crate::stats::LiteracyScores;

pub use scale::{Imputer, MinMax, TEST_CLAMP};

pub const N_WITHIN: usize = 4;
pub const N_BETWEEN: usize = 20;
pub const N_FEATURES: usize = N_WITHIN + N_BETWEEN;

pub const WITHIN_NAMES: [&str; N_WITHIN] = ["click_count", "duration_s", "entropy", "coverage"];
pub const METRIC_NAMES: [&str; 5] = ["MI", "KLD", "SRC", "SSIM", "MSE"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Group {
    Expert,
    Novice,
    Correct,
    Wrong,
}

impl Group {
    pub const ALL: [Group; 4] = [Group::Expert, Group::Novice, Group::Correct, Group::Wrong];

    pub fn name(self) -> &'static str {
        match self {
            Group::Expert => "EXPERT",
            Group::Novice => "NOVICE",
            Group::Correct => "CORRECT",
            Group::Wrong => "WRONG",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Canonical column names, in feature order.
pub fn feature_names() -> Vec<String> {
    let mut names: Vec<String> = WITHIN_NAMES.iter().map(|n| format!("within.{n}")).collect();
    for g in Group::ALL {
        for m in METRIC_NAMES {
            names.push(format!("between.{m}.{g}"));
        }
    }
    names
}

/// Which score ranks participants into experts and novices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpertRule {
    #[default]
    Composite,
    Vlat,
    Calvi,
    Sgl,
}

impl ExpertRule {
    pub fn score(self, s: &LiteracyScores) -> f64 {
        match self {
            ExpertRule::Composite => s.composite(),
            ExpertRule::Vlat => s.vlat,
            ExpertRule::Calvi => s.calvi,
            ExpertRule::Sgl => s.sgl,
        }
    }
}

/// A session with its rasterized map and whether the answer was right
/// (skipped counts as wrong).
#[derive(Debug, Clone, PartialEq)]
pub struct ChartSession {
    pub log: SessionLog,
    pub map: AttentionMap,
    pub correct: bool,
}

/// The four group maps of one chart. `None` marks a group with no member
/// (or no member with any clicks) on this chart.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartGroups {
    pub maps: [Option<AttentionMap>; 4],
    pub members: [Vec<String>; 4],
}

impl ChartGroups {
    pub fn get(&self, g: Group) -> Option<&AttentionMap> {
        self.maps[g as usize].as_ref()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupMaps {
    pub charts: BTreeMap<String, ChartGroups>,
    pub experts: Vec<String>,
    pub novices: Vec<String>,
}

impl GroupMaps {
    /// Every participant whose map went into any group map.
    pub fn contributors(&self) -> BTreeSet<&String> {
        self.charts
            .values()
            .flat_map(|c| c.members.iter().flatten())
            .collect()
    }

    pub fn chart(&self, chart_id: &str) -> Result<&ChartGroups> {
        self.charts
            .get(chart_id)
            .ok_or_else(|| Error::InvalidParameter(format!("no group maps for chart {chart_id}")))
    }
}

/// Top and bottom `⌊n/4⌋` participants by `score`, ties broken by id.
pub fn quartiles(scores: &[(String, f64)]) -> Result<(Vec<String>, Vec<String>)> {
    let q = scores.len() / 4;
    if q == 0 {
        return Err(Error::QuartileEmpty(scores.len()));
    }
    let mut sorted: Vec<&(String, f64)> = scores.iter().collect();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    let novices = sorted[..q].iter().map(|s| s.0.clone()).collect();
    let experts = sorted[sorted.len() - q..].iter().map(|s| s.0.clone()).collect();
    Ok((experts, novices))
}

/// Builds per-chart group maps from the training participants' sessions.
/// Sessions of other participants are ignored; a group member on the test
/// side of `split` is a hard error.
pub fn build_group_maps(
    sessions: &[ChartSession],
    scores: &BTreeMap<String, LiteracyScores>,
    split: &Split,
    rule: ExpertRule,
) -> Result<GroupMaps> {
    split.check_disjoint()?;
    let mut ranked = Vec::with_capacity(split.train.len());
    for p in &split.train {
        let s = scores
            .get(p)
            .ok_or_else(|| Error::InvalidParameter(format!("no scores for training participant {p}")))?;
        ranked.push((p.clone(), rule.score(s)));
    }
    let (experts, novices) = quartiles(&ranked)?;
    let expert_set: BTreeSet<&String> = experts.iter().collect();
    let novice_set: BTreeSet<&String> = novices.iter().collect();

    let mut by_chart: BTreeMap<&str, Vec<&ChartSession>> = BTreeMap::new();
    for s in sessions.iter().filter(|s| split.train.contains(&s.log.participant_id)) {
        by_chart.entry(s.log.chart_id.as_str()).or_default().push(s);
    }
    let mut charts = BTreeMap::new();
    for (chart, members) in by_chart {
        let mut maps: [Option<AttentionMap>; 4] = Default::default();
        let mut ids: [Vec<String>; 4] = Default::default();
        for g in Group::ALL {
            let mut chosen: Vec<&ChartSession> = members
                .iter()
                .copied()
                .filter(|s| {
                    let p = &s.log.participant_id;
                    match g {
                        Group::Expert => expert_set.contains(p),
                        Group::Novice => novice_set.contains(p),
                        Group::Correct => s.correct,
                        Group::Wrong => !s.correct,
                    }
                })
                .filter(|s| s.map.total() > 0.0)
                .collect();
            chosen.sort_by(|a, b| a.log.participant_id.cmp(&b.log.participant_id));
            if chosen.is_empty() {
                log::info!("chart {chart}: group {g} is absent");
                continue;
            }
            let group_maps: Vec<AttentionMap> = chosen.iter().map(|s| s.map.clone()).collect();
            maps[g as usize] = Some(aggregate(&group_maps)?);
            ids[g as usize] = chosen.iter().map(|s| s.log.participant_id.clone()).collect();
        }
        charts.insert(chart.to_string(), ChartGroups { maps, members: ids });
    }
    let groups = GroupMaps {
        charts,
        experts,
        novices,
    };
    split.ensure_training_only(groups.contributors())?;
    Ok(groups)
}

/// Click count, duration, entropy of the SUM1 map and coverage.
pub fn within_map_features(log: &SessionLog, map: &AttentionMap) -> [f64; N_WITHIN] {
    let entropy = match map.normalize(NormMode::Sum1) {
        Ok(p) => shannon_entropy(&p),
        Err(_) => 0.0,
    };
    [
        log.click_count() as f64,
        log.duration_s,
        entropy,
        saliency_coverage(map, None),
    ]
}

fn defined(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        Ok(_) => Ok(None),
        Err(e) if e.is_numeric() => Ok(None),
        Err(e) => Err(e),
    }
}

/// MI, KL(group‖map), Spearman, SSIM and MSE against each group map, all on
/// SUM1 maps, group-major in [`Group::ALL`] order. Entries are `None` where
/// the group is absent or the metric is undefined (e.g. rank correlation
/// with a map that has no clicks).
pub fn between_group_features(map: &AttentionMap, groups: &ChartGroups) -> Result<[Option<f64>; N_BETWEEN]> {
    let own = map
        .normalize(NormMode::Sum1)
        .unwrap_or_else(|_| AttentionMap::zeros(map.width(), map.height()));
    let mut out = [None; N_BETWEEN];
    for (gi, g) in Group::ALL.iter().enumerate() {
        let Some(gm) = groups.get(*g) else { continue };
        own.ensure_same_dims(gm)?;
        let base = gi * METRIC_NAMES.len();
        out[base] = defined(mutual_information(&own, gm, DEFAULT_MI_BINS))?;
        out[base + 1] = defined(kl_divergence(&own, gm, DEFAULT_KL_EPSILON))?;
        out[base + 2] = defined(spearman_rank(&own, gm))?;
        out[base + 3] = defined(ssim(&own, gm))?;
        out[base + 4] = defined(mse(&own, gm))?;
    }
    Ok(out)
}

/// 24 features of one session, before imputation.
pub type RawFeatures = [Option<f64>; N_FEATURES];

pub fn session_features(session: &ChartSession, groups: &GroupMaps) -> Result<RawFeatures> {
    let within = within_map_features(&session.log, &session.map);
    let between = between_group_features(&session.map, groups.chart(&session.log.chart_id)?)?;
    let mut out = [None; N_FEATURES];
    for (o, w) in out.iter_mut().zip(within) {
        *o = Some(w);
    }
    out[N_WITHIN..].copy_from_slice(&between);
    Ok(out)
}

/// Keyed by (participant, chart).
pub type SessionFeatureTable = BTreeMap<(String, String), RawFeatures>;

/// Features of every session, computed in parallel.
pub fn extract_features(sessions: &[ChartSession], groups: &GroupMaps) -> Result<SessionFeatureTable> {
    sessions
        .par_iter()
        .map(|s| {
            let f = session_features(s, groups)?;
            Ok(((s.log.participant_id.clone(), s.log.chart_id.clone()), f))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub participant_id: String,
    pub charts: Vec<String>,
    pub values: Vec<f64>,
}

/// Per-participant mean of the (imputed) per-chart vectors over
/// `charts`, rows in `participants` order.
pub fn build_feature_matrix(
    table: &BTreeMap<(String, String), Vec<f64>>,
    participants: &[String],
    charts: &[String],
) -> Result<Vec<FeatureVector>> {
    if charts.is_empty() {
        return Err(Error::Empty("chart subset"));
    }
    let mut missing = Vec::new();
    let mut rows = Vec::with_capacity(participants.len());
    for p in participants {
        let mut acc: Option<Vec<f64>> = None;
        for c in charts {
            match table.get(&(p.clone(), c.clone())) {
                Some(v) => match acc.as_mut() {
                    Some(a) => a.iter_mut().zip(v).for_each(|(a, x)| *a += x),
                    None => acc = Some(v.clone()),
                },
                None => missing.push((p.clone(), c.clone())),
            }
        }
        if let Some(a) = acc {
            rows.push(FeatureVector {
                participant_id: p.clone(),
                charts: charts.to_vec(),
                values: a.iter().map(|v| v / charts.len() as f64).collect(),
            });
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingSessions(missing));
    }
    Ok(rows)
}

pub fn write_feature_csv<W: std::io::Write>(rows: &[FeatureVector], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["participant_id".to_string()];
    header.extend(feature_names());
    w.write_record(&header).map_err(csv_err)?;
    for r in rows {
        let mut rec = vec![r.participant_id.clone()];
        rec.extend(r.values.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::format("feature CSV", e.to_string()))
}

pub fn read_feature_csv<R: std::io::Read>(input: R) -> Result<Vec<FeatureVector>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(csv_err)?.clone();
    let expected = feature_names();
    if header.len() != expected.len() + 1 || header.iter().skip(1).ne(expected.iter().map(String::as_str)) {
        return Err(Error::format("feature CSV", "unexpected header"));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let values = rec
            .iter()
            .skip(1)
            .map(|v| v.parse::<f64>().map_err(|e| Error::format("feature CSV", format!("{v:?}: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(FeatureVector {
            participant_id: rec[0].to_string(),
            charts: Vec::new(),
            values,
        });
    }
    Ok(rows)
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::format("CSV", e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attention_map::{rasterize, Answer, ClickEvent, RasterConfig};
    use crate::metrics::pearson_cc;

    fn log(p: &str, chart: &str, clicks: &[(u32, u32)]) -> SessionLog {
        SessionLog {
            participant_id: p.into(),
            chart_id: chart.into(),
            clicks: clicks
                .iter()
                .enumerate()
                .map(|(i, &(x, y))| ClickEvent { x, y, t: 100 * i as u64 })
                .collect(),
            answer: Answer::Choice(0),
            duration_s: 12.5,
            image_w: 40,
            image_h: 30,
            bubble_radius: None,
        }
    }

    fn cfg() -> RasterConfig {
        RasterConfig {
            bubble_radius: 3.0,
            blur_sigma: 2.0,
            ..RasterConfig::default()
        }
    }

    fn scores(p: &str, v: f64) -> LiteracyScores {
        LiteracyScores {
            participant_id: p.into(),
            vlat_raw: 0.0,
            calvi_raw: 0.0,
            sgl_raw: 10.0,
            vlat: v,
            calvi: v,
            sgl: v,
        }
    }

    /// 8 participants p0..p7 with composite scores 0.0..0.7, one chart;
    /// participant i clicks at (4i + 2, 15); odd participants answer wrong.
    fn fixture() -> (Vec<ChartSession>, BTreeMap<String, LiteracyScores>, Split) {
        let mut sessions = Vec::new();
        let mut sc = BTreeMap::new();
        for i in 0..8u32 {
            let p = format!("p{i}");
            let l = log(&p, "V1", &[(4 * i + 2, 15)]);
            let map = rasterize(&l, &cfg()).unwrap();
            sessions.push(ChartSession { log: l, map, correct: i % 2 == 0 });
            sc.insert(p.clone(), scores(&p, i as f64 / 10.0));
        }
        let split = Split::new((0..8).map(|i| format!("p{i}")), std::iter::empty()).unwrap();
        (sessions, sc, split)
    }

    #[test]
    fn names_are_canonical() {
        let names = feature_names();
        assert_eq!(names.len(), 24);
        assert_eq!(names[0], "within.click_count");
        assert_eq!(names[3], "within.coverage");
        assert_eq!(names[4], "between.MI.EXPERT");
        assert_eq!(names[5], "between.KLD.EXPERT");
        assert_eq!(names[23], "between.MSE.WRONG");
    }

    #[test]
    fn quartile_groups() {
        let (sessions, sc, split) = fixture();
        let g = build_group_maps(&sessions, &sc, &split, ExpertRule::Composite).unwrap();
        assert_eq!(g.experts, vec!["p6", "p7"]);
        assert_eq!(g.novices, vec!["p0", "p1"]);
        let chart = g.chart("V1").unwrap();
        assert_eq!(chart.members[Group::Correct as usize], vec!["p0", "p2", "p4", "p6"]);

        // Oracle: aggregate the members' maps directly.
        let expert_maps: Vec<AttentionMap> = sessions[6..].iter().map(|s| s.map.clone()).collect();
        assert_eq!(chart.get(Group::Expert).unwrap(), &aggregate(&expert_maps).unwrap());
    }

    #[test]
    fn too_few_participants() {
        let (sessions, sc, _) = fixture();
        let split = Split::new(["p0".to_string(), "p1".into(), "p2".into()], std::iter::empty()).unwrap();
        assert!(matches!(
            build_group_maps(&sessions, &sc, &split, ExpertRule::Composite),
            Err(Error::QuartileEmpty(3))
        ));
    }

    #[test]
    fn all_correct_leaves_wrong_absent() {
        let (mut sessions, sc, split) = fixture();
        sessions.iter_mut().for_each(|s| s.correct = true);
        let g = build_group_maps(&sessions, &sc, &split, ExpertRule::Composite).unwrap();
        let chart = g.chart("V1").unwrap();
        assert!(chart.get(Group::Wrong).is_none());
        let f = between_group_features(&sessions[0].map, chart).unwrap();
        assert!(f[15..20].iter().all(Option::is_none));
        assert!(f[10..15].iter().all(Option::is_some));
    }

    #[test]
    fn test_participants_never_contribute() {
        let (sessions, sc, _) = fixture();
        let split = Split::new((0..6).map(|i| format!("p{i}")), ["p6".to_string(), "p7".into()]).unwrap();
        let g = build_group_maps(&sessions, &sc, &split, ExpertRule::Composite).unwrap();
        let contributors = g.contributors();
        assert!(!contributors.contains(&"p6".to_string()));
        assert!(!contributors.contains(&"p7".to_string()));
        assert!(split.ensure_training_only(contributors).is_ok());
    }

    #[test]
    fn within_features_delegate_to_metrics() {
        let l = log("a", "V1", &[(20, 15)]);
        let map = rasterize(&l, &cfg()).unwrap();
        let f = within_map_features(&l, &map);
        assert_eq!(f[0], 1.0);
        assert_eq!(f[1], 12.5);
        assert_eq!(f[2], shannon_entropy(&map.normalize(NormMode::Sum1).unwrap()));
        assert_eq!(f[3], saliency_coverage(&map, None));
        let empty = log("a", "V1", &[]);
        let f = within_map_features(&empty, &rasterize(&empty, &cfg()).unwrap());
        assert_eq!(f, [0.0, 12.5, 0.0, 0.0]);
    }

    #[test]
    fn identical_to_expert_map() {
        let (sessions, sc, split) = fixture();
        let g = build_group_maps(&sessions, &sc, &split, ExpertRule::Composite).unwrap();
        let chart = g.chart("V1").unwrap();
        let expert = chart.get(Group::Expert).unwrap().clone();
        let f = between_group_features(&expert, chart).unwrap();
        assert!(f[1].unwrap().abs() < 1e-9);
        assert!((f[2].unwrap() - 1.0).abs() < 1e-12);
        assert!((f[3].unwrap() - 1.0).abs() < 1e-9);
        assert!(f[4].unwrap() < 1e-30);
    }

    #[test]
    fn between_features_match_direct_metric_calls() {
        let (sessions, sc, split) = fixture();
        let g = build_group_maps(&sessions, &sc, &split, ExpertRule::Composite).unwrap();
        let chart = g.chart("V1").unwrap();
        let m = &sessions[3].map;
        let own = m.normalize(NormMode::Sum1).unwrap();
        let f = between_group_features(m, chart).unwrap();
        for (gi, grp) in Group::ALL.iter().enumerate() {
            let gm = chart.get(*grp).unwrap();
            let b = gi * 5;
            assert_eq!(f[b], Some(mutual_information(&own, gm, 32).unwrap()));
            assert_eq!(f[b + 1], Some(kl_divergence(&own, gm, 1e-12).unwrap()));
            assert_eq!(f[b + 2], Some(spearman_rank(&own, gm).unwrap()));
            assert_eq!(f[b + 3], Some(ssim(&own, gm).unwrap()));
            assert_eq!(f[b + 4], Some(mse(&own, gm).unwrap()));
        }
        // Deterministic across calls.
        assert_eq!(f, between_group_features(m, chart).unwrap());
        // Sanity: the features of a novice lean towards the novice map.
        assert!(pearson_cc(&sessions[0].map, chart.get(Group::Novice).unwrap()).unwrap() > 0.0);
    }

    #[test]
    fn feature_matrix_means_and_missing_sessions() {
        let mut table = BTreeMap::new();
        table.insert(("a".to_string(), "X".to_string()), vec![1.0, 2.0]);
        table.insert(("a".to_string(), "Y".to_string()), vec![3.0, 6.0]);
        table.insert(("b".to_string(), "X".to_string()), vec![5.0, 5.0]);
        let p = vec!["a".to_string()];
        let one = build_feature_matrix(&table, &p, &["X".into()]).unwrap();
        assert_eq!(one[0].values, vec![1.0, 2.0]);
        let two = build_feature_matrix(&table, &p, &["X".into(), "Y".into()]).unwrap();
        assert_eq!(two[0].values, vec![2.0, 4.0]);
        let both = vec!["a".to_string(), "b".into()];
        match build_feature_matrix(&table, &both, &["X".into(), "Y".into()]) {
            Err(Error::MissingSessions(m)) => assert_eq!(m, vec![("b".to_string(), "Y".to_string())]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn row_order_only_permutes_rows() {
        let mut table = BTreeMap::new();
        for (p, v) in [("a", 1.0), ("b", 2.0), ("c", 3.0)] {
            table.insert((p.to_string(), "X".to_string()), vec![v; 3]);
        }
        let fwd: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let rev: Vec<String> = fwd.iter().rev().cloned().collect();
        let a = build_feature_matrix(&table, &fwd, &["X".into()]).unwrap();
        let mut b = build_feature_matrix(&table, &rev, &["X".into()]).unwrap();
        b.reverse();
        assert_eq!(a, b);
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![FeatureVector {
            participant_id: "p,1".into(),
            charts: vec![],
            values: (0..24).map(|i| i as f64 / 7.0).collect(),
        }];
        let mut buf = Vec::new();
        write_feature_csv(&rows, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("participant_id,within.click_count,"));
        assert_eq!(read_feature_csv(buf.as_slice()).unwrap(), rows);
    }
}
