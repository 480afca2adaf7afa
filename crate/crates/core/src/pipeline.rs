//! Glue from an ingested dataset to model-ready tables: attention maps per
//! session, imputed feature rows, level labels and per-chart datasets.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::attention_map::{rasterize, RasterConfig};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::features::{build_group_maps, extract_features, ChartSession, ExpertRule, GroupMaps, Imputer, SessionFeatureTable};
use crate::sal2lit::{ChartDataset, LevelScheme, N_HEADS};
use crate::split::Split;
use crate::stats::LiteracyScores;

/// Number of score bins and held-out participants per bin in the default
/// train/test split.
pub const HOLDOUT_BINS: usize = 5;
pub const HOLDOUT_PER_BIN: usize = 4;

/// Rasterizes every session of the dataset.
pub fn chart_sessions(ds: &Dataset, raster: &RasterConfig) -> Result<Vec<ChartSession>> {
    ds.sessions
        .par_iter()
        .map(|log| {
            Ok(ChartSession {
                map: rasterize(log, raster)?,
                correct: ds.is_correct(log),
                log: log.clone(),
            })
        })
        .collect()
}

/// [`HOLDOUT_BINS`] equal-count bins by composite score, [`HOLDOUT_PER_BIN`]
/// participants held out from each.
pub fn default_split(scores: &BTreeMap<String, LiteracyScores>, seed: u64) -> Result<Split> {
    let ranked: Vec<(String, f64)> = scores.iter().map(|(p, s)| (p.clone(), s.composite())).collect();
    Split::stratified_holdout(&ranked, HOLDOUT_BINS, HOLDOUT_PER_BIN, seed)
}

/// Feature rows for every session, with undefined entries imputed by the
/// training-split mean.
#[derive(Debug, Clone)]
pub struct FeatureTable {
    pub groups: GroupMaps,
    pub raw: SessionFeatureTable,
    pub imputer: Imputer,
    pub values: BTreeMap<(String, String), Vec<f64>>,
}

pub fn build_features(
    sessions: &[ChartSession],
    scores: &BTreeMap<String, LiteracyScores>,
    split: &Split,
    rule: ExpertRule,
) -> Result<FeatureTable> {
    let groups = build_group_maps(sessions, scores, split, rule)?;
    let raw = extract_features(sessions, &groups)?;
    let imputer = Imputer::fit(
        raw.iter()
            .filter(|((p, _), _)| split.train.contains(p))
            .map(|(_, f)| f.as_slice()),
    )?;
    let values = raw.iter().map(|(k, f)| (k.clone(), imputer.apply(f))).collect();
    Ok(FeatureTable {
        groups,
        raw,
        imputer,
        values,
    })
}

/// Level labels for both sides of a split, with bin edges fitted on the
/// training participants only.
#[derive(Debug, Clone, PartialEq)]
pub struct Labels {
    pub scheme: LevelScheme,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub train: Vec<[usize; N_HEADS]>,
    pub test: Vec<[usize; N_HEADS]>,
}

pub fn level_labels(scores: &BTreeMap<String, LiteracyScores>, split: &Split, n_levels: usize) -> Result<Labels> {
    split.check_disjoint()?;
    let lookup = |p: &String| {
        scores
            .get(p)
            .map(LiteracyScores::normalized)
            .ok_or_else(|| Error::InvalidParameter(format!("no scores for participant {p}")))
    };
    let train_ids: Vec<String> = split.train.iter().cloned().collect();
    let test_ids: Vec<String> = split.test.iter().cloned().collect();
    let train_scores = train_ids.iter().map(lookup).collect::<Result<Vec<_>>>()?;
    let (scheme, train) = LevelScheme::fit(&train_scores, n_levels)?;
    let test = test_ids
        .iter()
        .map(|p| Ok(scheme.labels(&lookup(p)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Labels {
        scheme,
        train_ids,
        test_ids,
        train,
        test,
    })
}

/// Arranges imputed feature rows per chart in label order. Every listed
/// participant needs a session on every chart.
pub fn chart_dataset(
    values: &BTreeMap<(String, String), Vec<f64>>,
    labels: &Labels,
    charts: &[String],
) -> Result<ChartDataset> {
    let mut missing = Vec::new();
    let mut rows_for = |ids: &[String]| -> Vec<Vec<Vec<f64>>> {
        charts
            .iter()
            .map(|c| {
                ids.iter()
                    .map(|p| match values.get(&(p.clone(), c.clone())) {
                        Some(v) => v.clone(),
                        None => {
                            missing.push((p.clone(), c.clone()));
                            Vec::new()
                        }
                    })
                    .collect()
            })
            .collect()
    };
    let train = rows_for(&labels.train_ids);
    let test = rows_for(&labels.test_ids);
    if !missing.is_empty() {
        return Err(Error::MissingSessions(missing));
    }
    Ok(ChartDataset {
        charts: charts.to_vec(),
        train,
        test,
        train_labels: labels.train.clone(),
        test_labels: labels.test.clone(),
        n_levels: labels.scheme.n_levels,
    })
}
