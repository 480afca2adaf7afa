//! Forward greedy selection of the chart subset whose averaged features
//! best predict literacy levels.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::network::N_HEADS;
use super::train::{train, TrainConfig};
use super::{evaluate, Evaluation};
use crate::error::{Error, Result};
use crate::features::MinMax;

/// Per-chart raw (imputed, unnormalized) feature rows for a fixed train /
/// test split of participants.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartDataset {
    pub charts: Vec<String>,
    /// `train[chart][participant]`.
    pub train: Vec<Vec<Vec<f64>>>,
    /// `test[chart][participant]`.
    pub test: Vec<Vec<Vec<f64>>>,
    pub train_labels: Vec<[usize; N_HEADS]>,
    pub test_labels: Vec<[usize; N_HEADS]>,
    pub n_levels: usize,
}

impl ChartDataset {
    fn validate(&self) -> Result<()> {
        let n = self.charts.len();
        if n == 0 {
            return Err(Error::Empty("chart dataset"));
        }
        if self.train.len() != n || self.test.len() != n {
            return Err(Error::InvalidParameter("per-chart rows do not match the chart list".into()));
        }
        for c in 0..n {
            if self.train[c].len() != self.train_labels.len() || self.test[c].len() != self.test_labels.len() {
                return Err(Error::InvalidParameter(format!(
                    "chart {} has rows for a different participant count",
                    self.charts[c]
                )));
            }
        }
        Ok(())
    }
}

/// Scaled training rows, scaled test rows and the fitted scaler.
pub type ScaledRows = (Vec<Vec<f64>>, Vec<Vec<f64>>, MinMax);

/// Element-wise mean over the chart subset, min-max scaled with
/// parameters fitted on the training rows.
pub fn subset_features(ds: &ChartDataset, subset: &[usize]) -> Result<ScaledRows> {
    if subset.is_empty() {
        return Err(Error::Empty("chart subset"));
    }
    let mean_rows = |rows: &Vec<Vec<Vec<f64>>>, n: usize| -> Vec<Vec<f64>> {
        (0..n)
            .map(|p| {
                let width = rows[subset[0]][p].len();
                let mut acc = vec![0.0; width];
                for &c in subset {
                    for (a, v) in acc.iter_mut().zip(&rows[c][p]) {
                        *a += v;
                    }
                }
                acc.iter().map(|a| a / subset.len() as f64).collect()
            })
            .collect()
    };
    let train_raw = mean_rows(&ds.train, ds.train_labels.len());
    let test_raw = mean_rows(&ds.test, ds.test_labels.len());
    let scaler = MinMax::fit(&train_raw)?;
    let train_rows = scaler.transform(&train_raw);
    let test_rows = scaler.transform_clamped(&test_raw);
    Ok((train_rows, test_rows, scaler))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyStep {
    pub chart: String,
    /// Weighted test accuracy of the subset ending with this chart.
    pub accuracy: f64,
    pub per_head: [f64; N_HEADS],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyResult {
    pub steps: Vec<GreedyStep>,
}

impl GreedyResult {
    pub fn charts(&self) -> Vec<&str> {
        self.steps.iter().map(|s| s.chart.as_str()).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,chart,weighted_accuracy,acc_vlat,acc_calvi,acc_sgl\n");
        for (k, s) in self.steps.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                k + 1,
                s.chart,
                s.accuracy,
                s.per_head[0],
                s.per_head[1],
                s.per_head[2]
            ));
        }
        out
    }
}

fn score_subset(ds: &ChartDataset, subset: &[usize], cfg: &TrainConfig) -> Result<Evaluation> {
    let (train_rows, test_rows, _) = subset_features(ds, subset)?;
    let (params, _) = train(&train_rows, &ds.train_labels, ds.n_levels, cfg)?;
    evaluate(&params, &test_rows, &ds.test_labels)
}

/// Adds, one at a time, the chart whose inclusion gives the highest
/// weighted test accuracy, retraining from scratch (same seed) for every
/// candidate. Ties go to the chart code that sorts first.
pub fn greedy_select(ds: &ChartDataset, max_k: usize, weights: [f64; N_HEADS], cfg: &TrainConfig) -> Result<GreedyResult> {
    ds.validate()?;
    if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) || weights.iter().all(|w| *w == 0.0) {
        return Err(Error::InvalidParameter("weights must be non-negative and not all zero".into()));
    }
    if max_k == 0 || max_k > ds.charts.len() {
        return Err(Error::InvalidParameter(format!(
            "max_k {max_k} must be in 1..={}",
            ds.charts.len()
        )));
    }
    let mut by_code: Vec<usize> = (0..ds.charts.len()).collect();
    by_code.sort_by(|&a, &b| ds.charts[a].cmp(&ds.charts[b]));

    let mut chosen: Vec<usize> = Vec::new();
    let mut steps = Vec::new();
    for _ in 0..max_k {
        let candidates: Vec<usize> = by_code.iter().copied().filter(|c| !chosen.contains(c)).collect();
        let scored: Vec<Result<Evaluation>> = candidates
            .par_iter()
            .map(|&c| {
                let mut subset = chosen.clone();
                subset.push(c);
                score_subset(ds, &subset, cfg)
            })
            .collect();
        let mut best: Option<(usize, Evaluation, f64)> = None;
        for (&c, ev) in candidates.iter().zip(scored) {
            let ev = ev?;
            let acc = ev.weighted(&weights);
            if best.as_ref().is_none_or(|b| acc > b.2) {
                best = Some((c, ev, acc));
            }
        }
        let (c, ev, acc) = best.expect("at least one candidate");
        log::info!("greedy step {}: {} (accuracy {acc:.4})", chosen.len() + 1, ds.charts[c]);
        chosen.push(c);
        steps.push(GreedyStep {
            chart: ds.charts[c].clone(),
            accuracy: acc,
            per_head: ev.per_head,
        });
    }
    Ok(GreedyResult { steps })
}
