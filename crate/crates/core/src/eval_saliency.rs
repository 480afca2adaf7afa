//! Scoring literacy-conditioned saliency predictions against each
//! participant's own attention map, and the literacy-binned baseline
//! predictor used when no external model is supplied.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attention_map::{aggregate, AttentionMap, NormMode};
use crate::error::{Error, Result};
use crate::features::csv_err;
use crate::metrics::{auc_judd, kl_divergence, nss, pearson_cc, sim_histogram, FixationSet, DEFAULT_KL_EPSILON};
use crate::sal2lit::quantile_bin;
use crate::split::Split;
use crate::stats::{bonferroni, paired_t_test, TTest};

pub const METRICS: [&str; 5] = ["PCC", "NSS", "AUC", "SIM", "KL"];
pub const DEFAULT_BASELINE_BINS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub participant_id: String,
    pub chart_id: String,
    pub literacy_score: f64,
    pub predicted: AttentionMap,
    pub truth: AttentionMap,
    pub fixations: FixationSet,
}

impl EvalRecord {
    pub fn key(&self) -> (String, String) {
        (self.participant_id.clone(), self.chart_id.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricScores {
    pub pcc: f64,
    pub nss: f64,
    pub auc: f64,
    pub sim: f64,
    pub kl: f64,
}

impl MetricScores {
    pub fn as_array(&self) -> [f64; 5] {
        [self.pcc, self.nss, self.auc, self.sim, self.kl]
    }
}

/// How to treat a prediction with no variation (e.g. a uniform map), for
/// which correlation and z-scores are undefined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DegeneratePolicy {
    /// Propagate the metric error.
    #[default]
    Strict,
    /// Score PCC and NSS of a constant prediction as 0, the value of a
    /// prediction carrying no information.
    Lenient,
}

/// PCC, NSS, AUC-Judd, SIM and KL(truth‖prediction) on one record.
pub fn evaluate_record(rec: &EvalRecord, policy: DegeneratePolicy) -> Result<MetricScores> {
    rec.predicted.ensure_same_dims(&rec.truth)?;
    let pred = rec.predicted.normalize(NormMode::Sum1)?;
    let truth = rec.truth.normalize(NormMode::Sum1)?;
    let constant_prediction = {
        let v = pred.values();
        v.iter().all(|x| *x == v[0])
    };
    let lenient = policy == DegeneratePolicy::Lenient && constant_prediction;
    let pcc = match pearson_cc(&pred, &truth) {
        Err(Error::UndefinedCorrelation) if lenient => 0.0,
        r => r?,
    };
    let nss_value = match nss(&pred, &rec.fixations) {
        Err(Error::Undefined(_)) if lenient => 0.0,
        r => r?,
    };
    Ok(MetricScores {
        pcc,
        nss: nss_value,
        auc: auc_judd(&pred, &rec.fixations)?,
        sim: sim_histogram(&pred, &truth)?,
        kl: kl_divergence(&pred, &truth, DEFAULT_KL_EPSILON)?,
    })
}

pub type Scored = BTreeMap<(String, String), MetricScores>;

pub fn evaluate_all(records: &[EvalRecord], policy: DegeneratePolicy) -> Result<Scored> {
    records
        .par_iter()
        .map(|r| Ok((r.key(), evaluate_record(r, policy)?)))
        .collect()
}

/// Training example for the baseline: a participant's map on a chart.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingMap {
    pub participant_id: String,
    pub chart_id: String,
    pub literacy_score: f64,
    pub map: AttentionMap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChartBins {
    /// Mean score of each bin's members, ascending.
    pub centers: Vec<f64>,
    /// SUM1 mean map of each bin.
    pub maps: Vec<AttentionMap>,
}

/// Per-chart literacy-binned mean maps, interpolated by score.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineModel {
    pub charts: BTreeMap<String, ChartBins>,
}

impl BaselineModel {
    /// Fits equal-count score bins per chart. Every contributing
    /// participant must be on the training side of `split`.
    pub fn fit(maps: &[TrainingMap], split: &Split, n_bins: usize) -> Result<Self> {
        split.check_disjoint()?;
        split.ensure_training_only(maps.iter().map(|m| &m.participant_id))?;
        let mut by_chart: BTreeMap<&str, Vec<&TrainingMap>> = BTreeMap::new();
        for m in maps.iter().filter(|m| m.map.total() > 0.0) {
            by_chart.entry(m.chart_id.as_str()).or_default().push(m);
        }
        let mut charts = BTreeMap::new();
        for (chart, mut members) in by_chart {
            members.sort_by(|a, b| a.participant_id.cmp(&b.participant_id));
            let scores: Vec<f64> = members.iter().map(|m| m.literacy_score).collect();
            let (_, labels) = quantile_bin(&scores, n_bins)?;
            let mut centers = Vec::with_capacity(n_bins);
            let mut bin_maps = Vec::with_capacity(n_bins);
            for b in 0..n_bins {
                let idx: Vec<usize> = (0..members.len()).filter(|&i| labels[i] == b).collect();
                centers.push(idx.iter().map(|&i| scores[i]).sum::<f64>() / idx.len() as f64);
                let group: Vec<AttentionMap> = idx.iter().map(|&i| members[i].map.clone()).collect();
                bin_maps.push(aggregate(&group)?);
            }
            charts.insert(chart.to_string(), ChartBins { centers, maps: bin_maps });
        }
        Ok(BaselineModel { charts })
    }

    /// Linear interpolation between the two bin maps whose centers bracket
    /// `score`, clamped to the extreme bins, re-normalized to SUM1.
    pub fn predict(&self, chart_id: &str, score: f64) -> Result<AttentionMap> {
        let bins = self
            .charts
            .get(chart_id)
            .ok_or_else(|| Error::InvalidParameter(format!("baseline has no chart {chart_id}")))?;
        let c = &bins.centers;
        let last = c.len() - 1;
        if score <= c[0] {
            return Ok(bins.maps[0].clone());
        }
        if score >= c[last] {
            return Ok(bins.maps[last].clone());
        }
        let k = c.iter().rposition(|x| *x <= score).unwrap_or(0).min(last - 1);
        let span = c[k + 1] - c[k];
        let t = if span > 0.0 { (score - c[k]) / span } else { 0.0 };
        if t == 0.0 {
            return Ok(bins.maps[k].clone());
        }
        let (lo, hi) = (&bins.maps[k], &bins.maps[k + 1]);
        let values: Vec<f64> = lo
            .values()
            .iter()
            .zip(hi.values())
            .map(|(a, b)| (1.0 - t) * a + t * b)
            .collect();
        AttentionMap::from_values(lo.width(), lo.height(), values)?.normalize(NormMode::Sum1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricComparison {
    pub metric: String,
    pub mean_a: f64,
    pub mean_b: f64,
    pub test: Option<TTest>,
    /// Bonferroni-adjusted over the five metrics.
    pub p_adjusted: Option<f64>,
    /// Why the test could not be run, when it could not.
    pub error: Option<String>,
}

/// Per-metric paired t-tests of A against B over identical record keys.
pub fn compare_models(a: &Scored, b: &Scored) -> Result<Vec<MetricComparison>> {
    if a.len() != b.len() || a.keys().ne(b.keys()) {
        return Err(Error::KeyMismatch);
    }
    let va: Vec<[f64; 5]> = a.values().map(MetricScores::as_array).collect();
    let vb: Vec<[f64; 5]> = b.values().map(MetricScores::as_array).collect();
    let n = va.len() as f64;
    Ok(METRICS
        .iter()
        .enumerate()
        .map(|(m, name)| {
            let xa: Vec<f64> = va.iter().map(|r| r[m]).collect();
            let xb: Vec<f64> = vb.iter().map(|r| r[m]).collect();
            let (test, p_adjusted, error) = match paired_t_test(&xa, &xb) {
                Ok(t) => (Some(t), Some(bonferroni(&[t.p_two_tailed], METRICS.len())[0]), None),
                Err(e) => (None, None, Some(e.to_string())),
            };
            MetricComparison {
                metric: name.to_string(),
                mean_a: xa.iter().sum::<f64>() / n,
                mean_b: xb.iter().sum::<f64>() / n,
                test,
                p_adjusted,
                error,
            }
        })
        .collect())
}

/// Mean of each metric, in [`METRICS`] order.
pub fn summarize(scored: &Scored) -> [f64; 5] {
    let n = scored.len() as f64;
    let mut acc = [0.0; 5];
    for s in scored.values() {
        for (a, v) in acc.iter_mut().zip(s.as_array()) {
            *a += v / n;
        }
    }
    acc
}

/// One row per model: `model,PCC,NSS,AUC,SIM,KL` (means).
pub fn write_summary_csv<W: std::io::Write>(models: &[(&str, &Scored)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["model", "PCC", "NSS", "AUC", "SIM", "KL"]).map_err(csv_err)?;
    for (name, s) in models {
        let mut rec = vec![name.to_string()];
        rec.extend(summarize(s).iter().map(f64::to_string));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::format("summary CSV", e.to_string()))
}

pub fn write_significance_csv<W: std::io::Write>(rows: &[MetricComparison], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["metric", "mean_a", "mean_b", "t", "df", "p", "p_bonferroni", "error"])
        .map_err(csv_err)?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for r in rows {
        w.write_record([
            r.metric.clone(),
            r.mean_a.to_string(),
            r.mean_b.to_string(),
            opt(r.test.map(|t| t.t)),
            opt(r.test.map(|t| t.df)),
            opt(r.test.map(|t| t.p_two_tailed)),
            opt(r.p_adjusted),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::format("significance CSV", e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_map(rng: &mut ChaCha8Rng, w: usize, h: usize) -> AttentionMap {
        AttentionMap::from_values(w, h, (0..w * h).map(|_| rng.random::<f64>()).collect()).unwrap()
    }

    fn record(pred: AttentionMap, truth: AttentionMap) -> EvalRecord {
        EvalRecord {
            participant_id: "p".into(),
            chart_id: "c".into(),
            literacy_score: 0.5,
            predicted: pred,
            truth,
            fixations: FixationSet::new(vec![(1, 1), (3, 2)]),
        }
    }

    #[test]
    fn perfect_prediction() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_map(&mut rng, 6, 5);
        let s = evaluate_record(&record(m.clone(), m), DegeneratePolicy::Strict).unwrap();
        assert!((s.pcc - 1.0).abs() < 1e-12);
        assert!((s.sim - 1.0).abs() < 1e-12);
        assert!(s.kl.abs() < 1e-9);
    }

    #[test]
    fn uniform_prediction() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let truth = random_map(&mut rng, 6, 5);
        let rec = record(AttentionMap::uniform(6, 5), truth);
        assert!(evaluate_record(&rec, DegeneratePolicy::Strict).is_err());
        let s = evaluate_record(&rec, DegeneratePolicy::Lenient).unwrap();
        assert_eq!(s.auc, 0.5);
        assert_eq!((s.pcc, s.nss), (0.0, 0.0));
    }

    #[test]
    fn composition_of_metric_calls() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rec = record(random_map(&mut rng, 6, 5), random_map(&mut rng, 6, 5));
        let s = evaluate_record(&rec, DegeneratePolicy::Strict).unwrap();
        let p = rec.predicted.normalize(NormMode::Sum1).unwrap();
        let t = rec.truth.normalize(NormMode::Sum1).unwrap();
        assert_eq!(s.pcc, pearson_cc(&p, &t).unwrap());
        assert_eq!(s.nss, nss(&p, &rec.fixations).unwrap());
        assert_eq!(s.auc, auc_judd(&p, &rec.fixations).unwrap());
        assert_eq!(s.sim, sim_histogram(&p, &t).unwrap());
        assert_eq!(s.kl, kl_divergence(&p, &t, 1e-12).unwrap());
    }

    fn delta(w: usize, h: usize, i: usize) -> AttentionMap {
        let mut v = vec![0.0; w * h];
        v[i] = 1.0;
        AttentionMap::from_values(w, h, v).unwrap()
    }

    /// Ten participants with scores 0.05..0.95; those below 0.5 look at
    /// pixel 0, the rest at pixel 3.
    fn baseline_fixture() -> (Vec<TrainingMap>, Split) {
        let maps: Vec<TrainingMap> = (0..10)
            .map(|i| TrainingMap {
                participant_id: format!("p{i}"),
                chart_id: "c".into(),
                literacy_score: 0.05 + 0.1 * i as f64,
                map: delta(2, 2, if i < 5 { 0 } else { 3 }),
            })
            .collect();
        let split = Split::new((0..10).map(|i| format!("p{i}")), ["q".to_string()]).unwrap();
        (maps, split)
    }

    #[test]
    fn baseline_interpolation() {
        let (maps, split) = baseline_fixture();
        let model = BaselineModel::fit(&maps, &split, 5).unwrap();
        let bins = &model.charts["c"];
        assert_eq!(bins.centers.len(), 5);
        assert!((bins.centers[0] - 0.1).abs() < 1e-12);
        // At a center: that bin's map.
        assert_eq!(model.predict("c", bins.centers[1]).unwrap(), bins.maps[1]);
        // Below the first center: clamped.
        assert_eq!(model.predict("c", 0.0).unwrap(), bins.maps[0]);
        assert_eq!(model.predict("c", 1.0).unwrap(), bins.maps[4]);
        // Midway between centers 2 and 3 (0.5 and 0.7): the elementwise mean.
        let mid = model.predict("c", 0.6).unwrap();
        for i in 0..4 {
            let expect = 0.5 * (bins.maps[2].values()[i] + bins.maps[3].values()[i]);
            assert!((mid.values()[i] - expect).abs() < 1e-9);
        }
        for s in 0..=20 {
            let m = model.predict("c", s as f64 / 20.0).unwrap();
            assert!((m.total() - 1.0).abs() < 1e-9);
            assert!(m.values().iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn baseline_refuses_test_participants() {
        let (maps, _) = baseline_fixture();
        let split = Split::new((0..9).map(|i| format!("p{i}")), ["p9".to_string()]).unwrap();
        assert!(matches!(BaselineModel::fit(&maps, &split, 5), Err(Error::Leakage(p)) if p == "p9"));
    }

    fn scored(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> Scored {
        (0..n)
            .map(|i| {
                let base = rng.random::<f64>();
                (
                    (format!("p{i}"), "c".to_string()),
                    MetricScores {
                        pcc: base + shift,
                        nss: base + shift,
                        auc: base + shift,
                        sim: base + shift,
                        kl: base - shift,
                    },
                )
            })
            .collect()
    }

    #[test]
    fn comparison_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = scored(&mut rng, 40, 0.0);
        let same = compare_models(&a, &a).unwrap();
        assert!(same.iter().all(|r| r.test.is_none() && r.error.is_some()));

        let mut better = a.clone();
        for (i, v) in better.values_mut().enumerate() {
            let bump = 0.1 + 0.01 * (i % 3) as f64;
            v.pcc += bump;
            v.sim += bump;
            v.kl -= bump;
        }
        let rows = compare_models(&better, &a).unwrap();
        assert!(rows[0].test.unwrap().t > 0.0);
        assert!(rows[4].test.unwrap().t < 0.0);
        assert!(rows[0].p_adjusted.unwrap() < 0.05);

        let other = scored(&mut rng, 39, 0.0);
        assert!(matches!(compare_models(&a, &other), Err(Error::KeyMismatch)));
    }
}
