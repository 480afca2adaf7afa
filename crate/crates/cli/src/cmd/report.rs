//! Score statistics, group contrasts and the saliency evaluation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use attnlit::analysis::{group_contrasts, write_contrasts_csv};
use attnlit::attention_map::{AttentionMap, Binarize};
use attnlit::eval_saliency::{
    compare_models, evaluate_all, write_significance_csv, write_summary_csv, BaselineModel, DegeneratePolicy,
    EvalRecord, Scored, TrainingMap, METRICS,
};
use attnlit::features::ChartSession;
use attnlit::metrics::{FixationSet, RegionMask};
use attnlit::stats::{mca, polyfit_elbow, skewness, IndicatorMatrix, McaResult, PolyFit, DEFAULT_ELBOW_DELTA};
use serde::Serialize;

use super::maps::read_map;
use super::{csv_text, Ctx, Study};
use crate::error::{CliError, Result};

/// Highest polynomial degree tried for the score relationships.
const MAX_DEGREE: usize = 5;

#[derive(Debug, Serialize)]
struct ScoreStats {
    participants: usize,
    skewness: BTreeMap<&'static str, f64>,
    sgl_on_vlat: PolyFit,
    calvi_on_vlat: PolyFit,
    /// Items in the column order of the correctness indicator matrix.
    mca_items: Vec<String>,
    mca: McaResult,
}

pub fn stats(ctx: &Ctx) -> Result<()> {
    let m = &ctx.manifest;
    let (raster, top) = (m.raster()?, m.top_fraction()?);
    let Some(run) = ctx.begin("stats", ctx.inputs("stats")?)? else {
        return Ok(());
    };
    let study = Study::load(m)?;
    let header = ["participant_id", "vlat_raw", "calvi_raw", "sgl_raw", "vlat", "calvi", "sgl", "composite"]
        .map(String::from);
    let rows = study.scores.values().map(|s| {
        vec![
            s.participant_id.clone(),
            s.vlat_raw.to_string(),
            s.calvi_raw.to_string(),
            s.sgl_raw.to_string(),
            s.vlat.to_string(),
            s.calvi.to_string(),
            s.sgl.to_string(),
            s.composite().to_string(),
        ]
    });
    run.write("scores.csv", csv_text(&header, rows)?)?;

    let column = |f: fn(&attnlit::stats::LiteracyScores) -> f64| -> Vec<f64> { study.scores.values().map(f).collect() };
    let (vlat, calvi, sgl) = (column(|s| s.vlat), column(|s| s.calvi), column(|s| s.sgl));
    let items = study.ds.config.codes();
    let correct: Vec<Vec<bool>> = study
        .scores
        .keys()
        .map(|p| {
            items
                .iter()
                .map(|c| {
                    study
                        .ds
                        .sessions
                        .iter()
                        .find(|s| &s.participant_id == p && &s.chart_id == c)
                        .is_some_and(|s| study.ds.is_correct(s))
                })
                .collect()
        })
        .collect();
    let report = ScoreStats {
        participants: study.scores.len(),
        skewness: BTreeMap::from([("vlat", skewness(&vlat)?), ("calvi", skewness(&calvi)?), ("sgl", skewness(&sgl)?)]),
        sgl_on_vlat: polyfit_elbow(&vlat, &sgl, MAX_DEGREE, DEFAULT_ELBOW_DELTA)?,
        calvi_on_vlat: polyfit_elbow(&vlat, &calvi, MAX_DEGREE, DEFAULT_ELBOW_DELTA)?,
        mca: mca(&IndicatorMatrix::from_binary(&correct)?, DEFAULT_ELBOW_DELTA)?,
        mca_items: items,
    };
    run.write_json("stats.json", &report)?;

    let sessions = study.sessions(&raster)?;
    let regions: BTreeMap<String, Vec<RegionMask>> =
        study.ds.config.items.iter().map(|q| (q.code.clone(), q.region_masks())).collect();
    let contrasts = group_contrasts(&sessions, &study.scores, &regions, Binarize::TopFraction(top))?;
    let mut bytes = Vec::new();
    write_contrasts_csv(&contrasts, &mut bytes)?;
    run.write("contrasts.csv", bytes)?;
    run.write_json("contrasts.json", &contrasts)?;
    run.commit()?;
    Ok(())
}

/// Scores the literacy-binned baseline and a uniform map (and external
/// predictions, when given) against each held-out participant's own map.
pub fn eval_saliency(ctx: &Ctx, predictions: Option<&Path>) -> Result<()> {
    let m = &ctx.manifest;
    let (raster, bins) = (m.raster()?, m.baseline_bins()?);
    let predictions: Option<PathBuf> = predictions.map(Path::to_path_buf).or_else(|| m.saliency_predictions());
    let mut inputs = ctx.inputs("eval-saliency")?;
    if let Some(dir) = &predictions {
        inputs.path("saliency predictions", dir);
    }
    let Some(run) = ctx.begin("eval-saliency", inputs)? else {
        return Ok(());
    };
    let study = Study::load(m)?;
    let sessions = study.sessions(&raster)?;
    let composite = |p: &str| study.scores[p].composite();
    let in_subset = |s: &ChartSession| study.charts.contains(&s.log.chart_id);

    let training: Vec<TrainingMap> = sessions
        .iter()
        .filter(|s| in_subset(s) && study.split.train.contains(&s.log.participant_id) && s.map.total() > 0.0)
        .map(|s| TrainingMap {
            participant_id: s.log.participant_id.clone(),
            chart_id: s.log.chart_id.clone(),
            literacy_score: composite(&s.log.participant_id),
            map: s.map.clone(),
        })
        .collect();
    let baseline_model = BaselineModel::fit(&training, &study.split, bins)?;
    // Sessions without clicks have no fixations to score against.
    let test: Vec<&ChartSession> = sessions
        .iter()
        .filter(|s| in_subset(s) && study.split.test.contains(&s.log.participant_id) && !s.log.clicks.is_empty())
        .collect();
    let record = |s: &ChartSession, predicted: AttentionMap| EvalRecord {
        participant_id: s.log.participant_id.clone(),
        chart_id: s.log.chart_id.clone(),
        literacy_score: composite(&s.log.participant_id),
        predicted,
        truth: s.map.clone(),
        fixations: FixationSet::from_session(&s.log),
    };
    let mut baseline = Vec::with_capacity(test.len());
    let mut uniform = Vec::with_capacity(test.len());
    for s in &test {
        let score = composite(&s.log.participant_id);
        baseline.push(record(s, baseline_model.predict(&s.log.chart_id, score)?));
        uniform.push(record(s, AttentionMap::uniform(s.map.width(), s.map.height())));
    }
    let external = match &predictions {
        None => None,
        Some(dir) => {
            let paths: Vec<PathBuf> = test
                .iter()
                .map(|s| dir.join(&s.log.participant_id).join(format!("{}.amap", s.log.chart_id)))
                .collect();
            let missing: Vec<String> = paths.iter().filter(|p| !p.is_file()).map(|p| p.display().to_string()).collect();
            if !missing.is_empty() {
                return Err(CliError::MissingInputs(missing));
            }
            let records = test
                .iter()
                .zip(&paths)
                .map(|(s, p)| Ok(record(s, read_map(p)?)))
                .collect::<Result<Vec<_>>>()?;
            Some(records)
        }
    };

    let policy = DegeneratePolicy::Lenient;
    let mut models: Vec<(&str, Scored)> = vec![
        ("baseline", evaluate_all(&baseline, policy)?),
        ("uniform", evaluate_all(&uniform, policy)?),
    ];
    if let Some(records) = &external {
        models.push(("external", evaluate_all(records, DegeneratePolicy::Strict)?));
    }
    let refs: Vec<(&str, &Scored)> = models.iter().map(|(n, s)| (*n, s)).collect();
    let mut bytes = Vec::new();
    write_summary_csv(&refs, &mut bytes)?;
    run.write("summary.csv", bytes)?;

    let mut bytes = Vec::new();
    write_significance_csv(&compare_models(&models[0].1, &models[1].1)?, &mut bytes)?;
    run.write("significance_baseline_vs_uniform.csv", bytes)?;
    if models.len() > 2 {
        let mut bytes = Vec::new();
        write_significance_csv(&compare_models(&models[2].1, &models[0].1)?, &mut bytes)?;
        run.write("significance_external_vs_baseline.csv", bytes)?;
    }

    let mut header = vec!["model".to_string(), "participant_id".into(), "chart_id".into()];
    header.extend(METRICS.iter().map(|m| m.to_string()));
    let rows = models.iter().flat_map(|(name, scored)| {
        scored.iter().map(move |((p, c), s)| {
            let mut row = vec![name.to_string(), p.clone(), c.clone()];
            row.extend(s.as_array().iter().map(f64::to_string));
            row
        })
    });
    run.write("records.csv", csv_text(&header, rows)?)?;
    run.commit()?;
    Ok(())
}
