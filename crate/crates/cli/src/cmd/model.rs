//! Training, applying and explaining the literacy predictor, and greedy
//! chart selection.

use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use attnlit::features::{build_feature_matrix, feature_names, MinMax};
use attnlit::pipeline::{chart_dataset, level_labels, FeatureTable, Labels};
use attnlit::sal2lit::{
    evaluate as evaluate_model, greedy_select, integrated_gradients, predict as predict_levels, read_model,
    subset_features, train as train_model, write_model, LevelScheme, ModelParams, TrainConfig, N_HEADS,
};
use serde::{Deserialize, Serialize};

use super::{csv_text, Ctx, Study};
use crate::error::{invalid, Result};
use crate::manifest::Manifest;
use crate::plot::accuracy_svg;

pub const HEADS: [&str; N_HEADS] = ["vlat", "calvi", "sgl"];
const MODEL_FILE: &str = "model.s2l";
const META_FILE: &str = "model.json";

/// Everything needed to apply a trained model besides its weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub charts: Vec<String>,
    pub n_levels: usize,
    pub scheme: LevelScheme,
    pub scaler: MinMax,
    pub train: TrainConfig,
    pub train_participants: Vec<String>,
    pub test_participants: Vec<String>,
    pub best_epoch: usize,
    pub epochs_run: usize,
}

struct Prepared {
    study: Study,
    table: FeatureTable,
    labels: Labels,
}

fn prepare(m: &Manifest, n_levels: usize) -> Result<Prepared> {
    let study = Study::load(m)?;
    let sessions = study.sessions(&m.raster()?)?;
    let table = study.features(m, &sessions)?;
    let labels = level_labels(&study.scores, &study.split, n_levels)?;
    Ok(Prepared { study, table, labels })
}

pub fn train(ctx: &Ctx) -> Result<()> {
    let m = &ctx.manifest;
    let (n_levels, cfg) = (m.levels()?, m.train_config()?);
    let Some(run) = ctx.begin("train", ctx.inputs("train")?)? else {
        return Ok(());
    };
    let p = prepare(m, n_levels)?;
    let cds = chart_dataset(&p.table.values, &p.labels, &p.study.charts)?;
    let all: Vec<usize> = (0..cds.charts.len()).collect();
    let (rows, _, scaler) = subset_features(&cds, &all)?;
    let (params, history) = train_model(&rows, &cds.train_labels, n_levels, &cfg)?;

    let mut bytes = Vec::new();
    write_model(&params, &mut bytes)?;
    run.write(MODEL_FILE, bytes)?;
    run.write_json(
        META_FILE,
        &ModelMeta {
            charts: cds.charts.clone(),
            n_levels,
            scheme: p.labels.scheme.clone(),
            scaler,
            train: cfg,
            train_participants: p.labels.train_ids.clone(),
            test_participants: p.labels.test_ids.clone(),
            best_epoch: history.best_epoch,
            epochs_run: history.epochs.len(),
        },
    )?;
    run.write("history.csv", history.to_csv())?;
    run.commit()?;
    Ok(())
}

fn model_dir(m: &Manifest, dir: Option<&Path>) -> PathBuf {
    dir.map(Path::to_path_buf).unwrap_or_else(|| m.output().join("train"))
}

fn load_model(dir: &Path) -> Result<(ModelParams, ModelMeta)> {
    let params = read_model(BufReader::new(File::open(dir.join(MODEL_FILE))?))?;
    let meta: ModelMeta = serde_json::from_str(&fs::read_to_string(dir.join(META_FILE))?)?;
    if params.input_dim() != feature_names().len() || params.n_levels() != meta.n_levels {
        return Err(invalid(format!("{} does not match {}", MODEL_FILE, META_FILE)));
    }
    Ok((params, meta))
}

/// Applying a model needs the features and labels it was trained with; a
/// changed split would silently shift the imputation and level edges.
fn check_compatible(meta: &ModelMeta, labels: &Labels) -> Result<()> {
    if meta.train_participants != labels.train_ids || meta.scheme != labels.scheme {
        return Err(invalid("the model was trained on a different split or level scheme; rerun train"));
    }
    Ok(())
}

fn model_inputs(ctx: &Ctx, sub: &str, dir: &Path) -> Result<crate::output::Inputs> {
    let mut inputs = ctx.inputs(sub)?;
    inputs.path("model", &dir.join(MODEL_FILE)).path("model metadata", &dir.join(META_FILE));
    Ok(inputs)
}

/// Scaled feature rows of `ids` over the model's charts.
fn scaled_rows(table: &FeatureTable, meta: &ModelMeta, ids: &[String]) -> Result<Vec<Vec<f64>>> {
    let matrix = build_feature_matrix(&table.values, ids, &meta.charts)?;
    let raw: Vec<Vec<f64>> = matrix.into_iter().map(|r| r.values).collect();
    Ok(meta.scaler.transform_clamped(&raw))
}

fn target_ids(labels: &Labels, all: bool) -> Vec<String> {
    if all {
        labels.train_ids.iter().chain(&labels.test_ids).cloned().collect()
    } else {
        labels.test_ids.clone()
    }
}

pub fn predict(ctx: &Ctx, dir: Option<&Path>, all: bool) -> Result<()> {
    let m = &ctx.manifest;
    let dir = model_dir(m, dir);
    let mut inputs = model_inputs(ctx, "predict", &dir)?;
    inputs.value("all", all);
    let Some(run) = ctx.begin("predict", inputs)? else {
        return Ok(());
    };
    let (params, meta) = load_model(&dir)?;
    let p = prepare(m, meta.n_levels)?;
    check_compatible(&meta, &p.labels)?;
    let ids = target_ids(&p.labels, all);
    let rows = scaled_rows(&p.table, &meta, &ids)?;

    let mut header = vec!["participant_id".to_string(), "split".into()];
    header.extend(HEADS.iter().map(|h| format!("{h}_level")));
    for h in HEADS {
        header.extend((0..meta.n_levels).map(|l| format!("{h}_p{l}")));
    }
    let mut out = Vec::with_capacity(ids.len());
    for (id, x) in ids.iter().zip(&rows) {
        let pred = predict_levels(&params, x)?;
        let mut row = vec![id.clone(), p.study.split_of(id).to_string()];
        row.extend(pred.levels.iter().map(|l| l.to_string()));
        row.extend(pred.probabilities.iter().flatten().map(|v| v.to_string()));
        out.push(row);
    }
    run.write("predictions.csv", csv_text(&header, out)?)?;
    run.commit()?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct EvaluationReport {
    test_participants: usize,
    charts: Vec<String>,
    accuracy: [f64; N_HEADS],
    macro_average: f64,
    weights: [f64; N_HEADS],
    weighted: f64,
    /// `confusion[test][truth][predicted]`, tests in vlat, calvi, sgl order.
    confusion: Vec<Vec<Vec<usize>>>,
}

pub fn evaluate(ctx: &Ctx, dir: Option<&Path>) -> Result<()> {
    let m = &ctx.manifest;
    let weights = m.weights()?;
    let dir = model_dir(m, dir);
    let Some(run) = ctx.begin("evaluate", model_inputs(ctx, "evaluate", &dir)?)? else {
        return Ok(());
    };
    let (params, meta) = load_model(&dir)?;
    let p = prepare(m, meta.n_levels)?;
    check_compatible(&meta, &p.labels)?;
    let rows = scaled_rows(&p.table, &meta, &p.labels.test_ids)?;
    let ev = evaluate_model(&params, &rows, &p.labels.test)?;
    run.write_json(
        "evaluation.json",
        &EvaluationReport {
            test_participants: rows.len(),
            charts: meta.charts.clone(),
            accuracy: ev.per_head,
            macro_average: ev.macro_average,
            weights,
            weighted: ev.weighted(&weights),
            confusion: ev.confusion.clone(),
        },
    )?;
    let header = ["test", "truth", "predicted", "count"].map(String::from);
    let mut rows = Vec::new();
    for (h, name) in HEADS.iter().enumerate() {
        for (t, line) in ev.confusion[h].iter().enumerate() {
            for (q, n) in line.iter().enumerate() {
                rows.push(vec![name.to_string(), t.to_string(), q.to_string(), n.to_string()]);
            }
        }
    }
    run.write("confusion.csv", csv_text(&header, rows)?)?;
    run.commit()?;
    Ok(())
}

pub fn select_charts(ctx: &Ctx) -> Result<()> {
    let m = &ctx.manifest;
    let (n_levels, cfg, weights, max_k) = (m.levels()?, m.train_config()?, m.weights()?, m.max_k()?);
    let Some(run) = ctx.begin("select-charts", ctx.inputs("select-charts")?)? else {
        return Ok(());
    };
    let p = prepare(m, n_levels)?;
    if max_k > p.study.charts.len() {
        return Err(invalid(format!(
            "max_k = {max_k} but only {} charts are available",
            p.study.charts.len()
        )));
    }
    let cds = chart_dataset(&p.table.values, &p.labels, &p.study.charts)?;
    let result = greedy_select(&cds, max_k, weights, &cfg)?;
    run.write("selection.csv", result.to_csv())?;
    run.write_json("selection.json", &result)?;
    let charts = result.charts();
    run.write("charts.txt", charts.iter().map(|c| format!("{c}\n")).collect::<String>())?;
    let labels: Vec<String> = charts.iter().map(|c| c.to_string()).collect();
    let curve: Vec<f64> = result.steps.iter().map(|s| s.accuracy).collect();
    run.write("accuracy_curve.svg", accuracy_svg(&labels, &curve))?;
    run.commit()?;
    Ok(())
}

/// Integrated Gradients of each participant's predicted level per test.
pub fn explain(ctx: &Ctx, dir: Option<&Path>, all: bool) -> Result<()> {
    let m = &ctx.manifest;
    let steps = m.ig_steps()?;
    let dir = model_dir(m, dir);
    let mut inputs = model_inputs(ctx, "explain", &dir)?;
    inputs.value("all", all);
    let Some(run) = ctx.begin("explain", inputs)? else {
        return Ok(());
    };
    let (params, meta) = load_model(&dir)?;
    let p = prepare(m, meta.n_levels)?;
    check_compatible(&meta, &p.labels)?;
    let ids = target_ids(&p.labels, all);
    let rows = scaled_rows(&p.table, &meta, &ids)?;
    let names = feature_names();

    let mut header = vec!["participant_id".to_string(), "test".into(), "level".into()];
    header.extend(names.iter().cloned());
    let mut out = Vec::new();
    let mut mean_abs = vec![[0.0f64; N_HEADS]; names.len()];
    for (id, x) in ids.iter().zip(&rows) {
        let pred = predict_levels(&params, x)?;
        for (h, test) in HEADS.iter().enumerate() {
            let attr = integrated_gradients(&params, x, h, pred.levels[h], steps)?;
            for (acc, a) in mean_abs.iter_mut().zip(&attr) {
                acc[h] += a.abs() / ids.len() as f64;
            }
            let mut row = vec![id.clone(), test.to_string(), pred.levels[h].to_string()];
            row.extend(attr.iter().map(|a| a.to_string()));
            out.push(row);
        }
    }
    run.write("attributions.csv", csv_text(&header, out)?)?;
    let mut header = vec!["feature".to_string()];
    header.extend(HEADS.iter().map(|h| format!("mean_abs_{h}")));
    let summary = names.iter().zip(&mean_abs).map(|(n, v)| {
        let mut row = vec![n.clone()];
        row.extend(v.iter().map(|x| x.to_string()));
        row
    });
    run.write("summary.csv", csv_text(&header, summary)?)?;
    run.commit()?;
    Ok(())
}
