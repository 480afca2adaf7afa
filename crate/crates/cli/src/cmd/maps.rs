//! Attention maps, map-to-map metrics and the feature tables.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use attnlit::attention_map::{read_amap, write_amap, AttentionMap};
use attnlit::features::{build_feature_matrix, feature_names, write_feature_csv, Group};
use attnlit::metrics::{
    kl_divergence, mse, mutual_information, pearson_cc, shannon_entropy, sim_histogram, spearman_rank, ssim,
    DEFAULT_KL_EPSILON, DEFAULT_MI_BINS,
};
use attnlit::attention_map::NormMode;
use rayon::prelude::*;
use serde::Serialize;

use super::{csv_text, fmt_opt, Ctx, Study};
use crate::error::{invalid, CliError, Result};
use crate::plot::{difference_png, heatmap_png};

/// One `maps/<participant>/<chart>.amap` per session, plus `index.csv`.
/// With `png`, also `figures/<participant>/<chart>.png`.
pub fn rasterize(ctx: &Ctx, png: bool) -> Result<()> {
    let m = &ctx.manifest;
    let raster = m.raster()?;
    let mut inputs = ctx.inputs("rasterize")?;
    inputs.value("png", png);
    let Some(run) = ctx.begin("rasterize", inputs)? else {
        return Ok(());
    };
    let study = Study::load(m)?;
    let sessions = study.sessions(&raster)?;
    sessions.par_iter().try_for_each(|s| -> Result<()> {
        let (p, c) = (&s.log.participant_id, &s.log.chart_id);
        let mut bytes = Vec::new();
        write_amap(&s.map, &mut bytes)?;
        run.write(&format!("maps/{p}/{c}.amap"), bytes)?;
        if png {
            heatmap_png(&s.map, &run.path(&format!("figures/{p}/{c}.png"))?)?;
        }
        Ok(())
    })?;
    let header = ["participant_id", "chart_id", "clicks", "width", "height", "total", "entropy"].map(String::from);
    let rows = sessions.iter().map(|s| {
        vec![
            s.log.participant_id.clone(),
            s.log.chart_id.clone(),
            s.log.click_count().to_string(),
            s.map.width().to_string(),
            s.map.height().to_string(),
            s.map.total().to_string(),
            shannon_entropy(&s.map).to_string(),
        ]
    });
    run.write("index.csv", csv_text(&header, rows)?)?;
    run.commit()?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct MapComparison {
    pub width: usize,
    pub height: usize,
    pub pcc: f64,
    pub src: f64,
    pub sim: f64,
    pub kl: f64,
    pub ssim: f64,
    pub mi: f64,
    pub mse: f64,
}

pub fn read_map(path: &Path) -> Result<AttentionMap> {
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::MissingInputs(vec![path.display().to_string()]),
        _ => CliError::Runtime(format!("{}: {e}", path.display())),
    })?;
    read_amap(BufReader::new(file)).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

/// Compares two maps. KL is `KL(b‖a)`: `a` is the candidate, `b` the
/// reference. Maps are SUM1-normalized first except for SSIM and MSE,
/// which use MAX1.
pub fn compare_maps(a: &AttentionMap, b: &AttentionMap) -> Result<MapComparison> {
    a.ensure_same_dims(b)?;
    let (sa, sb) = (a.normalize(NormMode::Sum1)?, b.normalize(NormMode::Sum1)?);
    let (ma, mb) = (a.normalize(NormMode::Max1)?, b.normalize(NormMode::Max1)?);
    Ok(MapComparison {
        width: a.width(),
        height: a.height(),
        pcc: pearson_cc(&sa, &sb)?,
        src: spearman_rank(&sa, &sb)?,
        sim: sim_histogram(&sa, &sb)?,
        kl: kl_divergence(&sa, &sb, DEFAULT_KL_EPSILON)?,
        ssim: ssim(&ma, &mb)?,
        mi: mutual_information(&sa, &sb, DEFAULT_MI_BINS)?,
        mse: mse(&ma, &mb)?,
    })
}

pub fn metrics(a: &Path, b: &Path) -> Result<()> {
    let mut missing = Vec::new();
    for p in [a, b] {
        if !p.is_file() {
            missing.push(p.display().to_string());
        }
    }
    if !missing.is_empty() {
        return Err(CliError::MissingInputs(missing));
    }
    let result = compare_maps(&read_map(a)?, &read_map(b)?)?;
    println!("{}", serde_json::to_string_pretty(&result)?);
    Ok(())
}

/// Raw per-session features, the imputed per-participant matrix over the
/// chart subset, the split, and group heatmaps.
pub fn features(ctx: &Ctx, png: bool) -> Result<()> {
    let m = &ctx.manifest;
    let raster = m.raster()?;
    let mut inputs = ctx.inputs("features")?;
    inputs.value("png", png);
    let Some(run) = ctx.begin("features", inputs)? else {
        return Ok(());
    };
    let study = Study::load(m)?;
    let sessions = study.sessions(&raster)?;
    let table = study.features(m, &sessions)?;

    let mut header = vec!["participant_id".to_string(), "chart_id".into(), "split".into(), "correct".into()];
    header.extend(feature_names());
    let rows = sessions.iter().map(|s| {
        let key = (s.log.participant_id.clone(), s.log.chart_id.clone());
        let mut row = vec![key.0.clone(), key.1.clone(), study.split_of(&key.0).into(), s.correct.to_string()];
        row.extend(table.raw[&key].iter().map(|v| fmt_opt(*v)));
        row
    });
    run.write("session_features.csv", csv_text(&header, rows)?)?;

    let participants: Vec<String> = study.split.train.iter().chain(&study.split.test).cloned().collect();
    let matrix = build_feature_matrix(&table.values, &participants, &study.charts)?;
    let mut bytes = Vec::new();
    write_feature_csv(&matrix, &mut bytes)?;
    run.write("feature_matrix.csv", bytes)?;
    run.write_json("split.json", &study.split)?;
    run.write_json(
        "groups.json",
        &serde_json::json!({ "experts": table.groups.experts, "novices": table.groups.novices }),
    )?;

    if png {
        for (chart, groups) in &table.groups.charts {
            for g in Group::ALL {
                if let Some(map) = groups.get(g) {
                    heatmap_png(map, &run.path(&format!("figures/{chart}_{}.png", g.name().to_lowercase()))?)?;
                }
            }
            if let (Some(e), Some(n)) = (groups.get(Group::Expert), groups.get(Group::Novice)) {
                difference_png(e, n, &run.path(&format!("figures/{chart}_expert_minus_novice.png"))?)?;
            }
        }
    }
    run.commit()?;
    Ok(())
}
