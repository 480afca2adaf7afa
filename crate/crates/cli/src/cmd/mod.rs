//! Subcommand implementations. Each one declares its inputs up front so
//! missing files are reported together, then writes through a [`Run`].

pub mod data;
pub mod maps;
pub mod model;
pub mod report;

use std::collections::BTreeMap;

use attnlit::attention_map::RasterConfig;
use attnlit::dataset::{ingest_dataset, valid_participant_id, Dataset, StudyConfig};
use attnlit::features::ChartSession;
use attnlit::pipeline::{build_features, chart_sessions, default_split, FeatureTable};
use attnlit::split::Split;
use attnlit::stats::LiteracyScores;

use crate::error::{invalid, CliError, Result};
use crate::manifest::Manifest;
use crate::output::{Inputs, Run};

pub struct Ctx {
    pub manifest: Manifest,
    pub force: bool,
}

impl Ctx {
    /// Inputs shared by every dataset-driven subcommand.
    pub fn inputs(&self, subcommand: &str) -> Result<Inputs> {
        let mut inputs = Inputs::new(subcommand, &self.manifest.canonical());
        inputs
            .path("dataset", &self.manifest.dataset()?)
            .path("study config", &self.manifest.study()?);
        Ok(inputs)
    }

    pub fn begin(&self, name: &str, inputs: Inputs) -> Result<Option<Run>> {
        let input_hash = inputs.finish()?;
        Run::begin(
            &self.manifest.output(),
            name,
            self.manifest.hash(),
            self.manifest.seed()?,
            input_hash,
            self.force,
        )
    }
}

/// An ingested dataset with its scores, split and chart subset.
pub struct Study {
    pub ds: Dataset,
    pub scores: BTreeMap<String, LiteracyScores>,
    pub split: Split,
    pub charts: Vec<String>,
}

impl Study {
    pub fn load(m: &Manifest) -> Result<Study> {
        let config = StudyConfig::load(&m.study()?)?;
        for code in config.codes() {
            if !valid_participant_id(&code) {
                return Err(invalid(format!("item code {code:?} cannot be used as a file name")));
            }
        }
        let ds = ingest_dataset(&m.dataset()?, &config)?;
        let scores = ds.scores()?;
        let split = match m.explicit_split()? {
            Some(split) => {
                let unknown: Vec<&String> = split.train.iter().chain(&split.test).filter(|p| !scores.contains_key(*p)).collect();
                if !unknown.is_empty() {
                    return Err(invalid(format!("split lists participants without scores: {unknown:?}")));
                }
                split
            }
            None => default_split(&scores, m.seed()?).map_err(|e| match CliError::from(e) {
                CliError::Validation(msg) => invalid(format!(
                    "{msg}; for small datasets list train and test participants in the manifest"
                )),
                other => other,
            })?,
        };
        let charts = match m.charts()? {
            None => config.codes(),
            Some(list) => {
                for (i, c) in list.iter().enumerate() {
                    if config.item(c).is_none() {
                        return Err(invalid(format!("manifest charts: unknown item {c:?}")));
                    }
                    if list[..i].contains(c) {
                        return Err(invalid(format!("manifest charts: {c:?} listed twice")));
                    }
                }
                list
            }
        };
        Ok(Study {
            ds,
            scores,
            split,
            charts,
        })
    }

    pub fn sessions(&self, raster: &RasterConfig) -> Result<Vec<ChartSession>> {
        Ok(chart_sessions(&self.ds, raster)?)
    }

    pub fn features(&self, m: &Manifest, sessions: &[ChartSession]) -> Result<FeatureTable> {
        Ok(build_features(sessions, &self.scores, &self.split, m.expert_rule()?)?)
    }

    pub fn split_of(&self, participant: &str) -> &'static str {
        if self.split.train.contains(participant) {
            "train"
        } else if self.split.test.contains(participant) {
            "test"
        } else {
            "none"
        }
    }
}

/// CSV text from rows of already formatted fields.
pub fn csv_text(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv of UTF-8 fields"))
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
