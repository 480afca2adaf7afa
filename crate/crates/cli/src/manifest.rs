//! The pipeline manifest: a plain `key = value` text file. Blank lines and
//! lines starting with `#` are ignored; relative paths resolve against the
//! manifest's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use attnlit::attention_map::{Accumulation, RasterConfig};
use attnlit::dataset::sha256_hex;
use attnlit::features::ExpertRule;
use attnlit::sal2lit::{TrainConfig, DEFAULT_HIDDEN, N_HEADS};
use attnlit::split::Split;

use crate::error::{invalid, Result};

/// Every key the manifest understands, with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("dataset", "exported dataset directory (manifest.json + participant files)"),
    ("study", "study config JSON; default: <dataset>/study.json"),
    ("output", "output root; default: out"),
    ("seed", "seed for the split, training and selection; default 0"),
    ("train", "comma-separated training participants (requires test)"),
    ("test", "comma-separated test participants (requires train)"),
    ("charts", "comma-separated chart subset; default: every item"),
    ("levels", "literacy levels per test, 2-5; default 2"),
    ("expert_rule", "composite | vlat | calvi | sgl; default composite"),
    ("bubble_radius", "fallback bubble radius in pixels; default 32"),
    ("blur_sigma", "Gaussian blur sigma in pixels; default 19"),
    ("accumulation", "additive | union; default additive"),
    ("hidden", "hidden layer widths; default 512,256,128,64,32"),
    ("learning_rate", "Adam learning rate; default 1e-4"),
    ("batch_size", "mini-batch size; default 256"),
    ("max_epochs", "epoch limit; default 150"),
    ("patience", "early-stopping patience in epochs; default 10"),
    ("val_fraction", "validation share of the training rows; default 0.1"),
    ("oversample", "balance joint labels before training; default true"),
    ("weights", "per-test weights for chart selection; default 1,1,1"),
    ("max_k", "charts to select; default 3"),
    ("ig_steps", "integrated-gradients steps; default 256"),
    ("baseline_bins", "literacy bins of the saliency baseline; default 5"),
    ("saliency_predictions", "directory of external <participant>/<chart>.amap predictions"),
    ("top_fraction", "share of pixels kept when binarizing maps for IoU; default 0.1"),
];

#[derive(Debug, Clone)]
pub struct Manifest {
    base: PathBuf,
    entries: BTreeMap<String, String>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Manifest> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read manifest {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Manifest::parse(&text, base)
    }

    pub fn parse(text: &str, base: PathBuf) -> Result<Manifest> {
        let mut entries = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(invalid(format!("manifest line {}: expected key = value", n + 1)));
            };
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.iter().any(|(k, _)| *k == key) {
                return Err(invalid(format!("manifest line {}: unknown key {key:?}", n + 1)));
            }
            if entries.insert(key.to_string(), value.to_string()).is_some() {
                return Err(invalid(format!("manifest line {}: duplicate key {key:?}", n + 1)));
            }
        }
        let m = Manifest { base, entries };
        m.validate()?;
        Ok(m)
    }

    /// Overrides a value, as the `--seed` flag does.
    pub fn set(&mut self, key: &str, value: String) {
        self.entries.insert(key.to_string(), value);
    }

    /// Parses every typed key once so errors surface before any work.
    fn validate(&self) -> Result<()> {
        self.seed()?;
        self.levels()?;
        self.expert_rule()?;
        self.raster()?;
        self.train_config()?;
        self.weights()?;
        self.max_k()?;
        self.ig_steps()?;
        self.baseline_bins()?;
        self.top_fraction()?;
        self.explicit_split()?;
        Ok(())
    }

    /// Effective settings as sorted `key=value` lines.
    pub fn canonical(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn hash(&self) -> String {
        sha256_hex(self.canonical().as_bytes())
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e| invalid(format!("manifest {key} = {v:?}: {e}"))),
        }
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse().map_err(|e| invalid(format!("manifest {key}: {s:?}: {e}"))))
                    .collect()
            })
            .transpose()
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.get(key).map(|v| self.base.join(v))
    }

    pub fn dataset(&self) -> Result<PathBuf> {
        self.path("dataset").ok_or_else(|| invalid("manifest has no dataset"))
    }

    pub fn study(&self) -> Result<PathBuf> {
        match self.path("study") {
            Some(p) => Ok(p),
            None => Ok(self.dataset()?.join("study.json")),
        }
    }

    pub fn output(&self) -> PathBuf {
        self.path("output").unwrap_or_else(|| self.base.join("out"))
    }

    pub fn saliency_predictions(&self) -> Option<PathBuf> {
        self.path("saliency_predictions")
    }

    pub fn seed(&self) -> Result<u64> {
        self.parsed("seed", 0)
    }

    pub fn levels(&self) -> Result<usize> {
        let n = self.parsed("levels", 2usize)?;
        if !(attnlit::sal2lit::MIN_LEVELS..=attnlit::sal2lit::MAX_LEVELS).contains(&n) {
            return Err(invalid(format!("manifest levels = {n}: must be between 2 and 5")));
        }
        Ok(n)
    }

    pub fn charts(&self) -> Result<Option<Vec<String>>> {
        self.list("charts")
    }

    pub fn expert_rule(&self) -> Result<ExpertRule> {
        match self.get("expert_rule").unwrap_or("composite") {
            "composite" => Ok(ExpertRule::Composite),
            "vlat" => Ok(ExpertRule::Vlat),
            "calvi" => Ok(ExpertRule::Calvi),
            "sgl" => Ok(ExpertRule::Sgl),
            other => Err(invalid(format!("manifest expert_rule = {other:?}: expected composite, vlat, calvi or sgl"))),
        }
    }

    pub fn raster(&self) -> Result<RasterConfig> {
        let d = RasterConfig::default();
        let accumulation = match self.get("accumulation").unwrap_or("additive") {
            "additive" => Accumulation::Additive,
            "union" => Accumulation::Union,
            other => return Err(invalid(format!("manifest accumulation = {other:?}: expected additive or union"))),
        };
        let cfg = RasterConfig {
            bubble_radius: self.parsed("bubble_radius", d.bubble_radius)?,
            blur_sigma: self.parsed("blur_sigma", d.blur_sigma)?,
            accumulation,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let d = TrainConfig::default();
        let cfg = TrainConfig {
            learning_rate: self.parsed("learning_rate", d.learning_rate)?,
            batch_size: self.parsed("batch_size", d.batch_size)?,
            max_epochs: self.parsed("max_epochs", d.max_epochs)?,
            patience: self.parsed("patience", d.patience)?,
            val_fraction: self.parsed("val_fraction", d.val_fraction)?,
            seed: self.seed()?,
            hidden: self.list("hidden")?.unwrap_or_else(|| DEFAULT_HIDDEN.to_vec()),
            oversample: self.parsed("oversample", d.oversample)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn weights(&self) -> Result<[f64; N_HEADS]> {
        let Some(w) = self.list::<f64>("weights")? else {
            return Ok([1.0; N_HEADS]);
        };
        let w: [f64; N_HEADS] = w
            .try_into()
            .map_err(|_| invalid(format!("manifest weights: expected {N_HEADS} values")))?;
        if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
            return Err(invalid("manifest weights: must be non-negative with a positive sum"));
        }
        Ok(w)
    }

    pub fn max_k(&self) -> Result<usize> {
        let k = self.parsed("max_k", 3usize)?;
        if k == 0 {
            return Err(invalid("manifest max_k must be positive"));
        }
        Ok(k)
    }

    pub fn ig_steps(&self) -> Result<usize> {
        let s = self.parsed("ig_steps", attnlit::sal2lit::DEFAULT_IG_STEPS)?;
        if s == 0 {
            return Err(invalid("manifest ig_steps must be positive"));
        }
        Ok(s)
    }

    pub fn baseline_bins(&self) -> Result<usize> {
        let b = self.parsed("baseline_bins", attnlit::eval_saliency::DEFAULT_BASELINE_BINS)?;
        if b == 0 {
            return Err(invalid("manifest baseline_bins must be positive"));
        }
        Ok(b)
    }

    pub fn top_fraction(&self) -> Result<f64> {
        let f = self.parsed("top_fraction", 0.1)?;
        if !(f > 0.0 && f <= 1.0) {
            return Err(invalid("manifest top_fraction must be in (0, 1]"));
        }
        Ok(f)
    }

    /// The split given by `train`/`test`, if any.
    pub fn explicit_split(&self) -> Result<Option<Split>> {
        match (self.list::<String>("train")?, self.list::<String>("test")?) {
            (None, None) => Ok(None),
            (Some(train), Some(test)) => Ok(Some(Split::new(train, test)?)),
            _ => Err(invalid("manifest must give both train and test, or neither")),
        }
    }
}
