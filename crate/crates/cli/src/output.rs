//! Output staging, provenance stamps and the up-to-date check.
//!
//! A subcommand writes into `<output>/.<name>.staging/`. On success the
//! staging directory gets a `provenance.json` and replaces `<output>/<name>/`
//! in one rename. On failure it is removed, so no partial outputs survive.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use attnlit::dataset::sha256_hex;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const PROVENANCE_FILE: &str = "provenance.json";
pub const TOOL: &str = "attnlit";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub manifest_hash: String,
    pub seed: u64,
    /// Hash of the settings, arguments and input file contents.
    pub input_hash: String,
    /// SHA-256 of every output file, by path relative to the output directory.
    pub outputs: BTreeMap<String, String>,
}

/// Accumulates everything a subcommand's result depends on.
#[derive(Debug, Default)]
pub struct Inputs {
    parts: Vec<String>,
    missing: Vec<String>,
}

impl Inputs {
    pub fn new(subcommand: &str, manifest_canonical: &str) -> Self {
        Inputs {
            parts: vec![format!("{TOOL} {VERSION} {subcommand}"), manifest_canonical.to_string()],
            missing: Vec::new(),
        }
    }

    pub fn value(&mut self, label: &str, value: impl std::fmt::Display) -> &mut Self {
        self.parts.push(format!("{label}={value}"));
        self
    }

    /// A required file or directory. Missing paths are collected and
    /// reported together by [`Inputs::finish`].
    pub fn path(&mut self, label: &str, path: &Path) -> &mut Self {
        if !path.exists() {
            self.missing.push(format!("{label}: {}", path.display()));
            return self;
        }
        match hash_tree(path) {
            Ok(h) => self.parts.push(format!("{label}:{h}")),
            Err(e) => self.missing.push(format!("{label}: {} ({e})", path.display())),
        }
        self
    }

    pub fn finish(self) -> Result<String> {
        if !self.missing.is_empty() {
            return Err(CliError::MissingInputs(self.missing));
        }
        Ok(sha256_hex(self.parts.join("\n").as_bytes()))
    }
}

/// Content hash of a file, or of every file under a directory in path order.
fn hash_tree(path: &Path) -> std::io::Result<String> {
    if path.is_file() {
        return Ok(sha256_hex(&fs::read(path)?));
    }
    let mut files = Vec::new();
    list_files(path, path, &mut files)?;
    let mut acc = String::new();
    for rel in files {
        acc.push_str(&format!("{rel} {}\n", sha256_hex(&fs::read(path.join(&rel))?)));
    }
    Ok(sha256_hex(acc.as_bytes()))
}

fn list_files(root: &Path, dir: &Path, out: &mut Vec<String>) -> std::io::Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<_>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            list_files(root, &p, out)?;
        } else {
            let rel = p.strip_prefix(root).expect("walked below root");
            out.push(rel.to_string_lossy().replace('\\', "/"));
        }
    }
    Ok(())
}

pub struct Run {
    name: String,
    final_dir: PathBuf,
    staging: PathBuf,
    manifest_hash: String,
    seed: u64,
    input_hash: String,
    committed: bool,
}

impl Run {
    /// Starts a run, or returns `None` when `<output>/<name>` already holds
    /// the result for these exact inputs and `force` is off.
    pub fn begin(
        output: &Path,
        name: &str,
        manifest_hash: String,
        seed: u64,
        input_hash: String,
        force: bool,
    ) -> Result<Option<Run>> {
        let final_dir = output.join(name);
        if !force && up_to_date(&final_dir, &input_hash) {
            log::info!("{name}: outputs in {} are up to date (use --force to rerun)", final_dir.display());
            return Ok(None);
        }
        let staging = output.join(format!(".{name}.staging"));
        if staging.exists() {
            fs::remove_dir_all(&staging)?;
        }
        fs::create_dir_all(&staging)?;
        Ok(Some(Run {
            name: name.to_string(),
            final_dir,
            staging,
            manifest_hash,
            seed,
            input_hash,
            committed: false,
        }))
    }

    /// Staging path for an output file, with parent directories created.
    pub fn path(&self, rel: &str) -> Result<PathBuf> {
        let p = self.staging.join(rel);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent)?;
        }
        Ok(p)
    }

    pub fn write(&self, rel: &str, bytes: impl AsRef<[u8]>) -> Result<()> {
        fs::write(self.path(rel)?, bytes)?;
        Ok(())
    }

    pub fn write_json<T: Serialize>(&self, rel: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(rel, text)
    }

    /// Stamps the outputs and moves them into place.
    pub fn commit(mut self) -> Result<PathBuf> {
        let mut files = Vec::new();
        list_files(&self.staging, &self.staging, &mut files)?;
        let mut outputs = BTreeMap::new();
        for rel in files {
            outputs.insert(rel.clone(), sha256_hex(&fs::read(self.staging.join(&rel))?));
        }
        let stamp = Provenance {
            tool: TOOL.into(),
            version: VERSION.into(),
            subcommand: self.name.clone(),
            manifest_hash: self.manifest_hash.clone(),
            seed: self.seed,
            input_hash: self.input_hash.clone(),
            outputs,
        };
        self.write_json(PROVENANCE_FILE, &stamp)?;
        if self.final_dir.exists() {
            fs::remove_dir_all(&self.final_dir)?;
        }
        fs::rename(&self.staging, &self.final_dir)?;
        self.committed = true;
        log::info!("{}: wrote {}", self.name, self.final_dir.display());
        Ok(self.final_dir.clone())
    }
}

impl Drop for Run {
    fn drop(&mut self) {
        if !self.committed {
            if let Err(e) = fs::remove_dir_all(&self.staging) {
                log::warn!("could not remove {}: {e}", self.staging.display());
            }
        }
    }
}

pub fn read_provenance(dir: &Path) -> Option<Provenance> {
    let text = fs::read_to_string(dir.join(PROVENANCE_FILE)).ok()?;
    serde_json::from_str(&text).ok()
}

fn up_to_date(dir: &Path, input_hash: &str) -> bool {
    let Some(p) = read_provenance(dir) else {
        return false;
    };
    p.input_hash == input_hash
        && p.version == VERSION
        && p.outputs.iter().all(|(rel, hash)| {
            fs::read(dir.join(rel)).is_ok_and(|bytes| &sha256_hex(&bytes) == hash)
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failed_run_leaves_nothing_and_commit_stamps() {
        let root = tempfile::tempdir().unwrap();
        {
            let run = Run::begin(root.path(), "x", "m".into(), 1, "h".into(), false).unwrap().unwrap();
            run.write("a/b.txt", "partial").unwrap();
        }
        assert!(!root.path().join(".x.staging").exists());
        assert!(!root.path().join("x").exists());

        let run = Run::begin(root.path(), "x", "m".into(), 1, "h".into(), false).unwrap().unwrap();
        run.write("a/b.txt", "done").unwrap();
        let dir = run.commit().unwrap();
        let p = read_provenance(&dir).unwrap();
        assert_eq!(p.outputs["a/b.txt"], sha256_hex(b"done"));
        assert_eq!(p.seed, 1);

        assert!(Run::begin(root.path(), "x", "m".into(), 1, "h".into(), false).unwrap().is_none());
        assert!(Run::begin(root.path(), "x", "m".into(), 1, "h".into(), true).unwrap().is_some());
        assert!(Run::begin(root.path(), "x", "m".into(), 1, "other".into(), false).unwrap().is_some());
        fs::write(dir.join("a/b.txt"), "edited").unwrap();
        assert!(Run::begin(root.path(), "x", "m".into(), 1, "h".into(), false).unwrap().is_some());
    }

    #[test]
    fn missing_inputs_listed_together() {
        let root = tempfile::tempdir().unwrap();
        fs::write(root.path().join("present"), "x").unwrap();
        let mut inputs = Inputs::new("t", "");
        inputs
            .path("a", &root.path().join("nope1"))
            .path("b", &root.path().join("present"))
            .path("c", &root.path().join("nope2"));
        match inputs.finish() {
            Err(CliError::MissingInputs(m)) => {
                assert_eq!(m.len(), 2);
                assert!(m[0].starts_with("a: ") && m[1].starts_with("c: "));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn tree_hash_sees_content_and_names() {
        let root = tempfile::tempdir().unwrap();
        fs::create_dir_all(root.path().join("d/e")).unwrap();
        fs::write(root.path().join("d/e/f"), "1").unwrap();
        let h1 = hash_tree(&root.path().join("d")).unwrap();
        fs::write(root.path().join("d/e/f"), "2").unwrap();
        let h2 = hash_tree(&root.path().join("d")).unwrap();
        fs::rename(root.path().join("d/e/f"), root.path().join("d/e/g")).unwrap();
        let h3 = hash_tree(&root.path().join("d")).unwrap();
        assert!(h1 != h2 && h2 != h3);
    }
}
