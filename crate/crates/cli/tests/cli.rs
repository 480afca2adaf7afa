use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use attnlit::attention_map::{write_amap, Accumulation, AttentionMap, RasterConfig};
use attnlit::dataset::{ingest_dataset, StudyConfig};
use attnlit::features::ExpertRule;
use attnlit::pipeline::{build_features, chart_dataset, chart_sessions, default_split, level_labels};
use attnlit::sal2lit::{greedy_select, GreedyResult, TrainConfig};
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_attnlit");

const TRAINING: &str = "hidden = 16,8\nmax_epochs = 25\nbatch_size = 32\nlearning_rate = 0.001\n";

fn sample_dataset() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/sample/dataset")
}

/// A temporary project pointing at the bundled sample dataset.
fn project(extra: &str) -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    let conf = format!(
        "dataset = {}\nseed = 3\nbubble_radius = 5\nblur_sigma = 3\n{TRAINING}{extra}",
        sample_dataset().display()
    );
    fs::write(dir.path().join("attnlit.conf"), conf).unwrap();
    dir
}

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn provenance_outputs(dir: &Path) -> serde_json::Value {
    let text = fs::read_to_string(dir.join("provenance.json")).unwrap();
    serde_json::from_str::<serde_json::Value>(&text).unwrap()["outputs"].clone()
}

#[test]
fn rasterize_is_deterministic_across_thread_counts() {
    let p = project("");
    ok(p.path(), &["rasterize", "--jobs", "1"]);
    let first = provenance_outputs(&p.path().join("out/rasterize"));
    ok(p.path(), &["rasterize", "--jobs", "4", "--force"]);
    let second = provenance_outputs(&p.path().join("out/rasterize"));
    assert_eq!(first, second);
    let maps = first.as_object().unwrap().keys().filter(|k| k.ends_with(".amap")).count();
    // 48 participants x 6 charts.
    assert_eq!(maps, 48 * 6);
}

#[test]
fn training_twice_with_one_seed_gives_identical_models() {
    let a = project("");
    let b = project("");
    ok(a.path(), &["train", "--levels", "2", "--seed", "7"]);
    ok(b.path(), &["train", "--levels", "2", "--seed", "7", "--jobs", "2"]);
    let model = |d: &TempDir| fs::read(d.path().join("out/train/model.s2l")).unwrap();
    assert_eq!(model(&a), model(&b));
    let meta = |d: &TempDir| fs::read_to_string(d.path().join("out/train/model.json")).unwrap();
    assert_eq!(meta(&a), meta(&b));

    ok(a.path(), &["train", "--levels", "2", "--seed", "8", "--force"]);
    assert_ne!(model(&a), model(&b));
}

#[test]
fn chart_selection_matches_the_library() {
    let p = project("");
    ok(p.path(), &["select-charts", "--max-k", "3", "--weights", "1,1,1"]);
    let text = fs::read_to_string(p.path().join("out/select-charts/selection.json")).unwrap();
    let cli: GreedyResult = serde_json::from_str(&text).unwrap();

    let config = StudyConfig::load(&sample_dataset().join("study.json")).unwrap();
    let ds = ingest_dataset(&sample_dataset(), &config).unwrap();
    let raster = RasterConfig {
        bubble_radius: 5.0,
        blur_sigma: 3.0,
        accumulation: Accumulation::Additive,
    };
    let sessions = chart_sessions(&ds, &raster).unwrap();
    let scores = ds.scores().unwrap();
    let split = default_split(&scores, 3).unwrap();
    let table = build_features(&sessions, &scores, &split, ExpertRule::Composite).unwrap();
    let labels = level_labels(&scores, &split, 2).unwrap();
    let cds = chart_dataset(&table.values, &labels, &config.codes()).unwrap();
    let cfg = TrainConfig {
        hidden: vec![16, 8],
        max_epochs: 25,
        batch_size: 32,
        learning_rate: 0.001,
        seed: 3,
        ..TrainConfig::default()
    };
    let lib = greedy_select(&cds, 3, [1.0; 3], &cfg).unwrap();
    assert_eq!(cli, lib);
    let listed = fs::read_to_string(p.path().join("out/select-charts/charts.txt")).unwrap();
    assert_eq!(listed.lines().collect::<Vec<_>>(), lib.charts());
}

#[test]
fn model_pipeline_runs_end_to_end() {
    let p = project("");
    ok(p.path(), &["train"]);
    ok(p.path(), &["predict"]);
    ok(p.path(), &["evaluate"]);
    ok(p.path(), &["explain", "--all"]);
    let eval: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(p.path().join("out/evaluate/evaluation.json")).unwrap()).unwrap();
    assert_eq!(eval["test_participants"], 20);
    let preds = fs::read_to_string(p.path().join("out/predict/predictions.csv")).unwrap();
    assert_eq!(preds.lines().count(), 21);
    let attributions = fs::read_to_string(p.path().join("out/explain/attributions.csv")).unwrap();
    assert_eq!(attributions.lines().count(), 1 + 48 * 3);

    // A model from another split is refused rather than silently misapplied.
    let out = run(p.path(), &["evaluate", "--seed", "4"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn reports_run_on_the_sample() {
    let p = project("");
    ok(p.path(), &["features", "--png"]);
    ok(p.path(), &["stats"]);
    ok(p.path(), &["eval-saliency"]);
    let f = p.path().join("out/features");
    assert!(f.join("figures/V1_expert_minus_novice.png").is_file());
    assert_eq!(fs::read_to_string(f.join("feature_matrix.csv")).unwrap().lines().count(), 49);
    let summary = fs::read_to_string(p.path().join("out/eval-saliency/summary.csv")).unwrap();
    let pcc = |model: &str| -> f64 {
        let line = summary.lines().find(|l| l.starts_with(model)).unwrap();
        line.split(',').nth(1).unwrap().parse().unwrap()
    };
    assert!(pcc("baseline") > pcc("uniform"));
    let stats: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(p.path().join("out/stats/stats.json")).unwrap()).unwrap();
    assert_eq!(stats["participants"], 48);
    assert_eq!(stats["mca_items"].as_array().unwrap().len(), 6);
}

#[test]
fn missing_inputs_are_listed_and_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("attnlit.conf"), "dataset = nowhere\nstudy = nothing.json\n").unwrap();
    let out = run(dir.path(), &["rasterize"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("nowhere") && err.contains("nothing.json"), "{err}");
    assert!(!dir.path().join("out").join("rasterize").exists());

    let out = run(dir.path(), &["-m", "absent.conf", "stats"]);
    assert_eq!(out.status.code(), Some(2));

    fs::write(dir.path().join("bad.conf"), "datset = x\n").unwrap();
    let out = run(dir.path(), &["-m", "bad.conf", "stats"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown key"));

    let p = project("");
    let out = run(p.path(), &["evaluate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("model.s2l"));

    let out = run(p.path(), &["eval-saliency", "--predictions", "missing-dir"]);
    assert_eq!(out.status.code(), Some(2));
}

fn write_map(path: &Path, map: &AttentionMap) {
    let mut bytes = Vec::new();
    write_amap(map, &mut bytes).unwrap();
    fs::write(path, bytes).unwrap();
}

#[test]
fn metrics_prints_json_and_exits_3_on_a_zero_map() {
    let dir = tempfile::tempdir().unwrap();
    let a = AttentionMap::from_values(3, 2, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
    let b = AttentionMap::from_values(3, 2, vec![5.0, 4.0, 3.0, 2.0, 1.0, 0.0]).unwrap();
    write_map(&dir.path().join("a.amap"), &a);
    write_map(&dir.path().join("b.amap"), &b);
    write_map(&dir.path().join("z.amap"), &AttentionMap::zeros(3, 2));

    let out = ok(dir.path(), &["metrics", "a.amap", "b.amap"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["pcc"].as_f64().unwrap() + 1.0).abs() < 1e-12);
    assert!((v["src"].as_f64().unwrap() + 1.0).abs() < 1e-12);
    let out = ok(dir.path(), &["metrics", "a.amap", "a.amap"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["sim"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!(v["kl"].as_f64().unwrap().abs() < 1e-9);

    let out = run(dir.path(), &["metrics", "a.amap", "z.amap"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(dir.path(), &["metrics", "a.amap", "none.amap"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn up_to_date_outputs_short_circuit_until_forced_or_changed() {
    let p = project("");
    ok(p.path(), &["rasterize"]);
    let stamp = p.path().join("out/rasterize/provenance.json");
    let before = fs::metadata(&stamp).unwrap().modified().unwrap();
    std::thread::sleep(std::time::Duration::from_millis(20));
    let out = ok(p.path(), &["-v", "rasterize"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("up to date"));
    assert_eq!(fs::metadata(&stamp).unwrap().modified().unwrap(), before);

    ok(p.path(), &["rasterize", "--force"]);
    let forced = fs::metadata(&stamp).unwrap().modified().unwrap();
    assert!(forced > before);

    // A different setting is a different input.
    ok(p.path(), &["rasterize", "--png"]);
    assert!(p.path().join("out/rasterize/figures/P001/V1.png").is_file());
    assert!(!p.path().join("out/.rasterize.staging").exists());
}

#[test]
fn synth_refuses_to_clobber_and_round_trips_export() {
    let dir = tempfile::tempdir().unwrap();
    let study = dir.path().join("study");
    ok(dir.path(), &["synth", "--out", "study", "--participants", "6", "--vlat-items", "2", "--calvi-items", "2"]);
    assert!(study.join("attnlit.conf").is_file());
    assert!(study.join("dataset/charts/V1.png").is_file());

    let out = run(dir.path(), &["synth", "--out", "study", "--participants", "6"]);
    assert_eq!(out.status.code(), Some(2));
    fs::create_dir_all(dir.path().join("other")).unwrap();
    fs::write(dir.path().join("other/keep.txt"), "x").unwrap();
    let out = run(dir.path(), &["synth", "--out", "other", "--force"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(dir.path().join("other/keep.txt").exists());

    ok(
        dir.path(),
        &["export", "--store", "study/store", "--out", "again", "--study", "study/dataset/study.json"],
    );
    for f in ["manifest.json", "study.json"] {
        assert_eq!(
            fs::read(dir.path().join("again").join(f)).unwrap(),
            fs::read(study.join("dataset").join(f)).unwrap(),
            "{f}"
        );
    }
}
