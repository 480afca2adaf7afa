//! Dataset plumbing: synthetic studies, exporting a capture store and
//! running the capture service.

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use attnlit::dataset::{export_dataset, StudyConfig};
use attnlit::metrics::RegionKind;
use attnlit::synth::{generate, SynthConfig};
use attnlit_capture::{Store, SystemClock};
use image::{Rgb, RgbImage};

use crate::error::{invalid, CliError, Result};

pub const MANIFEST_NAME: &str = "attnlit.conf";

#[derive(Debug, Clone)]
pub struct SynthArgs {
    pub out: PathBuf,
    pub participants: usize,
    pub vlat_items: usize,
    pub calvi_items: usize,
    pub seed: u64,
    pub uninformative: Vec<String>,
    pub force: bool,
}

/// Generates a study into `<out>/store` (capture session files),
/// `<out>/dataset` (the exported dataset with `study.json` and chart
/// images) and `<out>/attnlit.conf`.
pub fn synth(args: &SynthArgs) -> Result<()> {
    prepare_out(&args.out, args.force)?;
    let cfg = SynthConfig {
        participants: args.participants,
        vlat_items: args.vlat_items,
        calvi_items: args.calvi_items,
        uninformative: args.uninformative.clone(),
        seed: args.seed,
        ..SynthConfig::default()
    };
    let study = generate(&cfg)?;
    let store = args.out.join("store");
    let dataset = args.out.join("dataset");
    study.write_store(&store)?;
    let manifest = export_dataset(&store, &dataset)?;
    write_study(&study.config, &dataset)?;
    let conf = format!(
        "# synthetic study: {} participants, seed {}\n\
         dataset = dataset\n\
         output = out\n\
         seed = {}\n\
         bubble_radius = {}\n\
         blur_sigma = 3\n",
        args.participants, args.seed, args.seed, cfg.bubble_radius
    );
    fs::write(args.out.join(MANIFEST_NAME), conf)?;
    println!(
        "wrote {} participants, {} clicks to {}",
        manifest.participants.len(),
        manifest.total_clicks,
        args.out.display()
    );
    Ok(())
}

/// Refuses to overwrite a directory unless it is an earlier synth output
/// and `force` is set.
fn prepare_out(out: &Path, force: bool) -> Result<()> {
    let non_empty = out.exists() && fs::read_dir(out)?.next().is_some();
    if non_empty {
        if !force {
            return Err(invalid(format!("{} is not empty (use --force to replace a synth output)", out.display())));
        }
        if !out.join(MANIFEST_NAME).exists() {
            return Err(invalid(format!(
                "{} is not empty and has no {MANIFEST_NAME}; refusing to replace it",
                out.display()
            )));
        }
        fs::remove_dir_all(out)?;
    }
    fs::create_dir_all(out)?;
    Ok(())
}

fn write_study(config: &StudyConfig, dataset: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(config)?;
    text.push('\n');
    fs::write(dataset.join("study.json"), text)?;
    for item in &config.items {
        let path = dataset.join(&item.image);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        placeholder_chart(item.width, item.height, &item.regions).save_with_format(&path, image::ImageFormat::Png)?;
    }
    Ok(())
}

/// A flat chart image with its element regions shaded, so the capture
/// client has something to reveal.
fn placeholder_chart(w: u32, h: u32, regions: &[attnlit::dataset::RegionSpec]) -> RgbImage {
    let mut img = RgbImage::from_pixel(w, h, Rgb([250, 250, 250]));
    for r in regions {
        let color = match r.kind {
            RegionKind::Title => Rgb([60, 60, 60]),
            RegionKind::Labels => Rgb([150, 150, 150]),
            RegionKind::Legend => Rgb([70, 120, 180]),
        };
        let [x0, y0, x1, y1] = r.rect;
        for y in y0..y1.min(h) {
            for x in x0..x1.min(w) {
                img.put_pixel(x, y, color);
            }
        }
    }
    img
}

pub fn export(store: &Path, out: &Path, study: Option<&Path>) -> Result<()> {
    if !store.is_dir() {
        return Err(CliError::MissingInputs(vec![format!("store: {}", store.display())]));
    }
    let manifest = export_dataset(store, out)?;
    if let Some(study) = study {
        let config = StudyConfig::load(study)?;
        let mut text = serde_json::to_string_pretty(&config)?;
        text.push('\n');
        fs::write(out.join("study.json"), text)?;
    }
    println!(
        "exported {} participants, {} clicks to {}",
        manifest.participants.len(),
        manifest.total_clicks,
        out.display()
    );
    Ok(())
}

pub fn serve(study: &Path, store: &Path, addr: SocketAddr) -> Result<()> {
    if !study.is_file() {
        return Err(CliError::MissingInputs(vec![format!("study config: {}", study.display())]));
    }
    let config = StudyConfig::load(study)?;
    let config_dir = study.parent().unwrap_or(Path::new("."));
    let store = Store::open(store, config, config_dir, Arc::new(SystemClock)).map_err(|e| invalid(e.to_string()))?;
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        println!("listening on http://{}", listener.local_addr()?);
        attnlit_capture::serve(listener, Arc::new(store)).await
    })?;
    Ok(())
}
