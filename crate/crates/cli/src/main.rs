mod cmd;
mod error;
mod manifest;
mod output;
mod plot;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};

use crate::cmd::data::{SynthArgs, MANIFEST_NAME};
use crate::cmd::Ctx;
use crate::error::{CliError, Result};
use crate::manifest::{Manifest, KEYS};

#[derive(Debug, Parser)]
#[command(
    name = "attnlit",
    version,
    about = "Click-attention maps and visualization-literacy prediction",
    after_help = manifest_help()
)]
struct Cli {
    /// Study manifest (key = value lines).
    #[arg(short, long, global = true, default_value = MANIFEST_NAME)]
    manifest: PathBuf,
    /// Overrides the manifest seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; default: one per core.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Rerun even when the outputs are up to date.
    #[arg(long, global = true)]
    force: bool,
    /// More logging; repeat for debug output.
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic study with a planted literacy signal.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 300)]
        participants: usize,
        #[arg(long, default_value_t = 12)]
        vlat_items: usize,
        #[arg(long, default_value_t = 15)]
        calvi_items: usize,
        /// Items whose clicks ignore literacy, comma separated.
        #[arg(long, value_delimiter = ',')]
        uninformative: Vec<String>,
    },
    /// Group capture session files into a per-participant dataset.
    Export {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Copy this study config into the dataset as study.json.
        #[arg(long)]
        study: Option<PathBuf>,
    },
    /// Run the capture HTTP service.
    Serve {
        #[arg(long)]
        study: PathBuf,
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
    /// Rasterize every session into an attention map.
    Rasterize {
        /// Also write heatmap PNGs.
        #[arg(long)]
        png: bool,
    },
    /// Compare two attention map files; prints JSON.
    Metrics { a: PathBuf, b: PathBuf },
    /// Per-session features, the participant feature matrix and group maps.
    Features {
        /// Also write group heatmaps and expert-minus-novice maps.
        #[arg(long)]
        png: bool,
    },
    /// Train the literacy predictor on the training split.
    Train {
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Predict literacy levels with a trained model.
    Predict {
        /// Model directory; default: <output>/train.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Predict training participants too.
        #[arg(long)]
        all: bool,
    },
    /// Held-out accuracy and confusion matrices of a trained model.
    Evaluate {
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Greedy forward selection of the most predictive charts.
    SelectCharts {
        #[arg(long)]
        levels: Option<usize>,
        #[arg(long)]
        max_k: Option<usize>,
        /// Per-test weights (vlat,calvi,sgl).
        #[arg(long)]
        weights: Option<String>,
    },
    /// Integrated-gradients attributions of a trained model.
    Explain {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        all: bool,
    },
    /// Score distributions, polynomial fits, MCA and group contrasts.
    Stats,
    /// Evaluate saliency predictions against held-out participants' maps.
    EvalSaliency {
        /// Directory of <participant>/<chart>.amap predictions.
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
}

fn manifest_help() -> String {
    let mut s = String::from("Manifest keys:\n");
    for (k, doc) in KEYS {
        s.push_str(&format!("  {k:<22}{doc}\n"));
    }
    s
}

fn context(cli: &Cli, overrides: &[(&str, Option<String>)]) -> Result<Ctx> {
    let mut manifest = Manifest::load(&cli.manifest)?;
    if let Some(seed) = cli.seed {
        manifest.set("seed", seed.to_string());
    }
    for (key, value) in overrides {
        if let Some(v) = value {
            manifest.set(key, v.clone());
        }
    }
    Ok(Ctx {
        manifest,
        force: cli.force,
    })
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    match &cli.command {
        Command::Synth {
            out,
            participants,
            vlat_items,
            calvi_items,
            uninformative,
        } => cmd::data::synth(&SynthArgs {
            out: out.clone(),
            participants: *participants,
            vlat_items: *vlat_items,
            calvi_items: *calvi_items,
            seed: cli.seed.unwrap_or(0),
            uninformative: uninformative.clone(),
            force: cli.force,
        }),
        Command::Export { store, out, study } => cmd::data::export(store, out, study.as_deref()),
        Command::Serve { study, store, addr } => cmd::data::serve(study, store, *addr),
        Command::Metrics { a, b } => cmd::maps::metrics(a, b),
        Command::Rasterize { png } => cmd::maps::rasterize(&context(cli, &[])?, *png),
        Command::Features { png } => cmd::maps::features(&context(cli, &[])?, *png),
        Command::Train { levels } => cmd::model::train(&context(cli, &[("levels", levels.map(|l| l.to_string()))])?),
        Command::Predict { model, all } => cmd::model::predict(&context(cli, &[])?, model.as_deref(), *all),
        Command::Evaluate { model } => cmd::model::evaluate(&context(cli, &[])?, model.as_deref()),
        Command::SelectCharts { levels, max_k, weights } => cmd::model::select_charts(&context(
            cli,
            &[
                ("levels", levels.map(|l| l.to_string())),
                ("max_k", max_k.map(|k| k.to_string())),
                ("weights", weights.clone()),
            ],
        )?),
        Command::Explain { model, all } => cmd::model::explain(&context(cli, &[])?, model.as_deref(), *all),
        Command::Stats => cmd::report::stats(&context(cli, &[])?),
        Command::EvalSaliency { predictions } => cmd::report::eval_saliency(&context(cli, &[])?, predictions.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
