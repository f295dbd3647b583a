//! `radfuse` — radar-guided metric depth recovery from the command line.
//!
//! Subcommands mirror the pipeline stages (`align`, `augment`, `refine`),
//! plus `run` for the whole pipeline (single frame or batch manifest),
//! `simulate` for synthetic frames, `eval` for range-bucketed metrics, and
//! `score-confidence` for confidence-map quality.
//!
//! Conventions: primary results are JSON on stdout; progress notes go to
//! stderr (silenced by `--quiet`); errors are a single machine-parsable JSON
//! line on stderr. Exit codes: 0 success, 2 input/format error, 3 degenerate
//! frame, 4 solver non-convergence under `--strict`.

mod commands;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use radfuse_core::pipeline::ConfidenceProvider;

#[derive(Parser)]
#[command(name = "radfuse", version, about = "Radar-guided metric depth recovery")]
struct Cli {
    /// Pipeline configuration JSON; missing fields take their defaults.
    #[arg(long, global = true, value_name = "JSON")]
    config: Option<PathBuf>,
    /// Override the scene seed (only `simulate` consumes randomness).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Dump intermediate products (aligned depth, quasi-dense depth,
    /// inverse-scale field, confidence maps) into this directory.
    #[arg(long, global = true, value_name = "DIR")]
    debug_dir: Option<PathBuf>,
    /// Suppress progress notes on stderr; results and errors still print.
    #[arg(long, global = true)]
    quiet: bool,
    /// Exit 4 when the scale solver stops without converging.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProviderArg {
    Heuristic,
    External,
}

impl From<ProviderArg> for ConfidenceProvider {
    fn from(p: ProviderArg) -> Self {
        match p {
            ProviderArg::Heuristic => ConfidenceProvider::Heuristic,
            ProviderArg::External => ConfidenceProvider::External,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic frame with analytic ground truth.
    Simulate {
        /// Scene description JSON.
        #[arg(long, value_name = "JSON")]
        spec: PathBuf,
        /// Directory receiving gt/mono/guide PFM, cloud PLY and calib JSON.
        #[arg(long, value_name = "DIR")]
        out_dir: PathBuf,
    },
    /// Fit the global scale of a monocular depth map to radar returns.
    Align {
        /// Scale-free monocular depth (PFM).
        #[arg(long, value_name = "PFM")]
        mono: PathBuf,
        /// Radar point cloud (.ply or .csv).
        #[arg(long, value_name = "CLOUD")]
        cloud: PathBuf,
        /// Calibration JSON (intrinsics + camera-from-radar extrinsic).
        #[arg(long, value_name = "JSON")]
        calib: PathBuf,
        /// Write the globally aligned depth here (PFM).
        #[arg(long, value_name = "PFM")]
        out: Option<PathBuf>,
        /// Write the alignment report here (JSON).
        #[arg(long, value_name = "JSON")]
        report: Option<PathBuf>,
    },
    /// Build the quasi-dense radar depth from per-return confidence maps.
    Augment {
        /// Radar point cloud (.ply or .csv).
        #[arg(long, value_name = "CLOUD")]
        cloud: PathBuf,
        /// Calibration JSON.
        #[arg(long, value_name = "JSON")]
        calib: PathBuf,
        /// Globally aligned depth guiding the confidence heuristic (PFM).
        #[arg(long, value_name = "PFM")]
        guide: PathBuf,
        /// Confidence threshold; overrides the configuration.
        #[arg(long)]
        tau: Option<f64>,
        /// Confidence source; overrides the configuration.
        #[arg(long, value_enum)]
        provider: Option<ProviderArg>,
        /// Directory with an external confidence index (external provider).
        #[arg(long, value_name = "DIR")]
        conf_dir: Option<PathBuf>,
        /// Frame identifier within the external confidence directory.
        #[arg(long)]
        frame_id: Option<String>,
        /// Write the quasi-dense depth here (PFM).
        #[arg(long, value_name = "PFM")]
        out: Option<PathBuf>,
    },
    /// Solve the dense inverse-scale field and compose refined depth.
    Refine {
        /// Quasi-dense radar depth (PFM).
        #[arg(long, value_name = "PFM")]
        dq: PathBuf,
        /// Globally aligned depth (PFM).
        #[arg(long, value_name = "PFM")]
        dga: PathBuf,
        /// Smoothness weight; overrides the configuration.
        #[arg(long)]
        lambda_smooth: Option<f64>,
        /// Edge sharpness of the smoothness weights; overrides the
        /// configuration.
        #[arg(long)]
        beta: Option<f64>,
        /// Outer iteration budget; overrides the configuration.
        #[arg(long)]
        max_iters: Option<usize>,
        /// Relative energy-decrease tolerance; overrides the configuration.
        #[arg(long)]
        tol: Option<f64>,
        /// Write the refined depth here (PFM).
        #[arg(long, value_name = "PFM")]
        out: Option<PathBuf>,
        /// Write the solver report (energy trace, clamp count, convergence)
        /// here (JSON).
        #[arg(long, value_name = "JSON")]
        report: Option<PathBuf>,
    },
    /// Score a predicted depth map against ground truth per range bucket.
    Eval {
        /// Predicted depth (PFM).
        #[arg(long, value_name = "PFM")]
        pred: PathBuf,
        /// Ground-truth depth (PFM).
        #[arg(long, value_name = "PFM")]
        gt: PathBuf,
        /// Range caps in meters, e.g. `--ranges 50,60,70`; overrides the
        /// configuration.
        #[arg(long, value_delimiter = ',')]
        ranges: Option<Vec<f64>>,
        /// Write the JSON reports here instead of stdout.
        #[arg(long, value_name = "JSON")]
        json: Option<PathBuf>,
        /// Write a CSV summary (one row per range) here.
        #[arg(long, value_name = "CSV")]
        csv: Option<PathBuf>,
    },
    /// Run the full pipeline on one frame or on a batch manifest.
    Run {
        /// Frame directory with the standard file names (mono.pfm,
        /// cloud.ply, calib.json, optionally gt.pfm).
        #[arg(long, value_name = "DIR")]
        frame: Option<PathBuf>,
        /// Scale-free monocular depth (PFM); alternative to --frame.
        #[arg(long, value_name = "PFM")]
        mono: Option<PathBuf>,
        /// Radar point cloud; alternative to --frame.
        #[arg(long, value_name = "CLOUD")]
        cloud: Option<PathBuf>,
        /// Calibration JSON; alternative to --frame.
        #[arg(long, value_name = "JSON")]
        calib: Option<PathBuf>,
        /// Ground-truth depth enabling evaluation (PFM).
        #[arg(long, value_name = "PFM")]
        gt: Option<PathBuf>,
        /// Batch manifest: a JSON list of frame directories (relative paths
        /// resolve against the manifest's own directory).
        #[arg(long, value_name = "JSON", conflicts_with_all = ["frame", "mono", "cloud", "calib", "gt"])]
        batch: Option<PathBuf>,
        /// Batch parallelism; defaults to the available cores. Results do
        /// not depend on this value.
        #[arg(long)]
        jobs: Option<usize>,
        /// Directory receiving dhat.pfm (and per-frame subdirectories with
        /// result.json in batch mode).
        #[arg(long, value_name = "DIR")]
        out_dir: Option<PathBuf>,
        /// Directory with an external confidence index (external provider,
        /// single-frame mode).
        #[arg(long, value_name = "DIR")]
        conf_dir: Option<PathBuf>,
        /// Frame identifier within the external confidence directory.
        #[arg(long)]
        frame_id: Option<String>,
    },
    /// Mean binary cross-entropy of confidence maps against association
    /// labels derived from densified ground truth.
    ScoreConfidence {
        /// Directory with the external confidence index.
        #[arg(long, value_name = "DIR")]
        conf_dir: PathBuf,
        /// Frame identifier within the confidence directory.
        #[arg(long)]
        frame_id: String,
        /// Densified ground-truth depth (PFM).
        #[arg(long, value_name = "PFM")]
        gt: PathBuf,
        /// Radar point cloud supplying the per-map depths.
        #[arg(long, value_name = "CLOUD")]
        cloud: PathBuf,
        /// Calibration JSON.
        #[arg(long, value_name = "JSON")]
        calib: PathBuf,
        /// Association tolerance in meters (label = |d_int − d| < tol).
        #[arg(long, default_value_t = 0.5)]
        tol: f64,
    },
}

fn main() {
    let cli = Cli::parse();
    match commands::dispatch(&cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            let line = serde_json::json!({
                "error": { "category": e.category(), "message": e.to_string() }
            });
            eprintln!("{line}");
            std::process::exit(e.exit_code());
        }
    }
}
