//! Implementations behind the `radfuse` subcommands.
//!
//! Every function returns the process exit code; errors bubble up to `main`
//! where they become a JSON line on stderr plus the code from
//! [`Error::exit_code`].

use std::fmt::Display;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use radfuse_core::align::{align_global, AlignOptions};
use radfuse_core::augment::{bce_score, make_association_labels, quasi_dense_depth, Label};
use radfuse_core::geom::{filter_projection_range, project_points};
use radfuse_core::io::calib::{read_calib, write_calib};
use radfuse_core::io::cloud::{read_cloud, write_cloud};
use radfuse_core::io::confidence::write_external_confidence;
use radfuse_core::io::pfm::{read_depth_pfm, write_depth_pfm};
use radfuse_core::metrics::{compute_metrics, MetricsReport};
use radfuse_core::pipeline::{
    heuristic_confidence_maps, load_confidence_for_projection, radar_depths_by_index,
    read_pipeline_config, run_pipeline, ConfidenceProvider, ExternalConfidence, FrameInputs,
    FrameResult, FrameStatus, PipelineConfig, PipelineOutput,
};
use radfuse_core::refine::{
    compose_depth, quasi_dense_scale, sobel_edge_weights, solve_scale_field, ScaleField,
    SolveReport,
};
use radfuse_core::synth::{generate_scene, read_scene_spec, write_scene_spec};
use radfuse_core::{DepthImage, Error, RadarPointCloud, Result, Scalar};

use crate::{Cli, Command};

/// Progress notes on stderr, so stdout stays machine-parsable.
struct Log {
    quiet: bool,
}

impl Log {
    fn note(&self, msg: impl Display) {
        if !self.quiet {
            eprintln!("[radfuse] {msg}");
        }
    }
}

pub fn dispatch(cli: &Cli) -> Result<i32> {
    let log = Log { quiet: cli.quiet };
    let config = match &cli.config {
        Some(path) => read_pipeline_config(path)?,
        None => PipelineConfig::default(),
    };
    match &cli.command {
        Command::Simulate { spec, out_dir } => simulate(cli, &log, spec, out_dir),
        Command::Align {
            mono,
            cloud,
            calib,
            out,
            report,
        } => align(cli, &config, &log, mono, cloud, calib, out, report),
        Command::Augment {
            cloud,
            calib,
            guide,
            tau,
            provider,
            conf_dir,
            frame_id,
            out,
        } => {
            let mut config = config;
            if let Some(tau) = tau {
                config.tau = *tau;
            }
            if let Some(p) = provider {
                config.provider = (*p).into();
            }
            augment(cli, &config, &log, cloud, calib, guide, conf_dir, frame_id, out)
        }
        Command::Refine {
            dq,
            dga,
            lambda_smooth,
            beta,
            max_iters,
            tol,
            out,
            report,
        } => {
            let mut config = config;
            if let Some(l) = lambda_smooth {
                config.lambda_smooth = *l;
            }
            if let Some(b) = beta {
                config.beta = *b;
            }
            if let Some(m) = max_iters {
                config.solver_max_iters = *m;
            }
            if let Some(t) = tol {
                config.solver_tol = *t;
            }
            config.validate()?;
            refine(cli, &config, &log, dq, dga, out, report)
        }
        Command::Eval {
            pred,
            gt,
            ranges,
            json,
            csv,
        } => eval(&config, &log, pred, gt, ranges, json, csv),
        Command::Run {
            frame,
            mono,
            cloud,
            calib,
            gt,
            batch,
            jobs,
            out_dir,
            conf_dir,
            frame_id,
        } => {
            if let Some(manifest) = batch {
                run_batch(cli, &config, &log, manifest, *jobs, out_dir)
            } else {
                run_single(
                    cli, &config, &log, frame, mono, cloud, calib, gt, out_dir, conf_dir, frame_id,
                )
            }
        }
        Command::ScoreConfidence {
            conf_dir,
            frame_id,
            gt,
            cloud,
            calib,
            tol,
        } => score_confidence(&config, &log, conf_dir, frame_id, gt, cloud, calib, *tol),
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Parameter(format!("report does not serialize: {e}")))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

fn print_json(value: &impl Serialize) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("reports always serialize")
    );
}

/// The solved inverse-scale field as an image, for debug dumps. Pixels
/// clamped to zero become invalid (the depth-map sentinel).
fn scale_as_image(field: &ScaleField<Scalar>) -> DepthImage {
    DepthImage::from_fn(field.width(), field.height(), |u, v| {
        let x = field.value_at(u, v);
        (x > 0.0).then_some(x)
    })
}

fn dump_debug(dir: &Path, output: &PipelineOutput<Scalar>) -> Result<()> {
    ensure_dir(dir)?;
    if let Some(aligned) = &output.aligned {
        write_depth_pfm(dir.join("dga.pfm"), aligned)?;
    }
    if let Some(dq) = &output.quasi_dense {
        write_depth_pfm(dir.join("dq.pfm"), dq)?;
    }
    if let Some(scale) = &output.scale {
        write_depth_pfm(dir.join("u.pfm"), &scale_as_image(scale))?;
    }
    Ok(())
}

fn simulate(cli: &Cli, log: &Log, spec_path: &Path, out_dir: &Path) -> Result<i32> {
    let mut spec = read_scene_spec(spec_path)?;
    if let Some(seed) = cli.seed {
        spec.seed = seed;
    }
    let bundle = generate_scene::<Scalar>(&spec)?;
    ensure_dir(out_dir)?;
    write_depth_pfm(out_dir.join("gt.pfm"), &bundle.gt_depth)?;
    write_depth_pfm(out_dir.join("mono.pfm"), &bundle.mono_depth)?;
    write_depth_pfm(out_dir.join("guide.pfm"), &bundle.guide_image)?;
    write_cloud(out_dir.join("cloud.ply"), &bundle.cloud)?;
    write_calib(out_dir.join("calib.json"), &bundle.camera, &bundle.extrinsic)?;
    write_scene_spec(&out_dir.join("spec.json"), &spec)?;
    log.note(format!(
        "simulated a {}x{} frame with {} radar returns into {}",
        bundle.camera.width,
        bundle.camera.height,
        bundle.cloud.len(),
        out_dir.display()
    ));
    print_json(&serde_json::json!({
        "out_dir": out_dir,
        "seed": spec.seed,
        "files": ["gt.pfm", "mono.pfm", "guide.pfm", "cloud.ply", "calib.json", "spec.json"],
    }));
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn align(
    cli: &Cli,
    config: &PipelineConfig,
    log: &Log,
    mono_path: &Path,
    cloud_path: &Path,
    calib_path: &Path,
    out: &Option<PathBuf>,
    report: &Option<PathBuf>,
) -> Result<i32> {
    let mono: DepthImage = read_depth_pfm(mono_path)?;
    let cloud: RadarPointCloud = read_cloud(cloud_path)?;
    let (cam, extrinsic) = read_calib::<Scalar>(calib_path)?;
    if mono.width() != cam.width || mono.height() != cam.height {
        return Err(Error::InputMismatch(format!(
            "monocular depth is {}x{} but the camera is {}x{}",
            mono.width(),
            mono.height(),
            cam.width,
            cam.height
        )));
    }
    let projection = project_points(&cloud, &extrinsic, &cam);
    let (lo, hi) = config.radar_range;
    let in_range = filter_projection_range(&projection, lo, hi)?;
    let opts = AlignOptions {
        brent_tol: config.brent_tol,
        space: config.align_space,
        ..AlignOptions::default()
    };
    let (result, aligned, _) = align_global(&mono, &in_range, &opts)?;
    if let Some(path) = out {
        write_depth_pfm(path, &aligned)?;
    }
    if let Some(path) = report {
        write_json(path, &result)?;
    }
    if let Some(dir) = &cli.debug_dir {
        ensure_dir(dir)?;
        write_depth_pfm(dir.join("dga.pfm"), &aligned)?;
    }
    log.note(format!(
        "aligned {} samples: scale {:.6}, objective {:.6}",
        result.n_samples, result.s_g, result.objective
    ));
    print_json(&result);
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn augment(
    cli: &Cli,
    config: &PipelineConfig,
    log: &Log,
    cloud_path: &Path,
    calib_path: &Path,
    guide_path: &Path,
    conf_dir: &Option<PathBuf>,
    frame_id: &Option<String>,
    out: &Option<PathBuf>,
) -> Result<i32> {
    config.validate()?;
    let cloud: RadarPointCloud = read_cloud(cloud_path)?;
    let (cam, extrinsic) = read_calib::<Scalar>(calib_path)?;
    let guide: DepthImage = read_depth_pfm(guide_path)?;
    if guide.width() != cam.width || guide.height() != cam.height {
        return Err(Error::InputMismatch(format!(
            "guide depth is {}x{} but the camera is {}x{}",
            guide.width(),
            guide.height(),
            cam.width,
            cam.height
        )));
    }
    let projection = project_points(&cloud, &extrinsic, &cam);
    let (lo, hi) = config.radar_range;
    let in_range = filter_projection_range(&projection, lo, hi)?;
    let (maps, clamped) = match config.provider {
        ConfidenceProvider::Heuristic => {
            (heuristic_confidence_maps(&in_range, &guide, config, &cam), 0)
        }
        ConfidenceProvider::External => {
            let dir = conf_dir.clone().ok_or_else(|| {
                Error::Parameter("the external provider needs --conf-dir".into())
            })?;
            let frame_id = frame_id.clone().ok_or_else(|| {
                Error::Parameter("the external provider needs --frame-id".into())
            })?;
            let source = ExternalConfidence { dir, frame_id };
            load_confidence_for_projection(&source, &in_range, &cam)?
        }
    };
    let depths = radar_depths_by_index(&in_range, cloud.len());
    let dq = quasi_dense_depth(&maps, &depths, config.tau, cam.width, cam.height)?;
    if let Some(path) = out {
        write_depth_pfm(path, &dq)?;
    }
    if let Some(dir) = &cli.debug_dir {
        ensure_dir(dir)?;
        write_depth_pfm(dir.join("dq.pfm"), &dq)?;
        let id = frame_id.as_deref().unwrap_or("frame");
        write_external_confidence(dir, id, &maps)?;
    }
    let coverage = dq.valid_count() as f64 / (cam.width * cam.height) as f64;
    log.note(format!(
        "{} confidence maps -> {:.1}% quasi-dense coverage",
        maps.len(),
        coverage * 100.0
    ));
    print_json(&serde_json::json!({
        "n_maps": maps.len(),
        "coverage": coverage,
        "confidence_clamped": clamped,
    }));
    Ok(0)
}

fn refine(
    cli: &Cli,
    config: &PipelineConfig,
    log: &Log,
    dq_path: &Path,
    dga_path: &Path,
    out: &Option<PathBuf>,
    report: &Option<PathBuf>,
) -> Result<i32> {
    let dq: DepthImage = read_depth_pfm(dq_path)?;
    let dga: DepthImage = read_depth_pfm(dga_path)?;
    let (sq, demoted) = quasi_dense_scale(&dq, &dga)?;
    let weights = sobel_edge_weights(&dga, config.beta)?;
    let (field, solve) = solve_scale_field(
        &sq,
        &weights,
        config.lambda_smooth,
        config.solver_max_iters,
        config.solver_tol,
    )?;
    let zga = DepthImage::from_fn(dga.width(), dga.height(), |u, v| {
        dga.get(u, v).map(|d| 1.0 / d)
    });
    let dhat = compose_depth(&field, &zga)?;
    if let Some(path) = out {
        write_depth_pfm(path, &dhat)?;
    }
    if let Some(path) = report {
        write_json(path, &solve)?;
    }
    if let Some(dir) = &cli.debug_dir {
        ensure_dir(dir)?;
        write_depth_pfm(dir.join("u.pfm"), &scale_as_image(&field))?;
    }
    log.note(format!(
        "solved {} outer iterations, converged = {}",
        solve.outer_iters, solve.converged
    ));

    #[derive(Serialize)]
    struct RefineSummary<'a> {
        demoted_scale_pixels: usize,
        #[serde(flatten)]
        solve: &'a SolveReport,
    }
    print_json(&RefineSummary {
        demoted_scale_pixels: demoted,
        solve: &solve,
    });
    Ok(if cli.strict && !solve.converged { 4 } else { 0 })
}

/// CSV header matching the evaluation tables' column order.
const CSV_HEADER: &str = "range_cap_m,imae_1_per_km,irmse_1_per_km,mae_mm,rmse_mm,absrel,sqrel,delta1";

fn csv_row(r: &MetricsReport) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        r.range_cap, r.imae, r.irmse, r.mae, r.rmse, r.absrel, r.sqrel, r.delta1
    )
}

fn eval(
    config: &PipelineConfig,
    log: &Log,
    pred_path: &Path,
    gt_path: &Path,
    ranges: &Option<Vec<f64>>,
    json: &Option<PathBuf>,
    csv: &Option<PathBuf>,
) -> Result<i32> {
    let pred: DepthImage = read_depth_pfm(pred_path)?;
    let gt: DepthImage = read_depth_pfm(gt_path)?;
    let ranges = ranges.as_ref().unwrap_or(&config.range_caps);
    if ranges.is_empty() {
        return Err(Error::Parameter("no evaluation ranges given".into()));
    }
    let reports = ranges
        .iter()
        .map(|&cap| compute_metrics(&pred, &gt, cap))
        .collect::<Result<Vec<_>>>()?;
    if let Some(path) = csv {
        let mut text = String::from(CSV_HEADER);
        text.push('\n');
        for r in &reports {
            let _ = writeln!(text, "{}", csv_row(r));
        }
        fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    log.note(format!(
        "evaluated {} range buckets over {} ground-truth pixels (cap {})",
        reports.len(),
        reports.last().map_or(0, |r| r.n_pixels),
        ranges.last().unwrap()
    ));
    match json {
        Some(path) => write_json(path, &reports)?,
        None => print_json(&reports),
    }
    Ok(0)
}

/// Standard file names inside a frame directory.
struct FrameFiles {
    id: String,
    mono: PathBuf,
    cloud: PathBuf,
    calib: PathBuf,
    gt: Option<PathBuf>,
}

impl FrameFiles {
    fn from_dir(dir: &Path) -> Self {
        let id = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "frame".into());
        let gt = dir.join("gt.pfm");
        FrameFiles {
            id,
            mono: dir.join("mono.pfm"),
            cloud: dir.join("cloud.ply"),
            calib: dir.join("calib.json"),
            gt: gt.exists().then_some(gt),
        }
    }
}

/// Runs one frame and writes its products; returns the frame record.
fn run_one(
    files: &FrameFiles,
    config: &PipelineConfig,
    external: Option<ExternalConfidence>,
    out_dir: Option<&Path>,
    debug_dir: Option<&Path>,
) -> Result<FrameResult> {
    let mono: DepthImage = read_depth_pfm(&files.mono)?;
    let cloud: RadarPointCloud = read_cloud(&files.cloud)?;
    let (cam, extrinsic) = read_calib::<Scalar>(&files.calib)?;
    let gt: Option<DepthImage> = files.gt.as_ref().map(read_depth_pfm).transpose()?;
    let inputs = FrameInputs {
        mono: &mono,
        cloud: &cloud,
        camera: &cam,
        extrinsic: &extrinsic,
        gt: gt.as_ref(),
        external_confidence: external,
    };
    let output = run_pipeline(&inputs, config)?;
    if let Some(dir) = out_dir {
        ensure_dir(dir)?;
        if let Some(dhat) = &output.dhat {
            write_depth_pfm(dir.join("dhat.pfm"), dhat)?;
        }
        write_json(&dir.join("result.json"), &output.frame)?;
    }
    if let Some(dir) = debug_dir {
        dump_debug(dir, &output)?;
    }
    Ok(output.frame)
}

fn external_source(
    config: &PipelineConfig,
    conf_dir: &Option<PathBuf>,
    frame_id: &Option<String>,
) -> Result<Option<ExternalConfidence>> {
    if config.provider != ConfidenceProvider::External {
        return Ok(None);
    }
    let dir = conf_dir
        .clone()
        .ok_or_else(|| Error::Parameter("the external provider needs --conf-dir".into()))?;
    let frame_id = frame_id
        .clone()
        .ok_or_else(|| Error::Parameter("the external provider needs --frame-id".into()))?;
    Ok(Some(ExternalConfidence { dir, frame_id }))
}

/// Exit code for a completed single frame: skips are "degenerate frame" (3),
/// and non-convergence is 4 under `--strict`.
fn frame_exit_code(result: &FrameResult, strict: bool) -> i32 {
    if result.status != FrameStatus::Completed {
        3
    } else if strict && result.solver.as_ref().is_some_and(|s| !s.converged) {
        4
    } else {
        0
    }
}

#[allow(clippy::too_many_arguments)]
fn run_single(
    cli: &Cli,
    config: &PipelineConfig,
    log: &Log,
    frame: &Option<PathBuf>,
    mono: &Option<PathBuf>,
    cloud: &Option<PathBuf>,
    calib: &Option<PathBuf>,
    gt: &Option<PathBuf>,
    out_dir: &Option<PathBuf>,
    conf_dir: &Option<PathBuf>,
    frame_id: &Option<String>,
) -> Result<i32> {
    let files = match (frame, mono, cloud, calib) {
        (Some(dir), None, None, None) => {
            let mut files = FrameFiles::from_dir(dir);
            if let Some(gt) = gt {
                files.gt = Some(gt.clone());
            }
            files
        }
        (None, Some(mono), Some(cloud), Some(calib)) => FrameFiles {
            id: frame_id.clone().unwrap_or_else(|| "frame".into()),
            mono: mono.clone(),
            cloud: cloud.clone(),
            calib: calib.clone(),
            gt: gt.clone(),
        },
        _ => {
            return Err(Error::Parameter(
                "give either --frame <dir> or all of --mono/--cloud/--calib \
                 (or --batch for a manifest)"
                    .into(),
            ))
        }
    };
    let external = external_source(config, conf_dir, frame_id)?;
    let result = run_one(
        &files,
        config,
        external,
        out_dir.as_deref(),
        cli.debug_dir.as_deref(),
    )?;
    log.note(format!(
        "frame {}: {}",
        files.id,
        serde_json::to_value(result.status)
            .expect("status serializes")
            .as_str()
            .unwrap_or("?")
    ));
    print_json(&serde_json::json!({ "frame": files.id, "result": result }));
    Ok(frame_exit_code(&result, cli.strict))
}

/// One line of the batch summary: either a frame record or its error.
#[derive(Serialize)]
#[serde(untagged)]
enum BatchEntry {
    Ok {
        frame: String,
        result: FrameResult,
    },
    Err {
        frame: String,
        error: serde_json::Value,
    },
}

fn run_batch(
    cli: &Cli,
    config: &PipelineConfig,
    log: &Log,
    manifest: &Path,
    jobs: Option<usize>,
    out_dir: &Option<PathBuf>,
) -> Result<i32> {
    if config.provider == ConfidenceProvider::External {
        return Err(Error::Parameter(
            "external confidence maps are per-frame; run such frames singly".into(),
        ));
    }
    let text =
        fs::read_to_string(manifest).map_err(|e| Error::io(manifest.display().to_string(), e))?;
    let entries: Vec<PathBuf> = serde_json::from_str(&text).map_err(|e| {
        Error::format(
            manifest.display().to_string(),
            format!("manifest must be a JSON list of frame directories: {e}"),
        )
    })?;
    if entries.is_empty() {
        return Err(Error::Parameter("the batch manifest lists no frames".into()));
    }
    let base = manifest.parent().unwrap_or_else(|| Path::new("."));
    let dirs: Vec<PathBuf> = entries
        .into_iter()
        .map(|p| if p.is_relative() { base.join(p) } else { p })
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0)) // 0 = one thread per core
        .build()
        .map_err(|e| Error::Parameter(format!("cannot build a thread pool: {e}")))?;
    log.note(format!(
        "running {} frames on {} threads",
        dirs.len(),
        pool.current_num_threads()
    ));
    let results: Vec<Result<FrameResult>> = pool.install(|| {
        use rayon::prelude::*;
        dirs.par_iter()
            .map(|dir| {
                let files = FrameFiles::from_dir(dir);
                run_one(
                    &files,
                    config,
                    None,
                    out_dir.as_deref().map(|d| d.join(&files.id)).as_deref(),
                    cli.debug_dir.as_deref().map(|d| d.join(&files.id)).as_deref(),
                )
            })
            .collect()
    });

    let mut summary = Vec::with_capacity(results.len());
    let mut exit = 0;
    for (dir, result) in dirs.iter().zip(results) {
        let frame = FrameFiles::from_dir(dir).id;
        match result {
            Ok(result) => {
                if exit == 0 {
                    exit = frame_exit_code(&result, cli.strict);
                    // A skipped frame is an expected batch outcome, not a
                    // batch failure.
                    if exit == 3 {
                        exit = 0;
                    }
                }
                summary.push(BatchEntry::Ok {
                    frame,
                    result,
                });
            }
            Err(e) => {
                if exit == 0 {
                    exit = e.exit_code();
                }
                summary.push(BatchEntry::Err {
                    frame,
                    error: serde_json::json!({
                        "category": e.category(),
                        "message": e.to_string(),
                    }),
                });
            }
        }
    }
    print_json(&summary);
    Ok(exit)
}

#[allow(clippy::too_many_arguments)]
fn score_confidence(
    config: &PipelineConfig,
    log: &Log,
    conf_dir: &Path,
    frame_id: &str,
    gt_path: &Path,
    cloud_path: &Path,
    calib_path: &Path,
    tol: f64,
) -> Result<i32> {
    let d_int: DepthImage = read_depth_pfm(gt_path)?;
    let cloud: RadarPointCloud = read_cloud(cloud_path)?;
    let (cam, extrinsic) = read_calib::<Scalar>(calib_path)?;
    if d_int.width() != cam.width || d_int.height() != cam.height {
        return Err(Error::InputMismatch(format!(
            "ground truth is {}x{} but the camera is {}x{}",
            d_int.width(),
            d_int.height(),
            cam.width,
            cam.height
        )));
    }
    let projection = project_points(&cloud, &extrinsic, &cam);
    let (lo, hi) = config.radar_range;
    let in_range = filter_projection_range(&projection, lo, hi)?;
    let source = ExternalConfidence {
        dir: conf_dir.to_path_buf(),
        frame_id: frame_id.to_string(),
    };
    let (maps, clamped) = load_confidence_for_projection(&source, &in_range, &cam)?;
    if maps.is_empty() {
        return Err(Error::UndefinedScore("no confidence maps to score".into()));
    }

    let mut sum = 0.0;
    let mut n_labeled = 0usize;
    let mut n_maps_scored = 0usize;
    for map in &maps {
        let entry = in_range
            .entries
            .iter()
            .find(|e| e.source_index == map.point_index)
            .expect("map indices were validated against the projection");
        let labels = make_association_labels(&d_int, map.rect, map.point_index, entry.depth, tol)?;
        match bce_score(map, &labels, 1e-7) {
            Ok(bce) => {
                let count = labels.labels.iter().filter(|l| **l != Label::Ignore).count();
                sum += bce * count as f64;
                n_labeled += count;
                n_maps_scored += 1;
            }
            // A patch entirely outside the densified truth carries no signal.
            Err(Error::UndefinedScore(_)) => {}
            Err(e) => return Err(e),
        }
    }
    if n_labeled == 0 {
        return Err(Error::UndefinedScore(
            "every patch pixel lacks densified ground truth".into(),
        ));
    }
    log.note(format!(
        "scored {n_maps_scored}/{} maps over {n_labeled} labeled pixels",
        maps.len()
    ));
    print_json(&serde_json::json!({
        "mean_bce": sum / n_labeled as f64,
        "n_maps": maps.len(),
        "n_maps_scored": n_maps_scored,
        "n_labeled": n_labeled,
        "confidence_clamped": clamped,
    }));
    Ok(0)
}
