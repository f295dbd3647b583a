//! End-to-end fusion pipeline and its configuration.
//!
//! One frame flows through three stages:
//!
//! 1. **Align** — project the radar cloud into the image, keep returns inside
//!    the valid range, and fit the global scale `ŝ_g` of the monocular map.
//! 2. **Augment** — build per-return confidence maps (deterministic heuristic
//!    or externally supplied files) and average them into the quasi-dense
//!    radar depth `d̂_q`.
//! 3. **Refine** — turn `d̂_q` and the aligned depth `d̂_ga` into observed
//!    inverse scales, complete them into a dense field by edge-aware energy
//!    minimization, and compose the final metric depth `d̂`.
//!
//! When ground truth is supplied the frame is additionally scored (per-range
//! metrics for both `d̂` and the `d̂_ga` baseline, plus the training-style
//! loss report against log-interpolated truth). Frames that cannot be
//! aligned or anchored are not errors: they come back with a skip status so
//! batch runs keep going.

use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::align::{align_global, AlignOptions, AlignSpace, AlignmentResult, BoundsPolicy};
use crate::augment::{crop_patch_rect, heuristic_confidence, quasi_dense_depth, ConfidenceMap};
use crate::error::{Error, Result};
use crate::geom::{
    filter_projection_range, project_points, CameraModel, DepthImage, RadarPointCloud,
    RigidTransform, SparseDepthProjection,
};
use crate::interp::interpolate_log_linear;
use crate::io::confidence::load_external_confidence;
use crate::metrics::{compute_metrics, MetricsReport};
use crate::num::{cast, Real};
use crate::refine::{compose_depth, quasi_dense_scale, sobel_edge_weights, solve_scale_field};

/// Where per-return confidence maps come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConfidenceProvider {
    /// Deterministic Gaussian-kernel heuristic over the aligned depth.
    #[default]
    Heuristic,
    /// Maps loaded from an external index (a learned model's output).
    External,
}

/// Every free parameter of the pipeline, with defaults.
///
/// The patch size defaults to 150×50 pixels and the valid radar range to
/// (0, 100] m; kernels, weights and tolerances are documented on their
/// fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Confidence threshold τ for quasi-dense averaging, in (0, 1).
    pub tau: f64,
    /// Smoothness weight λ of the refinement energy.
    pub lambda_smooth: f64,
    /// Weight of the sparse-truth term in the loss report.
    pub lambda_gt: f64,
    /// Edge sharpness β (per meter) of the Sobel smoothness weights.
    pub beta: f64,
    /// Requested confidence patch width, pixels.
    pub patch_w: usize,
    /// Requested confidence patch height, pixels.
    pub patch_h: usize,
    /// Depth-agreement kernel width of the heuristic provider, meters.
    pub sigma_d: f64,
    /// Pixel-distance kernel width; `None` uses half the patch half-diagonal.
    pub sigma_uv: Option<f64>,
    /// Relative tolerance of the global-scale minimizer.
    pub brent_tol: f64,
    /// Outer iteration budget of the scale solver.
    pub solver_max_iters: usize,
    /// Relative energy-decrease tolerance of the scale solver.
    pub solver_tol: f64,
    /// Range buckets (meters) evaluated when ground truth is present.
    pub range_caps: Vec<f64>,
    /// Radar returns outside `(lo, hi]` meters are discarded before
    /// alignment.
    pub radar_range: (f64, f64),
    pub provider: ConfidenceProvider,
    /// Space in which the global L1 objective is minimized.
    pub align_space: AlignSpace,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            tau: 0.5,
            lambda_smooth: 1.0,
            lambda_gt: 1.0,
            beta: 0.5,
            patch_w: 150,
            patch_h: 50,
            sigma_d: 1.0,
            sigma_uv: None,
            brent_tol: 1e-9,
            solver_max_iters: 100,
            solver_tol: 1e-8,
            range_caps: vec![50.0, 60.0, 70.0],
            radar_range: (0.0, 100.0),
            provider: ConfidenceProvider::Heuristic,
            align_space: AlignSpace::Depth,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::Parameter(format!(
                "tau must lie in (0, 1), got {}",
                self.tau
            )));
        }
        for (name, v) in [
            ("lambda_smooth", self.lambda_smooth),
            ("lambda_gt", self.lambda_gt),
            ("beta", self.beta),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Parameter(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        if self.patch_w < 1 || self.patch_h < 1 {
            return Err(Error::Parameter(format!(
                "patch size must be at least 1x1, got {}x{}",
                self.patch_w, self.patch_h
            )));
        }
        for (name, v) in [
            ("sigma_d", Some(self.sigma_d)),
            ("sigma_uv", self.sigma_uv),
            ("brent_tol", Some(self.brent_tol)),
            ("solver_tol", Some(self.solver_tol)),
        ] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::Parameter(format!(
                        "{name} must be finite and > 0, got {v}"
                    )));
                }
            }
        }
        if self.solver_max_iters == 0 {
            return Err(Error::Parameter("solver_max_iters must be >= 1".into()));
        }
        for cap in &self.range_caps {
            if !(cap.is_finite() && *cap > 0.0) {
                return Err(Error::Parameter(format!(
                    "range caps must be finite and > 0, got {cap}"
                )));
            }
        }
        let (lo, hi) = self.radar_range;
        if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && hi > lo) {
            return Err(Error::Parameter(format!(
                "radar range must satisfy 0 <= lo < hi, got ({lo}, {hi})"
            )));
        }
        Ok(())
    }
}

/// Default pixel-distance kernel width: half the patch's half-diagonal.
pub fn default_sigma_uv(patch_w: usize, patch_h: usize) -> f64 {
    let (w, h) = (patch_w as f64, patch_h as f64);
    (w * w + h * h).sqrt() / 4.0
}

/// Parses a pipeline configuration from JSON (missing fields take their
/// defaults; unknown fields are rejected).
pub fn parse_pipeline_config(json: &str) -> Result<PipelineConfig> {
    let config: PipelineConfig = serde_json::from_str(json)
        .map_err(|e| Error::Parameter(format!("configuration does not parse: {e}")))?;
    config.validate()?;
    Ok(config)
}

/// Reads a pipeline configuration from a JSON file.
pub fn read_pipeline_config(path: &std::path::Path) -> Result<PipelineConfig> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let config: PipelineConfig = serde_json::from_str(&text).map_err(|e| {
        Error::format(path.display().to_string(), format!("configuration does not parse: {e}"))
    })?;
    config.validate()?;
    Ok(config)
}

/// External confidence source: a directory holding `<frame_id>.json` plus
/// the PFM payloads it references.
#[derive(Debug, Clone)]
pub struct ExternalConfidence {
    pub dir: PathBuf,
    pub frame_id: String,
}

/// Borrowed per-frame inputs of [`run_pipeline`].
#[derive(Debug, Clone)]
pub struct FrameInputs<'a, T: Real> {
    /// Scale-free monocular depth prediction.
    pub mono: &'a DepthImage<T>,
    /// Radar returns in the radar frame.
    pub cloud: &'a RadarPointCloud<T>,
    pub camera: &'a CameraModel<T>,
    /// Maps radar-frame points into the camera frame.
    pub extrinsic: &'a RigidTransform<T>,
    /// Sparse ground truth; enables the evaluation stage.
    pub gt: Option<&'a DepthImage<T>>,
    /// Required when the config selects the external provider.
    pub external_confidence: Option<ExternalConfidence>,
}

/// Outcome of a frame, including the skip states that are not errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrameStatus {
    #[serde(rename = "completed")]
    Completed,
    /// No radar return overlapped valid monocular depth.
    #[serde(rename = "skipped: alignment-unavailable")]
    SkippedAlignmentUnavailable,
    /// No pixel cleared the confidence threshold, leaving the solver without
    /// anchors.
    #[serde(rename = "skipped: solver-unavailable")]
    SkippedSolverUnavailable,
}

/// Wall-clock per stage, milliseconds.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct StageTimings {
    pub align_ms: f64,
    pub augment_ms: f64,
    pub refine_ms: f64,
    pub eval_ms: f64,
}

/// Serializable record of everything one frame produced.
///
/// Stage fields are `None`/empty when their stage did not run (skipped frame,
/// or no ground truth for the evaluation stage).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrameResult {
    pub status: FrameStatus,
    pub alignment: Option<AlignmentResult>,
    /// Fraction of image pixels holding quasi-dense depth.
    pub dq_coverage: Option<f64>,
    /// Observed scale pixels demoted because the aligned guide was unusable.
    pub demoted_scale_pixels: Option<usize>,
    /// External confidence values clamped into [0, 1] on load.
    pub confidence_clamped: Option<usize>,
    pub solver: Option<crate::refine::SolveReport>,
    /// Refined-depth metrics, one entry per range cap with a non-empty
    /// evaluation set.
    pub metrics: Vec<MetricsReport>,
    /// Metrics of the globally aligned baseline `d̂_ga` over the same caps,
    /// for refinement ablations.
    pub guide_metrics: Vec<MetricsReport>,
    /// Loss report against interpolated and sparse truth, when the truth is
    /// triangulable.
    pub losses: Option<crate::refine::LossReport>,
    pub timings: StageTimings,
}

impl FrameResult {
    fn pending() -> Self {
        FrameResult {
            status: FrameStatus::Completed,
            alignment: None,
            dq_coverage: None,
            demoted_scale_pixels: None,
            confidence_clamped: None,
            solver: None,
            metrics: Vec::new(),
            guide_metrics: Vec::new(),
            losses: None,
            timings: StageTimings::default(),
        }
    }
}

/// Dense products of one frame, kept for inspection dumps.
#[derive(Debug, Clone)]
pub struct PipelineOutput<T: Real> {
    /// Final metric depth; `None` when the frame was skipped.
    pub dhat: Option<DepthImage<T>>,
    /// Globally aligned depth `d̂_ga`.
    pub aligned: Option<DepthImage<T>>,
    /// Quasi-dense radar depth `d̂_q`.
    pub quasi_dense: Option<DepthImage<T>>,
    /// Solved inverse scale field.
    pub scale: Option<crate::refine::ScaleField<T>>,
    pub frame: FrameResult,
}

fn elapsed_ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Heuristic confidence maps, one per projected return, indexed back into
/// the cloud via `point_index`.
pub fn heuristic_confidence_maps<T: Real>(
    projection: &SparseDepthProjection<T>,
    guide: &DepthImage<T>,
    config: &PipelineConfig,
    cam: &CameraModel<T>,
) -> Vec<ConfidenceMap<T>> {
    let sigma_d = cast::<T>(config.sigma_d);
    let sigma_uv = cast::<T>(
        config
            .sigma_uv
            .unwrap_or_else(|| default_sigma_uv(config.patch_w, config.patch_h)),
    );
    projection
        .entries
        .iter()
        .map(|e| {
            let rect = crop_patch_rect(e, config.patch_w, config.patch_h, cam);
            let mut map = heuristic_confidence(rect, e.depth, guide, sigma_d, sigma_uv);
            map.point_index = e.source_index;
            map
        })
        .collect()
}

/// Loads an external confidence set and checks that every map references a
/// projected return that survived range gating (anything else would average
/// depths the frame does not contain). Returns the maps and the number of
/// values clamped into `[0, 1]` on load.
pub fn load_confidence_for_projection<T: Real>(
    source: &ExternalConfidence,
    projection: &SparseDepthProjection<T>,
    cam: &CameraModel<T>,
) -> Result<(Vec<ConfidenceMap<T>>, usize)> {
    let (maps, clamped) =
        load_external_confidence(&source.dir, &source.frame_id, cam.width, cam.height)?;
    for map in &maps {
        if !projection
            .entries
            .iter()
            .any(|e| e.source_index == map.point_index)
        {
            return Err(Error::InputMismatch(format!(
                "confidence map references radar point {} which did not survive projection \
                 and range gating",
                map.point_index
            )));
        }
    }
    Ok((maps, clamped))
}

/// Radar depth per cloud index, as consumed by quasi-dense averaging. Slots
/// without a surviving projected return hold a placeholder that is never
/// read as long as every confidence map references a surviving return.
pub fn radar_depths_by_index<T: Real>(
    projection: &SparseDepthProjection<T>,
    n_points: usize,
) -> Vec<T> {
    let mut depths = vec![T::one(); n_points];
    for e in &projection.entries {
        depths[e.source_index] = e.depth;
    }
    depths
}

/// Runs the three-stage pipeline on one frame.
///
/// Deterministic for fixed inputs and configuration. Unalignable or
/// unanchorable frames return a skip status with the products of the stages
/// that did run; all other failures are errors.
pub fn run_pipeline<T: Real>(
    inputs: &FrameInputs<'_, T>,
    config: &PipelineConfig,
) -> Result<PipelineOutput<T>> {
    config.validate()?;
    let cam = inputs.camera;
    if inputs.mono.width() != cam.width || inputs.mono.height() != cam.height {
        return Err(Error::InputMismatch(format!(
            "monocular depth is {}x{} but the camera is {}x{}",
            inputs.mono.width(),
            inputs.mono.height(),
            cam.width,
            cam.height
        )));
    }
    if let Some(gt) = inputs.gt {
        if !gt.same_shape(inputs.mono) {
            return Err(Error::InputMismatch(format!(
                "ground truth is {}x{} but the frame is {}x{}",
                gt.width(),
                gt.height(),
                inputs.mono.width(),
                inputs.mono.height()
            )));
        }
    }

    let mut frame = FrameResult::pending();

    // Stage 1: projection, range gating, global alignment.
    let t = Instant::now();
    let projection = project_points(inputs.cloud, inputs.extrinsic, cam);
    let (range_lo, range_hi) = config.radar_range;
    let in_range = filter_projection_range(&projection, range_lo, range_hi)?;
    let align_opts = AlignOptions {
        bounds_policy: BoundsPolicy::RatioPercentiles,
        brent_tol: config.brent_tol,
        space: config.align_space,
    };
    let (alignment, aligned, aligned_inverse) =
        match align_global(inputs.mono, &in_range, &align_opts) {
            Ok(v) => v,
            Err(Error::AlignmentUnavailable(_)) => {
                frame.status = FrameStatus::SkippedAlignmentUnavailable;
                frame.timings.align_ms = elapsed_ms(t);
                return Ok(PipelineOutput {
                    dhat: None,
                    aligned: None,
                    quasi_dense: None,
                    scale: None,
                    frame,
                });
            }
            Err(e) => return Err(e),
        };
    frame.alignment = Some(alignment);
    frame.timings.align_ms = elapsed_ms(t);

    // Stage 2: confidence maps and quasi-dense averaging.
    let t = Instant::now();
    let maps: Vec<ConfidenceMap<T>> = match config.provider {
        ConfidenceProvider::Heuristic => {
            heuristic_confidence_maps(&in_range, &aligned, config, cam)
        }
        ConfidenceProvider::External => {
            let Some(ext) = &inputs.external_confidence else {
                return Err(Error::Parameter(
                    "the external confidence provider needs a confidence directory".into(),
                ));
            };
            let (maps, clamped) = load_confidence_for_projection(ext, &in_range, cam)?;
            frame.confidence_clamped = Some(clamped);
            maps
        }
    };
    let depths = radar_depths_by_index(&in_range, inputs.cloud.len());
    let quasi_dense = quasi_dense_depth(
        &maps,
        &depths,
        cast::<T>(config.tau),
        cam.width,
        cam.height,
    )?;
    frame.dq_coverage =
        Some(quasi_dense.valid_count() as f64 / (cam.width * cam.height) as f64);
    frame.timings.augment_ms = elapsed_ms(t);

    // Stage 3: inverse scale field and final composition.
    let t = Instant::now();
    let (sq, demoted) = quasi_dense_scale(&quasi_dense, &aligned)?;
    frame.demoted_scale_pixels = Some(demoted);
    let weights = sobel_edge_weights(&aligned, cast::<T>(config.beta))?;
    let solve = solve_scale_field(
        &sq,
        &weights,
        cast::<T>(config.lambda_smooth),
        config.solver_max_iters,
        cast::<T>(config.solver_tol),
    );
    let (scale, solver_report) = match solve {
        Ok(v) => v,
        Err(Error::SolverUnavailable(_)) => {
            frame.status = FrameStatus::SkippedSolverUnavailable;
            frame.timings.refine_ms = elapsed_ms(t);
            return Ok(PipelineOutput {
                dhat: None,
                aligned: Some(aligned),
                quasi_dense: Some(quasi_dense),
                scale: None,
                frame,
            });
        }
        Err(e) => return Err(e),
    };
    frame.solver = Some(solver_report);
    let dhat = compose_depth(&scale, &aligned_inverse)?;
    frame.timings.refine_ms = elapsed_ms(t);

    // Stage 4: evaluation against ground truth, when present.
    if let Some(gt) = inputs.gt {
        let t = Instant::now();
        for &cap in &config.range_caps {
            match compute_metrics(&dhat, gt, cap) {
                Ok(r) => frame.metrics.push(r),
                Err(Error::UndefinedMetrics(_)) => {}
                Err(e) => return Err(e),
            }
            match compute_metrics(&aligned, gt, cap) {
                Ok(r) => frame.guide_metrics.push(r),
                Err(Error::UndefinedMetrics(_)) => {}
                Err(e) => return Err(e),
            }
        }
        match interpolate_log_linear(gt) {
            Ok(dint) => {
                match crate::refine::sml_losses(
                    &dhat,
                    gt,
                    &dint,
                    &aligned,
                    cast::<T>(config.lambda_gt),
                    cast::<T>(config.lambda_smooth),
                    cast::<T>(config.beta),
                ) {
                    Ok(l) => frame.losses = Some(l),
                    Err(Error::UndefinedLoss(_)) => {}
                    Err(e) => return Err(e),
                }
            }
            // Too few / collinear truth pixels: the loss report is simply
            // absent.
            Err(Error::DegenerateInput(_)) => {}
            Err(e) => return Err(e),
        }
        frame.timings.eval_ms = elapsed_ms(t);
    }

    Ok(PipelineOutput {
        dhat: Some(dhat),
        aligned: Some(aligned),
        quasi_dense: Some(quasi_dense),
        scale: Some(scale),
        frame,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::RadarPoint;
    use crate::io::confidence::write_external_confidence;
    use crate::synth::{
        generate_scene, CameraSpec, MonoCorruption, Primitive, RadarSpec, SceneSpec,
    };

    fn test_spec(seed: u64) -> SceneSpec {
        SceneSpec {
            seed,
            camera: CameraSpec {
                fx: 100.0,
                fy: 100.0,
                cx: 32.0,
                cy: 24.0,
                width: 64,
                height: 48,
            },
            layout: vec![
                Primitive::GroundPlane { height: -1.5 },
                Primitive::FrontalBox {
                    center_x: -0.8,
                    center_y: 0.4,
                    width: 1.6,
                    height: 1.2,
                    depth: 9.0,
                },
                Primitive::BackgroundPlane { depth: 35.0 },
            ],
            radar: RadarSpec {
                n_points: 60,
                depth_noise_sigma: 0.0,
                outlier_rate: 0.0,
                outlier_scale: 3.0,
            },
            mono_corruption: MonoCorruption {
                global_scale: 2.0,
                amplitude: 0.0,
                wavelength: 30.0,
            },
        }
    }

    fn inputs<'a>(
        bundle: &'a crate::synth::FrameBundle<f64>,
        with_gt: bool,
    ) -> FrameInputs<'a, f64> {
        FrameInputs {
            mono: &bundle.mono_depth,
            cloud: &bundle.cloud,
            camera: &bundle.camera,
            extrinsic: &bundle.extrinsic,
            gt: with_gt.then_some(&bundle.gt_depth),
            external_confidence: None,
        }
    }

    #[test]
    fn config_parses_defaults_and_rejects_bad_fields() {
        let config = parse_pipeline_config("{}").unwrap();
        assert_eq!(config, PipelineConfig::default());
        assert!(config.validate().is_ok());

        let err = parse_pipeline_config(r#"{"tau": 1.5}"#);
        assert!(matches!(err, Err(Error::Parameter(_))));
        let err = parse_pipeline_config(r#"{"no_such_knob": 1}"#);
        assert!(matches!(err, Err(Error::Parameter(_))));
        let err = parse_pipeline_config(r#"{"radar_range": [5.0, 2.0]}"#);
        assert!(matches!(err, Err(Error::Parameter(_))));

        let round = serde_json::to_string(&PipelineConfig::default()).unwrap();
        assert_eq!(parse_pipeline_config(&round).unwrap(), PipelineConfig::default());
    }

    /// Piecewise-constant layout: depth is constant within every confidence
    /// patch, so the quasi-dense anchors agree exactly with the aligned depth
    /// (adjacent surfaces are separated by far more than `sigma_d`, so the
    /// confidence gate kills cross-surface smear).
    fn flat_spec(seed: u64) -> SceneSpec {
        SceneSpec {
            layout: vec![
                Primitive::FrontalBox {
                    center_x: -0.8,
                    center_y: 0.4,
                    width: 1.6,
                    height: 1.2,
                    depth: 9.0,
                },
                Primitive::FrontalBox {
                    center_x: 1.5,
                    center_y: -0.5,
                    width: 1.0,
                    height: 1.0,
                    depth: 16.0,
                },
                Primitive::BackgroundPlane { depth: 35.0 },
            ],
            ..test_spec(seed)
        }
    }

    #[test]
    fn noiseless_frame_recovers_ground_truth() {
        let bundle = generate_scene::<f64>(&flat_spec(101)).unwrap();
        let output = run_pipeline(&inputs(&bundle, true), &PipelineConfig::default()).unwrap();
        assert_eq!(output.frame.status, FrameStatus::Completed);
        let alignment = output.frame.alignment.as_ref().unwrap();
        assert!(
            (alignment.s_g - 0.5).abs() < 1e-6,
            "global scale {} should undo a = 2",
            alignment.s_g
        );
        let m50 = output
            .frame
            .metrics
            .iter()
            .find(|m| m.range_cap == 50.0)
            .expect("the 0-50 m bucket is populated");
        assert!(m50.absrel < 1e-4, "noiseless AbsRel {} too large", m50.absrel);
        assert_eq!(m50.delta1, 1.0);
        assert!(output.frame.solver.as_ref().unwrap().converged);
        assert!(output.frame.losses.is_some());
    }

    #[test]
    fn refinement_beats_the_aligned_baseline_under_local_corruption() {
        let spec = SceneSpec {
            mono_corruption: MonoCorruption {
                global_scale: 2.0,
                amplitude: 0.1,
                wavelength: 30.0,
            },
            ..test_spec(102)
        };
        let bundle = generate_scene::<f64>(&spec).unwrap();
        let output = run_pipeline(&inputs(&bundle, true), &PipelineConfig::default()).unwrap();
        assert_eq!(output.frame.status, FrameStatus::Completed);
        let refined = &output.frame.metrics[0];
        let baseline = &output.frame.guide_metrics[0];
        assert_eq!(refined.range_cap, baseline.range_cap);
        assert!(
            refined.absrel < baseline.absrel,
            "refined AbsRel {} should beat the baseline {}",
            refined.absrel,
            baseline.absrel
        );
    }

    #[test]
    fn empty_frustum_skips_with_alignment_status() {
        let bundle = generate_scene::<f64>(&test_spec(103)).unwrap();
        // Every return behind the camera.
        let behind = RadarPointCloud::new(vec![
            RadarPoint::position(0.0, 0.0, -5.0),
            RadarPoint::position(1.0, 0.5, -2.0),
        ])
        .unwrap();
        let frame_inputs = FrameInputs {
            cloud: &behind,
            ..inputs(&bundle, true)
        };
        let output = run_pipeline(&frame_inputs, &PipelineConfig::default()).unwrap();
        assert_eq!(output.frame.status, FrameStatus::SkippedAlignmentUnavailable);
        assert!(output.dhat.is_none());
        assert!(output.frame.alignment.is_none());
        assert_eq!(
            serde_json::to_value(output.frame.status).unwrap(),
            serde_json::Value::String("skipped: alignment-unavailable".into())
        );
    }

    #[test]
    fn range_gate_drops_out_of_range_returns() {
        let bundle = generate_scene::<f64>(&test_spec(104)).unwrap();
        let config = PipelineConfig {
            // The scene spans roughly 7-35 m; a (0, 5] gate empties it.
            radar_range: (0.0, 5.0),
            ..PipelineConfig::default()
        };
        let output = run_pipeline(&inputs(&bundle, false), &config).unwrap();
        assert_eq!(output.frame.status, FrameStatus::SkippedAlignmentUnavailable);
    }

    #[test]
    fn external_provider_reproduces_heuristic_maps() {
        // Generate the frame in f32 so confidence values survive the 32-bit
        // PFM payload bit-for-bit.
        let bundle = generate_scene::<f32>(&test_spec(105)).unwrap();
        let config = PipelineConfig::default();
        let heuristic_inputs = FrameInputs {
            mono: &bundle.mono_depth,
            cloud: &bundle.cloud,
            camera: &bundle.camera,
            extrinsic: &bundle.extrinsic,
            gt: Some(&bundle.gt_depth),
            external_confidence: None,
        };
        let reference = run_pipeline(&heuristic_inputs, &config).unwrap();

        // Rebuild the same maps the heuristic used and write them out.
        let projection = project_points(&bundle.cloud, &bundle.extrinsic, &bundle.camera);
        let (alignment_ref, aligned, _) = align_global(
            &bundle.mono_depth,
            &projection,
            &AlignOptions::default(),
        )
        .unwrap();
        assert_eq!(
            alignment_ref.s_g,
            reference.frame.alignment.as_ref().unwrap().s_g
        );
        let maps: Vec<ConfidenceMap<f32>> =
            heuristic_confidence_maps(&projection, &aligned, &config, &bundle.camera);
        let dir = std::env::temp_dir().join(format!("radfuse-pipe-{}", std::process::id()));
        write_external_confidence(&dir, "frame0", &maps).unwrap();

        let external_inputs = FrameInputs {
            external_confidence: Some(ExternalConfidence {
                dir: dir.clone(),
                frame_id: "frame0".into(),
            }),
            ..heuristic_inputs
        };
        let external_config = PipelineConfig {
            provider: ConfidenceProvider::External,
            ..config
        };
        let output = run_pipeline(&external_inputs, &external_config).unwrap();
        assert_eq!(output.frame.confidence_clamped, Some(0));
        assert_eq!(
            output.dhat.as_ref().unwrap().values(),
            reference.dhat.as_ref().unwrap().values(),
            "externally supplied maps must reproduce the heuristic result"
        );
        std::fs::remove_dir_all(&dir).unwrap();

        // Selecting the provider without a directory is a parameter error.
        let err = run_pipeline(
            &FrameInputs {
                external_confidence: None,
                ..external_inputs
            },
            &external_config,
        );
        assert!(matches!(err, Err(Error::Parameter(_))));
    }

    #[test]
    fn sub_threshold_confidence_skips_with_solver_status() {
        let bundle = generate_scene::<f64>(&test_spec(106)).unwrap();
        let projection = project_points(&bundle.cloud, &bundle.extrinsic, &bundle.camera);
        // One external map whose confidence never clears τ.
        let entry = &projection.entries[0];
        let rect = crop_patch_rect(entry, 8, 8, &bundle.camera);
        let mut map = ConfidenceMap::new(0, rect, vec![0.01f64; rect.len()]).unwrap();
        map.point_index = entry.source_index;
        let dir = std::env::temp_dir().join(format!("radfuse-pipe-low-{}", std::process::id()));
        write_external_confidence(&dir, "frame0", &[map]).unwrap();

        let frame_inputs = FrameInputs {
            external_confidence: Some(ExternalConfidence {
                dir: dir.clone(),
                frame_id: "frame0".into(),
            }),
            ..inputs(&bundle, false)
        };
        let config = PipelineConfig {
            provider: ConfidenceProvider::External,
            ..PipelineConfig::default()
        };
        let output = run_pipeline(&frame_inputs, &config).unwrap();
        assert_eq!(output.frame.status, FrameStatus::SkippedSolverUnavailable);
        assert!(output.dhat.is_none());
        assert!(output.aligned.is_some());
        assert_eq!(output.quasi_dense.as_ref().unwrap().valid_count(), 0);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn repeated_runs_are_deterministic() {
        let bundle = generate_scene::<f64>(&test_spec(107)).unwrap();
        let a = run_pipeline(&inputs(&bundle, true), &PipelineConfig::default()).unwrap();
        let b = run_pipeline(&inputs(&bundle, true), &PipelineConfig::default()).unwrap();
        assert_eq!(
            a.dhat.as_ref().unwrap().values(),
            b.dhat.as_ref().unwrap().values()
        );
        assert_eq!(a.frame.metrics.len(), b.frame.metrics.len());
        for (x, y) in a.frame.metrics.iter().zip(&b.frame.metrics) {
            assert_eq!(x.mae, y.mae);
            assert_eq!(x.delta1, y.delta1);
        }
    }

    #[test]
    fn mismatched_camera_is_an_input_error() {
        let bundle = generate_scene::<f64>(&test_spec(108)).unwrap();
        let narrow = CameraModel::new(100.0, 100.0, 16.0, 24.0, 32, 48).unwrap();
        let frame_inputs = FrameInputs {
            camera: &narrow,
            ..inputs(&bundle, false)
        };
        let err = run_pipeline(&frame_inputs, &PipelineConfig::default());
        assert!(matches!(err, Err(Error::InputMismatch(_))));
    }
}
