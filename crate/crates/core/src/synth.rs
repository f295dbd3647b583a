//! Synthetic scenes with analytic ground truth.
//!
//! Real radar/thermal datasets are large and noisy; quantitative verification
//! instead runs on procedurally generated frames whose true depth is known in
//! closed form. A scene is a handful of primitives (ground plane, frontal
//! boxes, background plane) ray-cast through a pinhole camera; from the exact
//! depth the generator derives every pipeline input:
//!
//! * a scale-free monocular prediction `mono = a·gt·(1 + ε·f)` with a smooth
//!   band-limited corruption field `f ∈ [−1, 1]`,
//! * a sparse radar cloud sampled with a bias toward lower image rows, with
//!   Gaussian depth noise and multiplicative outliers, expressed in the radar
//!   frame of a fixed camera↔radar mount,
//! * a grayscale guide image (normalized inverse depth plus noise) standing
//!   in for the thermal picture, used for I/O parity only.
//!
//! Everything is a pure function of the scene description and its seed: the
//! PRNG is ChaCha8 with one dedicated stream per consumer (radar returns,
//! mono corruption, guide noise), so e.g. adding radar points never perturbs
//! the mono field.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{CameraModel, DepthImage, RadarPoint, RadarPointCloud, RigidTransform};
use crate::num::{cast, to_f64, Real};

/// PRNG stream carrying radar sampling and noise.
const STREAM_RADAR: u64 = 1;
/// PRNG stream carrying the mono corruption field.
const STREAM_MONO: u64 = 2;
/// PRNG stream carrying guide-image noise.
const STREAM_GUIDE: u64 = 3;

/// Noisy radar depths are floored here (meters) so every return stays in
/// front of the sensor.
pub const RADAR_DEPTH_FLOOR: f64 = 0.01;

/// Standard deviation of the additive guide-image noise.
const GUIDE_NOISE_SIGMA: f64 = 0.02;

/// Scene primitives live in (0, this] meters.
const MAX_PRIMITIVE_DEPTH: f64 = 100.0;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Pinhole intrinsics in plain-data form for the scene description file.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CameraSpec {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraSpec {
    pub fn model<T: Real>(&self) -> Result<CameraModel<T>> {
        CameraModel::new(
            cast(self.fx),
            cast(self.fy),
            cast(self.cx),
            cast(self.cy),
            self.width,
            self.height,
        )
    }
}

/// A scene surface.
///
/// Primitives are positioned in a world frame sharing the camera center:
/// `x` right, `y` up, `z` forward along the optical axis (the image `v` axis
/// points down, so world `y` is the negated camera `y`).
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Primitive {
    /// Horizontal plane `y = height` (negative heights lie below the camera).
    GroundPlane { height: f64 },
    /// Fronto-parallel rectangle at constant depth, centered at
    /// `(center_x, center_y)` with the given world extents.
    FrontalBox {
        center_x: f64,
        center_y: f64,
        width: f64,
        height: f64,
        depth: f64,
    },
    /// Fronto-parallel plane covering the whole image.
    BackgroundPlane { depth: f64 },
}

/// Radar sampling parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct RadarSpec {
    /// Returns to draw (without replacement, biased toward lower rows).
    pub n_points: usize,
    /// Additive Gaussian depth noise, meters.
    pub depth_noise_sigma: f64,
    /// Per-return probability of becoming an outlier.
    pub outlier_rate: f64,
    /// Depth multiplier applied to outliers.
    pub outlier_scale: f64,
}

/// Monocular corruption parameters: `mono = a·gt·(1 + ε·f)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct MonoCorruption {
    /// Global scale `a` the alignment stage must undo.
    pub global_scale: f64,
    /// Amplitude `ε` of the smooth corruption field; must stay below 0.5 so
    /// the output remains positive.
    pub amplitude: f64,
    /// Wavelength of the field's sinusoids, pixels.
    pub wavelength: f64,
}

/// Full description of one synthetic frame.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneSpec {
    pub seed: u64,
    pub camera: CameraSpec,
    pub layout: Vec<Primitive>,
    pub radar: RadarSpec,
    pub mono_corruption: MonoCorruption,
}

impl SceneSpec {
    /// Checks every documented invariant of the description.
    pub fn validate(&self) -> Result<()> {
        if self.layout.is_empty() {
            return Err(Error::DegenerateScene("layout has no primitives".into()));
        }
        for p in &self.layout {
            match *p {
                Primitive::GroundPlane { height } => {
                    if !height.is_finite() || height == 0.0 || height.abs() > MAX_PRIMITIVE_DEPTH {
                        return Err(Error::Parameter(format!(
                            "ground plane height must be nonzero with |height| <= {MAX_PRIMITIVE_DEPTH}, got {height}"
                        )));
                    }
                }
                Primitive::FrontalBox { width, height, depth, center_x, center_y } => {
                    if !(width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()) {
                        return Err(Error::Parameter(format!(
                            "box extents must be positive, got {width}x{height}"
                        )));
                    }
                    if !center_x.is_finite() || !center_y.is_finite() {
                        return Err(Error::Parameter("box center must be finite".into()));
                    }
                    if !(depth > 0.0 && depth <= MAX_PRIMITIVE_DEPTH) {
                        return Err(Error::Parameter(format!(
                            "box depth must lie in (0, {MAX_PRIMITIVE_DEPTH}], got {depth}"
                        )));
                    }
                }
                Primitive::BackgroundPlane { depth } => {
                    if !(depth > 0.0 && depth <= MAX_PRIMITIVE_DEPTH) {
                        return Err(Error::Parameter(format!(
                            "background depth must lie in (0, {MAX_PRIMITIVE_DEPTH}], got {depth}"
                        )));
                    }
                }
            }
        }
        let r = &self.radar;
        if !(0.0..=1.0).contains(&r.outlier_rate) || !r.outlier_rate.is_finite() {
            return Err(Error::Parameter(format!(
                "outlier rate must lie in [0, 1], got {}",
                r.outlier_rate
            )));
        }
        if !(r.depth_noise_sigma >= 0.0 && r.depth_noise_sigma.is_finite()) {
            return Err(Error::Parameter(format!(
                "depth noise sigma must be finite and >= 0, got {}",
                r.depth_noise_sigma
            )));
        }
        if !(r.outlier_scale > 0.0 && r.outlier_scale.is_finite()) {
            return Err(Error::Parameter(format!(
                "outlier scale must be finite and > 0, got {}",
                r.outlier_scale
            )));
        }
        let m = &self.mono_corruption;
        if !(m.global_scale > 0.0 && m.global_scale.is_finite()) {
            return Err(Error::Parameter(format!(
                "global scale must be finite and > 0, got {}",
                m.global_scale
            )));
        }
        if !(0.0..0.5).contains(&m.amplitude) {
            return Err(Error::Parameter(format!(
                "corruption amplitude must lie in [0, 0.5), got {}",
                m.amplitude
            )));
        }
        if !(m.wavelength > 0.0 && m.wavelength.is_finite()) {
            return Err(Error::Parameter(format!(
                "corruption wavelength must be finite and > 0, got {}",
                m.wavelength
            )));
        }
        Ok(())
    }
}

/// Every input the pipeline consumes for one frame, plus the ground truth.
#[derive(Debug, Clone)]
pub struct FrameBundle<T: Real> {
    /// Exact scene depth; dense and valid everywhere.
    pub gt_depth: DepthImage<T>,
    /// Scale-free monocular prediction; positive everywhere.
    pub mono_depth: DepthImage<T>,
    /// Radar returns in the radar frame of [`mount_extrinsic`].
    pub cloud: RadarPointCloud<T>,
    /// Thermal stand-in (normalized inverse depth plus noise) in (0, 1].
    pub guide_image: DepthImage<T>,
    pub camera: CameraModel<T>,
    /// Maps radar-frame points into the camera frame.
    pub extrinsic: RigidTransform<T>,
}

/// The fixed camera↔radar mount of every synthetic frame: the radar sits
/// slightly right of, above, and behind the camera, yawed by 2°.
pub fn mount_extrinsic<T: Real>() -> RigidTransform<T> {
    let yaw = 2.0f64.to_radians();
    let (s, c) = yaw.sin_cos();
    let rotation = [
        [cast(c), cast(0.0), cast(s)],
        [cast(0.0), cast(1.0), cast(0.0)],
        [cast(-s), cast(0.0), cast(c)],
    ];
    let translation = [cast(0.08), cast(-0.12), cast(-0.05)];
    RigidTransform::new(rotation, translation).expect("mount rotation is orthonormal")
}

/// Exact depth of the nearest primitive along the pixel ray, if any.
fn raycast(layout: &[Primitive], cam: &CameraSpec, u: usize, v: usize) -> Option<f64> {
    // Camera-frame ray direction with unit z; world y is the negated
    // camera y.
    let dir_x = (u as f64 - cam.cx) / cam.fx;
    let dir_y = (v as f64 - cam.cy) / cam.fy;
    let mut nearest: Option<f64> = None;
    let mut consider = |z: f64| {
        if z > 0.0 && nearest.is_none_or(|n| z < n) {
            nearest = Some(z);
        }
    };
    for p in layout {
        match *p {
            Primitive::GroundPlane { height } => {
                // Plane y_cam = −height; the ray hits it at t = −height/dir_y.
                let plane_y = -height;
                if dir_y != 0.0 {
                    consider(plane_y / dir_y);
                }
            }
            Primitive::FrontalBox { center_x, center_y, width, height, depth } => {
                let x = dir_x * depth;
                let y_world = -(dir_y * depth);
                if (x - center_x).abs() <= width / 2.0 && (y_world - center_y).abs() <= height / 2.0
                {
                    consider(depth);
                }
            }
            Primitive::BackgroundPlane { depth } => consider(depth),
        }
    }
    nearest
}

/// Ray-casts the scene into the exact ground-truth depth map.
///
/// Fails with a degenerate-scene error if the layout is empty or leaves any
/// pixel uncovered.
fn ground_truth<T: Real>(spec: &SceneSpec) -> Result<DepthImage<T>> {
    let cam = &spec.camera;
    let mut values = Vec::with_capacity(cam.width * cam.height);
    for v in 0..cam.height {
        for u in 0..cam.width {
            match raycast(&spec.layout, cam, u, v) {
                Some(z) => values.push(cast::<T>(z)),
                None => {
                    return Err(Error::DegenerateScene(format!(
                        "no primitive covers pixel ({u}, {v})"
                    )))
                }
            }
        }
    }
    DepthImage::from_parts(cam.width, cam.height, values, vec![true; cam.width * cam.height])
}

/// Applies the monocular corruption model `mono = a·gt·(1 + ε·f)`.
///
/// `f` is a sum of four sinusoids with seeded directions and phases,
/// normalized into `[−1, 1]`; with `ε = 0` the output is exactly `a·gt`.
/// Invalid ground-truth pixels stay invalid.
pub fn corrupt_mono<T: Real>(
    gt: &DepthImage<T>,
    corruption: &MonoCorruption,
    seed: u64,
) -> Result<DepthImage<T>> {
    let a = corruption.global_scale;
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::Parameter(format!(
            "global scale must be finite and > 0, got {a}"
        )));
    }
    if !(0.0..0.5).contains(&corruption.amplitude) {
        return Err(Error::Parameter(format!(
            "corruption amplitude must lie in [0, 0.5), got {}",
            corruption.amplitude
        )));
    }
    if !(corruption.wavelength > 0.0 && corruption.wavelength.is_finite()) {
        return Err(Error::Parameter(format!(
            "corruption wavelength must be finite and > 0, got {}",
            corruption.wavelength
        )));
    }
    let mut rng = stream_rng(seed, STREAM_MONO);
    let k = 2.0 * std::f64::consts::PI / corruption.wavelength;
    let waves: Vec<(f64, f64, f64)> = (0..4)
        .map(|_| {
            let theta = rng.random_range(0.0..std::f64::consts::TAU);
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            (k * theta.cos(), k * theta.sin(), phase)
        })
        .collect();
    let eps = corruption.amplitude;
    Ok(DepthImage::from_fn(gt.width(), gt.height(), |x, y| {
        let d = gt.get(x, y)?;
        let f = waves
            .iter()
            .map(|&(kx, ky, phase)| (kx * x as f64 + ky * y as f64 + phase).sin())
            .sum::<f64>()
            / 4.0;
        Some(cast::<T>(a * to_f64(d) * (1.0 + eps * f)))
    }))
}

/// Samples a radar cloud from the ground truth.
///
/// Pixels are drawn without replacement with weights `1 + row`, biasing
/// returns toward the lower image rows the way a forward radar sees mostly
/// ground-level structure. Each return's depth is the exact depth plus
/// Gaussian noise (floored at [`RADAR_DEPTH_FLOOR`]), outliers are then
/// scaled, and the 3-D point is carried into the radar frame by the inverse
/// of `extrinsic`.
pub fn sample_radar<T: Real>(
    gt: &DepthImage<T>,
    cam: &CameraModel<T>,
    radar: &RadarSpec,
    extrinsic: &RigidTransform<T>,
    seed: u64,
) -> Result<RadarPointCloud<T>> {
    if cam.width != gt.width() || cam.height != gt.height() {
        return Err(Error::InputMismatch(format!(
            "depth map is {}x{} but camera is {}x{}",
            gt.width(),
            gt.height(),
            cam.width,
            cam.height
        )));
    }
    if radar.n_points > gt.valid_count() {
        return Err(Error::Parameter(format!(
            "cannot draw {} returns from {} valid pixels",
            radar.n_points,
            gt.valid_count()
        )));
    }
    if !(0.0..=1.0).contains(&radar.outlier_rate) {
        return Err(Error::Parameter(format!(
            "outlier rate must lie in [0, 1], got {}",
            radar.outlier_rate
        )));
    }
    if !(radar.depth_noise_sigma >= 0.0 && radar.depth_noise_sigma.is_finite()) {
        return Err(Error::Parameter(format!(
            "depth noise sigma must be finite and >= 0, got {}",
            radar.depth_noise_sigma
        )));
    }
    if !(radar.outlier_scale > 0.0 && radar.outlier_scale.is_finite()) {
        return Err(Error::Parameter(format!(
            "outlier scale must be finite and > 0, got {}",
            radar.outlier_scale
        )));
    }

    let mut rng = stream_rng(seed, STREAM_RADAR);
    let valid: Vec<(usize, usize, T)> = gt.iter_valid().collect();
    let chosen = rand::seq::index::sample_weighted(
        &mut rng,
        valid.len(),
        |i| 1.0 + valid[i].1 as f64,
        radar.n_points,
    )
    .map_err(|e| Error::Parameter(format!("radar sampling weights rejected: {e}")))?;

    let inverse = extrinsic.inverse();
    let mut points = Vec::with_capacity(radar.n_points);
    for i in chosen.iter() {
        let (u, v, d_true) = valid[i];
        let noise: f64 = rng.sample(StandardNormal);
        let mut depth = (to_f64(d_true) + radar.depth_noise_sigma * noise).max(RADAR_DEPTH_FLOOR);
        if rng.random_bool(radar.outlier_rate) {
            depth *= radar.outlier_scale;
        }
        let x = (u as f64 - to_f64(cam.cx)) / to_f64(cam.fx) * depth;
        let y = (v as f64 - to_f64(cam.cy)) / to_f64(cam.fy) * depth;
        let [rx, ry, rz] = inverse.apply([cast::<T>(x), cast::<T>(y), cast::<T>(depth)]);
        points.push(RadarPoint::position(rx, ry, rz));
    }
    RadarPointCloud::new(points)
}

/// Guide image: inverse depth normalized to (0, 1], plus seeded noise.
fn guide_image<T: Real>(gt: &DepthImage<T>, seed: u64) -> DepthImage<T> {
    let mut rng = stream_rng(seed, STREAM_GUIDE);
    let max_inv = gt
        .iter_valid()
        .map(|(_, _, d)| 1.0 / to_f64(d))
        .fold(0.0f64, f64::max);
    DepthImage::from_fn(gt.width(), gt.height(), |x, y| {
        let d = gt.get(x, y)?;
        let base = if max_inv > 0.0 { (1.0 / to_f64(d)) / max_inv } else { 1.0 };
        let noise: f64 = rng.sample(StandardNormal);
        Some(cast::<T>((base + GUIDE_NOISE_SIGMA * noise).clamp(1e-3, 1.0)))
    })
}

/// Generates the full frame bundle for a scene description.
///
/// Deterministic: the same spec yields byte-identical bundles on every run
/// and platform.
pub fn generate_scene<T: Real>(spec: &SceneSpec) -> Result<FrameBundle<T>> {
    spec.validate()?;
    let camera: CameraModel<T> = spec.camera.model()?;
    let gt_depth = ground_truth::<T>(spec)?;
    let extrinsic = mount_extrinsic::<T>();
    let mono_depth = corrupt_mono(&gt_depth, &spec.mono_corruption, spec.seed)?;
    let cloud = sample_radar(&gt_depth, &camera, &spec.radar, &extrinsic, spec.seed)?;
    let guide_image = guide_image(&gt_depth, spec.seed);
    Ok(FrameBundle {
        gt_depth,
        mono_depth,
        cloud,
        guide_image,
        camera,
        extrinsic,
    })
}

/// Parses a scene description from JSON and validates it.
pub fn parse_scene_spec(json: &str) -> Result<SceneSpec> {
    let spec: SceneSpec = serde_json::from_str(json)
        .map_err(|e| Error::Parameter(format!("scene description does not parse: {e}")))?;
    spec.validate()?;
    Ok(spec)
}

/// Reads a scene description from a JSON file.
pub fn read_scene_spec(path: &std::path::Path) -> Result<SceneSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let spec: SceneSpec = serde_json::from_str(&text)
        .map_err(|e| Error::format(path.display().to_string(), format!("scene description does not parse: {e}")))?;
    spec.validate()?;
    Ok(spec)
}

/// Writes a scene description as pretty JSON.
pub fn write_scene_spec(path: &std::path::Path, spec: &SceneSpec) -> Result<()> {
    let mut text = serde_json::to_string_pretty(spec)
        .map_err(|e| Error::Parameter(format!("scene description does not serialize: {e}")))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}
