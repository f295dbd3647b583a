//! Camera/radar geometry: pinhole projection of point clouds into the image
//! plane, sparse depth rasterization, and range masking.
//!
//! All operations are pure functions on immutable inputs and may run
//! concurrently on distinct or shared data.

use crate::error::{Error, Result};
use crate::num::{cast, to_f64, Real};

/// Pinhole camera intrinsics plus image size.
///
/// No lens distortion is modeled; inputs are assumed rectified.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel<T: Real> {
    pub fx: T,
    pub fy: T,
    pub cx: T,
    pub cy: T,
    pub width: usize,
    pub height: usize,
}

impl<T: Real> CameraModel<T> {
    /// Validating constructor: focal lengths must be positive and finite, and
    /// the principal point must lie inside the image.
    pub fn new(fx: T, fy: T, cx: T, cy: T, width: usize, height: usize) -> Result<Self> {
        for (name, v) in [("fx", fx), ("fy", fy), ("cx", cx), ("cy", cy)] {
            if !v.is_finite() {
                return Err(Error::Parameter(format!("camera {name} must be finite")));
            }
        }
        if fx <= T::zero() || fy <= T::zero() {
            return Err(Error::Parameter("focal lengths must be positive".into()));
        }
        if width < 1 || height < 1 {
            return Err(Error::Parameter("image size must be at least 1x1".into()));
        }
        if cx < T::zero() || to_f64(cx) >= width as f64 {
            return Err(Error::Parameter(format!(
                "cx = {cx} outside [0, {width})"
            )));
        }
        if cy < T::zero() || to_f64(cy) >= height as f64 {
            return Err(Error::Parameter(format!(
                "cy = {cy} outside [0, {height})"
            )));
        }
        Ok(CameraModel {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    /// Number of pixels in the image.
    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }
}

/// Rigid motion: `p_out = rotation * p_in + translation`.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidTransform<T: Real> {
    pub rotation: [[T; 3]; 3],
    pub translation: [T; 3],
}

/// Tolerance (checked in `f64`) for the orthonormality of a rotation matrix.
/// A matrix whose entries were rounded to `T`'s precision must still pass, so
/// the tolerance widens with `T`'s epsilon (~`1e-9` for `f64`, ~`1e-5` for
/// `f32`).
fn rotation_tol<T: Real>() -> f64 {
    (100.0 * T::epsilon().to_f64().unwrap_or(f64::NAN)).max(1e-9)
}

impl<T: Real> RigidTransform<T> {
    /// Validating constructor: `rotation` must be orthonormal with
    /// determinant +1 (each within [`rotation_tol`], checked in `f64`), and
    /// all entries finite.
    pub fn new(rotation: [[T; 3]; 3], translation: [T; 3]) -> Result<Self> {
        let tol = rotation_tol::<T>();
        let r: [[f64; 3]; 3] =
            rotation.map(|row| row.map(|x| x.to_f64().unwrap_or(f64::NAN)));
        let t: [f64; 3] = translation.map(|x| x.to_f64().unwrap_or(f64::NAN));
        if r.iter().flatten().chain(t.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Parameter("transform entries must be finite".into()));
        }
        // R^T R = I
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| r[k][i] * r[k][j]).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                if (dot - expect).abs() > tol {
                    return Err(Error::Parameter(format!(
                        "rotation not orthonormal: (R^T R)[{i}][{j}] = {dot}"
                    )));
                }
            }
        }
        let det = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1])
            - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
            + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
        if (det - 1.0).abs() > tol {
            return Err(Error::Parameter(format!(
                "rotation determinant {det} != 1 (reflection?)"
            )));
        }
        Ok(RigidTransform {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        let o = T::zero();
        let l = T::one();
        RigidTransform {
            rotation: [[l, o, o], [o, l, o], [o, o, l]],
            translation: [o, o, o],
        }
    }

    /// Apply the transform to a point.
    pub fn apply(&self, p: [T; 3]) -> [T; 3] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[0][0] * p[0] + r[0][1] * p[1] + r[0][2] * p[2] + t[0],
            r[1][0] * p[0] + r[1][1] * p[1] + r[1][2] * p[2] + t[1],
            r[2][0] * p[0] + r[2][1] * p[1] + r[2][2] * p[2] + t[2],
        ]
    }

    /// Inverse motion: `R^T, -R^T t`.
    pub fn inverse(&self) -> Self {
        let r = &self.rotation;
        let t = &self.translation;
        let rt = [
            [r[0][0], r[1][0], r[2][0]],
            [r[0][1], r[1][1], r[2][1]],
            [r[0][2], r[1][2], r[2][2]],
        ];
        let ti = [
            -(rt[0][0] * t[0] + rt[0][1] * t[1] + rt[0][2] * t[2]),
            -(rt[1][0] * t[0] + rt[1][1] * t[1] + rt[1][2] * t[2]),
            -(rt[2][0] * t[0] + rt[2][1] * t[1] + rt[2][2] * t[2]),
        ];
        RigidTransform {
            rotation: rt,
            translation: ti,
        }
    }

    /// Composition `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Self) -> Self {
        let a = &self.rotation;
        let b = &other.rotation;
        let mut rotation = [[T::zero(); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    rotation[i][j] += a[i][k] * b[k][j];
                }
            }
        }
        let translation = self.apply(other.translation);
        RigidTransform {
            rotation,
            translation,
        }
    }
}

/// One radar return in the radar sensor frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadarPoint<T: Real> {
    pub x: T,
    pub y: T,
    pub z: T,
    /// Radial velocity, when the sensor reports it.
    pub doppler: Option<T>,
    /// Radar cross-section in dB, when the sensor reports it.
    pub rcs: Option<T>,
}

impl<T: Real> RadarPoint<T> {
    pub fn position(x: T, y: T, z: T) -> Self {
        RadarPoint {
            x,
            y,
            z,
            doppler: None,
            rcs: None,
        }
    }

    pub fn xyz(&self) -> [T; 3] {
        [self.x, self.y, self.z]
    }
}

/// A set of radar returns. May be empty.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RadarPointCloud<T: Real> {
    pub points: Vec<RadarPoint<T>>,
}

impl<T: Real> RadarPointCloud<T> {
    /// Validating constructor: all coordinates must be finite.
    pub fn new(points: Vec<RadarPoint<T>>) -> Result<Self> {
        for (i, p) in points.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                return Err(Error::DegenerateInput(format!(
                    "radar point {i} has non-finite coordinates"
                )));
            }
        }
        Ok(RadarPointCloud { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Dense per-pixel image of depths (meters) with a validity mask.
///
/// Every valid pixel holds a finite, strictly positive value; invalid pixels
/// are excluded from all statistics. Stored row-major, `v * width + u`.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage<T: Real> {
    width: usize,
    height: usize,
    values: Vec<T>,
    mask: Vec<bool>,
}

/// Same container as [`DepthImage`] but the values are inverse depths (1/m).
pub type InverseDepthImage<T> = DepthImage<T>;

impl<T: Real> DepthImage<T> {
    /// An all-invalid image (values zeroed).
    pub fn new_invalid(width: usize, height: usize) -> Self {
        DepthImage {
            width,
            height,
            values: vec![T::zero(); width * height],
            mask: vec![false; width * height],
        }
    }

    /// Build from raw buffers, enforcing shape and the valid-pixel invariant.
    pub fn from_parts(width: usize, height: usize, values: Vec<T>, mask: Vec<bool>) -> Result<Self> {
        let n = width * height;
        if values.len() != n || mask.len() != n {
            return Err(Error::InputMismatch(format!(
                "buffers of {} / {} entries for a {width}x{height} image",
                values.len(),
                mask.len()
            )));
        }
        for i in 0..n {
            if mask[i] && !(values[i].is_finite() && values[i] > T::zero()) {
                return Err(Error::DegenerateInput(format!(
                    "valid pixel ({}, {}) holds non-positive or non-finite depth {}",
                    i % width,
                    i / width,
                    values[i]
                )));
            }
        }
        Ok(DepthImage {
            width,
            height,
            values,
            mask,
        })
    }

    /// Build per pixel; `None` leaves the pixel invalid.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> Option<T>) -> Self {
        let mut img = Self::new_invalid(width, height);
        for v in 0..height {
            for u in 0..width {
                if let Some(d) = f(u, v) {
                    img.set(u, v, d);
                }
            }
        }
        img
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.width == other.width && self.height == other.height
    }

    #[inline]
    fn idx(&self, u: usize, v: usize) -> usize {
        debug_assert!(u < self.width && v < self.height);
        v * self.width + u
    }

    /// Depth at a pixel, or `None` if the pixel is invalid.
    #[inline]
    pub fn get(&self, u: usize, v: usize) -> Option<T> {
        let i = self.idx(u, v);
        self.mask[i].then(|| self.values[i])
    }

    #[inline]
    pub fn is_valid(&self, u: usize, v: usize) -> bool {
        self.mask[self.idx(u, v)]
    }

    /// Mark a pixel valid with the given depth.
    #[inline]
    pub fn set(&mut self, u: usize, v: usize, value: T) {
        debug_assert!(
            value.is_finite() && value > T::zero(),
            "depth written at ({u}, {v}) must be finite and positive, got {value}"
        );
        let i = self.idx(u, v);
        self.values[i] = value;
        self.mask[i] = true;
    }

    #[inline]
    pub fn invalidate(&mut self, u: usize, v: usize) {
        let i = self.idx(u, v);
        self.mask[i] = false;
        self.values[i] = T::zero();
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Iterate valid pixels as `(u, v, depth)` in row-major order.
    pub fn iter_valid(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        self.mask.iter().enumerate().filter_map(move |(i, &m)| {
            m.then(|| (i % self.width, i / self.width, self.values[i]))
        })
    }

    /// Raw row-major value buffer (invalid pixels hold unspecified values).
    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Raw row-major validity buffer.
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Convert the scalar type (exact for f32 -> f64).
    pub fn convert<U: Real>(&self) -> DepthImage<U> {
        DepthImage {
            width: self.width,
            height: self.height,
            values: self
                .values
                .iter()
                .map(|&x| U::from_f64(to_f64(x)).expect("depth representable"))
                .collect(),
            mask: self.mask.clone(),
        }
    }
}

/// Radar points that landed on the image: pixel coordinates, camera-frame
/// depth, and the index of the originating cloud point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionEntry<T: Real> {
    pub u: usize,
    pub v: usize,
    /// Camera-frame z of the point, meters.
    pub depth: T,
    pub source_index: usize,
}

/// Result of projecting a radar cloud into the image plane.
///
/// Points behind the camera or landing outside the image are dropped
/// silently; the counts are kept as side statistics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseDepthProjection<T: Real> {
    pub entries: Vec<ProjectionEntry<T>>,
    pub dropped_behind: usize,
    pub dropped_off_image: usize,
}

/// Project each cloud point through `extrinsic` into the camera and assign it
/// to the nearest integer pixel.
///
/// Entries preserve the input point order. A point is dropped when its
/// camera-frame z is not strictly positive or its rounded pixel lies outside
/// the image.
pub fn project_points<T: Real>(
    cloud: &RadarPointCloud<T>,
    extrinsic: &RigidTransform<T>,
    cam: &CameraModel<T>,
) -> SparseDepthProjection<T> {
    let mut out = SparseDepthProjection::default();
    for (i, p) in cloud.points.iter().enumerate() {
        let [x, y, z] = extrinsic.apply(p.xyz());
        if z <= T::zero() {
            out.dropped_behind += 1;
            continue;
        }
        let u = (cam.fx * x / z + cam.cx).round();
        let v = (cam.fy * y / z + cam.cy).round();
        let (uf, vf) = (to_f64(u), to_f64(v));
        if uf < 0.0 || uf >= cam.width as f64 || vf < 0.0 || vf >= cam.height as f64 {
            out.dropped_off_image += 1;
            continue;
        }
        out.entries.push(ProjectionEntry {
            u: uf as usize,
            v: vf as usize,
            depth: z,
            source_index: i,
        });
    }
    out
}

/// Rasterize projected points onto the image grid.
///
/// When several entries collide on one pixel the minimum depth wins
/// (z-buffer rule: the nearest return occludes the rest). The mask is true
/// exactly where at least one entry landed.
pub fn build_sparse_depth_map<T: Real>(
    proj: &SparseDepthProjection<T>,
    cam: &CameraModel<T>,
) -> DepthImage<T> {
    let mut img = DepthImage::new_invalid(cam.width, cam.height);
    for e in &proj.entries {
        assert!(
            e.u < cam.width && e.v < cam.height,
            "projection entry ({}, {}) outside {}x{} image",
            e.u,
            e.v,
            cam.width,
            cam.height
        );
        match img.get(e.u, e.v) {
            Some(existing) if existing <= e.depth => {}
            _ => img.set(e.u, e.v, e.depth),
        }
    }
    img
}

/// Keep only projection entries with depth in `(lo, hi]`; the drop counters
/// are carried over unchanged (they describe the projection, not the gate).
pub fn filter_projection_range<T: Real>(
    proj: &SparseDepthProjection<T>,
    lo: f64,
    hi: f64,
) -> Result<SparseDepthProjection<T>> {
    if !(lo < hi) {
        return Err(Error::Parameter(format!(
            "range bounds must satisfy lo < hi, got ({lo}, {hi}]"
        )));
    }
    Ok(SparseDepthProjection {
        entries: proj
            .entries
            .iter()
            .filter(|e| {
                let d = to_f64(e.depth);
                d > lo && d <= hi
            })
            .copied()
            .collect(),
        dropped_behind: proj.dropped_behind,
        dropped_off_image: proj.dropped_off_image,
    })
}

/// Keep only valid pixels with depth in `(lo, hi]`; values are unchanged.
pub fn range_valid_mask<T: Real>(depth: &DepthImage<T>, lo: f64, hi: f64) -> Result<DepthImage<T>> {
    if !(lo < hi) {
        return Err(Error::Parameter(format!(
            "range bounds must satisfy lo < hi, got ({lo}, {hi}]"
        )));
    }
    let (lo, hi) = (cast::<T>(lo), cast::<T>(hi));
    let mut out = depth.clone();
    for (u, v, d) in depth.iter_valid() {
        if !(d > lo && d <= hi) {
            out.invalidate(u, v);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cam() -> CameraModel<f64> {
        CameraModel::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap()
    }

    fn rot_z(theta: f64) -> [[f64; 3]; 3] {
        let (s, c) = theta.sin_cos();
        [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
    }

    fn rot_y(theta: f64) -> [[f64; 3]; 3] {
        let (s, c) = theta.sin_cos();
        [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]
    }

    /// Independent per-point projection used as the oracle.
    fn project_one(
        p: [f64; 3],
        ext: &RigidTransform<f64>,
        cam: &CameraModel<f64>,
    ) -> Option<(usize, usize, f64)> {
        let q = [
            ext.rotation[0][0] * p[0] + ext.rotation[0][1] * p[1] + ext.rotation[0][2] * p[2]
                + ext.translation[0],
            ext.rotation[1][0] * p[0] + ext.rotation[1][1] * p[1] + ext.rotation[1][2] * p[2]
                + ext.translation[1],
            ext.rotation[2][0] * p[0] + ext.rotation[2][1] * p[1] + ext.rotation[2][2] * p[2]
                + ext.translation[2],
        ];
        if q[2] <= 0.0 {
            return None;
        }
        let u = (cam.fx * q[0] / q[2] + cam.cx).round();
        let v = (cam.fy * q[1] / q[2] + cam.cy).round();
        if u < 0.0 || u >= cam.width as f64 || v < 0.0 || v >= cam.height as f64 {
            return None;
        }
        Some((u as usize, v as usize, q[2]))
    }

    #[test]
    fn principal_point_ray() {
        let cloud = RadarPointCloud::new(vec![RadarPoint::position(0.0, 0.0, 10.0)]).unwrap();
        let proj = project_points(&cloud, &RigidTransform::identity(), &cam());
        assert_eq!(proj.entries.len(), 1);
        let e = proj.entries[0];
        assert_eq!((e.u, e.v, e.source_index), (320, 240, 0));
        assert_eq!(e.depth, 10.0);
    }

    #[test]
    fn point_behind_camera_dropped() {
        let cloud = RadarPointCloud::new(vec![RadarPoint::position(0.0, 0.0, -5.0)]).unwrap();
        let proj = project_points(&cloud, &RigidTransform::identity(), &cam());
        assert!(proj.entries.is_empty());
        assert_eq!(proj.dropped_behind, 1);
        assert_eq!(proj.dropped_off_image, 0);
    }

    #[test]
    fn random_points_match_per_point_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ext = RigidTransform::new(rot_y(0.03), [0.1, -0.05, 0.2]).unwrap();
        let cam = cam();
        let points: Vec<RadarPoint<f64>> = (0..100)
            .map(|_| {
                RadarPoint::position(
                    rng.random_range(-8.0..8.0),
                    rng.random_range(-5.0..5.0),
                    rng.random_range(0.5..40.0),
                )
            })
            .collect();
        let cloud = RadarPointCloud::new(points.clone()).unwrap();
        let proj = project_points(&cloud, &ext, &cam);

        let mut expected = Vec::new();
        for (i, p) in points.iter().enumerate() {
            if let Some((u, v, depth)) = project_one([p.x, p.y, p.z], &ext, &cam) {
                expected.push((u, v, depth, i));
            }
        }
        let got: Vec<_> = proj
            .entries
            .iter()
            .map(|e| (e.u, e.v, e.depth, e.source_index))
            .collect();
        assert_eq!(got, expected);
        assert_eq!(
            proj.entries.len() + proj.dropped_behind + proj.dropped_off_image,
            points.len()
        );
    }

    #[test]
    fn appending_off_frustum_points_changes_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let cam = cam();
        let ext = RigidTransform::identity();
        let mut points: Vec<RadarPoint<f64>> = (0..50)
            .map(|_| {
                RadarPoint::position(
                    rng.random_range(-3.0..3.0),
                    rng.random_range(-2.0..2.0),
                    rng.random_range(1.0..30.0),
                )
            })
            .collect();
        let base = project_points(&RadarPointCloud::new(points.clone()).unwrap(), &ext, &cam);
        points.push(RadarPoint::position(0.0, 0.0, -1.0)); // behind
        points.push(RadarPoint::position(500.0, 0.0, 1.0)); // far off-image
        let extended = project_points(&RadarPointCloud::new(points).unwrap(), &ext, &cam);
        assert_eq!(base.entries, extended.entries);
        assert_eq!(extended.dropped_behind, base.dropped_behind + 1);
        assert_eq!(extended.dropped_off_image, base.dropped_off_image + 1);
    }

    #[test]
    fn pre_transforming_points_equals_composed_extrinsic() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let cam = cam();
        let ext = RigidTransform::new(rot_z(0.11), [0.3, 0.0, -0.1]).unwrap();
        let t = RigidTransform::new(rot_y(-0.07), [0.0, 0.2, 0.05]).unwrap();
        let points: Vec<RadarPoint<f64>> = (0..200)
            .map(|_| {
                RadarPoint::position(
                    rng.random_range(-6.0..6.0),
                    rng.random_range(-4.0..4.0),
                    rng.random_range(0.5..50.0),
                )
            })
            .collect();

        let pre: Vec<RadarPoint<f64>> = points
            .iter()
            .map(|p| {
                let [x, y, z] = t.apply(p.xyz());
                RadarPoint::position(x, y, z)
            })
            .collect();
        let a = project_points(&RadarPointCloud::new(pre).unwrap(), &ext, &cam);
        let b = project_points(
            &RadarPointCloud::new(points).unwrap(),
            &ext.compose(&t),
            &cam,
        );
        assert_eq!(a.entries.len(), b.entries.len());
        for (ea, eb) in a.entries.iter().zip(&b.entries) {
            assert_eq!((ea.u, ea.v, ea.source_index), (eb.u, eb.v, eb.source_index));
            assert!((ea.depth - eb.depth).abs() < 1e-9);
        }
    }

    #[test]
    fn zbuffer_keeps_minimum_depth() {
        let cam = cam();
        let proj = SparseDepthProjection {
            entries: vec![
                ProjectionEntry {
                    u: 10,
                    v: 20,
                    depth: 9.0,
                    source_index: 0,
                },
                ProjectionEntry {
                    u: 10,
                    v: 20,
                    depth: 7.0,
                    source_index: 1,
                },
            ],
            ..Default::default()
        };
        let img = build_sparse_depth_map(&proj, &cam);
        assert_eq!(img.get(10, 20), Some(7.0));
        assert_eq!(img.valid_count(), 1);
    }

    #[test]
    fn empty_projection_gives_all_invalid_image() {
        let img = build_sparse_depth_map(&SparseDepthProjection::<f64>::default(), &cam());
        assert_eq!(img.valid_count(), 0);
    }

    #[test]
    fn raster_matches_group_by_min_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let cam = cam();
        let entries: Vec<ProjectionEntry<f64>> = (0..500)
            .map(|i| ProjectionEntry {
                u: rng.random_range(0..40),
                v: rng.random_range(0..30),
                depth: rng.random_range(0.5..60.0),
                source_index: i,
            })
            .collect();
        let proj = SparseDepthProjection {
            entries: entries.clone(),
            ..Default::default()
        };
        let img = build_sparse_depth_map(&proj, &cam);

        let mut expected: std::collections::HashMap<(usize, usize), f64> = Default::default();
        for e in &entries {
            let slot = expected.entry((e.u, e.v)).or_insert(f64::INFINITY);
            *slot = slot.min(e.depth);
        }
        assert_eq!(img.valid_count(), expected.len());
        assert!(img.valid_count() <= proj.entries.len());
        for ((u, v), d) in expected {
            assert_eq!(img.get(u, v), Some(d));
        }
    }

    #[test]
    fn range_mask_examples() {
        let mut img = DepthImage::new_invalid(4, 1);
        img.set(0, 0, 150.0);
        img.set(1, 0, 50.0);
        img.set(2, 0, 100.0); // boundary: kept (lo, hi] includes hi
        let out = range_valid_mask(&img, 0.0, 100.0).unwrap();
        assert_eq!(out.get(0, 0), None);
        assert_eq!(out.get(1, 0), Some(50.0));
        assert_eq!(out.get(2, 0), Some(100.0));
        assert_eq!(out.get(3, 0), None);
    }

    #[test]
    fn range_mask_matches_elementwise_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let img = DepthImage::from_fn(30, 20, |_, _| {
            rng.random_bool(0.7)
                .then(|| rng.random_range(0.01..200.0))
        });
        let out = range_valid_mask(&img, 5.0, 120.0).unwrap();
        for v in 0..20 {
            for u in 0..30 {
                let expected = img.get(u, v).filter(|&d| d > 5.0 && d <= 120.0);
                assert_eq!(out.get(u, v), expected);
            }
        }
    }

    #[test]
    fn range_mask_rejects_bad_bounds() {
        let img = DepthImage::<f64>::new_invalid(2, 2);
        assert!(matches!(
            range_valid_mask(&img, 10.0, 10.0),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn projection_range_filter_keeps_half_open_interval() {
        let entry = |depth: f64, source_index: usize| ProjectionEntry {
            u: source_index,
            v: 0,
            depth,
            source_index,
        };
        let proj = SparseDepthProjection {
            entries: vec![entry(5.0, 0), entry(100.0, 1), entry(150.0, 2), entry(0.5, 3)],
            dropped_behind: 2,
            dropped_off_image: 1,
        };
        let out = filter_projection_range(&proj, 1.0, 100.0).unwrap();
        assert_eq!(
            out.entries.iter().map(|e| e.source_index).collect::<Vec<_>>(),
            vec![0, 1],
            "5 m kept, 100 m boundary kept, 150 m and 0.5 m dropped"
        );
        assert_eq!(out.dropped_behind, 2);
        assert_eq!(out.dropped_off_image, 1);
        assert!(matches!(
            filter_projection_range(&proj, 7.0, 7.0),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn camera_rejects_bad_parameters() {
        assert!(CameraModel::new(0.0, 500.0, 320.0, 240.0, 640, 480).is_err());
        assert!(CameraModel::new(500.0, 500.0, 640.0, 240.0, 640, 480).is_err());
        assert!(CameraModel::new(500.0, 500.0, 320.0, -1.0, 640, 480).is_err());
        assert!(CameraModel::<f64>::new(500.0, 500.0, 0.0, 0.0, 0, 480).is_err());
    }

    #[test]
    fn transform_rejects_non_rotations() {
        // Scaled rows: not orthonormal.
        let bad = [[2.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(RigidTransform::new(bad, [0.0; 3]).is_err());
        // Reflection: determinant -1.
        let refl = [[-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(RigidTransform::new(refl, [0.0; 3]).is_err());
    }

    #[test]
    fn inverse_round_trips_points() {
        let t = RigidTransform::new(rot_z(0.4), [1.0, -2.0, 3.0]).unwrap();
        let inv = t.inverse();
        let p = [0.3, 1.7, -5.0];
        let back = inv.apply(t.apply(p));
        for k in 0..3 {
            assert!((back[k] - p[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn depth_image_from_parts_validates() {
        assert!(DepthImage::from_parts(2, 2, vec![1.0; 4], vec![true; 4]).is_ok());
        assert!(DepthImage::from_parts(2, 2, vec![1.0; 3], vec![true; 4]).is_err());
        assert!(DepthImage::from_parts(2, 2, vec![0.0; 4], vec![true; 4]).is_err());
        let masked = DepthImage::from_parts(2, 2, vec![0.0; 4], vec![false; 4]).unwrap();
        assert_eq!(masked.valid_count(), 0);
    }

    #[test]
    fn depth_image_works_in_f32() {
        let mut img = DepthImage::<f32>::new_invalid(3, 2);
        img.set(2, 1, 4.5);
        assert_eq!(img.get(2, 1), Some(4.5));
        let wide: DepthImage<f64> = img.convert();
        assert_eq!(wide.get(2, 1), Some(4.5));
        assert_eq!(wide.valid_count(), 1);
    }
}
