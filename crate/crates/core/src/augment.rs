//! Quasi-dense radar depth augmentation.
//!
//! A single radar return is metrically reliable but covers one pixel. Each
//! return is therefore associated with an image patch around its projection
//! and a per-pixel confidence map over that patch; a pixel's quasi-dense
//! depth is the confidence-weighted average of all candidate returns whose
//! confidence exceeds a threshold `τ`:
//!
//! ```text
//! μ(x)   = { i : ŷ_i(x) > τ }
//! d_q(x) = Σ_{i∈μ} d_i · ŷ_i(x) / Σ_{i∈μ} ŷ_i(x)    (invalid if μ empty)
//! ```
//!
//! Confidence maps come either from a deterministic heuristic (a product of
//! Gaussian kernels in depth agreement and pixel distance) or from external
//! files produced by a learned association model. External maps are scored
//! against association labels derived from densified ground truth by binary
//! cross-entropy.

use crate::error::{Error, Result};
use crate::geom::{CameraModel, DepthImage, ProjectionEntry};
use crate::num::{cast, Real};

/// Image patch associated with one radar return.
///
/// The requested patch is centered on the return's projected pixel and then
/// clipped to the image, so `(u0, v0, w, h)` always lies inside the image and
/// always contains the center pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchRect {
    pub u0: usize,
    pub v0: usize,
    pub w: usize,
    pub h: usize,
    /// Pixel the patch was centered on before clipping.
    pub center_u: usize,
    pub center_v: usize,
}

impl PatchRect {
    pub fn len(&self) -> usize {
        self.w * self.h
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, u: usize, v: usize) -> bool {
        (self.u0..self.u0 + self.w).contains(&u) && (self.v0..self.v0 + self.h).contains(&v)
    }

    /// Row-major offset of an absolute pixel within the patch grid.
    pub fn offset(&self, u: usize, v: usize) -> usize {
        debug_assert!(self.contains(u, v));
        (v - self.v0) * self.w + (u - self.u0)
    }

    /// Iterate the patch pixels in row-major order as absolute coordinates.
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let rect = *self;
        (0..rect.h).flat_map(move |dv| (0..rect.w).map(move |du| (rect.u0 + du, rect.v0 + dv)))
    }

    fn fits(&self, width: usize, height: usize) -> bool {
        self.w >= 1
            && self.h >= 1
            && self.u0 + self.w <= width
            && self.v0 + self.h <= height
            && self.contains(self.center_u, self.center_v)
    }
}

/// Center a `patch_w × patch_h` rect on a projected radar return and clip it
/// to the image.
pub fn crop_patch_rect<T: Real>(
    entry: &ProjectionEntry<T>,
    patch_w: usize,
    patch_h: usize,
    cam: &CameraModel<T>,
) -> PatchRect {
    assert!(patch_w >= 1 && patch_h >= 1, "patch size must be positive");
    assert!(entry.u < cam.width && entry.v < cam.height, "entry out of bounds");
    let clip = |center: usize, size: usize, limit: usize| -> (usize, usize) {
        let lo = center as i64 - (size / 2) as i64;
        let hi = (lo + size as i64).min(limit as i64);
        let lo = lo.max(0);
        (lo as usize, (hi - lo) as usize)
    };
    let (u0, w) = clip(entry.u, patch_w, cam.width);
    let (v0, h) = clip(entry.v, patch_h, cam.height);
    PatchRect {
        u0,
        v0,
        w,
        h,
        center_u: entry.u,
        center_v: entry.v,
    }
}

/// Per-pixel association confidence of one radar return over its patch.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceMap<T: Real> {
    pub point_index: usize,
    pub rect: PatchRect,
    /// Row-major within the rect, each value in `[0, 1]`.
    values: Vec<T>,
}

impl<T: Real> ConfidenceMap<T> {
    /// Validating constructor: the grid must match the rect and every value
    /// must be a confidence in `[0, 1]`.
    pub fn new(point_index: usize, rect: PatchRect, values: Vec<T>) -> Result<Self> {
        if values.len() != rect.len() {
            return Err(Error::InputMismatch(format!(
                "{} confidence values for a {}x{} patch",
                values.len(),
                rect.w,
                rect.h
            )));
        }
        if let Some(bad) = values
            .iter()
            .find(|v| !(v.is_finite() && **v >= T::zero() && **v <= T::one()))
        {
            return Err(Error::Parameter(format!(
                "confidence {bad} outside [0, 1]"
            )));
        }
        Ok(ConfidenceMap {
            point_index,
            rect,
            values,
        })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Confidence at an absolute pixel inside the rect.
    pub fn at(&self, u: usize, v: usize) -> T {
        self.values[self.rect.offset(u, v)]
    }
}

/// Deterministic confidence provider: agreement between the aligned
/// monocular depth and the radar depth, damped by distance from the patch
/// center.
///
/// ```text
/// ŷ(x) = exp(−(d_ga(x) − d)² / 2σ_d²) · exp(−r(x)² / 2σ_uv²)
/// ```
///
/// where `r` is the pixel distance to the (pre-clip) patch center. Pixels
/// without valid aligned depth get confidence 0: with no guidance there is
/// no evidence of association.
pub fn heuristic_confidence<T: Real>(
    rect: PatchRect,
    radar_depth: T,
    guide: &DepthImage<T>,
    sigma_d: T,
    sigma_uv: T,
) -> ConfidenceMap<T> {
    assert!(sigma_d > T::zero() && sigma_uv > T::zero(), "kernel widths must be positive");
    let half: T = cast(0.5);
    let inv_d2 = half / (sigma_d * sigma_d);
    let inv_r2 = half / (sigma_uv * sigma_uv);
    let values: Vec<T> = rect
        .pixels()
        .map(|(u, v)| match guide.get(u, v) {
            None => T::zero(),
            Some(g) => {
                let dd = g - radar_depth;
                let du = cast::<T>(u as f64 - rect.center_u as f64);
                let dv = cast::<T>(v as f64 - rect.center_v as f64);
                (-(dd * dd) * inv_d2 - (du * du + dv * dv) * inv_r2).exp()
            }
        })
        .collect();
    ConfidenceMap::new(0, rect, values).expect("kernel values lie in [0, 1]")
}

/// Confidence-weighted average of candidate radar depths per pixel.
///
/// `depths` is indexed by `point_index`; only indices referenced by `maps`
/// are read. Accumulation runs in ascending `point_index` order, so the
/// result is bit-identical under any permutation of `maps`.
pub fn quasi_dense_depth<T: Real>(
    maps: &[ConfidenceMap<T>],
    depths: &[T],
    tau: T,
    width: usize,
    height: usize,
) -> Result<DepthImage<T>> {
    if !(tau > T::zero() && tau < T::one()) {
        return Err(Error::Parameter(format!(
            "confidence threshold must lie in (0, 1), got {tau}"
        )));
    }
    let mut order: Vec<usize> = (0..maps.len()).collect();
    order.sort_by_key(|&i| maps[i].point_index);
    for pair in order.windows(2) {
        if maps[pair[0]].point_index == maps[pair[1]].point_index {
            return Err(Error::InputMismatch(format!(
                "two confidence maps for point {}",
                maps[pair[0]].point_index
            )));
        }
    }

    let mut num = vec![T::zero(); width * height];
    let mut den = vec![T::zero(); width * height];
    for &mi in &order {
        let map = &maps[mi];
        if !map.rect.fits(width, height) {
            return Err(Error::InputMismatch(format!(
                "confidence rect ({}, {}) {}x{} outside {width}x{height} image",
                map.rect.u0, map.rect.v0, map.rect.w, map.rect.h
            )));
        }
        let d = *depths.get(map.point_index).ok_or_else(|| {
            Error::InputMismatch(format!(
                "confidence map references point {} but only {} depths given",
                map.point_index,
                depths.len()
            ))
        })?;
        if !(d.is_finite() && d > T::zero()) {
            return Err(Error::DegenerateInput(format!(
                "point {} has non-positive depth {d}",
                map.point_index
            )));
        }
        for ((u, v), &y) in map.rect.pixels().zip(map.values()) {
            if y > tau {
                let i = v * width + u;
                num[i] += d * y;
                den[i] += y;
            }
        }
    }

    Ok(DepthImage::from_fn(width, height, |u, v| {
        let i = v * width + u;
        (den[i] > T::zero()).then(|| num[i] / den[i])
    }))
}

/// Ground-truth association state of one patch pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    /// Densified ground truth within tolerance of the radar depth.
    Positive,
    /// Valid ground truth, outside tolerance.
    Negative,
    /// No densified ground truth at this pixel.
    Ignore,
}

/// Supervision labels for one radar return's patch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssociationLabels {
    pub point_index: usize,
    pub rect: PatchRect,
    /// Row-major within the rect.
    pub labels: Vec<Label>,
}

/// Label each patch pixel by whether the densified ground truth agrees with
/// the radar depth to within `tol` (strictly); pixels without ground truth
/// are ignored.
pub fn make_association_labels<T: Real>(
    d_int: &DepthImage<T>,
    rect: PatchRect,
    point_index: usize,
    radar_depth: T,
    tol: T,
) -> Result<AssociationLabels> {
    if !(tol > T::zero()) {
        return Err(Error::Parameter(format!(
            "label tolerance must be positive, got {tol}"
        )));
    }
    if !rect.fits(d_int.width(), d_int.height()) {
        return Err(Error::InputMismatch(format!(
            "patch ({}, {}) {}x{} outside {}x{} ground truth",
            rect.u0,
            rect.v0,
            rect.w,
            rect.h,
            d_int.width(),
            d_int.height()
        )));
    }
    let labels = rect
        .pixels()
        .map(|(u, v)| match d_int.get(u, v) {
            None => Label::Ignore,
            Some(g) if (g - radar_depth).abs() < tol => Label::Positive,
            Some(_) => Label::Negative,
        })
        .collect();
    Ok(AssociationLabels {
        point_index,
        rect,
        labels,
    })
}

/// Mean binary cross-entropy of a confidence map against labels, over
/// non-ignored pixels, with predictions clamped to `[eps, 1−eps]`.
pub fn bce_score<T: Real>(
    conf: &ConfidenceMap<T>,
    labels: &AssociationLabels,
    eps: T,
) -> Result<T> {
    if !(eps > T::zero() && eps <= cast::<T>(1e-3)) {
        return Err(Error::Parameter(format!(
            "bce eps must lie in (0, 1e-3], got {eps}"
        )));
    }
    if conf.rect != labels.rect {
        return Err(Error::InputMismatch(format!(
            "confidence rect {:?} differs from label rect {:?}",
            conf.rect, labels.rect
        )));
    }
    let mut sum = T::zero();
    let mut count = 0usize;
    for (&y_hat, &label) in conf.values().iter().zip(&labels.labels) {
        let y_hat = y_hat.max(eps).min(T::one() - eps);
        match label {
            Label::Positive => sum -= y_hat.ln(),
            Label::Negative => sum -= (T::one() - y_hat).ln(),
            Label::Ignore => continue,
        }
        count += 1;
    }
    if count == 0 {
        return Err(Error::UndefinedScore(
            "no labeled pixels in patch (all ignored)".into(),
        ));
    }
    Ok(sum / cast::<T>(count as f64))
}
