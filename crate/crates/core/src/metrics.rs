//! Depth evaluation metrics over range buckets.
//!
//! Predictions are scored against sparse ground truth on the pixels where
//! both are valid and the truth lies inside a range bucket `(0, cap]`. Seven
//! standard metrics are reported: MAE and RMSE on depth, iMAE and iRMSE on
//! inverse depth, the relative errors AbsRel and SqRel, and the inlier ratio
//! δ₁. Ground-truth pixels whose prediction is missing are excluded from the
//! averages and surfaced through a coverage fraction instead of a penalty.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::DepthImage;
use crate::num::{to_f64, Real};

/// Depth errors are reported in millimeters (inputs are meters).
pub const DEPTH_ERROR_SCALE: f64 = 1000.0;

/// Inverse-depth errors are reported in 1/kilometers (inputs are 1/meters).
pub const INVERSE_ERROR_SCALE: f64 = 1000.0;

/// SqRel is reported in millimeters: `mean((p − g)² / g)` with both depths in
/// meters has meter units and is scaled like the other depth errors.
pub const SQREL_SCALE: f64 = 1000.0;

/// δ₁ counts pixels whose depth ratio lies strictly below this threshold.
pub const DELTA1_THRESHOLD: f64 = 1.25;

/// Evaluation summary for one range bucket.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Mean absolute depth error, millimeters.
    pub mae: f64,
    /// Root-mean-square depth error, millimeters.
    pub rmse: f64,
    /// Mean absolute inverse-depth error, 1/km.
    pub imae: f64,
    /// Root-mean-square inverse-depth error, 1/km.
    pub irmse: f64,
    /// Mean relative error `|p − g| / g`, dimensionless.
    pub absrel: f64,
    /// Mean squared-relative error `(p − g)² / g`, millimeters.
    pub sqrel: f64,
    /// Fraction of pixels with `max(p/g, g/p) <` [`DELTA1_THRESHOLD`].
    pub delta1: f64,
    /// Pixels actually evaluated.
    pub n_pixels: usize,
    /// Upper range bound of the bucket, meters.
    pub range_cap: f64,
    /// Evaluated pixels over in-range ground-truth pixels: missing
    /// predictions lower coverage instead of entering the averages.
    pub coverage: f64,
}

/// Scores a prediction against ground truth inside the range bucket
/// `(0, range_cap]`.
///
/// The evaluation set is every pixel where the truth is valid and at most
/// `range_cap` meters and the prediction is valid. Sums run in `f64`
/// regardless of the image scalar type.
pub fn compute_metrics<T: Real>(
    pred: &DepthImage<T>,
    gt: &DepthImage<T>,
    range_cap: f64,
) -> Result<MetricsReport> {
    if !pred.same_shape(gt) {
        return Err(Error::InputMismatch(format!(
            "prediction is {}x{} but ground truth is {}x{}",
            pred.width(),
            pred.height(),
            gt.width(),
            gt.height()
        )));
    }
    if !range_cap.is_finite() || range_cap <= 0.0 {
        return Err(Error::Parameter(format!(
            "range cap must be finite and > 0, got {range_cap}"
        )));
    }

    let mut n = 0usize;
    let mut in_range = 0usize;
    let mut abs_sum = 0.0f64;
    let mut sq_sum = 0.0f64;
    let mut iabs_sum = 0.0f64;
    let mut isq_sum = 0.0f64;
    let mut absrel_sum = 0.0f64;
    let mut sqrel_sum = 0.0f64;
    let mut inliers = 0usize;
    for (x, y, g) in gt.iter_valid() {
        let g = to_f64(g);
        if g > range_cap {
            continue;
        }
        in_range += 1;
        let Some(p) = pred.get(x, y) else { continue };
        let p = to_f64(p);
        n += 1;
        let e = p - g;
        abs_sum += e.abs();
        sq_sum += e * e;
        let ie = 1.0 / p - 1.0 / g;
        iabs_sum += ie.abs();
        isq_sum += ie * ie;
        absrel_sum += e.abs() / g;
        sqrel_sum += e * e / g;
        if (p / g).max(g / p) < DELTA1_THRESHOLD {
            inliers += 1;
        }
    }
    if n == 0 {
        return Err(Error::UndefinedMetrics(format!(
            "no pixel has valid truth within {range_cap} m and a valid prediction"
        )));
    }
    let nf = n as f64;
    Ok(MetricsReport {
        mae: abs_sum / nf * DEPTH_ERROR_SCALE,
        rmse: (sq_sum / nf).sqrt() * DEPTH_ERROR_SCALE,
        imae: iabs_sum / nf * INVERSE_ERROR_SCALE,
        irmse: (isq_sum / nf).sqrt() * INVERSE_ERROR_SCALE,
        absrel: absrel_sum / nf,
        sqrel: sqrel_sum / nf * SQREL_SCALE,
        delta1: inliers as f64 / nf,
        n_pixels: n,
        range_cap,
        coverage: n as f64 / in_range as f64,
    })
}
