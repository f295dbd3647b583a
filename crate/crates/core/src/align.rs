//! Global scale alignment.
//!
//! Monocular depth is recovered only up to scale; radar returns are metric.
//! This module fits the single factor `s` minimizing the robust objective
//!
//! ```text
//! F(s) = Σ_i |s · d_m(u_i, v_i) − d_i|
//! ```
//!
//! over all radar returns that land on a valid monocular pixel, using
//! bounded Brent minimization. The aligned depth is `d_ga = s · d_m` and its
//! inverse `z_ga = 1 / d_ga`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{DepthImage, InverseDepthImage, SparseDepthProjection};
use crate::num::{cast, to_f64, Real};

/// Hard cap on Brent iterations; the bracket shrinks by at least the golden
/// ratio per step, so this is generous for any practical tolerance.
pub const BRENT_MAX_ITERS: usize = 200;

/// Outcome of a bounded scalar minimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrentResult<T> {
    pub xmin: T,
    pub fmin: T,
    pub iterations: usize,
}

/// Minimize `f` on `[lo, hi]` by Brent's method (golden-section steps with
/// opportunistic parabolic interpolation).
///
/// `tol` is a relative x-tolerance; the search stops once the bracket around
/// the best point shrinks below `2·(tol·|x| + ε)` or after
/// [`BRENT_MAX_ITERS`] iterations, whichever comes first. Any non-finite
/// function value aborts with a numeric error.
pub fn brent_minimize<T: Real>(
    mut f: impl FnMut(T) -> T,
    lo: T,
    hi: T,
    tol: T,
) -> Result<BrentResult<T>> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::Parameter(format!(
            "brent bracket must satisfy lo < hi, got [{lo}, {hi}]"
        )));
    }
    if !(tol > T::zero()) {
        return Err(Error::Parameter(format!("brent tol must be positive, got {tol}")));
    }
    let mut eval = |x: T| -> Result<T> {
        let y = f(x);
        if !y.is_finite() {
            return Err(Error::Numeric(format!("objective is {y} at x = {x}")));
        }
        Ok(y)
    };

    let golden: T = cast(0.381_966_011_250_105_2); // 2 - φ
    let half: T = cast(0.5);
    let two: T = cast(2.0);
    // Absolute floor keeping the tolerance meaningful when x crosses zero.
    let zeps = T::epsilon() * cast::<T>(100.0);

    let (mut a, mut b) = (lo, hi);
    let mut x = a + golden * (b - a);
    let mut w = x;
    let mut v = x;
    let mut fx = eval(x)?;
    let mut fw = fx;
    let mut fv = fx;

    let mut d = T::zero(); // most recent step
    let mut e = T::zero(); // step before last

    for iteration in 0..BRENT_MAX_ITERS {
        let m = half * (a + b);
        let tol1 = tol * x.abs() + zeps;
        let tol2 = two * tol1;
        if (x - m).abs() <= tol2 - half * (b - a) {
            return Ok(BrentResult {
                xmin: x,
                fmin: fx,
                iterations: iteration,
            });
        }

        let mut golden_step = true;
        if e.abs() > tol1 {
            // Fit a parabola through (x, w, v) and consider its vertex.
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = two * (q - r);
            if q > T::zero() {
                p = -p;
            }
            q = q.abs();
            let e_prev = e;
            e = d;
            // Accept only if the vertex falls inside the bracket and the
            // step is shorter than half the step before last.
            if p.abs() < (half * q * e_prev).abs()
                && p > q * (a - x)
                && p < q * (b - x)
            {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if m >= x { tol1 } else { -tol1 };
                }
                golden_step = false;
            }
        }
        if golden_step {
            e = if x < m { b - x } else { a - x };
            d = golden * e;
        }

        let u = if d.abs() >= tol1 {
            x + d
        } else if d >= T::zero() {
            x + tol1
        } else {
            x - tol1
        };
        let fu = eval(u)?;

        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u >= x {
                b = u;
            } else {
                a = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Ok(BrentResult {
        xmin: x,
        fmin: fx,
        iterations: BRENT_MAX_ITERS,
    })
}

/// How the search bracket for the scale is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundsPolicy {
    /// `[q1/10, q99·10]` of the per-sample ratios `radar_depth / mono_depth`,
    /// falling back to `[1e-3, 1e3]` when fewer than 5 samples exist. The
    /// widening guarantees the L1 minimizer is interior.
    RatioPercentiles,
    /// Fixed bracket, `0 < lo < hi`.
    Fixed { lo: f64, hi: f64 },
}

/// Space in which the L1 objective is evaluated. Depth is the default;
/// inverse depth exists for ablation only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlignSpace {
    Depth,
    InverseDepth,
}

/// Fitted global scale and diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    /// Fitted scale `s_g` (dimensionless).
    pub s_g: f64,
    /// Final objective value (meters in depth space, 1/m in inverse space).
    pub objective: f64,
    /// Number of radar samples that overlapped a valid monocular pixel.
    pub n_samples: usize,
    /// Bracket `(lo, hi)` the minimizer searched.
    pub bounds: (f64, f64),
}

/// Knobs for [`align_global`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignOptions {
    pub bounds_policy: BoundsPolicy,
    /// Relative Brent tolerance on the scale.
    pub brent_tol: f64,
    pub space: AlignSpace,
}

impl Default for AlignOptions {
    fn default() -> Self {
        AlignOptions {
            bounds_policy: BoundsPolicy::RatioPercentiles,
            brent_tol: 1e-9,
            space: AlignSpace::Depth,
        }
    }
}

/// Paired samples `(mono, radar_depth)` at radar pixels with valid mono.
fn collect_samples<T: Real>(
    mono: &DepthImage<T>,
    radar: &SparseDepthProjection<T>,
) -> Result<Vec<(T, T)>> {
    let samples: Vec<(T, T)> = radar
        .entries
        .iter()
        .filter_map(|e| mono.get(e.u, e.v).map(|m| (m, e.depth)))
        .collect();
    if samples.is_empty() {
        return Err(Error::EmptyOverlap(format!(
            "none of the {} radar pixels has valid monocular depth",
            radar.entries.len()
        )));
    }
    Ok(samples)
}

fn objective_over<T: Real>(samples: &[(T, T)], s: T) -> T {
    samples
        .iter()
        .fold(T::zero(), |acc, &(m, d)| acc + (s * m - d).abs())
}

/// The masked L1 alignment objective `Σ |s·mono − radar|` over radar pixels
/// with valid monocular depth.
pub fn alignment_objective<T: Real>(
    s: T,
    mono: &DepthImage<T>,
    radar: &SparseDepthProjection<T>,
) -> Result<T> {
    debug_assert!(s > T::zero(), "scale must be positive");
    Ok(objective_over(&collect_samples(mono, radar)?, s))
}

/// Linear-interpolated percentile of already-sorted data, `p` in [0, 100].
fn percentile_sorted<T: Real>(sorted: &[T], p: f64) -> T {
    debug_assert!(!sorted.is_empty());
    let pos = p / 100.0 * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = cast::<T>(pos - i as f64);
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

fn bracket_from_policy<T: Real>(samples: &[(T, T)], policy: BoundsPolicy) -> Result<(T, T)> {
    match policy {
        BoundsPolicy::Fixed { lo, hi } => {
            if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo < hi) {
                return Err(Error::Parameter(format!(
                    "fixed scale bounds must satisfy 0 < lo < hi, got ({lo}, {hi})"
                )));
            }
            Ok((cast(lo), cast(hi)))
        }
        BoundsPolicy::RatioPercentiles => {
            if samples.len() < 5 {
                return Ok((cast(1e-3), cast(1e3)));
            }
            let mut ratios: Vec<T> = samples.iter().map(|&(m, d)| d / m).collect();
            ratios.sort_by(|a, b| a.partial_cmp(b).expect("finite ratios"));
            let ten = cast::<T>(10.0);
            let lo = percentile_sorted(&ratios, 1.0) / ten;
            let hi = percentile_sorted(&ratios, 99.0) * ten;
            Ok((lo, hi))
        }
    }
}

/// Fit the global scale and produce the aligned depth map and its inverse.
///
/// Radar entries on invalid monocular pixels are skipped; if none overlap,
/// the frame cannot be aligned and an `alignment-unavailable` error is
/// returned (the pipeline reports such frames as skipped). The caller is
/// expected to have range-filtered the radar projection beforehand.
pub fn align_global<T: Real>(
    mono: &DepthImage<T>,
    radar: &SparseDepthProjection<T>,
    opts: &AlignOptions,
) -> Result<(AlignmentResult, DepthImage<T>, InverseDepthImage<T>)> {
    let depth_samples = collect_samples(mono, radar).map_err(|e| match e {
        Error::EmptyOverlap(msg) => Error::AlignmentUnavailable(msg),
        other => other,
    })?;

    // In inverse space the same machinery runs on reciprocal samples; the
    // fitted factor then scales inverse depth, so the depth scale is its
    // reciprocal.
    let samples: Vec<(T, T)> = match opts.space {
        AlignSpace::Depth => depth_samples.clone(),
        AlignSpace::InverseDepth => depth_samples
            .iter()
            .map(|&(m, d)| (T::one() / m, T::one() / d))
            .collect(),
    };

    let (lo, hi) = bracket_from_policy(&samples, opts.bounds_policy)?;
    let brent = brent_minimize(
        |s| objective_over(&samples, s),
        lo,
        hi,
        cast::<T>(opts.brent_tol),
    )?;

    let s_g = match opts.space {
        AlignSpace::Depth => brent.xmin,
        AlignSpace::InverseDepth => T::one() / brent.xmin,
    };
    let result = AlignmentResult {
        s_g: to_f64(s_g),
        objective: to_f64(brent.fmin),
        n_samples: samples.len(),
        bounds: (to_f64(lo), to_f64(hi)),
    };

    let mut d_ga = DepthImage::new_invalid(mono.width(), mono.height());
    let mut z_ga = InverseDepthImage::new_invalid(mono.width(), mono.height());
    for (u, v, m) in mono.iter_valid() {
        let d = s_g * m;
        d_ga.set(u, v, d);
        z_ga.set(u, v, T::one() / d);
    }
    Ok((result, d_ga, z_ga))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::ProjectionEntry;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Closed-form minimizer of Σ m_i·|s − d_i/m_i|: the weighted median of
    /// the ratios d_i/m_i with weights m_i.
    fn weighted_median_scale(samples: &[(f64, f64)]) -> f64 {
        let mut pairs: Vec<(f64, f64)> = samples.iter().map(|&(m, d)| (d / m, m)).collect();
        pairs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let half: f64 = pairs.iter().map(|p| p.1).sum::<f64>() / 2.0;
        let mut acc = 0.0;
        for &(ratio, w) in &pairs {
            acc += w;
            if acc >= half {
                return ratio;
            }
        }
        pairs.last().unwrap().0
    }

    fn proj_from_samples(samples: &[(f64, f64)]) -> (DepthImage<f64>, SparseDepthProjection<f64>) {
        let width = samples.len();
        let mut mono = DepthImage::new_invalid(width, 1);
        let mut proj = SparseDepthProjection::default();
        for (i, &(m, d)) in samples.iter().enumerate() {
            mono.set(i, 0, m);
            proj.entries.push(ProjectionEntry {
                u: i,
                v: 0,
                depth: d,
                source_index: i,
            });
        }
        (mono, proj)
    }

    #[test]
    fn brent_finds_quadratic_minimum() {
        let r = brent_minimize(|x: f64| (x - 3.0) * (x - 3.0), 0.0, 10.0, 1e-10).unwrap();
        assert!((r.xmin - 3.0).abs() < 1e-8, "{r:?}");
        assert!(r.iterations < BRENT_MAX_ITERS);
    }

    #[test]
    fn brent_finds_v_shape_kink() {
        let r = brent_minimize(|x: f64| (x - 2.5).abs(), 0.0, 10.0, 1e-9).unwrap();
        assert!((r.xmin - 2.5).abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn brent_handles_minimum_at_boundary() {
        let r = brent_minimize(|x: f64| x, 1.0, 4.0, 1e-9).unwrap();
        assert!((r.xmin - 1.0).abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn brent_rejects_bad_bracket_and_nan() {
        assert!(brent_minimize(|x: f64| x, 2.0, 2.0, 1e-9).is_err());
        assert!(brent_minimize(|x: f64| x, 3.0, 2.0, 1e-9).is_err());
        let err = brent_minimize(|_: f64| f64::NAN, 0.0, 1.0, 1e-9).unwrap_err();
        assert_eq!(err.category(), "numeric");
    }

    #[test]
    fn brent_works_in_f32() {
        let r = brent_minimize(|x: f32| (x - 1.25).abs(), 0.0, 8.0, 1e-6).unwrap();
        assert!((r.xmin - 1.25).abs() < 1e-4, "{r:?}");
    }

    #[test]
    fn objective_zero_on_perfect_fit() {
        let samples = [(3.0, 3.0), (7.5, 7.5), (12.0, 12.0)];
        let (mono, proj) = proj_from_samples(&samples);
        assert_eq!(alignment_objective(1.0, &mono, &proj).unwrap(), 0.0);
    }

    #[test]
    fn objective_single_pixel() {
        let (mono, proj) = proj_from_samples(&[(5.0, 10.0)]);
        assert_eq!(alignment_objective(1.0, &mono, &proj).unwrap(), 5.0);
    }

    #[test]
    fn objective_matches_direct_summation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let samples: Vec<(f64, f64)> = (0..100)
            .map(|_| (rng.random_range(0.5..20.0), rng.random_range(1.0..60.0)))
            .collect();
        let (mono, proj) = proj_from_samples(&samples);
        for _ in 0..20 {
            let s = rng.random_range(0.1..5.0);
            let expected: f64 = samples.iter().map(|&(m, d)| (s * m - d).abs()).sum();
            let got = alignment_objective(s, &mono, &proj).unwrap();
            assert!((got - expected).abs() <= 1e-9, "{got} vs {expected}");
        }
    }

    #[test]
    fn objective_skips_invalid_mono_and_errors_on_no_overlap() {
        let (mut mono, proj) = proj_from_samples(&[(5.0, 10.0), (4.0, 8.0)]);
        mono.invalidate(0, 0);
        assert_eq!(alignment_objective(2.0, &mono, &proj).unwrap(), 0.0);
        mono.invalidate(1, 0);
        let err = alignment_objective(2.0, &mono, &proj).unwrap_err();
        assert_eq!(err.category(), "empty-overlap");
    }

    #[test]
    fn align_recovers_exact_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let samples: Vec<(f64, f64)> = (0..40)
            .map(|_| {
                let gt = rng.random_range(2.0..50.0);
                (0.5 * gt, gt)
            })
            .collect();
        let (mono, proj) = proj_from_samples(&samples);
        let (res, d_ga, z_ga) = align_global(&mono, &proj, &AlignOptions::default()).unwrap();
        assert!((res.s_g - 2.0).abs() < 1e-6 * 2.0, "{res:?}");
        assert_eq!(res.n_samples, 40);
        assert!(res.bounds.0 <= res.s_g && res.s_g <= res.bounds.1);
        for (u, v, d) in d_ga.iter_valid() {
            assert!((d - 2.0 * mono.get(u, v).unwrap()).abs() < 1e-6 * d);
            assert!((d * z_ga.get(u, v).unwrap() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn align_single_sample_hits_ratio() {
        let (mono, proj) = proj_from_samples(&[(4.0, 10.0)]);
        let (res, _, _) = align_global(&mono, &proj, &AlignOptions::default()).unwrap();
        assert!((res.s_g - 2.5).abs() < 1e-6 * 2.5, "{res:?}");
        // Fallback bracket: fewer than 5 samples.
        assert_eq!(res.bounds, (1e-3, 1e3));
    }

    #[test]
    fn align_matches_weighted_median_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..50 {
            let samples: Vec<(f64, f64)> = (0..rng.random_range(5..80))
                .map(|_| (rng.random_range(0.5..20.0), rng.random_range(1.0..60.0)))
                .collect();
            let (mono, proj) = proj_from_samples(&samples);
            let (res, _, _) = align_global(&mono, &proj, &AlignOptions::default()).unwrap();
            let oracle = weighted_median_scale(&samples);
            assert!(
                (res.s_g - oracle).abs() <= 1e-6 * oracle.abs(),
                "{} vs oracle {oracle}",
                res.s_g
            );
        }
    }

    #[test]
    fn align_is_robust_to_gross_outliers() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let s_true = 2.0;
        let samples: Vec<(f64, f64)> = (0..100)
            .map(|i| {
                let m = rng.random_range(1.0..30.0);
                let outlier = if i < 10 { 5.0 } else { 1.0 };
                (m, s_true * m * outlier)
            })
            .collect();
        let (mono, proj) = proj_from_samples(&samples);
        let (res, _, _) = align_global(&mono, &proj, &AlignOptions::default()).unwrap();
        assert!(
            (res.s_g - s_true).abs() / s_true < 0.05,
            "scale {} too far from {s_true}",
            res.s_g
        );
    }

    #[test]
    fn align_scale_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let samples: Vec<(f64, f64)> = (0..60)
            .map(|_| (rng.random_range(0.5..10.0), rng.random_range(1.0..50.0)))
            .collect();
        let (mono, proj) = proj_from_samples(&samples);
        let (base, d_base, _) = align_global(&mono, &proj, &AlignOptions::default()).unwrap();
        for k in [0.25, 3.0, 17.5] {
            let scaled: Vec<(f64, f64)> = samples.iter().map(|&(m, d)| (k * m, d)).collect();
            let (mono_k, _) = proj_from_samples(&scaled);
            let (res, d_k, _) = align_global(&mono_k, &proj, &AlignOptions::default()).unwrap();
            assert!(
                (res.s_g - base.s_g / k).abs() <= 1e-6 * (base.s_g / k),
                "k={k}: {} vs {}",
                res.s_g,
                base.s_g / k
            );
            for (u, v, d) in d_k.iter_valid() {
                let d0 = d_base.get(u, v).unwrap();
                assert!((d - d0).abs() <= 1e-6 * d0, "k={k}: {d} vs {d0}");
            }
        }
    }

    #[test]
    fn align_brent_matches_grid_search_on_objective_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(36);
        let samples: Vec<(f64, f64)> = (0..50)
            .map(|_| (rng.random_range(0.5..20.0), rng.random_range(1.0..60.0)))
            .collect();
        let (mono, proj) = proj_from_samples(&samples);
        let (res, _, _) = align_global(&mono, &proj, &AlignOptions::default()).unwrap();
        let (lo, hi) = res.bounds;
        // Coarse grid here; the full 10^7-point sweep runs in the acceptance
        // suite.
        let n = 100_000;
        let mut best = f64::INFINITY;
        for i in 0..=n {
            let s = lo + (hi - lo) * i as f64 / n as f64;
            best = best.min(samples.iter().map(|&(m, d)| (s * m - d).abs()).sum());
        }
        assert!(
            res.objective <= best + 1e-6 * best.abs().max(1.0),
            "brent {} worse than grid {best}",
            res.objective
        );
    }

    #[test]
    fn align_inverse_space_recovers_exact_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let samples: Vec<(f64, f64)> = (0..30)
            .map(|_| {
                let gt = rng.random_range(2.0..40.0);
                (0.25 * gt, gt)
            })
            .collect();
        let (mono, proj) = proj_from_samples(&samples);
        let opts = AlignOptions {
            space: AlignSpace::InverseDepth,
            ..AlignOptions::default()
        };
        let (res, _, _) = align_global(&mono, &proj, &opts).unwrap();
        assert!((res.s_g - 4.0).abs() < 1e-5 * 4.0, "{res:?}");
    }

    #[test]
    fn align_without_overlap_is_unavailable() {
        let mono = DepthImage::<f64>::new_invalid(4, 1);
        let (_, proj) = proj_from_samples(&[(5.0, 10.0)]);
        let err = align_global(&mono, &proj, &AlignOptions::default()).unwrap_err();
        assert_eq!(err.category(), "alignment-unavailable");
    }

    #[test]
    fn fixed_bounds_are_validated_and_respected() {
        let (mono, proj) = proj_from_samples(&[(5.0, 10.0)]);
        let bad = AlignOptions {
            bounds_policy: BoundsPolicy::Fixed { lo: 2.0, hi: 1.0 },
            ..AlignOptions::default()
        };
        assert!(align_global(&mono, &proj, &bad).is_err());
        // The true minimizer (2.0) lies outside this bracket; the result
        // must stay inside it.
        let clamped = AlignOptions {
            bounds_policy: BoundsPolicy::Fixed { lo: 3.0, hi: 4.0 },
            ..AlignOptions::default()
        };
        let (res, _, _) = align_global(&mono, &proj, &clamped).unwrap();
        assert!(res.s_g >= 3.0 - 1e-9 && res.s_g <= 4.0 + 1e-9, "{res:?}");
    }
}
