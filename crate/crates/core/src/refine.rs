//! Dense scale-map refinement.
//!
//! Global alignment leaves a single scalar between the monocular prediction
//! and metric truth; locally the mono map is still warped. This module
//! completes the correction by estimating a per-pixel *inverse* scale field
//! `u = 1/ŝ` anchored on the quasi-dense radar depth and smooth elsewhere:
//!
//! ```text
//! u_q(x) = d̂_ga(x) / d_q(x)                      (observed pixels)
//! E(u)   = Σ_observed |u − u_q|
//!        + λ_smooth · Σ_x [ wx(x)·(u(x+1,y) − u(x,y))²
//!                         + wy(x)·(u(x,y+1) − u(x,y))² ]
//! d̂(x)   = (1/u(x)) / ẑ_ga(x)
//! ```
//!
//! The smoothness weights `wx, wy = exp(−β·|∇d̂_ga|)` are edge-aware: depth
//! discontinuities in the globally aligned map relax the coupling so the
//! solved field may jump where the scene does. The L1 data term is minimized
//! by iteratively reweighted least squares (Huberized with a small `δ`), each
//! outer iteration solving a symmetric positive-definite linear system with
//! conjugate gradients. The residual map of the completed field is `r = u − 1`
//! (no correction leaves `u ≡ 1`, i.e. the globally aligned depth).
//!
//! An evaluation-only loss report mirrors the training objective the field
//! replaces: L1 depth terms against interpolated and raw ground truth plus an
//! edge-aware gradient penalty on the composed depth.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{DepthImage, InverseDepthImage};
use crate::num::{cast, to_f64, Real};

/// Guide depths at or below this value (meters) are too small to divide by;
/// the pixel is demoted to *filled* instead of producing an extreme ratio.
pub const GUIDE_DEPTH_FLOOR: f64 = 1e-3;

/// Huber knee `δ` for the IRLS treatment of the L1 data term.
pub const HUBER_DELTA: f64 = 1e-3;

/// Inverse scales at or below this floor are treated as "no depth" when
/// composing metric depth (they would map to kilometers-scale output).
pub const U_FLOOR: f64 = 1e-6;

/// How a scale-field pixel got its value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// Anchored by a quasi-dense radar observation.
    Observed,
    /// No observation; holds the neutral fill value `1`.
    Filled,
    /// Produced by the smoothness solver.
    Solved,
}

/// Dense per-pixel inverse scale field `u = 1/ŝ` with provenance.
///
/// Values are finite and `≥ 0` everywhere; there is no invalid mask — pixels
/// without data hold the neutral value `1` and are marked [`Provenance::Filled`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleField<T> {
    width: usize,
    height: usize,
    values: Vec<T>,
    provenance: Vec<Provenance>,
}

impl<T: Real> ScaleField<T> {
    /// Builds a field from raw parts, validating shape and value domain.
    pub fn from_parts(
        width: usize,
        height: usize,
        values: Vec<T>,
        provenance: Vec<Provenance>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Parameter("scale field dimensions must be >= 1".into()));
        }
        if values.len() != width * height || provenance.len() != values.len() {
            return Err(Error::Parameter(format!(
                "scale field buffers must hold {}x{} = {} entries, got {} values / {} provenance",
                width,
                height,
                width * height,
                values.len(),
                provenance.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v < T::zero()) {
            return Err(Error::Parameter(format!(
                "scale values must be finite and >= 0, got {bad}"
            )));
        }
        Ok(ScaleField { width, height, values, provenance })
    }

    /// Field of the given shape holding the neutral value `1` everywhere.
    pub fn filled_ones(width: usize, height: usize) -> Result<Self> {
        ScaleField::from_parts(
            width,
            height,
            vec![T::one(); width * height],
            vec![Provenance::Filled; width * height],
        )
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at pixel `(x, y)`. Panics if out of bounds.
    pub fn value_at(&self, x: usize, y: usize) -> T {
        assert!(x < self.width && y < self.height, "pixel out of bounds");
        self.values[y * self.width + x]
    }

    /// Provenance at pixel `(x, y)`. Panics if out of bounds.
    pub fn provenance_at(&self, x: usize, y: usize) -> Provenance {
        assert!(x < self.width && y < self.height, "pixel out of bounds");
        self.provenance[y * self.width + x]
    }

    /// Row-major values.
    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Row-major provenance.
    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    pub fn observed_count(&self) -> usize {
        self.provenance
            .iter()
            .filter(|p| **p == Provenance::Observed)
            .count()
    }

    /// Residual correction `r = u − 1` (zero where the field is neutral).
    pub fn residuals(&self) -> Vec<T> {
        self.values.iter().map(|&u| u - T::one()).collect()
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// Per-pixel smoothness weights in `(0, 1]`.
///
/// `wx(x, y)` weights the squared difference to the *right* neighbor
/// `(x+1, y)`, `wy(x, y)` the difference to the neighbor *below* `(x, y+1)`;
/// the weights stored on the last column/row are never referenced.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothnessWeights<T> {
    width: usize,
    height: usize,
    wx: Vec<T>,
    wy: Vec<T>,
}

impl<T: Real> SmoothnessWeights<T> {
    pub fn from_parts(width: usize, height: usize, wx: Vec<T>, wy: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Parameter("weight field dimensions must be >= 1".into()));
        }
        if wx.len() != width * height || wy.len() != width * height {
            return Err(Error::Parameter(format!(
                "weight buffers must hold {}x{} = {} entries, got {} / {}",
                width,
                height,
                width * height,
                wx.len(),
                wy.len()
            )));
        }
        for w in wx.iter().chain(wy.iter()) {
            if !w.is_finite() || *w <= T::zero() || *w > T::one() {
                return Err(Error::Parameter(format!(
                    "smoothness weights must lie in (0, 1], got {w}"
                )));
            }
        }
        Ok(SmoothnessWeights { width, height, wx, wy })
    }

    /// Uniform weights of `1` (no edge information).
    pub fn uniform(width: usize, height: usize) -> Result<Self> {
        SmoothnessWeights::from_parts(
            width,
            height,
            vec![T::one(); width * height],
            vec![T::one(); width * height],
        )
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn wx_at(&self, x: usize, y: usize) -> T {
        assert!(x < self.width && y < self.height, "pixel out of bounds");
        self.wx[y * self.width + x]
    }

    pub fn wy_at(&self, x: usize, y: usize) -> T {
        assert!(x < self.width && y < self.height, "pixel out of bounds");
        self.wy[y * self.width + x]
    }

    pub fn wx(&self) -> &[T] {
        &self.wx
    }

    pub fn wy(&self) -> &[T] {
        &self.wy
    }
}

/// Builds the observed inverse scale field `u_q = d̂_ga / d_q`.
///
/// Pixels where the quasi-dense depth `d_q` is valid but the aligned guide
/// `d̂_ga` is unusable — invalid, at or below [`GUIDE_DEPTH_FLOOR`], or
/// yielding a non-finite ratio — are *demoted*: they become neutral filled
/// pixels and are counted in the returned statistic so callers can surface a
/// warning. All remaining pixels are filled with `1`.
pub fn quasi_dense_scale<T: Real>(
    dq: &DepthImage<T>,
    dga: &DepthImage<T>,
) -> Result<(ScaleField<T>, usize)> {
    if !dq.same_shape(dga) {
        return Err(Error::InputMismatch(format!(
            "quasi-dense depth is {}x{} but aligned guide is {}x{}",
            dq.width(),
            dq.height(),
            dga.width(),
            dga.height()
        )));
    }
    let floor = cast::<T>(GUIDE_DEPTH_FLOOR);
    let mut values = vec![T::one(); dq.width() * dq.height()];
    let mut provenance = vec![Provenance::Filled; values.len()];
    let mut demoted = 0usize;
    for (x, y, q) in dq.iter_valid() {
        let i = y * dq.width() + x;
        match dga.get(x, y) {
            Some(g) if g > floor => {
                let u = g / q;
                if u.is_finite() && u > T::zero() {
                    values[i] = u;
                    provenance[i] = Provenance::Observed;
                } else {
                    demoted += 1;
                }
            }
            _ => demoted += 1,
        }
    }
    let field = ScaleField::from_parts(dq.width(), dq.height(), values, provenance)?;
    Ok((field, demoted))
}

/// 3×3 Sobel kernels (correlation form, row index is `dy+1`).
const SOBEL_X: [[f64; 3]; 3] = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
const SOBEL_Y: [[f64; 3]; 3] = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];

/// Sobel gradients of a depth image with border replication.
///
/// Returns `(gx, gy, stencil_valid)`. A pixel whose (clamped) 3×3 stencil
/// touches any invalid depth gets zero gradients and `stencil_valid = false`;
/// downstream consumers either treat that as "no edge evidence" (weights) or
/// exclude the pixel (losses).
fn sobel_gradients<T: Real>(img: &DepthImage<T>) -> (Vec<f64>, Vec<f64>, Vec<bool>) {
    let (width, height) = (img.width(), img.height());
    let mut gx = vec![0.0f64; width * height];
    let mut gy = vec![0.0f64; width * height];
    let mut valid = vec![true; width * height];
    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            let mut sx = 0.0;
            let mut sy = 0.0;
            'stencil: for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let tx = (x as i64 + dx).clamp(0, width as i64 - 1) as usize;
                    let ty = (y as i64 + dy).clamp(0, height as i64 - 1) as usize;
                    match img.get(tx, ty) {
                        Some(v) => {
                            let v = to_f64(v);
                            sx += SOBEL_X[(dy + 1) as usize][(dx + 1) as usize] * v;
                            sy += SOBEL_Y[(dy + 1) as usize][(dx + 1) as usize] * v;
                        }
                        None => {
                            valid[i] = false;
                            sx = 0.0;
                            sy = 0.0;
                            break 'stencil;
                        }
                    }
                }
            }
            gx[i] = sx;
            gy[i] = sy;
        }
    }
    (gx, gy, valid)
}

/// Edge-aware smoothness weights `wx = exp(−β·|∇x d̂_ga|)`, `wy` analogous.
///
/// Gradients are 3×3 Sobel responses with border replication. Pixels whose
/// stencil touches invalid depth carry no edge evidence and get weight `1`.
/// Weights are floored at the smallest positive value of `T` so they stay in
/// `(0, 1]` even across extreme discontinuities.
pub fn sobel_edge_weights<T: Real>(dga: &DepthImage<T>, beta: T) -> Result<SmoothnessWeights<T>> {
    if !beta.is_finite() || beta < T::zero() {
        return Err(Error::Parameter(format!(
            "edge weight sharpness beta must be finite and >= 0, got {beta}"
        )));
    }
    let beta = to_f64(beta);
    let (gx, gy, _) = sobel_gradients(dga);
    let weight = |g: f64| -> T {
        let w = cast::<T>((-beta * g.abs()).exp());
        if w > T::zero() {
            w
        } else {
            T::min_positive_value()
        }
    };
    let wx = gx.iter().map(|&g| weight(g)).collect();
    let wy = gy.iter().map(|&g| weight(g)).collect();
    SmoothnessWeights::from_parts(dga.width(), dga.height(), wx, wy)
}

/// Diagnostics from [`solve_scale_field`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    /// Huberized objective after initialization and after each accepted outer
    /// iteration; non-increasing by construction.
    pub energy_trace: Vec<f64>,
    /// Whether the relative energy decrease fell below the tolerance before
    /// the iteration budget ran out.
    pub converged: bool,
    /// Pixels clamped up to `0` after the solve (expected `0`: with positive
    /// observations the minimizer is nonnegative on its own).
    pub clamp_activations: usize,
    /// Outer IRLS iterations executed.
    pub outer_iters: usize,
}

/// Minimizes the refinement energy over dense inverse scale fields.
///
/// The L1 data term is Huberized with knee [`HUBER_DELTA`]; each outer IRLS
/// iteration solves the normal equations `(W + 2λL)u = W u_q` — `W` the
/// diagonal of inverse residual magnitudes on observed pixels, `L` the
/// edge-weighted grid Laplacian — by Jacobi-preconditioned conjugate
/// gradients, warm-started from the previous iterate. Iteration starts from
/// the neutral field `u⁰ ≡ 1` and stops once the relative decrease of the
/// Huberized energy drops below `tol` (or, as a safeguard against inexact
/// inner solves, when a step fails to decrease it; the step is then
/// discarded). Hitting `max_iters` first returns the best iterate with
/// `converged = false` rather than an error. The internal solve runs in
/// `f64` regardless of `T`, sequentially and deterministically.
///
/// With `λ_smooth = 0` the problem decouples: observed pixels take their
/// observation, all others keep the initialization value `1`.
///
/// The returned field keeps `Observed` provenance on anchored pixels and
/// marks the rest `Solved` (`Filled` in the decoupled case, where they still
/// hold the fill value). Values are clamped to `u ≥ 0`; activations of that
/// clamp are counted in the report.
pub fn solve_scale_field<T: Real>(
    sq: &ScaleField<T>,
    weights: &SmoothnessWeights<T>,
    lambda_smooth: T,
    max_iters: usize,
    tol: T,
) -> Result<(ScaleField<T>, SolveReport)> {
    if sq.width() != weights.width() || sq.height() != weights.height() {
        return Err(Error::InputMismatch(format!(
            "scale field is {}x{} but weights are {}x{}",
            sq.width(),
            sq.height(),
            weights.width(),
            weights.height()
        )));
    }
    if !lambda_smooth.is_finite() || lambda_smooth < T::zero() {
        return Err(Error::Parameter(format!(
            "lambda_smooth must be finite and >= 0, got {lambda_smooth}"
        )));
    }
    if !tol.is_finite() || tol < T::zero() {
        return Err(Error::Parameter(format!(
            "tolerance must be finite and >= 0, got {tol}"
        )));
    }
    if max_iters == 0 {
        return Err(Error::Parameter("max_iters must be >= 1".into()));
    }
    if sq.observed_count() == 0 {
        return Err(Error::SolverUnavailable(
            "no observed pixel anchors the scale field".into(),
        ));
    }

    let (width, height) = (sq.width(), sq.height());
    let n = width * height;
    let lambda = to_f64(lambda_smooth);
    let tol = to_f64(tol);
    let q: Vec<f64> = sq.values().iter().map(|&v| to_f64(v)).collect();
    let observed: Vec<bool> = sq
        .provenance()
        .iter()
        .map(|p| *p == Provenance::Observed)
        .collect();
    let wx: Vec<f64> = weights.wx().iter().map(|&w| to_f64(w)).collect();
    let wy: Vec<f64> = weights.wy().iter().map(|&w| to_f64(w)).collect();

    let huber_energy = |u: &[f64]| -> f64 {
        data_energy_huber(u, &q, &observed, HUBER_DELTA)
            + lambda * smoothness_energy(width, height, &wx, &wy, u)
    };

    let mut u = vec![1.0f64; n];
    let mut trace = vec![huber_energy(&u)];
    let mut converged = false;
    let mut outer_iters = 0usize;

    if lambda == 0.0 {
        // Decoupled: per-pixel minimization is exact in one step.
        for i in 0..n {
            if observed[i] {
                u[i] = q[i];
            }
        }
        trace.push(huber_energy(&u));
        converged = true;
        outer_iters = 1;
    } else {
        // Sum of incident edge weights per pixel, for the Jacobi diagonal.
        let mut edge_sum = vec![0.0f64; n];
        for y in 0..height {
            for x in 0..width {
                let i = y * width + x;
                if x + 1 < width {
                    edge_sum[i] += wx[i];
                    edge_sum[i + 1] += wx[i];
                }
                if y + 1 < height {
                    edge_sum[i] += wy[i];
                    edge_sum[i + width] += wy[i];
                }
            }
        }
        let cg_max = 2 * n + 50;
        let mut e_last = trace[0];
        for _ in 0..max_iters {
            outer_iters += 1;
            let mut wdiag = vec![0.0f64; n];
            let mut b = vec![0.0f64; n];
            let mut diag = vec![0.0f64; n];
            for i in 0..n {
                if observed[i] {
                    wdiag[i] = 1.0 / HUBER_DELTA.max((u[i] - q[i]).abs());
                    b[i] = wdiag[i] * q[i];
                }
                diag[i] = wdiag[i] + 2.0 * lambda * edge_sum[i];
            }
            let mut u_new = u.clone();
            pcg(
                width, height, &wdiag, &wx, &wy, lambda, &b, &mut u_new, &diag, cg_max, 1e-11,
            );
            let e_new = huber_energy(&u_new);
            if !e_new.is_finite() {
                return Err(Error::Numeric(
                    "scale solver produced a non-finite energy".into(),
                ));
            }
            if e_new > e_last {
                // Inexact inner solve failed to decrease the majorized
                // objective: keep the previous iterate and stop.
                converged = true;
                break;
            }
            u = u_new;
            trace.push(e_new);
            let rel = if e_last > 0.0 { (e_last - e_new) / e_last } else { 0.0 };
            e_last = e_new;
            if rel < tol {
                converged = true;
                break;
            }
        }
    }

    let mut clamp_activations = 0usize;
    for v in u.iter_mut() {
        if !v.is_finite() {
            return Err(Error::Numeric(
                "scale solver produced a non-finite value".into(),
            ));
        }
        if *v < 0.0 {
            *v = 0.0;
            clamp_activations += 1;
        }
    }

    let provenance = observed
        .iter()
        .map(|&obs| {
            if obs {
                Provenance::Observed
            } else if lambda == 0.0 {
                Provenance::Filled
            } else {
                Provenance::Solved
            }
        })
        .collect();
    let values = u.iter().map(|&v| cast::<T>(v)).collect();
    let field = ScaleField::from_parts(width, height, values, provenance)?;
    let report = SolveReport {
        energy_trace: trace,
        converged,
        clamp_activations,
        outer_iters,
    };
    Ok((field, report))
}

/// Exact refinement energy (L1 data term, not its Huber surrogate) of a
/// candidate field against the observations in `sq`.
pub fn scale_energy<T: Real>(
    candidate: &ScaleField<T>,
    sq: &ScaleField<T>,
    weights: &SmoothnessWeights<T>,
    lambda_smooth: T,
) -> Result<f64> {
    if !candidate.same_shape(sq) || sq.width() != weights.width() || sq.height() != weights.height()
    {
        return Err(Error::InputMismatch(
            "candidate, observations and weights must share one shape".into(),
        ));
    }
    if !lambda_smooth.is_finite() || lambda_smooth < T::zero() {
        return Err(Error::Parameter(format!(
            "lambda_smooth must be finite and >= 0, got {lambda_smooth}"
        )));
    }
    let u: Vec<f64> = candidate.values().iter().map(|&v| to_f64(v)).collect();
    let q: Vec<f64> = sq.values().iter().map(|&v| to_f64(v)).collect();
    let observed: Vec<bool> = sq
        .provenance()
        .iter()
        .map(|p| *p == Provenance::Observed)
        .collect();
    let wx: Vec<f64> = weights.wx().iter().map(|&w| to_f64(w)).collect();
    let wy: Vec<f64> = weights.wy().iter().map(|&w| to_f64(w)).collect();
    Ok(data_energy_l1(&u, &q, &observed)
        + to_f64(lambda_smooth) * smoothness_energy(candidate.width(), candidate.height(), &wx, &wy, &u))
}

fn data_energy_l1(u: &[f64], q: &[f64], observed: &[bool]) -> f64 {
    let mut e = 0.0;
    for i in 0..u.len() {
        if observed[i] {
            e += (u[i] - q[i]).abs();
        }
    }
    e
}

fn data_energy_huber(u: &[f64], q: &[f64], observed: &[bool], delta: f64) -> f64 {
    let mut e = 0.0;
    for i in 0..u.len() {
        if observed[i] {
            let r = (u[i] - q[i]).abs();
            e += if r <= delta { r * r / (2.0 * delta) } else { r - delta / 2.0 };
        }
    }
    e
}

/// Forward-difference smoothness `Σ wx·(u_right − u)² + wy·(u_down − u)²`,
/// without the `λ` factor.
fn smoothness_energy(width: usize, height: usize, wx: &[f64], wy: &[f64], u: &[f64]) -> f64 {
    let mut e = 0.0;
    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            if x + 1 < width {
                let d = u[i + 1] - u[i];
                e += wx[i] * d * d;
            }
            if y + 1 < height {
                let d = u[i + width] - u[i];
                e += wy[i] * d * d;
            }
        }
    }
    e
}

/// `out = (W + 2λL) u` for the edge-weighted grid Laplacian `L`.
#[allow(clippy::too_many_arguments)]
fn apply_system(
    width: usize,
    height: usize,
    wdiag: &[f64],
    wx: &[f64],
    wy: &[f64],
    lambda: f64,
    u: &[f64],
    out: &mut [f64],
) {
    for i in 0..u.len() {
        out[i] = wdiag[i] * u[i];
    }
    let two_lambda = 2.0 * lambda;
    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            if x + 1 < width {
                let d = two_lambda * wx[i] * (u[i] - u[i + 1]);
                out[i] += d;
                out[i + 1] -= d;
            }
            if y + 1 < height {
                let d = two_lambda * wy[i] * (u[i] - u[i + width]);
                out[i] += d;
                out[i + width] -= d;
            }
        }
    }
}

/// Jacobi-preconditioned conjugate gradients on `(W + 2λL) x = b`, in place.
#[allow(clippy::too_many_arguments)]
fn pcg(
    width: usize,
    height: usize,
    wdiag: &[f64],
    wx: &[f64],
    wy: &[f64],
    lambda: f64,
    b: &[f64],
    x: &mut [f64],
    diag: &[f64],
    max_iters: usize,
    rtol: f64,
) {
    let n = b.len();
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if bnorm == 0.0 {
        x.fill(0.0);
        return;
    }
    let stop = rtol * bnorm;
    let mut r = vec![0.0f64; n];
    let mut ap = vec![0.0f64; n];
    apply_system(width, height, wdiag, wx, wy, lambda, x, &mut ap);
    for i in 0..n {
        r[i] = b[i] - ap[i];
    }
    let mut z: Vec<f64> = (0..n).map(|i| r[i] / diag[i]).collect();
    let mut p = z.clone();
    let mut rz: f64 = (0..n).map(|i| r[i] * z[i]).sum();
    for _ in 0..max_iters {
        let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rnorm <= stop {
            break;
        }
        apply_system(width, height, wdiag, wx, wy, lambda, &p, &mut ap);
        let pap: f64 = (0..n).map(|i| p[i] * ap[i]).sum();
        if !(pap > 0.0) || !pap.is_finite() {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new: f64 = (0..n).map(|i| r[i] * z[i]).sum();
        let beta = rz_new / rz;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        rz = rz_new;
    }
}

/// Composes metric depth `d̂ = (1/u) / ẑ_ga` from the solved inverse scale
/// field and the globally aligned inverse depth.
///
/// Pixels where `ẑ_ga` is invalid, where `u ≤` [`U_FLOOR`], or where the
/// quotient is not a positive finite number are invalid in the output.
pub fn compose_depth<T: Real>(
    u: &ScaleField<T>,
    zga: &InverseDepthImage<T>,
) -> Result<DepthImage<T>> {
    if u.width() != zga.width() || u.height() != zga.height() {
        return Err(Error::InputMismatch(format!(
            "scale field is {}x{} but inverse depth is {}x{}",
            u.width(),
            u.height(),
            zga.width(),
            zga.height()
        )));
    }
    let floor = cast::<T>(U_FLOOR);
    Ok(DepthImage::from_fn(u.width(), u.height(), |x, y| {
        let z = zga.get(x, y)?;
        let scale = u.value_at(x, y);
        if scale <= floor {
            return None;
        }
        let d = (T::one() / scale) / z;
        (d.is_finite() && d > T::zero()).then_some(d)
    }))
}

/// Evaluation losses for a refined depth map.
///
/// All quantities are reported in `f64`. Domains are per term: each depth
/// term averages over the pixels where its reference *and* the prediction
/// are valid (an empty domain contributes `0` with a zero count); the
/// smoothness term averages over pixels whose 3×3 Sobel stencils are fully
/// valid in both the prediction and the guide.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LossReport {
    /// Mean |d_int − d̂| over the interpolated-truth domain.
    pub l_depth_int: f64,
    /// Mean |d_gt − d̂| over the sparse-truth domain.
    pub l_depth_gt: f64,
    /// Combined depth loss `l_depth_int + λ_gt · l_depth_gt`.
    pub l_depth: f64,
    /// Mean edge-weighted gradient magnitude of the prediction.
    pub l_smooth: f64,
    /// Total `l_depth + λ_smooth · l_smooth`.
    pub l_sml: f64,
    pub lambda_gt: f64,
    pub lambda_smooth: f64,
    /// Pixel counts of the three evaluation domains.
    pub n_int: usize,
    pub n_gt: usize,
    pub n_smooth: usize,
}

/// Computes the evaluation losses of a refined depth `d̂` against densified
/// truth `d_int`, sparse truth `d_gt`, and the aligned guide `d̂_ga`:
///
/// ```text
/// L(d, d̂)  = mean over Ω_d of |d − d̂|
/// L_depth  = L(d_int, d̂) + λ_gt·L(d_gt, d̂)
/// L_smooth = mean of wx·|∇x d̂| + wy·|∇y d̂|,  (wx, wy) = exp(−β·|∇ d̂_ga|)
/// L_SML    = L_depth + λ_smooth·L_smooth
/// ```
///
/// Errors with an undefined-loss condition only if *both* depth-term domains
/// are empty; a single empty domain contributes zero.
pub fn sml_losses<T: Real>(
    dhat: &DepthImage<T>,
    dgt: &DepthImage<T>,
    dint: &DepthImage<T>,
    dga: &DepthImage<T>,
    lambda_gt: T,
    lambda_smooth: T,
    beta: T,
) -> Result<LossReport> {
    for (name, img) in [("sparse truth", dgt), ("interpolated truth", dint), ("guide", dga)] {
        if !dhat.same_shape(img) {
            return Err(Error::InputMismatch(format!(
                "prediction is {}x{} but {} is {}x{}",
                dhat.width(),
                dhat.height(),
                name,
                img.width(),
                img.height()
            )));
        }
    }
    for (name, v) in [
        ("lambda_gt", lambda_gt),
        ("lambda_smooth", lambda_smooth),
        ("beta", beta),
    ] {
        if !v.is_finite() || v < T::zero() {
            return Err(Error::Parameter(format!(
                "{name} must be finite and >= 0, got {v}"
            )));
        }
    }

    let l1_term = |reference: &DepthImage<T>| -> (f64, usize) {
        let mut sum = 0.0f64;
        let mut count = 0usize;
        for (x, y, d) in reference.iter_valid() {
            if let Some(p) = dhat.get(x, y) {
                sum += (to_f64(d) - to_f64(p)).abs();
                count += 1;
            }
        }
        if count == 0 { (0.0, 0) } else { (sum / count as f64, count) }
    };
    let (l_int, n_int) = l1_term(dint);
    let (l_gt, n_gt) = l1_term(dgt);
    if n_int == 0 && n_gt == 0 {
        return Err(Error::UndefinedLoss(
            "prediction overlaps neither interpolated nor sparse ground truth".into(),
        ));
    }

    let weights = sobel_edge_weights(dga, beta)?;
    let (ghx, ghy, hvalid) = sobel_gradients(dhat);
    let (_, _, gvalid) = sobel_gradients(dga);
    let mut smooth_sum = 0.0f64;
    let mut n_smooth = 0usize;
    for y in 0..dhat.height() {
        for x in 0..dhat.width() {
            let i = y * dhat.width() + x;
            if hvalid[i] && gvalid[i] {
                smooth_sum += to_f64(weights.wx_at(x, y)) * ghx[i].abs()
                    + to_f64(weights.wy_at(x, y)) * ghy[i].abs();
                n_smooth += 1;
            }
        }
    }
    let l_smooth = if n_smooth == 0 { 0.0 } else { smooth_sum / n_smooth as f64 };

    let lambda_gt = to_f64(lambda_gt);
    let lambda_smooth = to_f64(lambda_smooth);
    let l_depth = l_int + lambda_gt * l_gt;
    Ok(LossReport {
        l_depth_int: l_int,
        l_depth_gt: l_gt,
        l_depth,
        l_smooth,
        l_sml: l_depth + lambda_smooth * l_smooth,
        lambda_gt,
        lambda_smooth,
        n_int,
        n_gt,
        n_smooth,
    })
}
