//! Ground-truth densification: linear interpolation of sparse depth in log
//! space over a Delaunay triangulation of the valid pixels.
//!
//! LiDAR ground truth projects to isolated pixels; losses and association
//! labels need depth on whole patches. Valid pixels become vertices carrying
//! `ln(depth)`, a Bowyer–Watson triangulation is built with exact integer
//! predicates, and every pixel inside the convex hull receives the
//! exponential of the barycentric interpolation of log depth. Pixels outside
//! the hull stay invalid — no extrapolation.
//!
//! Determinism: all predicates are evaluated exactly (i128, with big-integer
//! fallback for the synthetic bounding vertices), cocircular ties count as
//! "outside", and boundary pixels between triangles go to the first triangle
//! in canonical order, so results are bit-stable across runs and input
//! orderings.

use num_bigint::BigInt;

use crate::error::{Error, Result};
use crate::geom::DepthImage;
use crate::num::{cast, to_f64, Real};

/// Largest pixel coordinate the exact predicates are sized for.
const COORD_LIMIT: i64 = 100_000;

/// Bounding-triangle coordinate: far enough that the synthetic vertices lie
/// outside every circumcircle of real points (whose extent is bounded by
/// ~3e15 for coordinates within [`COORD_LIMIT`]).
const SUPER: i64 = 100_000_000_000_000_000; // 1e17

/// Twice the signed area of `(a, b, c)`: positive if counter-clockwise in
/// (u, v) coordinates. Exact: inputs within ±1e17 keep products within i128.
fn orient2d(a: (i64, i64), b: (i64, i64), c: (i64, i64)) -> i128 {
    let (ax, ay) = (a.0 as i128, a.1 as i128);
    let (bx, by) = (b.0 as i128, b.1 as i128);
    let (cx, cy) = (c.0 as i128, c.1 as i128);
    (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
}

/// Sign of the incircle determinant for a counter-clockwise triangle
/// `(a, b, c)`: positive iff `p` is strictly inside the circumcircle.
fn incircle_sign(a: (i64, i64), b: (i64, i64), c: (i64, i64), p: (i64, i64)) -> i32 {
    let small = |q: (i64, i64)| q.0.abs() <= COORD_LIMIT && q.1.abs() <= COORD_LIMIT;
    if small(a) && small(b) && small(c) && small(p) {
        let (ax, ay) = ((a.0 - p.0) as i128, (a.1 - p.1) as i128);
        let (bx, by) = ((b.0 - p.0) as i128, (b.1 - p.1) as i128);
        let (cx, cy) = ((c.0 - p.0) as i128, (c.1 - p.1) as i128);
        let det = (ax * ax + ay * ay) * (bx * cy - cx * by)
            + (bx * bx + by * by) * (cx * ay - ax * cy)
            + (cx * cx + cy * cy) * (ax * by - bx * ay);
        return det.signum() as i32;
    }
    // A bounding vertex is involved: the determinant can overflow i128, so
    // fall back to arbitrary precision.
    let big = |v: i64| BigInt::from(v);
    let (ax, ay) = (big(a.0 - p.0), big(a.1 - p.1));
    let (bx, by) = (big(b.0 - p.0), big(b.1 - p.1));
    let (cx, cy) = (big(c.0 - p.0), big(c.1 - p.1));
    let det = (&ax * &ax + &ay * &ay) * (&bx * &cy - &cx * &by)
        + (&bx * &bx + &by * &by) * (&cx * &ay - &ax * &cy)
        + (&cx * &cx + &cy * &cy) * (&ax * &by - &bx * &ay);
    match det.sign() {
        num_bigint::Sign::Plus => 1,
        num_bigint::Sign::Minus => -1,
        num_bigint::Sign::NoSign => 0,
    }
}

/// A Delaunay triangulation of scattered pixels carrying log depth.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangulationResult {
    /// `(u, v, ln(depth))` per vertex.
    pub vertices: Vec<(i64, i64, f64)>,
    /// Counter-clockwise vertex-index triples in canonical order.
    pub triangles: Vec<[usize; 3]>,
}

/// Delaunay triangulation by incremental insertion (Bowyer–Watson).
///
/// Vertices must be unique pixels with coordinates in
/// `[0, 100_000]`; at least 3 non-collinear vertices are required.
/// Cocircular ties are broken deterministically by treating points exactly
/// on a circumcircle as outside it.
pub fn triangulate(vertices: &[(i64, i64, f64)]) -> Result<TriangulationResult> {
    let mut vertices = vertices.to_vec();
    vertices.sort_by_key(|&(u, v, _)| (v, u));
    for pair in vertices.windows(2) {
        if (pair[0].0, pair[0].1) == (pair[1].0, pair[1].1) {
            return Err(Error::Parameter(format!(
                "duplicate vertex at pixel ({}, {})",
                pair[0].0, pair[0].1
            )));
        }
    }
    for &(u, v, _) in &vertices {
        if !(0..=COORD_LIMIT).contains(&u) || !(0..=COORD_LIMIT).contains(&v) {
            return Err(Error::Parameter(format!(
                "vertex ({u}, {v}) outside supported coordinate range [0, {COORD_LIMIT}]"
            )));
        }
    }

    let n = vertices.len();
    let pos = |pts: &[(i64, i64)], i: usize| pts[i];
    let mut pts: Vec<(i64, i64)> = vertices.iter().map(|&(u, v, _)| (u, v)).collect();
    let collinear = n < 3
        || !(2..n).any(|k| orient2d(pts[0], pts[1], pts[k]) != 0);
    if collinear {
        return Err(Error::DegenerateInput(format!(
            "{n} sample(s) with no non-collinear triple; interpolation needs a 2-D hull"
        )));
    }

    // Bounding triangle; its vertices get indices n, n+1, n+2 and every
    // triangle touching them is discarded at the end.
    pts.push((-SUPER, -SUPER));
    pts.push((SUPER, -SUPER));
    pts.push((0, SUPER));
    let mut triangles: Vec<[usize; 3]> = vec![[n, n + 1, n + 2]];

    for pi in 0..n {
        let p = pts[pi];
        let mut cavity: Vec<[usize; 3]> = Vec::new();
        triangles.retain(|t| {
            let inside =
                incircle_sign(pos(&pts, t[0]), pos(&pts, t[1]), pos(&pts, t[2]), p) > 0;
            if inside {
                cavity.push(*t);
            }
            !inside
        });
        debug_assert!(!cavity.is_empty(), "point must fall in some circumcircle");

        // Edges appearing in exactly one cavity triangle form its boundary.
        let mut edges: std::collections::BTreeMap<(usize, usize), u32> = Default::default();
        for t in &cavity {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        for (&(a, b), &count) in &edges {
            if count != 1 {
                continue;
            }
            let mut tri = [pi, a, b];
            let o = orient2d(p, pos(&pts, a), pos(&pts, b));
            assert!(o != 0, "degenerate cavity fan triangle");
            if o < 0 {
                tri.swap(1, 2);
            }
            triangles.push(tri);
        }
    }

    // Keep real triangles, in canonical order: smallest index first within
    // each triple (preserving orientation), triples sorted.
    let mut kept: Vec<[usize; 3]> = triangles
        .into_iter()
        .filter(|t| t.iter().all(|&i| i < n))
        .map(|t| {
            let k = (0..3).min_by_key(|&k| t[k]).unwrap();
            [t[k], t[(k + 1) % 3], t[(k + 2) % 3]]
        })
        .collect();
    kept.sort_unstable();
    Ok(TriangulationResult {
        vertices,
        triangles: kept,
    })
}

/// Densify sparse positive depth by barycentric-linear interpolation of
/// `ln(depth)` over the Delaunay triangulation of valid pixels.
///
/// The output is valid exactly on the convex hull of the inputs and
/// reproduces the inputs at their pixels; interpolated values always lie
/// within the input min/max. Fewer than 3 non-collinear samples cannot span
/// a hull and yield a degenerate-input error (callers fall back to sparse
/// supervision). A fully dense input is returned unchanged.
pub fn interpolate_log_linear<T: Real>(sparse_gt: &DepthImage<T>) -> Result<DepthImage<T>> {
    if sparse_gt.valid_count() == sparse_gt.width() * sparse_gt.height() {
        return Ok(sparse_gt.clone());
    }
    let vertices: Vec<(i64, i64, f64)> = sparse_gt
        .iter_valid()
        .map(|(u, v, d)| (u as i64, v as i64, to_f64(d).ln()))
        .collect();
    let tri = triangulate(&vertices)?;

    let mut out = DepthImage::new_invalid(sparse_gt.width(), sparse_gt.height());
    for t in &tri.triangles {
        let (a, b, c) = (tri.vertices[t[0]], tri.vertices[t[1]], tri.vertices[t[2]]);
        let (pa, pb, pc) = ((a.0, a.1), (b.0, b.1), (c.0, c.1));
        let u_lo = a.0.min(b.0).min(c.0).max(0) as usize;
        let u_hi = (a.0.max(b.0).max(c.0) as usize).min(sparse_gt.width() - 1);
        let v_lo = a.1.min(b.1).min(c.1).max(0) as usize;
        let v_hi = (a.1.max(b.1).max(c.1) as usize).min(sparse_gt.height() - 1);
        for v in v_lo..=v_hi {
            for u in u_lo..=u_hi {
                if out.is_valid(u, v) {
                    continue; // boundary pixel already claimed, first wins
                }
                let p = (u as i64, v as i64);
                // Exact inclusive point-in-triangle test (triangle is CCW).
                let w0 = orient2d(pb, pc, p);
                let w1 = orient2d(pc, pa, p);
                let w2 = orient2d(pa, pb, p);
                if w0 < 0 || w1 < 0 || w2 < 0 {
                    continue;
                }
                let (w0, w1, w2) = (w0 as f64, w1 as f64, w2 as f64);
                let log_d = (w0 * a.2 + w1 * b.2 + w2 * c.2) / (w0 + w1 + w2);
                out.set(u, v, cast::<T>(log_d.exp()));
            }
        }
    }
    Ok(out)
}
