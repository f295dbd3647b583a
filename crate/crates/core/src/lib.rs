//! Radar-guided metric depth recovery.
//!
//! Monocular depth networks produce sharp but scale-free depth; radar returns
//! are metric but extremely sparse. This crate recovers dense metric depth in
//! three stages:
//!
//! 1. **Global alignment** — a single scale factor fitted to the radar
//!    returns by robust (L1) minimization ([`align`]).
//! 2. **Quasi-dense augmentation** — each radar return is spread over an
//!    image patch weighted by a confidence map, giving many more metric
//!    anchors ([`augment`]).
//! 3. **Scale-map refinement** — a dense per-pixel scale field is solved from
//!    the quasi-dense anchors under edge-aware smoothness, and composed with
//!    the aligned depth ([`refine`]).
//!
//! Supporting modules provide geometry ([`geom`]), ground-truth
//! densification ([`interp`]), evaluation ([`metrics`]), synthetic scenes
//! ([`synth`]), file formats ([`io`]), and the end-to-end driver
//! ([`pipeline`]).
//!
//! All numeric code is generic over the scalar type via [`num::Real`]
//! (`f32` or `f64`); the aliases below fix the default precision.

pub mod align;
pub mod augment;
pub mod error;
pub mod geom;
pub mod interp;
pub mod io;
pub mod metrics;
pub mod num;
pub mod pipeline;
pub mod refine;
pub mod synth;

pub use error::{Error, Result};
pub use num::Real;

/// Default scalar for pipeline math.
pub type Scalar = f64;

pub type DepthImage = geom::DepthImage<Scalar>;
pub type InverseDepthImage = geom::InverseDepthImage<Scalar>;
pub type CameraModel = geom::CameraModel<Scalar>;
pub type RigidTransform = geom::RigidTransform<Scalar>;
pub type RadarPointCloud = geom::RadarPointCloud<Scalar>;
pub type SparseDepthProjection = geom::SparseDepthProjection<Scalar>;
