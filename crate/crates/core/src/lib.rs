//! Robot-to-human handover planning: grid-prompted grounding of human and
//! robot grasp regions, region-aware grasp ranking, a plane-side success
//! metric with a synthetic benchmark, and an ergonomic handover-point search.
//!
//! Geometry and scoring are generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the scalar for the common case.

// NaN must fail range checks, so they are written as `!(x >= lo)`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ergonomics;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod grounding;
pub mod io;
pub mod raster;
pub mod scalar;
pub mod selection;
pub mod vlm;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Vec3d = geometry::Vec3<f64>;
pub type Vec3f = geometry::Vec3<f32>;
pub type Rot3d = geometry::Rot3<f64>;
pub type Grasp = geometry::GraspCandidate<f64>;
pub type Cloud = geometry::PointCloud<f64>;
pub type Intrinsics = geometry::CameraIntrinsics<f64>;
pub type Regions = grounding::RegionMaskSet<f64>;
