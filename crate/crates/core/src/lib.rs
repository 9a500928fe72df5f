//! Coarse-to-fine plane-sweep multi-view stereo.
//!
//! Depth for a reference view is inferred over a cost volume pyramid: a full
//! uniform sweep of fronto-parallel planes at the coarsest image level, then
//! at every finer level a partial cost volume over per-pixel depth residuals
//! around the upsampled estimate. Per-view depth maps are fused into a point
//! cloud and scored against ground truth.
//!
//! Module overview:
//! - [`geometry`]: pinhole cameras, homographies, epipolar depth ranges.
//! - [`raster`], [`pyramid`], [`features`]: images, pyramids and the fixed
//!   16-channel descriptor.
//! - [`cost`]: variance cost volumes, aggregation, probability volumes.
//! - [`depth`], [`pipeline`]: soft-argmax estimators, upsampling and the
//!   coarse-to-fine driver.
//! - [`fusion`]: consistency filtering, fusion, cloud metrics.
//! - [`synth`]: ray-cast synthetic scenes with analytic depth.
//! - [`io`]: camera files, PFM, PLY, datasets.

pub mod cost;
pub mod depth;
pub mod error;
pub mod features;
pub mod fusion;
pub mod geometry;
pub mod io;
pub mod kdtree;
pub mod pipeline;
pub mod pyramid;
pub mod raster;
pub mod synth;

pub use error::{Error, Result};
pub use geometry::{CameraView, Projection, SweepPlane};
