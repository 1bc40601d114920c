//! Jump-preserving surface estimation and stage-wise adaptive sampling.
//!
//! This crate estimates a piecewise-continuous regression surface
//! `m(x) = g(x) + Σ_b τ_b 1_{A_b}(x)` from noisy point observations and
//! decides where the next batch of observations should be taken so that the
//! measurement budget concentrates near the discontinuity curves `∂A_b`.
//! The main use case is compressive imaging: reconstructing an image from a
//! small fraction of its pixels, scanned in stages.
//!
//! The pieces fit together like this:
//!
//! * [`dataset`] holds design points, observations, synthetic ground-truth
//!   surfaces, and the seeded noise model.
//! * [`spatial`] answers k-nearest-neighbor queries (the spatially varying
//!   bandwidth is the distance to the k-th neighbor) and builds the Delaunay
//!   triangulation whose triangle centroids are the candidate locations for
//!   the next sampling stage.
//! * [`smoother`] fits conventional and one-sided local linear kernel
//!   estimates, selects between the one-sided fits by their weighted residual
//!   errors, and reports the jump statistic `(m̂₍₁₎ − m̂₍₂₎)²`.
//! * [`sampler`] scores stage candidates (the proposed exp-jump-statistic
//!   density with a kernel-density correction, plus uniform and WRMS
//!   benchmarks), normalizes the scores into a pmf, and draws the next batch.
//! * [`evaluation`] computes the jump-band / continuity-region MSE split and
//!   the transect profiles comparing sampling criteria to the actual error.
//!
//! The crate is `no_std`-compatible (`alloc` required); disable the default
//! `std` feature for embedded or sandboxed use. File formats and the command
//! line front end live in the companion `jumpscan` crate.

#![cfg_attr(not(feature = "std"), no_std)]
// Guards written as `!(x > 0.0)` are deliberate: they treat NaN as failure.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod kernel;
pub mod sampler;
pub mod seed;
pub mod smoother;
pub mod spatial;

mod linalg;

pub use dataset::{observe, Bounds, Dataset, Grid, GroundTruth, Observation};
pub use error::{Error, Result};
pub use kernel::Kernel;
pub use sampler::{
    draw_stage, run_sequential_design, stage_pmf, DesignRun, SamplerSpec, SamplerStrategy, StagePmf,
};
pub use smoother::{
    estimate_field, estimate_point, fit_local_linear, EstimateField, LocalFit, PointEstimate,
    SmootherConfig,
};
pub use spatial::{delaunay_centroids, SpatialIndex, Triangulation};
