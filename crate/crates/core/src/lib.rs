//! Lorenz curve estimation from without-replacement samples, with
//! linearized covariance estimates and point-wise / simultaneous confidence
//! bands built as unions of confidence ellipses.
//!
//! The pipeline for one sample:
//!
//! 1. [`design::draw_srswor`] selects the sample,
//! 2. [`lorenz::estimate_points`] computes the plug-in curve points,
//! 3. [`linearize::cov_blocks`] estimates their covariances,
//! 4. [`band::estimate_c`] and [`band::scb_critical`] give the adjusted
//!    critical value,
//! 5. [`band::Band`] answers containment queries and
//!    [`band::band_geometry`] produces drawable regions.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod band;
pub mod design;
pub mod error;
pub mod linearize;
pub mod lorenz;
pub mod popdata;
pub mod simharness;
pub mod svg;

pub use band::{Band, BandKind, BandOptions, SigmaPath};
pub use design::SampleDraw;
pub use error::{Error, ErrorClass, Result};
pub use linearize::{CovBlocks, LinearizedSet};
pub use lorenz::CurveEstimate;
pub use popdata::{CurvePoint, GeneratorSpec, PiecewiseCurve, Population};
pub use simharness::{CoverageReport, ExperimentSpec};

pub type Mat2 = nalgebra::Matrix2<f64>;
pub type Mat4 = nalgebra::Matrix4<f64>;
pub type Vec2 = nalgebra::Vector2<f64>;
pub type Vec4 = nalgebra::Vector4<f64>;
