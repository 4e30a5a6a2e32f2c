//! Train a small generative adversarial network on urban built-up footprint
//! maps and compare synthetic cities with real ones through radial profiles,
//! profile peaks, K-Means profile classes and chi-square tests.
//!
//! The numeric kernels (tensors, layers, Adam, K-Means, peak search) are
//! generic over [`Scalar`]; the aliases below fix them at `f64`, the
//! precision the rest of the pipeline runs at.

// `!(x > 0.0)` is used on purpose throughout: unlike `x <= 0.0` it also
// rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cluster;
pub mod corpus;
pub mod error;
pub mod gan;
pub mod morphology;
pub mod nn;
pub mod raster;
pub mod render;
pub mod scalar;
pub mod seed;
pub mod stats;

pub use error::{Error, Result};
pub use corpus::Corpus;
pub use raster::{CityMap, MapMeta, SourceRaster};
pub use scalar::Scalar;

pub type Tensor = nn::Tensor<f64>;
pub type Layer = nn::Layer<f64>;
pub type Sequential = nn::Sequential<f64>;
pub type AdamState = nn::AdamState<f64>;
pub type ProfileMatrix = cluster::ProfileMatrix<f64>;
pub type ClusterModel = cluster::ClusterModel<f64>;
