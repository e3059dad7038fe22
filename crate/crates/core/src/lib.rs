//! Unsupervised detection of repeating neural firing sequences.
//!
//! A bank of `K` non-negative filters, each `N x M`, is convolved with a binary
//! spike raster. Filters are trained so that their response traces have high
//! variance, are temporally smooth and are mutually decorrelated. Detections are
//! thresholded peaks of the traces, with the threshold calibrated from the
//! responses of random filters.

pub mod cli;
pub mod engine;
pub mod error;
pub mod filters;
pub mod presets;
pub mod rng;
pub mod spikes;
pub mod stats;
pub mod synth;
pub mod truth;

pub use engine::{fit, FitConfig, FitResult, ResponseTrace};
pub use error::{Error, Result};
pub use filters::{FilterBank, Kernel, Variant};
pub use spikes::{Permutation, SpikeFormat, SpikeMatrix};
pub use truth::{Direction, GroundTruth, Occurrence};
