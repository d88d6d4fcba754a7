//! Toolkit for audio-visual sound event localization and detection (SELD)
//! on STARSS23-style data.
//!
//! * [`labels`]: label file reader, writer and validator.
//! * [`metrics`]: `ER20`, `F20`, `LE_CD`, `LR_CD` and the aggregated SELD error.
//! * [`accdoa`]: multi-ACCDOA targets, permutation-invariant loss, decoding.
//! * [`features`]: spectrogram/IPD audio features and bounding-box encoding.
//! * [`stats`]: corpus statistics (coverage, polyphony, durations, DOAs).
//! * [`perturb`]: seeded corruption of references into synthetic predictions.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the precision used by annotations and metrics.

pub mod accdoa;
pub mod annotation;
pub mod array_io;
pub mod error;
pub mod features;
pub mod geometry;
pub mod labels;
pub mod metrics;
pub mod perturb;
pub mod scalar;
pub mod stats;

pub use annotation::{
    ClassId, ClipAnnotation, EventRecord, FrameIndex, BODY_CLASSES, LABEL_FRAME_SECONDS,
    STARSS23_CLASSES,
};
pub use error::{Error, Result};
pub use geometry::{angular_distance, Cartesian, Spherical};
pub use scalar::Scalar;

pub type SphericalDoa = Spherical<f64>;
pub type CartesianDoa = Cartesian<f64>;
pub type MultiAccdoaTensor = accdoa::MultiAccdoa<f64>;
pub type MultiAccdoaTensorF32 = accdoa::MultiAccdoa<f32>;
pub type AudioClip = features::audio::AudioClip<f64>;
pub type AudioFeature = features::audio::AudioFeature<f64>;
pub type VisualFeature = features::visual::VisualFeature<f64>;
