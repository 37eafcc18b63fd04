//! Joint activity recognition and indoor localization from WiFi CSI
//! amplitude fingerprints.
//!
//! The crate covers the whole pipeline: fingerprint ingestion and
//! preprocessing ([`dataset`]), a small dense tensor engine with hand-written
//! backward passes ([`nn`]), the dual-head 1-D residual network ([`model`]),
//! joint-loss training ([`train`]), metrics ([`eval`]) and the two classical
//! baselines ([`baselines`]).
//!
//! Numeric code is generic over [`Scalar`]; training runs at `f32` and the
//! finite-difference checks at `f64`. The aliases below pin the common
//! instantiations.

pub mod baselines;
pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod model;
pub mod nn;
pub mod scalar;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use tensor::Tensor;

/// Number of OFDM data subcarriers in one fingerprint.
pub const NUM_SUBCARRIERS: usize = 52;
/// Temporal length of a preprocessed fingerprint.
pub const FINGERPRINT_LEN: usize = 192;
pub const NUM_ACTIVITIES: usize = 6;
pub const NUM_LOCATIONS: usize = 16;

pub type Tensor32 = Tensor<f32>;
pub type Tensor64 = Tensor<f64>;
pub type Network32 = model::ResNet1d<f32>;
pub type Network64 = model::ResNet1d<f64>;
pub type Fingerprint = dataset::CsiFingerprint<f32>;
