//! The dual-head 1-D residual network.

mod block;
pub mod gradcheck;
mod network;
mod spec;

pub use block::{ConvUnit, ResidualBlock};
pub use network::{ConvCount, Head, ResNet1d, Tap, TapOutputs};
pub use spec::{NetworkSpec, HEAD_POOL, HEAD_WIDTH, STAGE_STRIDES, STAGE_WIDTHS, STEM_WIDTH};
