//! Layers with explicit forward and backward passes.
//!
//! Every layer caches what its backward pass needs during `forward`; calling
//! `backward` without a preceding `forward` is a state error. Parameter
//! gradients accumulate into the parameter tensors' gradient slots.

mod activation;
mod batchnorm;
mod conv;
pub mod gradcheck;
mod linear;
mod pool;

pub use activation::{relu, Relu};
pub use batchnorm::{BatchNorm1d, BN_EPS, BN_MOMENTUM};
pub use conv::{conv1d, conv1d_backward, conv_out_len, Conv1d, ConvGrads};
pub use linear::{linear, Linear};
pub use pool::{avgpool1d, maxpool1d, pool_out_len, AvgPool1d, MaxPool1d};

use crate::error::Result;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Anything owning named trainable parameters and non-trainable buffers.
pub trait Parameterized<T: Scalar> {
    fn visit_params(&mut self, _prefix: &str, _f: &mut dyn FnMut(&str, &mut Tensor<T>)) {}

    fn visit_buffers(&mut self, _prefix: &str, _f: &mut dyn FnMut(&str, &mut Tensor<T>)) {}

    fn zero_grad(&mut self) {
        self.visit_params("", &mut |_, p| p.zero_grad());
    }

    fn num_params(&mut self) -> usize {
        let mut n = 0;
        self.visit_params("", &mut |_, p| n += p.len());
        n
    }
}

pub trait Layer<T: Scalar>: Parameterized<T> {
    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>>;

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>>;
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

pub(crate) fn missing_cache(layer: &str) -> crate::Error {
    crate::Error::State(format!("{layer}: backward called before forward"))
}
