use super::{missing_cache, Layer, Mode, Parameterized};
use crate::error::Result;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub fn relu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

#[derive(Debug, Clone, Default)]
pub struct Relu {
    mask: Option<Vec<bool>>,
}

impl Relu {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clear_cache(&mut self) {
        self.mask = None;
    }

    /// Gradient of `relu` at the cached input, applied to `grad_out`.
    pub fn backward_raw<T: Scalar>(&self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let mask = self.mask.as_ref().ok_or_else(|| missing_cache("relu"))?;
        if mask.len() != grad_out.len() {
            return Err(crate::error::shape_err!(
                "relu: grad_out has {} elements, cached {}",
                grad_out.len(),
                mask.len()
            ));
        }
        let data = grad_out
            .data()
            .iter()
            .zip(mask)
            .map(|(&g, &on)| if on { g } else { T::zero() })
            .collect();
        Tensor::from_vec(grad_out.shape(), data)
    }

    pub fn forward_raw<T: Scalar>(&mut self, x: &Tensor<T>) -> Tensor<T> {
        self.mask = Some(x.data().iter().map(|&v| v > T::zero()).collect());
        relu(x)
    }
}

impl<T: Scalar> Parameterized<T> for Relu {}

impl<T: Scalar> Layer<T> for Relu {
    fn forward(&mut self, x: &Tensor<T>, _mode: Mode) -> Result<Tensor<T>> {
        Ok(self.forward_raw(x))
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        self.backward_raw(grad_out)
    }
}
