use super::{join, missing_cache, Layer, Mode, Parameterized};
use crate::error::{shape_err, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Affine map `y = x Wᵀ + b` for `x: [B, F]`, `W: [O, F]`.
pub fn linear<T: Scalar>(x: &Tensor<T>, weight: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    x.expect_rank(2, "linear input")?;
    weight.expect_rank(2, "linear weight")?;
    let (batch, features) = (x.dim(0), x.dim(1));
    let outputs = weight.dim(0);
    if weight.dim(1) != features {
        return Err(shape_err!(
            "linear: input has {features} features, weight expects {}",
            weight.dim(1)
        ));
    }
    bias.expect_shape(&[outputs], "linear bias")?;
    let mut out = Vec::with_capacity(batch * outputs);
    for b in 0..batch {
        let xr = x.row(b);
        for o in 0..outputs {
            let wr = &weight.data()[o * features..][..features];
            let dot: T = xr.iter().zip(wr).map(|(&a, &w)| a * w).sum();
            out.push(dot + bias.data()[o]);
        }
    }
    let out = Tensor::from_vec(&[batch, outputs], out)?;
    out.debug_check_finite("linear");
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Linear<T: Scalar> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
    input: Option<Tensor<T>>,
}

impl<T: Scalar> Linear<T> {
    pub fn new(in_features: usize, out_features: usize) -> Self {
        Self {
            weight: Tensor::param(
                &[out_features, in_features],
                vec![T::zero(); in_features * out_features],
            )
            .expect("consistent shape"),
            bias: Tensor::param(&[out_features], vec![T::zero(); out_features]).expect("consistent shape"),
            input: None,
        }
    }

    pub fn in_features(&self) -> usize {
        self.weight.dim(1)
    }

    pub fn out_features(&self) -> usize {
        self.weight.dim(0)
    }

    pub fn clear_cache(&mut self) {
        self.input = None;
    }
}

impl<T: Scalar> Parameterized<T> for Linear<T> {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        f(&join(prefix, "weight"), &mut self.weight);
        f(&join(prefix, "bias"), &mut self.bias);
    }
}

impl<T: Scalar> Layer<T> for Linear<T> {
    fn forward(&mut self, x: &Tensor<T>, _mode: Mode) -> Result<Tensor<T>> {
        let y = linear(x, &self.weight, &self.bias)?;
        self.input = Some(x.clone());
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let x = self.input.as_ref().ok_or_else(|| missing_cache("linear"))?;
        let (batch, features) = (x.dim(0), x.dim(1));
        let outputs = self.out_features();
        grad_out.expect_shape(&[batch, outputs], "linear grad_out")?;
        let g = grad_out.data();
        let w = self.weight.data();

        let mut gx = vec![T::zero(); batch * features];
        let mut gw = vec![T::zero(); outputs * features];
        let mut gb = vec![T::zero(); outputs];
        for b in 0..batch {
            let xr = x.row(b);
            let gxr = &mut gx[b * features..][..features];
            for o in 0..outputs {
                let gv = g[b * outputs + o];
                gb[o] += gv;
                let wr = &w[o * features..][..features];
                let gwr = &mut gw[o * features..][..features];
                for f in 0..features {
                    gxr[f] += gv * wr[f];
                    gwr[f] += gv * xr[f];
                }
            }
        }
        self.weight.accumulate_grad(&gw)?;
        self.bias.accumulate_grad(&gb)?;
        Tensor::from_vec(&[batch, features], gx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_map() {
        let x = Tensor::from_vec(&[2, 2], vec![1.0f64, 2.0, -1.0, 0.5]).unwrap();
        let w = Tensor::from_vec(&[3, 2], vec![1.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        let b = Tensor::from_vec(&[3], vec![0.0, 0.0, 10.0]).unwrap();
        let y = linear(&x, &w, &b).unwrap();
        assert_eq!(y.data(), &[1.0, 2.0, 13.0, -1.0, 0.5, 9.5]);
    }

    #[test]
    fn feature_mismatch_is_shape_error() {
        let x = Tensor::<f32>::zeros(&[1, 3]);
        let w = Tensor::zeros(&[2, 4]);
        let b = Tensor::zeros(&[2]);
        assert!(linear(&x, &w, &b).is_err());
    }
}
