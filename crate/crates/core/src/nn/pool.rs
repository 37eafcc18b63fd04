use super::{missing_cache, Layer, Mode, Parameterized};
use crate::error::{shape_err, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Pooled length: `floor((L + 2p - k) / stride) + 1`, or `None` when the
/// window does not fit.
pub fn pool_out_len(len: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    super::conv_out_len(len, kernel, stride, padding)
}

fn out_len_or_err(len: usize, kernel: usize, stride: usize, padding: usize, what: &str) -> Result<usize> {
    pool_out_len(len, kernel, stride, padding).ok_or_else(|| {
        shape_err!("{what}: window {kernel} (stride {stride}, padding {padding}) larger than input length {len}")
    })
}

/// Window maximum. Padded positions never win. Returns the output and, per
/// output element, the flat input index it was taken from.
pub fn maxpool1d<T: Scalar>(
    x: &Tensor<T>,
    kernel: usize,
    stride: usize,
    padding: usize,
) -> Result<(Tensor<T>, Vec<usize>)> {
    x.expect_rank(3, "maxpool1d input")?;
    let (batch, channels, len) = (x.dim(0), x.dim(1), x.dim(2));
    let out_len = out_len_or_err(len, kernel, stride, padding, "maxpool1d")?;
    if padding >= kernel {
        return Err(shape_err!("maxpool1d: padding {padding} must be smaller than window {kernel}"));
    }
    let xd = x.data();
    let mut out = Vec::with_capacity(batch * channels * out_len);
    let mut argmax = Vec::with_capacity(out.capacity());
    for row in 0..batch * channels {
        let base = row * len;
        for j in 0..out_len {
            let start = (j * stride) as isize - padding as isize;
            let lo = start.max(0) as usize;
            let hi = ((start + kernel as isize) as usize).min(len);
            let mut best = lo;
            for i in lo + 1..hi {
                if xd[base + i] > xd[base + best] {
                    best = i;
                }
            }
            out.push(xd[base + best]);
            argmax.push(base + best);
        }
    }
    Ok((Tensor::from_vec(&[batch, channels, out_len], out)?, argmax))
}

/// Window mean without padding.
pub fn avgpool1d<T: Scalar>(x: &Tensor<T>, kernel: usize, stride: usize) -> Result<Tensor<T>> {
    x.expect_rank(3, "avgpool1d input")?;
    let (batch, channels, len) = (x.dim(0), x.dim(1), x.dim(2));
    let out_len = out_len_or_err(len, kernel, stride, 0, "avgpool1d")?;
    let scale = T::one() / T::of_usize(kernel);
    let xd = x.data();
    let mut out = Vec::with_capacity(batch * channels * out_len);
    for row in 0..batch * channels {
        let xr = &xd[row * len..][..len];
        for j in 0..out_len {
            out.push(xr[j * stride..j * stride + kernel].iter().copied().sum::<T>() * scale);
        }
    }
    Tensor::from_vec(&[batch, channels, out_len], out)
}

#[derive(Debug, Clone)]
pub struct MaxPool1d {
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    cache: Option<(Vec<usize>, Vec<usize>)>,
}

impl MaxPool1d {
    pub fn new(kernel: usize, stride: usize, padding: usize) -> Self {
        Self {
            kernel,
            stride,
            padding,
            cache: None,
        }
    }

    pub fn out_len(&self, len: usize) -> Option<usize> {
        pool_out_len(len, self.kernel, self.stride, self.padding)
    }

    pub fn clear_cache(&mut self) {
        self.cache = None;
    }
}

impl<T: Scalar> Parameterized<T> for MaxPool1d {}

impl<T: Scalar> Layer<T> for MaxPool1d {
    fn forward(&mut self, x: &Tensor<T>, _mode: Mode) -> Result<Tensor<T>> {
        let (y, argmax) = maxpool1d(x, self.kernel, self.stride, self.padding)?;
        self.cache = Some((x.shape().to_vec(), argmax));
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let (shape, argmax) = self.cache.as_ref().ok_or_else(|| missing_cache("maxpool1d"))?;
        if grad_out.len() != argmax.len() {
            return Err(shape_err!("maxpool1d: grad_out length mismatch"));
        }
        let mut gx = vec![T::zero(); shape.iter().product()];
        for (&g, &src) in grad_out.data().iter().zip(argmax) {
            gx[src] += g;
        }
        Tensor::from_vec(shape, gx)
    }
}

#[derive(Debug, Clone)]
pub struct AvgPool1d {
    pub kernel: usize,
    pub stride: usize,
    input_shape: Option<Vec<usize>>,
}

impl AvgPool1d {
    pub fn new(kernel: usize, stride: usize) -> Self {
        Self {
            kernel,
            stride,
            input_shape: None,
        }
    }

    pub fn out_len(&self, len: usize) -> Option<usize> {
        pool_out_len(len, self.kernel, self.stride, 0)
    }

    pub fn clear_cache(&mut self) {
        self.input_shape = None;
    }
}

impl<T: Scalar> Parameterized<T> for AvgPool1d {}

impl<T: Scalar> Layer<T> for AvgPool1d {
    fn forward(&mut self, x: &Tensor<T>, _mode: Mode) -> Result<Tensor<T>> {
        let y = avgpool1d(x, self.kernel, self.stride)?;
        self.input_shape = Some(x.shape().to_vec());
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let shape = self.input_shape.as_ref().ok_or_else(|| missing_cache("avgpool1d"))?;
        let (rows, len) = (shape[0] * shape[1], shape[2]);
        let out_len = grad_out.dim(2);
        if grad_out.len() != rows * out_len {
            return Err(shape_err!("avgpool1d: grad_out length mismatch"));
        }
        let scale = T::one() / T::of_usize(self.kernel);
        let g = grad_out.data();
        let mut gx = vec![T::zero(); rows * len];
        for row in 0..rows {
            for j in 0..out_len {
                let gv = g[row * out_len + j] * scale;
                for v in &mut gx[row * len + j * self.stride..][..self.kernel] {
                    *v += gv;
                }
            }
        }
        Tensor::from_vec(shape, gx)
    }
}
