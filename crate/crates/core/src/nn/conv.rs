use rayon::prelude::*;

use super::{join, missing_cache, Layer, Mode, Parameterized};
use crate::error::{shape_err, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Output length of a 1-D sliding window.
pub fn conv_out_len(len: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    let padded = len + 2 * padding;
    if stride == 0 || kernel == 0 || kernel > padded {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

/// Output indices `j` for which input position `j*stride + tau - padding`
/// falls inside `0..len`.
#[inline]
fn valid_span(tau: usize, padding: usize, stride: usize, len: usize, out_len: usize) -> (usize, usize) {
    let start = if padding > tau {
        (padding - tau).div_ceil(stride)
    } else {
        0
    };
    if len + padding <= tau {
        return (0, 0);
    }
    let end = ((len - 1 + padding - tau) / stride + 1).min(out_len);
    (start.min(end), end)
}

fn check_conv_shapes<T: Scalar>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    stride: usize,
    padding: usize,
) -> Result<(usize, usize, usize, usize, usize, usize)> {
    x.expect_rank(3, "conv1d input")?;
    weight.expect_rank(3, "conv1d weight")?;
    let (batch, cin, len) = (x.dim(0), x.dim(1), x.dim(2));
    let (cout, wcin, k) = (weight.dim(0), weight.dim(1), weight.dim(2));
    if wcin != cin {
        return Err(shape_err!(
            "conv1d: input has {cin} channels, weight expects {wcin}"
        ));
    }
    let out_len = conv_out_len(len, k, stride, padding).ok_or_else(|| {
        shape_err!("conv1d: kernel {k} stride {stride} does not fit length {len} with padding {padding}")
    })?;
    Ok((batch, cin, len, cout, k, out_len))
}

/// Cross-correlation over the time axis with zero padding.
///
/// `x` is `[B, Cin, L]`, `weight` is `[Cout, Cin, K]`, `bias` is `[Cout]`.
pub fn conv1d<T: Scalar>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
    stride: usize,
    padding: usize,
) -> Result<Tensor<T>> {
    let (batch, cin, len, cout, k, out_len) = check_conv_shapes(x, weight, stride, padding)?;
    bias.expect_shape(&[cout], "conv1d bias")?;
    let xd = x.data();
    let wd = weight.data();
    let bd = bias.data();
    let mut out = vec![T::zero(); batch * cout * out_len];
    out.par_chunks_mut(out_len)
        .with_min_len(4)
        .enumerate()
        .for_each(|(row, out_row)| {
            let (b, o) = (row / cout, row % cout);
            out_row.fill(bd[o]);
            for c in 0..cin {
                let xr = &xd[(b * cin + c) * len..][..len];
                let wr = &wd[(o * cin + c) * k..][..k];
                for (tau, &w) in wr.iter().enumerate() {
                    let (j0, j1) = valid_span(tau, padding, stride, len, out_len);
                    if stride == 1 {
                        let base = j0 + tau - padding;
                        for (dst, &src) in out_row[j0..j1].iter_mut().zip(&xr[base..]) {
                            *dst += w * src;
                        }
                    } else {
                        for j in j0..j1 {
                            out_row[j] += w * xr[j * stride + tau - padding];
                        }
                    }
                }
            }
        });
    let out = Tensor::from_vec(&[batch, cout, out_len], out)?;
    out.debug_check_finite("conv1d");
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ConvGrads<T> {
    pub input: Tensor<T>,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

pub fn conv1d_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    x: &Tensor<T>,
    weight: &Tensor<T>,
    stride: usize,
    padding: usize,
) -> Result<ConvGrads<T>> {
    let (batch, cin, len, cout, k, out_len) = check_conv_shapes(x, weight, stride, padding)?;
    grad_out.expect_shape(&[batch, cout, out_len], "conv1d grad_out")?;
    let g = grad_out.data();
    let xd = x.data();
    let wd = weight.data();

    let mut gx = vec![T::zero(); batch * cin * len];
    gx.par_chunks_mut(cin * len).enumerate().for_each(|(b, gxb)| {
        for o in 0..cout {
            let gr = &g[(b * cout + o) * out_len..][..out_len];
            for c in 0..cin {
                let gxr = &mut gxb[c * len..][..len];
                let wr = &wd[(o * cin + c) * k..][..k];
                for (tau, &w) in wr.iter().enumerate() {
                    let (j0, j1) = valid_span(tau, padding, stride, len, out_len);
                    for j in j0..j1 {
                        gxr[j * stride + tau - padding] += w * gr[j];
                    }
                }
            }
        }
    });

    let mut gw = vec![T::zero(); cout * cin * k];
    gw.par_chunks_mut(cin * k).enumerate().for_each(|(o, gwo)| {
        for b in 0..batch {
            let gr = &g[(b * cout + o) * out_len..][..out_len];
            for c in 0..cin {
                let xr = &xd[(b * cin + c) * len..][..len];
                for tau in 0..k {
                    let (j0, j1) = valid_span(tau, padding, stride, len, out_len);
                    let mut acc = T::zero();
                    for j in j0..j1 {
                        acc += gr[j] * xr[j * stride + tau - padding];
                    }
                    gwo[c * k + tau] += acc;
                }
            }
        }
    });

    let gb: Vec<T> = (0..cout)
        .map(|o| {
            (0..batch)
                .map(|b| g[(b * cout + o) * out_len..][..out_len].iter().copied().sum::<T>())
                .sum()
        })
        .collect();

    Ok(ConvGrads {
        input: Tensor::from_vec(&[batch, cin, len], gx)?,
        weight: Tensor::from_vec(&[cout, cin, k], gw)?,
        bias: Tensor::from_vec(&[cout], gb)?,
    })
}

/// 1-D convolution layer (`C1D k×1`).
#[derive(Debug, Clone)]
pub struct Conv1d<T: Scalar> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
    pub stride: usize,
    pub padding: usize,
    input: Option<Tensor<T>>,
}

impl<T: Scalar> Conv1d<T> {
    pub fn new(in_ch: usize, out_ch: usize, kernel: usize, stride: usize, padding: usize) -> Self {
        Self {
            weight: Tensor::param(&[out_ch, in_ch, kernel], vec![T::zero(); out_ch * in_ch * kernel])
                .expect("consistent shape"),
            bias: Tensor::param(&[out_ch], vec![T::zero(); out_ch]).expect("consistent shape"),
            stride,
            padding,
            input: None,
        }
    }

    pub fn in_channels(&self) -> usize {
        self.weight.dim(1)
    }

    pub fn out_channels(&self) -> usize {
        self.weight.dim(0)
    }

    pub fn kernel(&self) -> usize {
        self.weight.dim(2)
    }

    pub fn fan_in(&self) -> usize {
        self.in_channels() * self.kernel()
    }

    pub fn out_len(&self, len: usize) -> Option<usize> {
        conv_out_len(len, self.kernel(), self.stride, self.padding)
    }

    pub fn clear_cache(&mut self) {
        self.input = None;
    }
}

impl<T: Scalar> Parameterized<T> for Conv1d<T> {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        f(&join(prefix, "weight"), &mut self.weight);
        f(&join(prefix, "bias"), &mut self.bias);
    }
}

impl<T: Scalar> Layer<T> for Conv1d<T> {
    fn forward(&mut self, x: &Tensor<T>, _mode: Mode) -> Result<Tensor<T>> {
        let y = conv1d(x, &self.weight, &self.bias, self.stride, self.padding)?;
        self.input = Some(x.clone());
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let x = self.input.as_ref().ok_or_else(|| missing_cache("conv1d"))?;
        let grads = conv1d_backward(grad_out, x, &self.weight, self.stride, self.padding)?;
        self.weight.accumulate_grad(grads.weight.data())?;
        self.bias.accumulate_grad(grads.bias.data())?;
        Ok(grads.input)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct five-loop evaluation of the correlation definition.
    fn brute_conv(x: &Tensor<f64>, w: &Tensor<f64>, b: &Tensor<f64>, s: usize, p: usize) -> Vec<f64> {
        let (bn, cin, l) = (x.dim(0), x.dim(1), x.dim(2));
        let (cout, _, k) = (w.dim(0), w.dim(1), w.dim(2));
        let lout = (l + 2 * p - k) / s + 1;
        let mut out = vec![0.0; bn * cout * lout];
        for bi in 0..bn {
            for o in 0..cout {
                for j in 0..lout {
                    let mut acc = b.data()[o];
                    for c in 0..cin {
                        for tau in 0..k {
                            let pos = (j * s + tau) as isize - p as isize;
                            if pos >= 0 && (pos as usize) < l {
                                acc += w.data()[(o * cin + c) * k + tau]
                                    * x.data()[(bi * cin + c) * l + pos as usize];
                            }
                        }
                    }
                    out[(bi * cout + o) * lout + j] = acc;
                }
            }
        }
        out
    }

    fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
        let n = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn identity_kernel() {
        let x = Tensor::from_vec(&[1, 1, 3], vec![1.0, 2.0, 3.0]).unwrap();
        let w = Tensor::from_vec(&[1, 1, 1], vec![1.0]).unwrap();
        let b = Tensor::from_vec(&[1], vec![0.0]).unwrap();
        let y = conv1d(&x, &w, &b, 1, 0).unwrap();
        assert_eq!(y.data(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn bias_only() {
        let x = Tensor::from_vec(&[1, 2, 5], (0..10).map(|v| v as f64).collect()).unwrap();
        let w = Tensor::zeros(&[3, 2, 3]);
        let b = Tensor::full(&[3], 0.5);
        let y = conv1d(&x, &w, &b, 1, 1).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn padded_difference_kernel() {
        let x = Tensor::from_vec(&[1, 1, 4], vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let w = Tensor::from_vec(&[1, 1, 3], vec![1.0, 0.0, -1.0]).unwrap();
        let b = Tensor::zeros(&[1]);
        let y = conv1d(&x, &w, &b, 1, 1).unwrap();
        assert_eq!(brute_conv(&x, &w, &b, 1, 1), vec![-1.0, -2.0, -2.0, 2.0]);
        assert_eq!(y.data(), &[-1.0, -2.0, -2.0, 2.0]);
    }

    #[test]
    fn matches_brute_force_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..40 {
            let b = rng.gen_range(1..=2);
            let cin = rng.gen_range(1..=4);
            let cout = rng.gen_range(1..=4);
            let l = rng.gen_range(1..=16);
            let k = rng.gen_range(1..=7);
            let s = rng.gen_range(1..=3);
            let p = rng.gen_range(0..=3);
            if k > l + 2 * p {
                continue;
            }
            let x = rand_tensor(&mut rng, &[b, cin, l]);
            let w = rand_tensor(&mut rng, &[cout, cin, k]);
            let bias = rand_tensor(&mut rng, &[cout]);
            let y = conv1d(&x, &w, &bias, s, p).unwrap();
            let oracle = brute_conv(&x, &w, &bias, s, p);
            assert_eq!(y.len(), oracle.len());
            for (a, e) in y.data().iter().zip(&oracle) {
                assert!((a - e).abs() < 1e-10, "{a} vs {e}");
            }
        }
    }

    #[test]
    fn zero_grad_out_gives_zero_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = rand_tensor(&mut rng, &[2, 3, 8]);
        let w = rand_tensor(&mut rng, &[2, 3, 3]);
        let g = Tensor::zeros(&[2, 2, 8]);
        let grads = conv1d_backward(&g, &x, &w, 1, 1).unwrap();
        assert!(grads.input.data().iter().all(|&v| v == 0.0));
        assert!(grads.weight.data().iter().all(|&v| v == 0.0));
        assert!(grads.bias.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_kernel_passes_gradient_through() {
        let x = Tensor::from_vec(&[1, 1, 4], vec![1.0, -2.0, 3.0, 0.5]).unwrap();
        let w = Tensor::from_vec(&[1, 1, 1], vec![1.0]).unwrap();
        let g = Tensor::from_vec(&[1, 1, 4], vec![0.1, 0.2, -0.3, 0.4]).unwrap();
        let grads = conv1d_backward(&g, &x, &w, 1, 0).unwrap();
        assert_eq!(grads.input.data(), g.data());
    }

    #[test]
    fn kernel_too_long_is_shape_error() {
        let x = Tensor::<f32>::zeros(&[1, 1, 2]);
        let w = Tensor::zeros(&[1, 1, 5]);
        let b = Tensor::zeros(&[1]);
        assert!(matches!(conv1d(&x, &w, &b, 1, 1), Err(crate::Error::Shape(_))));
        let w = Tensor::zeros(&[1, 2, 1]);
        assert!(matches!(conv1d(&x, &w, &b, 1, 0), Err(crate::Error::Shape(_))));
    }

    #[test]
    fn backward_without_forward_is_state_error() {
        let mut conv = Conv1d::<f32>::new(1, 1, 3, 1, 1);
        let g = Tensor::zeros(&[1, 1, 4]);
        assert!(matches!(conv.backward(&g), Err(crate::Error::State(_))));
    }
}
