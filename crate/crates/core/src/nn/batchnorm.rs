use rayon::prelude::*;

use super::{join, missing_cache, Layer, Mode, Parameterized};
use crate::error::{shape_err, Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone)]
struct BnCache<T> {
    shape: [usize; 3],
    xhat: Vec<T>,
    inv_std: Vec<T>,
    mode: Mode,
}

/// Per-channel batch normalization over `[B, C, L]` inputs.
///
/// Train mode normalizes with the biased batch variance and folds the
/// unbiased variance into the running estimate.
#[derive(Debug, Clone)]
pub struct BatchNorm1d<T: Scalar> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
    pub eps: T,
    pub momentum: T,
    cache: Option<BnCache<T>>,
}

impl<T: Scalar> BatchNorm1d<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Tensor::param(&[channels], vec![T::one(); channels]).expect("consistent shape"),
            beta: Tensor::param(&[channels], vec![T::zero(); channels]).expect("consistent shape"),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::full(&[channels], T::one()),
            eps: T::of(BN_EPS),
            momentum: T::of(BN_MOMENTUM),
            cache: None,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    pub fn clear_cache(&mut self) {
        self.cache = None;
    }

    fn batch_stats(&self, x: &[T], batch: usize, channels: usize, len: usize) -> Vec<(T, T)> {
        let n = T::of_usize(batch * len);
        (0..channels)
            .into_par_iter()
            .map(|c| {
                let mut sum = T::zero();
                for b in 0..batch {
                    sum += x[(b * channels + c) * len..][..len].iter().copied().sum::<T>();
                }
                let mean = sum / n;
                let mut sq = T::zero();
                for b in 0..batch {
                    for &v in &x[(b * channels + c) * len..][..len] {
                        let d = v - mean;
                        sq += d * d;
                    }
                }
                (mean, sq / n)
            })
            .collect()
    }
}

impl<T: Scalar> Parameterized<T> for BatchNorm1d<T> {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        f(&join(prefix, "gamma"), &mut self.gamma);
        f(&join(prefix, "beta"), &mut self.beta);
    }

    fn visit_buffers(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        f(&join(prefix, "running_mean"), &mut self.running_mean);
        f(&join(prefix, "running_var"), &mut self.running_var);
    }
}

impl<T: Scalar> Layer<T> for BatchNorm1d<T> {
    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        x.expect_rank(3, "batchnorm1d input")?;
        let (batch, channels, len) = (x.dim(0), x.dim(1), x.dim(2));
        if channels != self.channels() {
            return Err(shape_err!(
                "batchnorm1d: expected {} channels, got {channels}",
                self.channels()
            ));
        }
        let xd = x.data();
        let (means, inv_std): (Vec<T>, Vec<T>) = match mode {
            Mode::Train => {
                let n = batch * len;
                if n < 2 {
                    return Err(Error::Degenerate(format!(
                        "batchnorm1d train mode needs at least 2 values per channel, got {n}"
                    )));
                }
                let stats = self.batch_stats(xd, batch, channels, len);
                let unbias = T::of_usize(n) / T::of_usize(n - 1);
                let keep = T::one() - self.momentum;
                let rm = self.running_mean.data_mut();
                for (c, &(mean, _)) in stats.iter().enumerate() {
                    rm[c] = keep * rm[c] + self.momentum * mean;
                }
                let rv = self.running_var.data_mut();
                for (c, &(_, var)) in stats.iter().enumerate() {
                    rv[c] = keep * rv[c] + self.momentum * var * unbias;
                }
                stats
                    .iter()
                    .map(|&(m, v)| (m, T::one() / (v + self.eps).sqrt()))
                    .unzip()
            }
            Mode::Eval => self
                .running_mean
                .data()
                .iter()
                .zip(self.running_var.data())
                .map(|(&m, &v)| (m, T::one() / (v + self.eps).sqrt()))
                .unzip(),
        };

        let gamma = self.gamma.data();
        let beta = self.beta.data();
        let mut xhat = vec![T::zero(); xd.len()];
        let mut out = vec![T::zero(); xd.len()];
        xhat.par_chunks_mut(len)
            .zip(out.par_chunks_mut(len))
            .enumerate()
            .for_each(|(row, (hr, or))| {
                let c = row % channels;
                let xr = &xd[row * len..][..len];
                for ((h, o), &v) in hr.iter_mut().zip(or.iter_mut()).zip(xr) {
                    *h = (v - means[c]) * inv_std[c];
                    *o = gamma[c] * *h + beta[c];
                }
            });
        self.cache = Some(BnCache {
            shape: [batch, channels, len],
            xhat,
            inv_std,
            mode,
        });
        let out = Tensor::from_vec(&[batch, channels, len], out)?;
        out.debug_check_finite("batchnorm1d");
        Ok(out)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let cache = self.cache.as_ref().ok_or_else(|| missing_cache("batchnorm1d"))?;
        let [batch, channels, len] = cache.shape;
        grad_out.expect_shape(&cache.shape, "batchnorm1d grad_out")?;
        let g = grad_out.data();
        let xhat = &cache.xhat;

        let sums: Vec<(T, T)> = (0..channels)
            .into_par_iter()
            .map(|c| {
                let mut sg = T::zero();
                let mut sgx = T::zero();
                for b in 0..batch {
                    let off = (b * channels + c) * len;
                    for (&gv, &h) in g[off..][..len].iter().zip(&xhat[off..][..len]) {
                        sg += gv;
                        sgx += gv * h;
                    }
                }
                (sg, sgx)
            })
            .collect();

        let gamma = self.gamma.data().to_vec();
        let n = T::of_usize(batch * len);
        let mode = cache.mode;
        let inv_std = &cache.inv_std;
        let mut gx = vec![T::zero(); g.len()];
        gx.par_chunks_mut(len).enumerate().for_each(|(row, gr)| {
            let c = row % channels;
            let off = row * len;
            let scale = gamma[c] * inv_std[c];
            match mode {
                Mode::Train => {
                    let (sg, sgx) = sums[c];
                    for (i, dst) in gr.iter_mut().enumerate() {
                        *dst = scale / n * (n * g[off + i] - sg - xhat[off + i] * sgx);
                    }
                }
                Mode::Eval => {
                    for (i, dst) in gr.iter_mut().enumerate() {
                        *dst = scale * g[off + i];
                    }
                }
            }
        });

        let dgamma: Vec<T> = sums.iter().map(|&(_, sgx)| sgx).collect();
        let dbeta: Vec<T> = sums.iter().map(|&(sg, _)| sg).collect();
        self.gamma.accumulate_grad(&dgamma)?;
        self.beta.accumulate_grad(&dbeta)?;
        Tensor::from_vec(&[batch, channels, len], gx)
    }
}
