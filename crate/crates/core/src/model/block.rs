use rand::Rng;

use crate::error::Result;
use crate::nn::{join, BatchNorm1d, Conv1d, Layer, Mode, Parameterized, Relu};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub(crate) fn init_conv<T: Scalar, R: Rng>(conv: &mut Conv1d<T>, rng: &mut R) {
    let bound = (1.0 / conv.fan_in() as f64).sqrt();
    for v in conv.weight.data_mut().iter_mut().chain(conv.bias.data_mut()) {
        *v = T::of(rng.gen_range(-bound..bound));
    }
}

pub(crate) fn init_bn<T: Scalar>(bn: &mut BatchNorm1d<T>) {
    bn.gamma.data_mut().fill(T::one());
    bn.beta.data_mut().fill(T::zero());
    bn.running_mean.data_mut().fill(T::zero());
    bn.running_var.data_mut().fill(T::one());
}

fn add<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    a.expect_shape(b.shape(), "residual sum")?;
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| x + y).collect();
    Tensor::from_vec(a.shape(), data)
}

/// `C1D k×1 → BN1D → ReLU`.
#[derive(Debug, Clone)]
pub struct ConvUnit<T: Scalar> {
    pub conv: Conv1d<T>,
    pub bn: BatchNorm1d<T>,
    relu: Relu,
}

impl<T: Scalar> ConvUnit<T> {
    pub fn new(in_ch: usize, out_ch: usize, kernel: usize, stride: usize, padding: usize) -> Self {
        Self {
            conv: Conv1d::new(in_ch, out_ch, kernel, stride, padding),
            bn: BatchNorm1d::new(out_ch),
            relu: Relu::new(),
        }
    }

    pub(crate) fn init<R: Rng>(&mut self, rng: &mut R) {
        init_conv(&mut self.conv, rng);
        init_bn(&mut self.bn);
    }

    pub fn out_len(&self, len: usize) -> Option<usize> {
        self.conv.out_len(len)
    }

    pub fn clear_cache(&mut self) {
        self.conv.clear_cache();
        self.bn.clear_cache();
        self.relu.clear_cache();
    }
}

impl<T: Scalar> Parameterized<T> for ConvUnit<T> {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        self.conv.visit_params(&join(prefix, "conv"), f);
        self.bn.visit_params(&join(prefix, "bn"), f);
    }

    fn visit_buffers(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        self.bn.visit_buffers(&join(prefix, "bn"), f);
    }
}

impl<T: Scalar> Layer<T> for ConvUnit<T> {
    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let y = self.conv.forward(x, mode)?;
        let y = self.bn.forward(&y, mode)?;
        Ok(self.relu.forward_raw(&y))
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let g = self.relu.backward_raw(grad_out)?;
        let g = self.bn.backward(&g)?;
        self.conv.backward(&g)
    }
}

/// Basic residual block: `ReLU(f(x) + shortcut(x))` where
/// `f = C1D3×1 → BN → ReLU → C1D3×1 → BN` and `shortcut = C1D1×1 → BN`.
/// The stride applies to the first main-path conv and the shortcut.
#[derive(Debug, Clone)]
pub struct ResidualBlock<T: Scalar> {
    pub conv1: Conv1d<T>,
    pub bn1: BatchNorm1d<T>,
    relu1: Relu,
    pub conv2: Conv1d<T>,
    pub bn2: BatchNorm1d<T>,
    pub shortcut_conv: Conv1d<T>,
    pub shortcut_bn: BatchNorm1d<T>,
    out_relu: Relu,
}

impl<T: Scalar> ResidualBlock<T> {
    pub fn new(in_ch: usize, out_ch: usize, stride: usize) -> Self {
        Self {
            conv1: Conv1d::new(in_ch, out_ch, 3, stride, 1),
            bn1: BatchNorm1d::new(out_ch),
            relu1: Relu::new(),
            conv2: Conv1d::new(out_ch, out_ch, 3, 1, 1),
            bn2: BatchNorm1d::new(out_ch),
            shortcut_conv: Conv1d::new(in_ch, out_ch, 1, stride, 0),
            shortcut_bn: BatchNorm1d::new(out_ch),
            out_relu: Relu::new(),
        }
    }

    pub fn stride(&self) -> usize {
        self.conv1.stride
    }

    pub fn out_len(&self, len: usize) -> Option<usize> {
        self.conv1.out_len(len).and_then(|l| self.conv2.out_len(l))
    }

    pub(crate) fn init<R: Rng>(&mut self, rng: &mut R) {
        init_conv(&mut self.conv1, rng);
        init_bn(&mut self.bn1);
        init_conv(&mut self.conv2, rng);
        init_bn(&mut self.bn2);
        init_conv(&mut self.shortcut_conv, rng);
        init_bn(&mut self.shortcut_bn);
    }

    pub fn clear_cache(&mut self) {
        self.conv1.clear_cache();
        self.bn1.clear_cache();
        self.relu1.clear_cache();
        self.conv2.clear_cache();
        self.bn2.clear_cache();
        self.shortcut_conv.clear_cache();
        self.shortcut_bn.clear_cache();
        self.out_relu.clear_cache();
    }
}

impl<T: Scalar> Parameterized<T> for ResidualBlock<T> {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        self.conv1.visit_params(&join(prefix, "conv1"), f);
        self.bn1.visit_params(&join(prefix, "bn1"), f);
        self.conv2.visit_params(&join(prefix, "conv2"), f);
        self.bn2.visit_params(&join(prefix, "bn2"), f);
        self.shortcut_conv.visit_params(&join(prefix, "shortcut_conv"), f);
        self.shortcut_bn.visit_params(&join(prefix, "shortcut_bn"), f);
    }

    fn visit_buffers(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        self.bn1.visit_buffers(&join(prefix, "bn1"), f);
        self.bn2.visit_buffers(&join(prefix, "bn2"), f);
        self.shortcut_bn.visit_buffers(&join(prefix, "shortcut_bn"), f);
    }
}

impl<T: Scalar> Layer<T> for ResidualBlock<T> {
    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let h = self.conv1.forward(x, mode)?;
        let h = self.bn1.forward(&h, mode)?;
        let h = self.relu1.forward_raw(&h);
        let h = self.conv2.forward(&h, mode)?;
        let main = self.bn2.forward(&h, mode)?;
        let s = self.shortcut_conv.forward(x, mode)?;
        let short = self.shortcut_bn.forward(&s, mode)?;
        Ok(self.out_relu.forward_raw(&add(&main, &short)?))
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let g = self.out_relu.backward_raw(grad_out)?;
        let gm = self.bn2.backward(&g)?;
        let gm = self.conv2.backward(&gm)?;
        let gm = self.relu1.backward_raw(&gm)?;
        let gm = self.bn1.backward(&gm)?;
        let gx_main = self.conv1.backward(&gm)?;
        let gs = self.shortcut_bn.backward(&g)?;
        let gx_short = self.shortcut_conv.backward(&gs)?;
        add(&gx_main, &gx_short)
    }
}
