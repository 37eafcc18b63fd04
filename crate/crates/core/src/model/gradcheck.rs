//! Finite-difference check of the whole network.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{NetworkSpec, ResNet1d};
use crate::error::Result;
use crate::nn::gradcheck::{run_check, Coverage, GradCheckReport, GradCheckTarget};
use crate::nn::{Mode, Parameterized};
use crate::tensor::Tensor;

/// Objective `Σ act ⊙ r_a + Σ loc ⊙ r_l` with fixed random projections.
/// Coordinates are every parameter followed by the input.
pub struct NetworkTarget<'a> {
    net: &'a mut ResNet1d<f64>,
    input: Tensor<f64>,
    proj_act: Vec<f64>,
    proj_loc: Vec<f64>,
    mode: Mode,
    n_params: usize,
}

impl<'a> NetworkTarget<'a> {
    pub fn new(net: &'a mut ResNet1d<f64>, input: Tensor<f64>, seed: u64, mode: Mode) -> Self {
        let b = input.dim(0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
        let mut draw = |n: usize| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
        let proj_act = draw(b * net.spec().num_activities);
        let proj_loc = draw(b * net.spec().num_locations);
        let mut n_params = 0;
        net.visit_params("", &mut |_, _| n_params += 1);
        Self {
            net,
            input,
            proj_act,
            proj_loc,
            mode,
            n_params,
        }
    }
}

impl GradCheckTarget for NetworkTarget<'_> {
    fn groups(&mut self) -> Vec<(String, usize)> {
        let mut out = Vec::new();
        self.net.visit_params("", &mut |n, p| out.push((n.to_string(), p.len())));
        out.push(("input".to_string(), self.input.len()));
        out
    }

    fn get(&mut self, group: usize, index: usize) -> f64 {
        if group == self.n_params {
            return self.input.data()[index];
        }
        let (mut i, mut value) = (0, 0.0);
        self.net.visit_params("", &mut |_, p| {
            if i == group {
                value = p.data()[index];
            }
            i += 1;
        });
        value
    }

    fn set(&mut self, group: usize, index: usize, value: f64) {
        if group == self.n_params {
            self.input.data_mut()[index] = value;
            return;
        }
        let mut i = 0;
        self.net.visit_params("", &mut |_, p| {
            if i == group {
                p.data_mut()[index] = value;
            }
            i += 1;
        });
    }

    fn objective(&mut self) -> Result<f64> {
        let (a, l) = self.net.forward(&self.input, self.mode)?;
        let dot = |t: &Tensor<f64>, r: &[f64]| t.data().iter().zip(r).map(|(x, y)| x * y).sum::<f64>();
        Ok(dot(&a, &self.proj_act) + dot(&l, &self.proj_loc))
    }

    fn gradients(&mut self) -> Result<Vec<Vec<f64>>> {
        self.net.zero_grad();
        let (a, l) = self.net.forward(&self.input, self.mode)?;
        let ga = Tensor::from_vec(a.shape(), self.proj_act.clone())?;
        let gl = Tensor::from_vec(l.shape(), self.proj_loc.clone())?;
        let gx = self.net.backward(&ga, &gl)?;
        let mut out = Vec::new();
        self.net.visit_params("", &mut |_, p| {
            out.push(p.grad().map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; p.len()]))
        });
        out.push(gx.into_data());
        Ok(out)
    }
}

/// Small network on a time-cropped input, suitable for whole-network checks.
pub fn cropped_spec(width_multiplier: f64, input_len: usize, seed: u64) -> NetworkSpec {
    NetworkSpec {
        width_multiplier,
        input_len,
        seed,
        ..NetworkSpec::default()
    }
}

/// Checks a freshly initialized network of `spec` on a random batch of
/// `batch` inputs drawn from `seed`.
///
/// Use [`Mode::Eval`] for tiny crops: with one or two values per channel,
/// train-mode batch norm is close to a step function and central
/// differences no longer approximate the derivative.
pub fn network_grad_check(
    spec: &NetworkSpec,
    batch: usize,
    mode: Mode,
    tolerance: f64,
    coverage: Coverage,
    seed: u64,
) -> Result<GradCheckReport> {
    let mut net = ResNet1d::<f64>::build(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = [batch, spec.input_channels, spec.input_len];
    let n = shape.iter().product();
    let input = Tensor::from_vec(&shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
    let mut target = NetworkTarget::new(&mut net, input, seed, mode);
    run_check(&mut target, tolerance, coverage)
}
