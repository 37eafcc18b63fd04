//! Central finite-difference verification of analytic gradients.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Layer, Mode};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const FD_STEP: f64 = 1e-4;
pub const DEFAULT_TOLERANCE: f64 = 1e-3;

/// Largest share of checked coordinates that may be set aside as kinks.
pub const MAX_KINK_FRACTION: f64 = 0.02;

/// Denominator floor for the relative error, so that gradients that are
/// zero up to round-off are compared absolutely.
pub const REL_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(REL_FLOOR);
    (analytic - numeric).abs() / denom
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `tensor[index]` of the worst coordinate.
    pub worst: String,
    pub checked: usize,
    /// Coordinates whose differences at steps `h` and `h/2` disagree with
    /// each other: a ReLU or max-pool switch lies inside the step, so the
    /// difference quotient is no derivative estimate. Excluded from the
    /// error, bounded by [`MAX_KINK_FRACTION`].
    pub kinks: usize,
    pub tolerance: f64,
    pub passed: bool,
}

/// A scalar objective over a set of flat coordinate groups.
pub trait GradCheckTarget {
    /// Names and lengths of the coordinate groups.
    fn groups(&mut self) -> Vec<(String, usize)>;

    fn get(&mut self, group: usize, index: usize) -> f64;

    fn set(&mut self, group: usize, index: usize, value: f64);

    fn objective(&mut self) -> Result<f64>;

    /// Analytic gradient of the objective, one vector per group.
    fn gradients(&mut self) -> Result<Vec<Vec<f64>>>;
}

/// Which coordinates to perturb.
#[derive(Debug, Clone, Copy)]
pub enum Coverage {
    All,
    /// At most `per_group` randomly chosen coordinates from each group.
    Sampled { per_group: usize, seed: u64 },
}

pub fn run_check(
    target: &mut dyn GradCheckTarget,
    tolerance: f64,
    coverage: Coverage,
) -> Result<GradCheckReport> {
    let first = target.objective()?;
    let second = target.objective()?;
    if first.to_bits() != second.to_bits() {
        return Err(Error::InvalidCheck(format!(
            "objective is not deterministic ({first} vs {second})"
        )));
    }

    let analytic = target.gradients()?;
    let groups = target.groups();
    if analytic.len() != groups.len() {
        return Err(Error::InvalidCheck("gradient group count mismatch".into()));
    }
    let mut rng = match coverage {
        Coverage::Sampled { seed, .. } => Some(ChaCha8Rng::seed_from_u64(seed)),
        Coverage::All => None,
    };

    let mut max_rel = 0.0f64;
    let mut worst = String::new();
    let mut checked = 0;
    let mut kinks = 0;
    for (gi, (name, len)) in groups.iter().enumerate() {
        if analytic[gi].len() != *len {
            return Err(Error::InvalidCheck(format!("gradient length mismatch for {name}")));
        }
        let indices: Vec<usize> = match (coverage, rng.as_mut()) {
            (Coverage::Sampled { per_group, .. }, Some(rng)) if per_group < *len => {
                sample(rng, *len, per_group).into_vec()
            }
            _ => (0..*len).collect(),
        };
        for idx in indices {
            let numeric = central_difference(target, gi, idx, FD_STEP)?;
            let mut rel = relative_error(analytic[gi][idx], numeric);
            checked += 1;
            if rel >= tolerance {
                let half = central_difference(target, gi, idx, FD_STEP / 2.0)?;
                if relative_error(numeric, half) >= tolerance {
                    kinks += 1;
                    rel = 0.0;
                }
            }
            if rel > max_rel || !rel.is_finite() {
                max_rel = if rel.is_finite() { rel } else { f64::INFINITY };
                worst = format!("{name}[{idx}]");
            }
        }
    }
    Ok(GradCheckReport {
        max_rel_error: max_rel,
        worst,
        checked,
        kinks,
        tolerance,
        passed: max_rel < tolerance && kinks as f64 <= MAX_KINK_FRACTION * checked as f64,
    })
}

fn central_difference(
    target: &mut dyn GradCheckTarget,
    group: usize,
    index: usize,
    step: f64,
) -> Result<f64> {
    let orig = target.get(group, index);
    target.set(group, index, orig + step);
    let plus = target.objective()?;
    target.set(group, index, orig - step);
    let minus = target.objective()?;
    target.set(group, index, orig);
    Ok((plus - minus) / (2.0 * step))
}

/// Adapts a single layer: objective `Σ y ⊙ r` for a fixed random projection
/// `r`, coordinates are every parameter followed by the input.
pub struct LayerTarget<'a, L: Layer<f64>> {
    layer: &'a mut L,
    input: Tensor<f64>,
    projection: Option<Vec<f64>>,
    seed: u64,
    mode: Mode,
}

impl<'a, L: Layer<f64>> LayerTarget<'a, L> {
    pub fn new(layer: &'a mut L, input: Tensor<f64>, seed: u64, mode: Mode) -> Self {
        Self {
            layer,
            input,
            projection: None,
            seed,
            mode,
        }
    }

    fn output(&mut self) -> Result<Tensor<f64>> {
        self.layer.forward(&self.input, self.mode)
    }

    fn projection_for(&mut self, len: usize) -> &[f64] {
        let seed = self.seed;
        self.projection.get_or_insert_with(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
            (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
        })
    }

    fn param_count(&mut self) -> usize {
        let mut n = 0;
        self.layer.visit_params("", &mut |_, _| n += 1);
        n
    }
}

impl<L: Layer<f64>> GradCheckTarget for LayerTarget<'_, L> {
    fn groups(&mut self) -> Vec<(String, usize)> {
        let mut out = Vec::new();
        self.layer.visit_params("", &mut |name, p| out.push((name.to_string(), p.len())));
        out.push(("input".to_string(), self.input.len()));
        out
    }

    fn get(&mut self, group: usize, index: usize) -> f64 {
        let n = self.param_count();
        if group == n {
            return self.input.data()[index];
        }
        let mut value = 0.0;
        let mut i = 0;
        self.layer.visit_params("", &mut |_, p| {
            if i == group {
                value = p.data()[index];
            }
            i += 1;
        });
        value
    }

    fn set(&mut self, group: usize, index: usize, value: f64) {
        let n = self.param_count();
        if group == n {
            self.input.data_mut()[index] = value;
            return;
        }
        let mut i = 0;
        self.layer.visit_params("", &mut |_, p| {
            if i == group {
                p.data_mut()[index] = value;
            }
            i += 1;
        });
    }

    fn objective(&mut self) -> Result<f64> {
        let y = self.output()?;
        let r = self.projection_for(y.len()).to_vec();
        Ok(y.data().iter().zip(&r).map(|(a, b)| a * b).sum())
    }

    fn gradients(&mut self) -> Result<Vec<Vec<f64>>> {
        self.layer.zero_grad();
        let y = self.output()?;
        let r = self.projection_for(y.len()).to_vec();
        let grad_out = Tensor::from_vec(y.shape(), r)?;
        let gx = self.layer.backward(&grad_out)?;
        let mut out = Vec::new();
        self.layer.visit_params("", &mut |_, p| {
            out.push(p.grad().map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; p.len()]))
        });
        out.push(gx.into_data());
        Ok(out)
    }
}

/// Checks every parameter and input coordinate of `layer` on a random input
/// of `input_shape` drawn from `seed`.
pub fn grad_check<L: Layer<f64>>(
    layer: &mut L,
    input_shape: &[usize],
    tolerance: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = input_shape.iter().product();
    let input = Tensor::from_vec(input_shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
    let mut target = LayerTarget::new(layer, input, seed, Mode::Train);
    run_check(&mut target, tolerance, Coverage::All)
}
