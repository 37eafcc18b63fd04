use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::block::{ConvUnit, ResidualBlock};
use super::spec::{NetworkSpec, HEAD_POOL, STAGE_STRIDES};
use crate::error::{shape_err, Error, Result};
use crate::nn::{join, AvgPool1d, Layer, Linear, MaxPool1d, Mode, Parameterized};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Named intermediate activation exposed for feature export.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Tap {
    Input,
    PostMaxpool,
    Rb(u8),
    PreFcActivity,
    PreFcLocation,
    OutputActivity,
    OutputLocation,
}

impl Tap {
    pub const ALL: [Tap; 10] = [
        Tap::Input,
        Tap::PostMaxpool,
        Tap::Rb(1),
        Tap::Rb(2),
        Tap::Rb(3),
        Tap::Rb(4),
        Tap::PreFcActivity,
        Tap::PreFcLocation,
        Tap::OutputActivity,
        Tap::OutputLocation,
    ];
}

impl fmt::Display for Tap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tap::Input => f.write_str("input"),
            Tap::PostMaxpool => f.write_str("post-maxpool"),
            Tap::Rb(i) => write!(f, "RB{i}"),
            Tap::PreFcActivity => f.write_str("pre-FC-activity"),
            Tap::PreFcLocation => f.write_str("pre-FC-location"),
            Tap::OutputActivity => f.write_str("output-activity"),
            Tap::OutputLocation => f.write_str("output-location"),
        }
    }
}

impl FromStr for Tap {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Tap::ALL
            .into_iter()
            .find(|t| t.to_string() == s.trim())
            .ok_or_else(|| {
                let known: Vec<String> = Tap::ALL.iter().map(Tap::to_string).collect();
                Error::Config(format!("unknown tap '{s}' (known: {})", known.join(", ")))
            })
    }
}

/// Task branch: conv units, average pool, flatten, fully connected scores.
#[derive(Debug, Clone)]
pub struct Head<T: Scalar> {
    pub units: Vec<ConvUnit<T>>,
    pub pool: AvgPool1d,
    pub fc: Linear<T>,
    pooled_shape: Option<Vec<usize>>,
}

impl<T: Scalar> Head<T> {
    fn new(in_ch: usize, width: usize, convs: usize, trunk_len: usize, classes: usize) -> Self {
        let units = (0..convs)
            .map(|i| ConvUnit::new(if i == 0 { in_ch } else { width }, width, 3, 1, 1))
            .collect();
        let window = HEAD_POOL.min(trunk_len);
        let pool = AvgPool1d::new(window, window);
        let pooled = pool.out_len(trunk_len).unwrap_or(1);
        Self {
            units,
            pool,
            fc: Linear::new(width * pooled, classes),
            pooled_shape: None,
        }
    }

    fn features(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let mut h = x.clone();
        for u in &mut self.units {
            h = u.forward(&h, mode)?;
        }
        let pooled = self.pool.forward(&h, mode)?;
        self.pooled_shape = Some(pooled.shape().to_vec());
        let b = pooled.dim(0);
        let flat = pooled.len() / b;
        pooled.reshape(&[b, flat])
    }

    fn backward(&mut self, grad_scores: &Tensor<T>) -> Result<Tensor<T>> {
        let shape = self
            .pooled_shape
            .clone()
            .ok_or_else(|| Error::State("head: backward called before forward".into()))?;
        let g = self.fc.backward(grad_scores)?.reshape(&shape)?;
        let mut g = self.pool.backward(&g)?;
        for u in self.units.iter_mut().rev() {
            g = u.backward(&g)?;
        }
        Ok(g)
    }

    fn clear_cache(&mut self) {
        self.units.iter_mut().for_each(ConvUnit::clear_cache);
        self.pool.clear_cache();
        self.fc.clear_cache();
        self.pooled_shape = None;
    }
}

impl<T: Scalar> Parameterized<T> for Head<T> {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        for (i, u) in self.units.iter_mut().enumerate() {
            u.visit_params(&join(prefix, &format!("unit{i}")), f);
        }
        self.fc.visit_params(&join(prefix, "fc"), f);
    }

    fn visit_buffers(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        for (i, u) in self.units.iter_mut().enumerate() {
            u.visit_buffers(&join(prefix, &format!("unit{i}")), f);
        }
    }
}

/// Counted 1-D convolutions. Projection shortcuts are not counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvCount {
    pub total: usize,
    pub shared: usize,
    pub activity_head: usize,
    pub location_head: usize,
}

/// `ResNet1D-[n1,n2,n3,n4]` with activity and location heads.
#[derive(Debug, Clone)]
pub struct ResNet1d<T: Scalar> {
    spec: NetworkSpec,
    pub stem: ConvUnit<T>,
    pub maxpool: MaxPool1d,
    pub stages: Vec<Vec<ResidualBlock<T>>>,
    pub activity: Head<T>,
    pub location: Head<T>,
}

/// Activity scores, location scores and the recorded taps.
pub type TapOutputs<T> = (Tensor<T>, Tensor<T>, BTreeMap<Tap, Tensor<T>>);

impl<T: Scalar> ResNet1d<T> {
    /// Builds the layer graph with zero weights; see [`ResNet1d::init_params`].
    pub fn build(spec: &NetworkSpec) -> Result<Self> {
        spec.validate()?;
        let stem_w = spec.stem_width();
        let stem = ConvUnit::new(spec.input_channels, stem_w, 7, 2, 3);
        let maxpool = MaxPool1d::new(3, 2, 1);
        let mut stages = Vec::with_capacity(4);
        let mut in_ch = stem_w;
        for (s, &count) in spec.block_counts.iter().enumerate() {
            let out_ch = spec.stage_width(s);
            let blocks = (0..count)
                .map(|b| {
                    let stride = if b == 0 { STAGE_STRIDES[s] } else { 1 };
                    ResidualBlock::new(if b == 0 { in_ch } else { out_ch }, out_ch, stride)
                })
                .collect();
            stages.push(blocks);
            in_ch = out_ch;
        }
        let trunk_len = trunk_lengths(spec)?.last().copied().unwrap_or(1);
        let head_w = spec.head_width();
        let act_convs = if spec.plus_variant { 2 } else { 1 };
        let mut net = Self {
            spec: spec.clone(),
            stem,
            maxpool,
            stages,
            activity: Head::new(in_ch, head_w, act_convs, trunk_len, spec.num_activities),
            location: Head::new(in_ch, head_w, 1, trunk_len, spec.num_locations),
        };
        net.init_params(spec.seed);
        Ok(net)
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    /// Uniform `(−a, a)` weights and biases with `a = sqrt(1/fan_in)`,
    /// identity batch-norm. Deterministic per seed.
    pub fn init_params(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.stem.init(&mut rng);
        for blk in self.stages.iter_mut().flatten() {
            blk.init(&mut rng);
        }
        for head in [&mut self.activity, &mut self.location] {
            for u in &mut head.units {
                u.init(&mut rng);
            }
            init_linear(&mut head.fc, &mut rng);
        }
    }

    pub fn conv_count(&self) -> ConvCount {
        let shared = 1 + 2 * self.stages.iter().map(Vec::len).sum::<usize>();
        let a = self.activity.units.len();
        let l = self.location.units.len();
        ConvCount {
            total: shared + a + l,
            shared,
            activity_head: a,
            location_head: l,
        }
    }

    /// Temporal length after: input, stem, maxpool, each stage, head conv,
    /// head average pool.
    pub fn trunk_trace(&self) -> Vec<usize> {
        let mut trace = trunk_lengths(&self.spec).expect("validated at build");
        let last = *trace.last().expect("non-empty");
        trace.push(last);
        trace.push(self.activity.pool.out_len(last).expect("validated at build"));
        trace
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        x.expect_rank(3, "network input")?;
        if x.dim(1) != self.spec.input_channels || x.dim(2) != self.spec.input_len {
            return Err(shape_err!(
                "network input must be [B, {}, {}], got {:?}",
                self.spec.input_channels,
                self.spec.input_len,
                x.shape()
            ));
        }
        if x.dim(0) == 0 {
            return Err(shape_err!("empty batch"));
        }
        Ok(())
    }

/// Raw activity and location scores.
    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<(Tensor<T>, Tensor<T>)> {
        self.run(x, mode, &[]).map(|(a, l, _)| (a, l))
    }

    /// Forward pass that also returns the requested intermediate tensors.
    pub fn forward_with_taps(
        &mut self,
        x: &Tensor<T>,
        mode: Mode,
        taps: &[Tap],
    ) -> Result<TapOutputs<T>> {
        self.run(x, mode, taps)
    }

    fn run(
        &mut self,
        x: &Tensor<T>,
        mode: Mode,
        taps: &[Tap],
    ) -> Result<TapOutputs<T>> {
        self.check_input(x)?;
        let mut out = BTreeMap::new();
        let mut record = |tap: Tap, t: &Tensor<T>| {
            if taps.contains(&tap) {
                out.insert(tap, t.clone());
            }
        };
        record(Tap::Input, x);
        let h = self.stem.forward(x, mode)?;
        let mut h = self.maxpool.forward(&h, mode)?;
        record(Tap::PostMaxpool, &h);
        for (s, stage) in self.stages.iter_mut().enumerate() {
            for blk in stage.iter_mut() {
                h = blk.forward(&h, mode)?;
            }
            record(Tap::Rb(s as u8 + 1), &h);
        }
        let fa = self.activity.features(&h, mode)?;
        record(Tap::PreFcActivity, &fa);
        let fl = self.location.features(&h, mode)?;
        record(Tap::PreFcLocation, &fl);
        let act = self.activity.fc.forward(&fa, mode)?;
        let loc = self.location.fc.forward(&fl, mode)?;
        record(Tap::OutputActivity, &act);
        record(Tap::OutputLocation, &loc);
        Ok((act, loc, out))
    }

    /// Back-propagates score gradients; returns the input gradient.
    pub fn backward(&mut self, grad_activity: &Tensor<T>, grad_location: &Tensor<T>) -> Result<Tensor<T>> {
        let ga = self.activity.backward(grad_activity)?;
        let gl = self.location.backward(grad_location)?;
        ga.expect_shape(gl.shape(), "head gradients")?;
        let data = ga.data().iter().zip(gl.data()).map(|(&a, &b)| a + b).collect();
        let mut g = Tensor::from_vec(ga.shape(), data)?;
        for stage in self.stages.iter_mut().rev() {
            for blk in stage.iter_mut().rev() {
                g = blk.backward(&g)?;
            }
        }
        let g = self.maxpool.backward(&g)?;
        self.stem.backward(&g)
    }

    /// Drops cached activations held for the backward pass.
    pub fn clear_cache(&mut self) {
        self.stem.clear_cache();
        self.maxpool.clear_cache();
        self.stages.iter_mut().flatten().for_each(ResidualBlock::clear_cache);
        self.activity.clear_cache();
        self.location.clear_cache();
    }

    /// Every parameter and buffer, in checkpoint order.
    pub fn state(&mut self) -> Vec<(String, Tensor<T>)> {
        let mut out = Vec::new();
        self.visit_params("", &mut |n, t| out.push((n.to_string(), t.clone())));
        self.visit_buffers("", &mut |n, t| out.push((n.to_string(), t.clone())));
        out
    }

    /// Copies values from `records`, which must name exactly this network's
    /// parameters and buffers with matching shapes.
    pub fn load_state<U: Scalar>(&mut self, records: &[(String, Tensor<U>)]) -> Result<()> {
        let mut by_name: BTreeMap<&str, &Tensor<U>> = BTreeMap::new();
        for (n, t) in records {
            if by_name.insert(n.as_str(), t).is_some() {
                return Err(Error::Compatibility(format!("duplicate record '{n}'")));
            }
        }
        let mut err = None;
        let mut used = 0;
        let mut copy = |name: &str, dst: &mut Tensor<T>| {
            if err.is_some() {
                return;
            }
            match by_name.get(name) {
                Some(src) if src.shape() == dst.shape() => {
                    for (d, s) in dst.data_mut().iter_mut().zip(src.data()) {
                        *d = T::of(s.as_f64());
                    }
                    used += 1;
                }
                Some(src) => {
                    err = Some(Error::Compatibility(format!(
                        "'{name}': checkpoint shape {:?}, network shape {:?}",
                        src.shape(),
                        dst.shape()
                    )))
                }
                None => err = Some(Error::Compatibility(format!("checkpoint lacks '{name}'"))),
            }
        };
        self.visit_params("", &mut copy);
        self.visit_buffers("", &mut copy);
        if let Some(e) = err {
            return Err(e);
        }
        if used != by_name.len() {
            return Err(Error::Compatibility(format!(
                "checkpoint has {} records, network expects {used}",
                by_name.len()
            )));
        }
        Ok(())
    }

    /// Same architecture and values at another precision.
    pub fn cast<U: Scalar>(&mut self) -> ResNet1d<U> {
        let mut other = ResNet1d::<U>::build(&self.spec).expect("spec already validated");
        other
            .load_state(&self.state())
            .expect("identical architecture");
        other
    }
}

fn init_linear<T: Scalar, R: Rng>(fc: &mut Linear<T>, rng: &mut R) {
    let bound = (1.0 / fc.in_features() as f64).sqrt();
    for v in fc.weight.data_mut().iter_mut().chain(fc.bias.data_mut()) {
        *v = T::of(rng.gen_range(-bound..bound));
    }
}

/// Input, stem, maxpool and per-stage lengths.
fn trunk_lengths(spec: &NetworkSpec) -> Result<Vec<usize>> {
    let fail = || Error::Config(format!("input length {} too short for the network", spec.input_len));
    let mut trace = vec![spec.input_len];
    let stem = crate::nn::conv_out_len(spec.input_len, 7, 2, 3).ok_or_else(fail)?;
    trace.push(stem);
    let pooled = crate::nn::pool_out_len(stem, 3, 2, 1).ok_or_else(fail)?;
    trace.push(pooled);
    let mut len = pooled;
    for &stride in &STAGE_STRIDES {
        len = crate::nn::conv_out_len(len, 3, stride, 1).ok_or_else(fail)?;
        trace.push(len);
    }
    Ok(trace)
}

impl<T: Scalar> Parameterized<T> for ResNet1d<T> {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        self.stem.visit_params(&join(prefix, "stem"), f);
        for (s, stage) in self.stages.iter_mut().enumerate() {
            for (b, blk) in stage.iter_mut().enumerate() {
                blk.visit_params(&join(prefix, &format!("stage{}.block{b}", s + 1)), f);
            }
        }
        self.activity.visit_params(&join(prefix, "head_activity"), f);
        self.location.visit_params(&join(prefix, "head_location"), f);
    }

    fn visit_buffers(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        self.stem.visit_buffers(&join(prefix, "stem"), f);
        for (s, stage) in self.stages.iter_mut().enumerate() {
            for (b, blk) in stage.iter_mut().enumerate() {
                blk.visit_buffers(&join(prefix, &format!("stage{}.block{b}", s + 1)), f);
            }
        }
        self.activity.visit_buffers(&join(prefix, "head_activity"), f);
        self.location.visit_buffers(&join(prefix, "head_location"), f);
    }
}
