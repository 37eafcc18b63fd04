use std::fmt::Write as _;
use std::path::Path;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{joint_loss, lr_schedule, Adam, JointLossValue};
use crate::config::KeyValues;
use crate::dataset::CsiFingerprint;
use crate::error::{shape_err, Error, Result};
use crate::model::ResNet1d;
use crate::nn::{Mode, Parameterized};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const CURVE_HEADER: &str =
    "epoch,train_loss,test_loss,act_train_acc,act_test_acc,loc_train_acc,loc_test_acc";

/// Optimization settings. The shuffle stream is seeded with `seed + 2`;
/// callers building the network conventionally use `seed + 1` for init.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    pub decay: f64,
    pub decay_every: usize,
    pub lambda: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 128,
            lr0: 0.005,
            decay: 0.5,
            decay_every: 10,
            lambda: 1.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    const KEYS: [&'static str; 7] =
        ["epochs", "batch_size", "lr0", "decay", "decay_every", "lambda", "seed"];

    pub fn parse(text: &str) -> Result<Self> {
        let kv = KeyValues::parse(text)?;
        kv.reject_unknown(&Self::KEYS)?;
        let d = Self::default();
        let cfg = Self {
            epochs: kv.parsed("epochs")?.unwrap_or(d.epochs),
            batch_size: kv.parsed("batch_size")?.unwrap_or(d.batch_size),
            lr0: kv.parsed("lr0")?.unwrap_or(d.lr0),
            decay: kv.parsed("decay")?.unwrap_or(d.decay),
            decay_every: kv.parsed("decay_every")?.unwrap_or(d.decay_every),
            lambda: kv.parsed("lambda")?.unwrap_or(d.lambda),
            seed: kv.parsed("seed")?.unwrap_or(d.seed),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        format!(
            "epochs={}\nbatch_size={}\nlr0={}\ndecay={}\ndecay_every={}\nlambda={}\nseed={}\n",
            self.epochs, self.batch_size, self.lr0, self.decay, self.decay_every, self.lambda, self.seed
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.decay_every == 0 {
            return Err(Error::Config("epochs, batch_size and decay_every must be positive".into()));
        }
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return Err(Error::Config(format!("lr0 {} must be positive", self.lr0)));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(Error::Config(format!("decay {} must lie in (0, 1]", self.decay)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda {} must be non-negative", self.lambda)));
        }
        Ok(())
    }

    pub fn lr(&self, epoch: usize) -> f64 {
        lr_schedule(epoch, self.lr0, self.decay, self.decay_every)
    }
}

/// Eval-mode loss and accuracies over one split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSummary {
    pub loss: JointLossValue,
    pub activity_accuracy: f64,
    pub location_accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train: EvalSummary,
    pub test: Option<EvalSummary>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LearningCurve {
    pub records: Vec<EpochRecord>,
}

impl LearningCurve {
    /// Joint losses and accuracies; an empty test split leaves its columns
    /// blank.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{CURVE_HEADER}\n");
        let opt = |v: Option<f64>| v.map(|v| format!("{v:.6}")).unwrap_or_default();
        for r in &self.records {
            let t = r.test.as_ref();
            let _ = writeln!(
                out,
                "{},{:.6},{},{:.6},{},{:.6},{}",
                r.epoch + 1,
                r.train.loss.total,
                opt(t.map(|s| s.loss.total)),
                r.train.activity_accuracy,
                opt(t.map(|s| s.activity_accuracy)),
                r.train.location_accuracy,
                opt(t.map(|s| s.location_accuracy)),
            );
        }
        out
    }

    /// Per-task loss parts, since the joint total alone hides which head
    /// dominates.
    pub fn parts_csv(&self) -> String {
        let mut out = String::from("epoch,train_act_loss,train_loc_loss,test_act_loss,test_loc_loss\n");
        let opt = |v: Option<f64>| v.map(|v| format!("{v:.6}")).unwrap_or_default();
        for r in &self.records {
            let t = r.test.as_ref();
            let _ = writeln!(
                out,
                "{},{:.6},{:.6},{},{}",
                r.epoch + 1,
                r.train.loss.activity_part,
                r.train.loss.location_part,
                opt(t.map(|s| s.loss.activity_part)),
                opt(t.map(|s| s.loss.location_part)),
            );
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub curve: LearningCurve,
    pub steps: usize,
    /// Set when a numeric failure stopped training; the network then holds
    /// the parameters from the end of the last finished epoch.
    pub aborted: Option<String>,
}

/// Stacks fingerprints into a `[B, C, L]` batch.
pub fn batch_tensor<T: Scalar>(set: &[CsiFingerprint<f32>], indices: &[usize]) -> Result<Tensor<T>> {
    let first = &set
        .get(*indices.first().ok_or_else(|| shape_err!("empty batch"))?)
        .ok_or_else(|| shape_err!("batch index out of range"))?
        .amplitudes;
    let (c, l) = (first.channels(), first.len());
    let mut data = Vec::with_capacity(indices.len() * c * l);
    for &i in indices {
        let a = &set.get(i).ok_or_else(|| shape_err!("batch index {i} out of range"))?.amplitudes;
        if a.channels() != c || a.len() != l {
            return Err(shape_err!("sample {i} is {}x{}, batch is {c}x{l}", a.channels(), a.len()));
        }
        data.extend(a.data().iter().map(|&v| T::of(v as f64)));
    }
    Tensor::from_vec(&[indices.len(), c, l], data)
}

pub fn argmax<T: Scalar>(row: &[T]) -> usize {
    row.iter()
        .enumerate()
        .fold(0, |best, (i, &v)| if v > row[best] { i } else { best })
}

const EVAL_BATCH: usize = 128;

/// Eval-mode activity and location predictions.
pub fn predict<T: Scalar>(
    net: &mut ResNet1d<T>,
    set: &[CsiFingerprint<f32>],
) -> Result<(Vec<usize>, Vec<usize>)> {
    let (mut acts, mut locs) = (Vec::with_capacity(set.len()), Vec::with_capacity(set.len()));
    let all: Vec<usize> = (0..set.len()).collect();
    for chunk in all.chunks(EVAL_BATCH) {
        let (a, l) = net.forward(&batch_tensor(set, chunk)?, Mode::Eval)?;
        for i in 0..chunk.len() {
            acts.push(argmax(a.row(i)));
            locs.push(argmax(l.row(i)));
        }
    }
    net.clear_cache();
    Ok((acts, locs))
}

/// Eval-mode joint loss (batch means averaged with sample weights) and
/// accuracies.
pub fn evaluate<T: Scalar>(
    net: &mut ResNet1d<T>,
    set: &[CsiFingerprint<f32>],
    lambda: f64,
) -> Result<EvalSummary> {
    if set.is_empty() {
        return Err(Error::Config("cannot evaluate an empty split".into()));
    }
    let all: Vec<usize> = (0..set.len()).collect();
    let (mut act_sum, mut loc_sum) = (0.0, 0.0);
    let (mut act_hits, mut loc_hits) = (0usize, 0usize);
    for chunk in all.chunks(EVAL_BATCH) {
        let (a, l) = net.forward(&batch_tensor(set, chunk)?, Mode::Eval)?;
        let al: Vec<usize> = chunk.iter().map(|&i| set[i].activity).collect();
        let ll: Vec<usize> = chunk.iter().map(|&i| set[i].location).collect();
        let j = joint_loss(&a, &l, &al, &ll, lambda)?;
        act_sum += j.value.activity_part * chunk.len() as f64;
        loc_sum += j.value.location_part * chunk.len() as f64;
        act_hits += (0..chunk.len()).filter(|&i| argmax(a.row(i)) == al[i]).count();
        loc_hits += (0..chunk.len()).filter(|&i| argmax(l.row(i)) == ll[i]).count();
    }
    net.clear_cache();
    let n = set.len() as f64;
    let (activity_part, location_part) = (act_sum / n, loc_sum / n);
    Ok(EvalSummary {
        loss: JointLossValue {
            total: activity_part + lambda * location_part,
            activity_part,
            location_part,
            lambda,
        },
        activity_accuracy: act_hits as f64 / n,
        location_accuracy: loc_hits as f64 / n,
    })
}

/// Mini-batch training with per-epoch reshuffling and step decay. Each
/// epoch ends with an eval-mode measurement of both splits.
pub fn train<T: Scalar>(
    net: &mut ResNet1d<T>,
    train_set: &[CsiFingerprint<f32>],
    test_set: &[CsiFingerprint<f32>],
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(2));
    let mut adam = Adam::<T>::new();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut snapshot = net.clone();
    let mut report = TrainReport {
        curve: LearningCurve::default(),
        steps: 0,
        aborted: None,
    };

    for epoch in 0..cfg.epochs {
        let lr = cfg.lr(epoch);
        order.shuffle(&mut rng);
        let outcome = (|| -> Result<EpochRecord> {
            for batch in order.chunks(cfg.batch_size) {
                let x = batch_tensor::<T>(train_set, batch)?;
                let al: Vec<usize> = batch.iter().map(|&i| train_set[i].activity).collect();
                let ll: Vec<usize> = batch.iter().map(|&i| train_set[i].location).collect();
                net.zero_grad();
                let (a, l) = net.forward(&x, Mode::Train)?;
                let loss = joint_loss(&a, &l, &al, &ll, cfg.lambda)?;
                net.backward(&loss.grad_activity, &loss.grad_location)?;
                adam.step(net, lr)?;
                report.steps += 1;
            }
            net.clear_cache();
            let train = evaluate(net, train_set, cfg.lambda)?;
            let test = if test_set.is_empty() {
                None
            } else {
                Some(evaluate(net, test_set, cfg.lambda)?)
            };
            if !train.loss.total.is_finite() {
                return Err(Error::Numeric(format!("train loss {} after epoch", train.loss.total)));
            }
            Ok(EpochRecord { epoch, train, test })
        })();
        match outcome {
            Ok(record) => {
                info!(
                    "epoch {}/{} lr {lr:.3e} train loss {:.4} act {:.4} loc {:.4}{}",
                    epoch + 1,
                    cfg.epochs,
                    record.train.loss.total,
                    record.train.activity_accuracy,
                    record.train.location_accuracy,
                    record
                        .test
                        .map(|t| format!(
                            " | test loss {:.4} act {:.4} loc {:.4}",
                            t.loss.total, t.activity_accuracy, t.location_accuracy
                        ))
                        .unwrap_or_default()
                );
                report.curve.records.push(record);
                snapshot = net.clone();
            }
            Err(e @ Error::Numeric(_)) => {
                warn!("epoch {}: {e}; restoring parameters from the previous epoch", epoch + 1);
                *net = snapshot;
                net.clear_cache();
                report.aborted = Some(e.to_string());
                return Ok(report);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(report)
}
