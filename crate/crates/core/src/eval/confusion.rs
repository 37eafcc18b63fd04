use std::ops::AddAssign;

use crate::error::{shape_err, Error, Result};

/// `K × K` counts, rows = ground truth, columns = prediction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn zeros(k: usize) -> Self {
        Self { k, counts: vec![0; k * k] }
    }

    pub fn from_counts(k: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != k * k {
            return Err(shape_err!("{} counts for a {k}x{k} matrix", counts.len()));
        }
        Ok(Self { k, counts })
    }

    pub fn classes(&self) -> usize {
        self.k
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.k + pred]
    }

    pub fn record(&mut self, truth: usize, pred: usize) -> Result<()> {
        if truth >= self.k || pred >= self.k {
            return Err(Error::Label(format!(
                "pair (truth {truth}, prediction {pred}) outside 0..{}",
                self.k.saturating_sub(1)
            )));
        }
        self.counts[truth * self.k + pred] += 1;
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k).map(|i| self.get(i, i)).sum()
    }

    /// Ground-truth support of class `k`.
    pub fn row_sum(&self, k: usize) -> u64 {
        (0..self.k).map(|p| self.get(k, p)).sum()
    }

    /// Number of predictions of class `k`.
    pub fn col_sum(&self, k: usize) -> u64 {
        (0..self.k).map(|t| self.get(t, k)).sum()
    }

    /// `trace / total`, undefined for an empty matrix.
    pub fn accuracy(&self) -> Option<f64> {
        match self.total() {
            0 => None,
            n => Some(self.trace() as f64 / n as f64),
        }
    }

    /// Adds counts from a partial matrix over the same classes.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.k != self.k {
            return Err(shape_err!("cannot merge {}-class into {}-class matrix", other.k, self.k));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }
}

impl AddAssign<&ConfusionMatrix> for ConfusionMatrix {
    fn add_assign(&mut self, rhs: &ConfusionMatrix) {
        self.merge(rhs).expect("matching class count");
    }
}

pub fn confusion(preds: &[usize], labels: &[usize], k: usize) -> Result<ConfusionMatrix> {
    if preds.len() != labels.len() {
        return Err(shape_err!("{} predictions for {} labels", preds.len(), labels.len()));
    }
    let mut cm = ConfusionMatrix::zeros(k);
    for (&p, &t) in preds.iter().zip(labels) {
        cm.record(t, p)?;
    }
    Ok(cm)
}
