use std::collections::BTreeMap;
use std::fmt;

use log::warn;
use rayon::prelude::*;

use crate::dataset::CsiMatrix;
use crate::error::{shape_err, Error, Result};
use crate::scalar::Scalar;

/// Curvature floor for non-positive-definite pairs.
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SvmConfig {
    pub c: f64,
    /// `None` selects `1 / (D · variance of the training features)`.
    pub gamma: Option<f64>,
    /// Stopping threshold on the maximal KKT violation.
    pub tolerance: f64,
    /// Iteration cap per binary problem.
    pub max_passes: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            gamma: None,
            tolerance: 1e-3,
            max_passes: 100_000,
        }
    }
}

impl SvmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config(format!("C = {} must be positive", self.c)));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::Config(format!("gamma = {g} must be positive")));
            }
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 || self.max_passes == 0 {
            return Err(Error::Config("tolerance and max_passes must be positive".into()));
        }
        Ok(())
    }
}

impl fmt::Display for SvmConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let gamma = self.gamma.map_or("auto".to_string(), |g| format!("{g:e}"));
        write!(f, "C={} gamma={gamma} tol={} max_iter={}", self.c, self.tolerance, self.max_passes)
    }
}

/// Flattened `channels × len` fingerprints, one row per sample.
pub fn flatten_features<T: Scalar>(set: &[&CsiMatrix<T>]) -> Vec<Vec<f32>> {
    set.iter()
        .map(|m| m.data().iter().map(|v| v.as_f64() as f32).collect())
        .collect()
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

fn rbf(gamma: f64, sq_a: f64, sq_b: f64, ab: f64) -> f64 {
    (-gamma * (sq_a + sq_b - 2.0 * ab).max(0.0)).exp()
}

/// Dense RBF Gram matrix of the training rows.
#[derive(Debug, Clone)]
pub struct KernelCache {
    pub n: usize,
    pub values: Vec<f64>,
}

impl KernelCache {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }
}

pub fn rbf_gram(features: &[Vec<f32>], gamma: f64) -> KernelCache {
    let n = features.len();
    let sq: Vec<f64> = features.iter().map(|f| dot(f, f)).collect();
    let values: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let sq = &sq;
            (0..n).map(move |j| {
                if i == j {
                    1.0
                } else {
                    rbf(gamma, sq[i], sq[j], dot(&features[i], &features[j]))
                }
            })
        })
        .collect();
    KernelCache { n, values }
}

/// Solution of one two-class dual problem, labels `y ∈ {+1, −1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarySvm {
    pub alpha: Vec<f64>,
    pub y: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl BinarySvm {
    /// Maximizes `Σα − ½ αᵀQα` subject to `0 ≤ α ≤ C`, `yᵀα = 0`, with
    /// `Q_ij = y_i y_j K_ij`. Working pairs are chosen by maximal violation
    /// for the first index and second-order gain for the second.
    pub fn solve(kernel: &dyn Fn(usize, usize) -> f64, y: &[f64], c: f64, tol: f64, max_iter: usize) -> Self {
        let n = y.len();
        let mut alpha = vec![0.0; n];
        let mut grad = vec![-1.0; n];
        let diag: Vec<f64> = (0..n).map(|t| kernel(t, t)).collect();
        let in_up = |a: f64, y: f64| (y > 0.0 && a < c) || (y < 0.0 && a > 0.0);
        let in_low = |a: f64, y: f64| (y > 0.0 && a > 0.0) || (y < 0.0 && a < c);

        let mut iterations = 0;
        let mut converged = false;
        while iterations < max_iter {
            let mut gmax = f64::NEG_INFINITY;
            let mut i = usize::MAX;
            for t in 0..n {
                if in_up(alpha[t], y[t]) && -y[t] * grad[t] >= gmax {
                    gmax = -y[t] * grad[t];
                    i = t;
                }
            }
            let mut gmax2 = f64::NEG_INFINITY;
            let mut j = usize::MAX;
            let mut best = f64::INFINITY;
            for t in 0..n {
                if !in_low(alpha[t], y[t]) {
                    continue;
                }
                gmax2 = gmax2.max(y[t] * grad[t]);
                if i == usize::MAX {
                    continue;
                }
                let b = gmax + y[t] * grad[t];
                if b > 0.0 {
                    let a = diag[i] + diag[t] - 2.0 * kernel(i, t);
                    let obj = -(b * b) / if a > 0.0 { a } else { TAU };
                    if obj <= best {
                        best = obj;
                        j = t;
                    }
                }
            }
            if gmax + gmax2 < tol || j == usize::MAX {
                converged = true;
                break;
            }
            iterations += 1;

            let kij = kernel(i, j);
            let (old_i, old_j) = (alpha[i], alpha[j]);
            let quad = {
                let q = diag[i] + diag[j] - 2.0 * kij;
                if q > 0.0 { q } else { TAU }
            };
            if y[i] != y[j] {
                let delta = (-grad[i] - grad[j]) / quad;
                let diff = alpha[i] - alpha[j];
                alpha[i] += delta;
                alpha[j] += delta;
                if diff > 0.0 {
                    if alpha[j] < 0.0 {
                        alpha[j] = 0.0;
                        alpha[i] = diff;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = -diff;
                }
                if diff > 0.0 {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = c - diff;
                    }
                } else if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = c + diff;
                }
            } else {
                let delta = (grad[i] - grad[j]) / quad;
                let sum = alpha[i] + alpha[j];
                alpha[i] -= delta;
                alpha[j] += delta;
                if sum > c {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = sum - c;
                    }
                } else if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if sum > c {
                    if alpha[j] > c {
                        alpha[j] = c;
                        alpha[i] = sum - c;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }
            let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
            for t in 0..n {
                grad[t] += y[t] * (y[i] * kernel(t, i) * di + y[j] * kernel(t, j) * dj);
            }
        }

        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut free_sum, mut free_n) = (0.0, 0usize);
        for t in 0..n {
            let yg = y[t] * grad[t];
            if alpha[t] >= c {
                if y[t] < 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
            } else if alpha[t] <= 0.0 {
                if y[t] > 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
            } else {
                free_sum += yg;
                free_n += 1;
            }
        }
        let rho = if free_n > 0 { free_sum / free_n as f64 } else { (ub + lb) / 2.0 };
        Self { alpha, y: y.to_vec(), rho, iterations, converged }
    }

    /// `Σ α_t y_t K(x_t, x) − ρ` for a kernel row against the training points.
    pub fn decision(&self, kernel_row: &[f64]) -> f64 {
        self.alpha
            .iter()
            .zip(&self.y)
            .zip(kernel_row)
            .map(|((a, y), k)| a * y * k)
            .sum::<f64>()
            - self.rho
    }

    /// Largest violation of the optimality conditions: box bounds, the
    /// equality constraint and the margin conditions per multiplier class.
    pub fn kkt_violation(&self, kernel: &dyn Fn(usize, usize) -> f64, c: f64) -> f64 {
        let n = self.alpha.len();
        let mut worst = (self.alpha.iter().zip(&self.y).map(|(a, y)| a * y).sum::<f64>()).abs();
        for t in 0..n {
            let a = self.alpha[t];
            worst = worst.max((-a).max(a - c).max(0.0));
            let row: Vec<f64> = (0..n).map(|s| kernel(t, s)).collect();
            let margin = self.y[t] * self.decision(&row);
            let v = if a <= 0.0 {
                1.0 - margin
            } else if a >= c {
                margin - 1.0
            } else {
                (margin - 1.0).abs()
            };
            worst = worst.max(v);
        }
        worst
    }
}

#[derive(Debug, Clone)]
struct PairModel {
    pos: usize,
    neg: usize,
    /// Indices into the support set with their `α y` coefficients.
    support: Vec<(usize, f64)>,
    rho: f64,
}

/// One-vs-one RBF classifier. Votes are tied in favour of the lower label.
#[derive(Debug, Clone)]
pub struct MulticlassSvm {
    pub classes: Vec<usize>,
    pub gamma: f64,
    pairs: Vec<PairModel>,
    support: Vec<Vec<f32>>,
    support_sq: Vec<f64>,
    /// Binary problems that hit the iteration cap.
    pub unconverged: usize,
}

impl MulticlassSvm {
    pub fn train(features: &[Vec<f32>], labels: &[usize], cfg: &SvmConfig) -> Result<Self> {
        cfg.validate()?;
        if features.len() != labels.len() || features.is_empty() {
            return Err(shape_err!("svm: {} feature rows for {} labels", features.len(), labels.len()));
        }
        let d = features[0].len();
        if d == 0 || features.iter().any(|f| f.len() != d) {
            return Err(shape_err!("svm: feature rows must share a positive length"));
        }
        let classes: Vec<usize> = {
            let mut c = labels.to_vec();
            c.sort_unstable();
            c.dedup();
            c
        };
        if classes.len() < 2 {
            return Err(Error::Training(format!("svm needs at least two classes, got {classes:?}")));
        }
        let gamma = match cfg.gamma {
            Some(g) => g,
            None => {
                let n = (features.len() * d) as f64;
                let mean = features.iter().flatten().map(|&v| v as f64).sum::<f64>() / n;
                let var = features.iter().flatten().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
                if var <= 0.0 {
                    return Err(Error::Degenerate("svm features have zero variance".into()));
                }
                1.0 / (d as f64 * var)
            }
        };
        let gram = rbf_gram(features, gamma);
        let pair_ids: Vec<(usize, usize)> = (0..classes.len())
            .flat_map(|a| (a + 1..classes.len()).map(move |b| (a, b)))
            .collect();
        let solved: Vec<(usize, usize, Vec<usize>, BinarySvm)> = pair_ids
            .par_iter()
            .map(|&(a, b)| {
                let idx: Vec<usize> = (0..labels.len())
                    .filter(|&i| labels[i] == classes[a] || labels[i] == classes[b])
                    .collect();
                let y: Vec<f64> = idx.iter().map(|&i| if labels[i] == classes[a] { 1.0 } else { -1.0 }).collect();
                let k = |p: usize, q: usize| gram.get(idx[p], idx[q]);
                let m = BinarySvm::solve(&k, &y, cfg.c, cfg.tolerance, cfg.max_passes);
                (a, b, idx, m)
            })
            .collect();

        let mut support_of: BTreeMap<usize, usize> = BTreeMap::new();
        let mut support = Vec::new();
        let mut pairs = Vec::new();
        let mut unconverged = 0;
        for (a, b, idx, m) in solved {
            if !m.converged {
                unconverged += 1;
                warn!("svm pair ({}, {}) stopped at the iteration cap", classes[a], classes[b]);
            }
            let mut sv = Vec::new();
            for (p, (&alpha, &y)) in m.alpha.iter().zip(&m.y).enumerate() {
                if alpha > 0.0 {
                    let g = idx[p];
                    let slot = *support_of.entry(g).or_insert_with(|| {
                        support.push(features[g].clone());
                        support.len() - 1
                    });
                    sv.push((slot, alpha * y));
                }
            }
            pairs.push(PairModel { pos: a, neg: b, support: sv, rho: m.rho });
        }
        let support_sq = support.iter().map(|f| dot(f, f)).collect();
        Ok(Self { classes, gamma, pairs, support, support_sq, unconverged })
    }

    pub fn num_support(&self) -> usize {
        self.support.len()
    }

    pub fn predict(&self, x: &[f32]) -> usize {
        let sq = dot(x, x);
        let k: Vec<f64> = self
            .support
            .iter()
            .zip(&self.support_sq)
            .map(|(s, &ss)| rbf(self.gamma, sq, ss, dot(s, x)))
            .collect();
        let mut votes = vec![0usize; self.classes.len()];
        for p in &self.pairs {
            let f: f64 = p.support.iter().map(|&(s, coef)| coef * k[s]).sum::<f64>() - p.rho;
            votes[if f > 0.0 { p.pos } else { p.neg }] += 1;
        }
        let best = (0..votes.len())
            .min_by(|&a, &b| votes[b].cmp(&votes[a]).then(a.cmp(&b)))
            .expect("at least two classes");
        self.classes[best]
    }

    pub fn predict_all(&self, xs: &[Vec<f32>]) -> Vec<usize> {
        xs.par_iter().map(|x| self.predict(x)).collect()
    }
}
