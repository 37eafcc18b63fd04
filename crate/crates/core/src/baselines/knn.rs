use std::fmt;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use super::dtw::{dtw_frames, Frames};
use crate::dataset::CsiMatrix;
use crate::error::{shape_err, Error, Result};
use crate::scalar::Scalar;

pub const DIST_MAGIC: &[u8; 4] = b"DIST";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DtwConfig {
    pub band_radius: Option<usize>,
    pub k: usize,
    pub decimation: usize,
}

impl Default for DtwConfig {
    fn default() -> Self {
        Self {
            band_radius: Some(8),
            k: 1,
            decimation: 3,
        }
    }
}

impl DtwConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.decimation == 0 {
            return Err(Error::Config("k and decimation must be positive".into()));
        }
        Ok(())
    }
}

impl fmt::Display for DtwConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let band = self.band_radius.map_or("none".to_string(), |r| r.to_string());
        write!(f, "k={} band={band} decimation={}", self.k, self.decimation)
    }
}

/// Row-major `rows × cols` distances, test samples by training samples.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

impl DistanceMatrix {
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..][..self.cols]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 4 * self.data.len());
        out.extend_from_slice(DIST_MAGIC);
        out.extend_from_slice(&(self.rows as u32).to_le_bytes());
        out.extend_from_slice(&(self.cols as u32).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 || &bytes[..4] != DIST_MAGIC {
            return Err(Error::Format("not a distance matrix file".into()));
        }
        let rows = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
        let cols = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        let body = &bytes[12..];
        if Some(body.len()) != rows.checked_mul(cols).and_then(|n| n.checked_mul(4)) {
            return Err(Error::Format(format!(
                "distance body has {} bytes for {rows}x{cols}",
                body.len()
            )));
        }
        let data = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        Ok(Self { rows, cols, data })
    }
}

pub fn write_distance_matrix(path: &Path, m: &DistanceMatrix) -> Result<()> {
    fs::write(path, m.to_bytes())?;
    Ok(())
}

pub fn read_distance_matrix(path: &Path) -> Result<DistanceMatrix> {
    DistanceMatrix::from_bytes(&fs::read(path)?)
}

fn prepare<T: Scalar>(set: &[&CsiMatrix<T>], decimation: usize) -> Vec<Frames> {
    set.iter()
        .map(|m| Frames::from_matrix(&m.decimate(decimation)))
        .collect()
}

/// DTW distances between every test and training series after decimation.
/// Rows are computed in parallel; each entry is independent.
pub fn distance_matrix<T: Scalar>(
    test: &[&CsiMatrix<T>],
    train: &[&CsiMatrix<T>],
    cfg: &DtwConfig,
) -> Result<DistanceMatrix> {
    cfg.validate()?;
    let test_f = prepare(test, cfg.decimation);
    let train_f = prepare(train, cfg.decimation);
    let rows: Vec<Vec<f32>> = test_f
        .par_iter()
        .map(|a| {
            train_f
                .iter()
                .map(|b| dtw_frames(a, b, cfg.band_radius).map(|d| d as f32))
                .collect::<Result<Vec<f32>>>()
        })
        .collect::<Result<_>>()?;
    Ok(DistanceMatrix {
        rows: test.len(),
        cols: train.len(),
        data: rows.concat(),
    })
}

/// Majority vote among the `k` nearest training samples (ties in distance
/// resolved by training index). Vote ties go to the class with the smaller
/// summed neighbour distance, then to the lower label.
pub fn knn_vote(distances: &[f32], labels: &[usize], k: usize) -> Result<usize> {
    if distances.is_empty() || distances.len() != labels.len() {
        return Err(shape_err!(
            "knn: {} distances for {} labels",
            distances.len(),
            labels.len()
        ));
    }
    let mut order: Vec<usize> = (0..distances.len()).collect();
    order.sort_by(|&a, &b| distances[a].total_cmp(&distances[b]).then(a.cmp(&b)));
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut votes = vec![(0usize, 0.0f64); n_classes];
    for &i in order.iter().take(k.max(1)) {
        votes[labels[i]].0 += 1;
        votes[labels[i]].1 += distances[i] as f64;
    }
    let best = (0..n_classes)
        .filter(|&c| votes[c].0 > 0)
        .min_by(|&a, &b| {
            votes[b].0
                .cmp(&votes[a].0)
                .then(votes[a].1.total_cmp(&votes[b].1))
                .then(a.cmp(&b))
        })
        .expect("at least one neighbour");
    Ok(best)
}

/// Classifies one series against a labelled training set.
pub fn knn_classify<T: Scalar>(
    test: &CsiMatrix<T>,
    train: &[&CsiMatrix<T>],
    labels: &[usize],
    cfg: &DtwConfig,
) -> Result<usize> {
    if train.is_empty() {
        return Err(Error::Config("knn: empty training set".into()));
    }
    let d = distance_matrix(&[test], train, cfg)?;
    knn_vote(d.row(0), labels, cfg.k)
}
