use super::{Annotation, CsiFingerprint, CsiMatrix, DatasetManifest, Split};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Column slice `[start_idx, end_idx)` of a raw recording.
pub fn segment<T: Scalar>(raw: &CsiMatrix<T>, a: &Annotation) -> Result<CsiMatrix<T>> {
    if a.end_idx > raw.len() || a.start_idx >= a.end_idx || a.end_idx - a.start_idx < 2 {
        return Err(Error::Range(format!(
            "{}: annotation [{}, {}) invalid for a series of length {} (need at least 2 samples)",
            a.sample_id,
            a.start_idx,
            a.end_idx,
            raw.len()
        )));
    }
    let len = a.end_idx - a.start_idx;
    let data = (0..raw.channels())
        .flat_map(|c| raw.channel(c)[a.start_idx..a.end_idx].iter().copied())
        .collect();
    CsiMatrix::new(raw.channels(), len, data)
}

/// Endpoint-aligned linear interpolation of every channel to `target_len`
/// samples: output `j` reads input position `j·(L−1)/(target_len−1)`.
pub fn resample_linear<T: Scalar>(series: &CsiMatrix<T>, target_len: usize) -> Result<CsiMatrix<T>> {
    let len = series.len();
    if len < 2 {
        return Err(Error::Degenerate(format!(
            "resampling needs at least 2 samples, got {len}"
        )));
    }
    if target_len < 2 {
        return Err(Error::Degenerate(format!("target length {target_len} < 2")));
    }
    let denom = target_len - 1;
    // Integer position arithmetic keeps the grid exact.
    let grid: Vec<(usize, T)> = (0..target_len)
        .map(|j| {
            let num = j * (len - 1);
            (num / denom, T::of_usize(num % denom) / T::of_usize(denom))
        })
        .collect();
    let mut out = Vec::with_capacity(series.channels() * target_len);
    for c in 0..series.channels() {
        let x = series.channel(c);
        for &(i0, frac) in &grid {
            if frac == T::zero() {
                out.push(x[i0]);
                continue;
            }
            let (a, b) = (x[i0], x[i0 + 1]);
            let v = a + frac * (b - a);
            out.push(v.max(a.min(b)).min(a.max(b)));
        }
    }
    CsiMatrix::new(series.channels(), target_len, out)
}

/// Global scalar mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub mean: f64,
    pub std: f64,
}

/// Fits normalization statistics on the training split.
pub fn compute_normalization<T: Scalar>(
    fps: &[CsiFingerprint<T>],
    manifest: &DatasetManifest,
) -> Result<Normalization> {
    let train: Vec<&CsiFingerprint<T>> = manifest
        .indices(Split::Train)
        .into_iter()
        .filter_map(|i| fps.get(i))
        .collect();
    let n: usize = train.iter().map(|f| f.amplitudes.data().len()).sum();
    if n == 0 {
        return Err(Error::Degenerate("training split is empty".into()));
    }
    let sum: f64 = train
        .iter()
        .flat_map(|f| f.amplitudes.data())
        .map(|v| v.as_f64())
        .sum();
    let mean = sum / n as f64;
    let sq: f64 = train
        .iter()
        .flat_map(|f| f.amplitudes.data())
        .map(|v| (v.as_f64() - mean).powi(2))
        .sum();
    let std = (sq / n as f64).sqrt();
    if !(std > 0.0 && std.is_finite()) {
        return Err(Error::Degenerate(format!(
            "training amplitudes have zero variance (std = {std})"
        )));
    }
    Ok(Normalization { mean, std })
}

/// Replaces every amplitude `x` with `(x − mean) / std`, using the
/// manifest's statistics or fitting them on the training split.
pub fn standardize<T: Scalar>(
    fps: &[CsiFingerprint<T>],
    manifest: &DatasetManifest,
) -> Result<Vec<CsiFingerprint<T>>> {
    let norm = match manifest.normalization {
        Some(n) if n.std > 0.0 => n,
        Some(n) => {
            return Err(Error::Degenerate(format!("stored std {} is not positive", n.std)));
        }
        None => compute_normalization(fps, manifest)?,
    };
    Ok(apply(fps, |v| (v - norm.mean) / norm.std))
}

pub fn destandardize<T: Scalar>(fps: &[CsiFingerprint<T>], norm: Normalization) -> Vec<CsiFingerprint<T>> {
    apply(fps, |v| v * norm.std + norm.mean)
}

fn apply<T: Scalar>(fps: &[CsiFingerprint<T>], f: impl Fn(f64) -> f64) -> Vec<CsiFingerprint<T>> {
    fps.iter()
        .map(|fp| {
            let mut out = fp.clone();
            for v in out.amplitudes.data_mut() {
                *v = T::of(f(v.as_f64()));
            }
            out
        })
        .collect()
}
