//! Deterministic synthetic fingerprints for tests and demos.
//!
//! Each location owns a smooth per-subcarrier amplitude profile and a gain
//! pattern; each activity owns a temporal waveform. A sample is the location
//! profile plus the activity waveform scaled by the location gains, with a
//! random time shift, amplitude jitter and white noise.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{make_split, CsiFingerprint, CsiMatrix, DatasetManifest, SampleRecord};
use crate::{NUM_ACTIVITIES, NUM_LOCATIONS, NUM_SUBCARRIERS};

#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    /// Samples per (activity, location) pair.
    pub repeats: usize,
    pub len: usize,
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            repeats: 2,
            len: crate::FINGERPRINT_LEN,
            noise: 0.3,
            seed: 0,
        }
    }
}

fn waveform(activity: usize, phase: f64) -> f64 {
    let p = phase.clamp(0.0, 1.0);
    match activity {
        0 => (TAU * p).sin(),
        1 => -(TAU * p).sin(),
        2 => (TAU * 2.0 * p).sin(),
        3 => 2.0 * p - 1.0,
        4 => (TAU * 3.0 * p).cos(),
        _ => {
            if p < 0.5 {
                1.0
            } else {
                -1.0
            }
        }
    }
}

/// Samples ordered repeat-major, then location, then activity.
pub fn generate(cfg: &SyntheticConfig) -> Vec<CsiFingerprint<f32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let profiles: Vec<(Vec<f64>, Vec<f64>)> = (0..NUM_LOCATIONS)
        .map(|_| {
            let freq = rng.gen_range(0.5..3.0);
            let phase = rng.gen_range(0.0..TAU);
            let level = rng.gen_range(8.0..14.0);
            let base = (0..NUM_SUBCARRIERS)
                .map(|c| level + 2.5 * (TAU * freq * c as f64 / NUM_SUBCARRIERS as f64 + phase).sin())
                .collect();
            let gain = (0..NUM_SUBCARRIERS).map(|_| rng.gen_range(0.5..2.0)).collect();
            (base, gain)
        })
        .collect();
    let noise = Normal::new(0.0, cfg.noise.max(0.0)).expect("valid sigma");
    let len = cfg.len.max(2);
    let mut out = Vec::with_capacity(cfg.repeats * NUM_LOCATIONS * NUM_ACTIVITIES);
    for rep in 0..cfg.repeats {
        for (location, (base, gain)) in profiles.iter().enumerate() {
            for activity in 0..NUM_ACTIVITIES {
                let shift = rng.gen_range(-0.05..0.05);
                let scale = rng.gen_range(0.8..1.2);
                let mut data = Vec::with_capacity(NUM_SUBCARRIERS * len);
                for c in 0..NUM_SUBCARRIERS {
                    for t in 0..len {
                        let phase = t as f64 / (len - 1) as f64 + shift;
                        let v = base[c] + scale * gain[c] * waveform(activity, phase) + noise.sample(&mut rng);
                        data.push(v as f32);
                    }
                }
                out.push(CsiFingerprint {
                    amplitudes: CsiMatrix::new(NUM_SUBCARRIERS, len, data).expect("consistent shape"),
                    activity,
                    location,
                    sample_id: format!("syn_r{rep}_l{location}_a{activity}"),
                });
            }
        }
    }
    out
}

/// Synthetic fingerprints plus a manifest using the default split rule.
pub fn dataset(cfg: &SyntheticConfig) -> (Vec<CsiFingerprint<f32>>, DatasetManifest) {
    let fps = generate(cfg);
    let splits = make_split(fps.len());
    let mut manifest = DatasetManifest {
        samples: fps
            .iter()
            .zip(splits)
            .map(|(f, split)| SampleRecord {
                sample_id: f.sample_id.clone(),
                activity: f.activity,
                location: f.location,
                split,
            })
            .collect(),
        normalization: None,
        location_coords: Some(super::LocationCoords::synthetic_grid()),
    };
    manifest.normalization = super::compute_normalization(&fps, &manifest).ok();
    (fps, manifest)
}
