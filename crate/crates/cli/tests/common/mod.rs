#![allow(dead_code)]

use std::path::{Path, PathBuf};

use csinet::dataset::synthetic::{dataset, SyntheticConfig};
use csinet::dataset::{write_container, write_coords, write_manifest, Container, CsiMatrix, LocationCoords, SampleRecord};
use csinet::{Fingerprint, FINGERPRINT_LEN, NUM_SUBCARRIERS};

pub struct Fixture {
    pub container: PathBuf,
    pub coords: PathBuf,
}

pub fn write_fingerprints(dir: &Path, fps: &[Fingerprint], records: &[SampleRecord]) -> Fixture {
    let samples: Vec<CsiMatrix<f32>> = fps.iter().map(|f| f.amplitudes.clone()).collect();
    let container = dir.join("dataset.csit");
    write_container(&container, &Container::from_samples(NUM_SUBCARRIERS, FINGERPRINT_LEN, &samples).unwrap()).unwrap();
    write_manifest(&dir.join("manifest.csv"), records).unwrap();
    let coords = dir.join("coords.csv");
    write_coords(&coords, &LocationCoords::synthetic_grid()).unwrap();
    Fixture { container, coords }
}

/// `repeats × 96` synthetic samples with the default split.
pub fn synthetic(dir: &Path, repeats: usize, seed: u64) -> Fixture {
    let (fps, manifest) = dataset(&SyntheticConfig { repeats, seed, ..Default::default() });
    write_fingerprints(dir, &fps, &manifest.samples)
}
