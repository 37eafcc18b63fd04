//! CSI fingerprint ingestion, preprocessing and splitting.

mod container;
mod files;
mod preprocess;
pub mod raw;
mod split;
pub mod synthetic;

pub use container::{read_container, write_container, Container, CONTAINER_MAGIC, CONTAINER_VERSION};
pub use files::{
    read_annotations, read_coords, read_manifest, write_coords, write_manifest, LocationCoords,
};
pub use preprocess::{
    compute_normalization, destandardize, resample_linear, segment, standardize, Normalization,
};
pub use split::{make_split, make_split_with_phase, DEFAULT_SPLIT_PHASE, SPLIT_PERIOD};

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::{FINGERPRINT_LEN, NUM_ACTIVITIES, NUM_LOCATIONS, NUM_SUBCARRIERS};

/// Amplitudes of one recording, `channels × len`, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiMatrix<T> {
    channels: usize,
    len: usize,
    data: Vec<T>,
}

impl<T: Scalar> CsiMatrix<T> {
    pub fn new(channels: usize, len: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != channels * len {
            return Err(Error::Shape(format!(
                "{channels}x{len} matrix needs {} values, got {}",
                channels * len,
                data.len()
            )));
        }
        Ok(Self { channels, len, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let len = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != len) {
            return Err(Error::Shape("ragged channel rows".into()));
        }
        Self::new(rows.len(), len, rows.concat())
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn channel(&self, c: usize) -> &[T] {
        &self.data[c * self.len..][..self.len]
    }

    pub fn get(&self, c: usize, t: usize) -> T {
        self.data[c * self.len + t]
    }

    /// Keeps every `factor`-th time step, starting at 0.
    pub fn decimate(&self, factor: usize) -> Self {
        let factor = factor.max(1);
        let len = self.len.div_ceil(factor);
        let data = (0..self.channels)
            .flat_map(|c| self.channel(c).iter().step_by(factor).copied())
            .collect();
        Self {
            channels: self.channels,
            len,
            data,
        }
    }

    pub fn cast<U: Scalar>(&self) -> CsiMatrix<U> {
        CsiMatrix {
            channels: self.channels,
            len: self.len,
            data: self.data.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }
}

/// One labelled fingerprint.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiFingerprint<T> {
    pub amplitudes: CsiMatrix<T>,
    pub activity: usize,
    pub location: usize,
    pub sample_id: String,
}

impl<T: Scalar> CsiFingerprint<T> {
    /// Checks the preprocessed-fingerprint invariants.
    pub fn validate(&self) -> Result<()> {
        if self.amplitudes.channels() != NUM_SUBCARRIERS || self.amplitudes.len() != FINGERPRINT_LEN {
            return Err(Error::Validation(format!(
                "{}: fingerprint must be {NUM_SUBCARRIERS}x{FINGERPRINT_LEN}, got {}x{}",
                self.sample_id,
                self.amplitudes.channels(),
                self.amplitudes.len()
            )));
        }
        check_labels(&self.sample_id, self.activity, self.location)?;
        if !self.amplitudes.data().iter().all(|v| v.is_finite()) {
            return Err(Error::Validation(format!("{}: non-finite amplitude", self.sample_id)));
        }
        Ok(())
    }
}

pub(crate) fn check_labels(id: &str, activity: usize, location: usize) -> Result<()> {
    if activity >= NUM_ACTIVITIES {
        return Err(Error::Validation(format!(
            "{id}: activity {activity} outside 0..{}",
            NUM_ACTIVITIES - 1
        )));
    }
    if location >= NUM_LOCATIONS {
        return Err(Error::Validation(format!(
            "{id}: location {location} outside 0..{}",
            NUM_LOCATIONS - 1
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::Validation(format!("unknown split '{other}'"))),
        }
    }
}

/// Activity boundaries inside a raw recording, `[start_idx, end_idx)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Annotation {
    pub sample_id: String,
    pub start_idx: usize,
    pub end_idx: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleRecord {
    pub sample_id: String,
    pub activity: usize,
    pub location: usize,
    pub split: Split,
}

#[derive(Debug, Clone, Default)]
pub struct DatasetManifest {
    pub samples: Vec<SampleRecord>,
    /// Global scalar statistics of the training split, when it is non-empty
    /// and not constant.
    pub normalization: Option<Normalization>,
    pub location_coords: Option<LocationCoords>,
}

impl DatasetManifest {
    pub fn indices(&self, split: Split) -> Vec<usize> {
        self.samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.split == split)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn count(&self, split: Split) -> usize {
        self.samples.iter().filter(|s| s.split == split).count()
    }
}

/// Reads a CSIT container and its manifest, validating shapes, labels and
/// counts. Normalization statistics are fitted on the training split.
pub fn load_dataset(
    container_path: &Path,
    manifest_path: &Path,
) -> Result<(Vec<CsiFingerprint<f32>>, DatasetManifest)> {
    let container = read_container(container_path)?;
    let records = read_manifest(manifest_path)?;
    assemble(container, records)
}

pub(crate) fn assemble(
    container: Container,
    records: Vec<SampleRecord>,
) -> Result<(Vec<CsiFingerprint<f32>>, DatasetManifest)> {
    if container.count() > 0
        && (container.channels() != NUM_SUBCARRIERS || container.len() != FINGERPRINT_LEN)
    {
        return Err(Error::Format(format!(
            "container holds {}x{} samples, expected {NUM_SUBCARRIERS}x{FINGERPRINT_LEN}",
            container.channels(),
            container.len()
        )));
    }
    if records.len() != container.count() {
        return Err(Error::Consistency(format!(
            "manifest has {} rows but container holds {} samples",
            records.len(),
            container.count()
        )));
    }
    let mut seen = HashSet::new();
    let mut fps = Vec::with_capacity(records.len());
    for (i, rec) in records.iter().enumerate() {
        if !seen.insert(rec.sample_id.as_str()) {
            return Err(Error::Validation(format!("duplicate sample_id {}", rec.sample_id)));
        }
        let fp = CsiFingerprint {
            amplitudes: container.sample(i),
            activity: rec.activity,
            location: rec.location,
            sample_id: rec.sample_id.clone(),
        };
        fp.validate()?;
        fps.push(fp);
    }
    let mut manifest = DatasetManifest {
        samples: records,
        normalization: None,
        location_coords: None,
    };
    manifest.normalization = compute_normalization(&fps, &manifest).ok();
    Ok((fps, manifest))
}
