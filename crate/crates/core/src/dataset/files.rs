use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use super::{check_labels, Annotation, SampleRecord, Split};
use crate::error::{Error, Result};
use crate::NUM_LOCATIONS;

const MANIFEST_HEADER: [&str; 4] = ["sample_id", "activity", "location", "split"];
const ANNOTATION_HEADER: [&str; 3] = ["sample_id", "start_idx", "end_idx"];
const COORDS_HEADER: [&str; 3] = ["location_id", "x_m", "y_m"];

fn open(path: &Path, header: &[&str]) -> Result<csv::Reader<std::fs::File>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let got: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if got != header {
        return Err(Error::Format(format!(
            "{}: expected header {}, got {}",
            path.display(),
            header.join(","),
            got.join(",")
        )));
    }
    Ok(rdr)
}

fn field<V: FromStr>(rec: &csv::StringRecord, i: usize, name: &str, line: usize) -> Result<V> {
    let raw = rec.get(i).unwrap_or("");
    raw.parse()
        .map_err(|_| Error::Validation(format!("line {line}: invalid {name} '{raw}'")))
}

pub fn read_manifest(path: &Path) -> Result<Vec<SampleRecord>> {
    let mut rdr = open(path, &MANIFEST_HEADER)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let sample_id: String = field(&rec, 0, "sample_id", line)?;
        let activity: usize = field(&rec, 1, "activity", line)?;
        let location: usize = field(&rec, 2, "location", line)?;
        let split: Split = rec.get(3).unwrap_or("").parse()?;
        check_labels(&sample_id, activity, location)?;
        out.push(SampleRecord {
            sample_id,
            activity,
            location,
            split,
        });
    }
    Ok(out)
}

pub fn write_manifest(path: &Path, records: &[SampleRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(MANIFEST_HEADER)?;
    for r in records {
        w.write_record([
            r.sample_id.clone(),
            r.activity.to_string(),
            r.location.to_string(),
            r.split.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_annotations(path: &Path) -> Result<Vec<Annotation>> {
    let mut rdr = open(path, &ANNOTATION_HEADER)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        out.push(Annotation {
            sample_id: field(&rec, 0, "sample_id", line)?,
            start_idx: field(&rec, 1, "start_idx", line)?,
            end_idx: field(&rec, 2, "end_idx", line)?,
        });
    }
    Ok(out)
}

/// Planar coordinates in meters, keyed by location label.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LocationCoords {
    coords: BTreeMap<usize, (f64, f64)>,
}

impl LocationCoords {
    pub fn new(coords: BTreeMap<usize, (f64, f64)>) -> Self {
        Self { coords }
    }

    /// Synthetic 4×4 grid with 1 m spacing, `id = row * 4 + col`. For tests
    /// and demos only; the real room layout must come from a coordinates file.
    pub fn synthetic_grid() -> Self {
        let coords = (0..NUM_LOCATIONS)
            .map(|id| (id, ((id % 4) as f64, (id / 4) as f64)))
            .collect();
        Self { coords }
    }

    pub fn get(&self, location: usize) -> Option<(f64, f64)> {
        self.coords.get(&location).copied()
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        (0..NUM_LOCATIONS).all(|id| self.coords.contains_key(&id))
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, (f64, f64))> + '_ {
        self.coords.iter().map(|(&k, &v)| (k, v))
    }
}

pub fn read_coords(path: &Path) -> Result<LocationCoords> {
    let mut rdr = open(path, &COORDS_HEADER)?;
    let mut coords = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let id: usize = field(&rec, 0, "location_id", line)?;
        let x: f64 = field(&rec, 1, "x_m", line)?;
        let y: f64 = field(&rec, 2, "y_m", line)?;
        if id >= NUM_LOCATIONS {
            return Err(Error::Validation(format!("line {line}: location_id {id} out of range")));
        }
        if !(x.is_finite() && y.is_finite()) {
            return Err(Error::Validation(format!("line {line}: non-finite coordinate")));
        }
        if coords.insert(id, (x, y)).is_some() {
            return Err(Error::Validation(format!("line {line}: duplicate location_id {id}")));
        }
    }
    if coords.len() != NUM_LOCATIONS {
        log::warn!(
            "{}: {} of {NUM_LOCATIONS} locations have coordinates",
            path.display(),
            coords.len()
        );
    }
    Ok(LocationCoords { coords })
}

pub fn write_coords(path: &Path, coords: &LocationCoords) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(COORDS_HEADER)?;
    for (id, (x, y)) in coords.iter() {
        w.write_record([id.to_string(), x.to_string(), y.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
