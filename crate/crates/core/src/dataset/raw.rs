//! Conversion of a raw recording directory into a CSIT container.
//!
//! Layout: `labels.csv` with header `sample_id,activity,location` lists the
//! samples in order; each sample lives in `<sample_id>.csv`, one line per
//! subcarrier holding comma-separated amplitudes (no header).

use std::collections::HashMap;
use std::path::Path;

use super::{
    check_labels, make_split_with_phase, resample_linear, segment, Annotation, Container, CsiMatrix,
    SampleRecord,
};
use crate::error::{Error, Result};
use crate::{FINGERPRINT_LEN, NUM_SUBCARRIERS};

pub const LABELS_FILE: &str = "labels.csv";

#[derive(Debug, Clone)]
pub struct RawSample {
    pub sample_id: String,
    pub activity: usize,
    pub location: usize,
    pub series: CsiMatrix<f32>,
}

pub fn read_raw_sample(path: &Path) -> Result<CsiMatrix<f32>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|v| {
                v.parse::<f32>().map_err(|_| {
                    Error::Validation(format!("{} line {}: bad amplitude '{v}'", path.display(), i + 1))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.len() != NUM_SUBCARRIERS {
        return Err(Error::Shape(format!(
            "{}: expected {NUM_SUBCARRIERS} subcarrier rows, got {}",
            path.display(),
            rows.len()
        )));
    }
    CsiMatrix::from_rows(&rows).map_err(|e| Error::Shape(format!("{}: {e}", path.display())))
}

pub fn read_raw_dir(dir: &Path) -> Result<Vec<RawSample>> {
    let labels = dir.join(LABELS_FILE);
    if !labels.exists() {
        return Err(Error::Validation(format!(
            "{}: zero samples found (no {LABELS_FILE})",
            dir.display()
        )));
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(&labels)?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != ["sample_id", "activity", "location"] {
        return Err(Error::Format(format!(
            "{}: expected header sample_id,activity,location",
            labels.display()
        )));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse = |j: usize| -> Result<usize> {
            rec.get(j)
                .unwrap_or("")
                .parse()
                .map_err(|_| Error::Validation(format!("{} line {}: bad label", labels.display(), i + 2)))
        };
        let sample_id = rec.get(0).unwrap_or("").to_string();
        let (activity, location) = (parse(1)?, parse(2)?);
        check_labels(&sample_id, activity, location)?;
        let series = read_raw_sample(&dir.join(format!("{sample_id}.csv")))?;
        out.push(RawSample {
            sample_id,
            activity,
            location,
            series,
        });
    }
    if out.is_empty() {
        return Err(Error::Validation(format!("{}: zero samples found", dir.display())));
    }
    Ok(out)
}

/// Segments (when annotations are given), resamples to the fingerprint
/// length, and assigns the split.
pub fn convert(
    samples: &[RawSample],
    annotations: Option<&[Annotation]>,
    split_phase: usize,
) -> Result<(Container, Vec<SampleRecord>)> {
    if samples.is_empty() {
        return Err(Error::Validation("zero samples to convert".into()));
    }
    let by_id: Option<HashMap<&str, &Annotation>> =
        annotations.map(|a| a.iter().map(|a| (a.sample_id.as_str(), a)).collect());
    if let (Some(anns), Some(_)) = (annotations, by_id.as_ref()) {
        let known: std::collections::HashSet<&str> = samples.iter().map(|s| s.sample_id.as_str()).collect();
        let unknown: Vec<&str> = anns
            .iter()
            .map(|a| a.sample_id.as_str())
            .filter(|id| !known.contains(id))
            .collect();
        if !unknown.is_empty() {
            return Err(Error::Validation(format!(
                "annotations reference unknown sample_id(s): {}",
                unknown.join(", ")
            )));
        }
    }
    let splits = make_split_with_phase(samples.len(), split_phase);
    let mut container = Container::new(NUM_SUBCARRIERS, FINGERPRINT_LEN)?;
    let mut records = Vec::with_capacity(samples.len());
    for (s, split) in samples.iter().zip(splits) {
        let series = match by_id.as_ref() {
            Some(map) => {
                let a = map.get(s.sample_id.as_str()).ok_or_else(|| {
                    Error::Validation(format!("sample {} has no annotation", s.sample_id))
                })?;
                segment(&s.series, a)?
            }
            None => s.series.clone(),
        };
        container.push(&resample_linear(&series, FINGERPRINT_LEN)?)?;
        records.push(SampleRecord {
            sample_id: s.sample_id.clone(),
            activity: s.activity,
            location: s.location,
            split,
        });
    }
    Ok((container, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write_sample(dir: &Path, id: &str, len: usize) {
        let rows: Vec<String> = (0..NUM_SUBCARRIERS)
            .map(|c| (0..len).map(|t| format!("{}", c + t)).collect::<Vec<_>>().join(","))
            .collect();
        fs::write(dir.join(format!("{id}.csv")), rows.join("\n")).unwrap();
    }

    #[test]
    fn converts_presegmented_directory() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(LABELS_FILE), "sample_id,activity,location\na,1,2\nb,5,15\n").unwrap();
        write_sample(dir.path(), "a", 100);
        write_sample(dir.path(), "b", 192);
        let samples = read_raw_dir(dir.path()).unwrap();
        let (c, recs) = convert(&samples, None, 4).unwrap();
        assert_eq!(c.count(), 2);
        assert_eq!(recs[1].location, 15);
        assert_eq!(c.sample(1).channel(3)[5], 8.0);
    }

    #[test]
    fn empty_directory_reports_zero_samples() {
        let dir = tempfile::tempdir().unwrap();
        let err = read_raw_dir(dir.path()).unwrap_err();
        assert!(err.to_string().contains("zero samples"));
    }

    #[test]
    fn unknown_annotation_id_is_listed() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(LABELS_FILE), "sample_id,activity,location\na,0,0\n").unwrap();
        write_sample(dir.path(), "a", 50);
        let samples = read_raw_dir(dir.path()).unwrap();
        let anns = vec![
            Annotation { sample_id: "a".into(), start_idx: 0, end_idx: 40 },
            Annotation { sample_id: "ghost".into(), start_idx: 0, end_idx: 10 },
        ];
        let err = convert(&samples, Some(&anns), 4).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        assert!(err.to_string().contains("ghost"));
    }
}
