use crate::dataset::LocationCoords;
use crate::error::{shape_err, Error, Result};

/// Euclidean metres, or their square as an alternative reading of the
/// error definition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DistanceMode {
    #[default]
    Euclidean,
    Squared,
}

pub fn distance(a: (f64, f64), b: (f64, f64), mode: DistanceMode) -> f64 {
    let sq = (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2);
    match mode {
        DistanceMode::Euclidean => sq.sqrt(),
        DistanceMode::Squared => sq,
    }
}

fn errors(pred: &[usize], truth: &[usize], coords: &LocationCoords, mode: DistanceMode) -> Result<Vec<f64>> {
    if pred.len() != truth.len() {
        return Err(shape_err!("{} predictions for {} labels", pred.len(), truth.len()));
    }
    let at = |loc: usize| {
        coords
            .get(loc)
            .ok_or_else(|| Error::Config(format!("no coordinates for location {loc}")))
    };
    pred.iter()
        .zip(truth)
        .map(|(&p, &t)| Ok(distance(at(p)?, at(t)?, mode)))
        .collect()
}

/// Mean error over all samples.
pub fn ale(pred: &[usize], truth: &[usize], coords: &LocationCoords, mode: DistanceMode) -> Result<f64> {
    if pred.is_empty() {
        return Err(Error::Config("average localization error needs at least one sample".into()));
    }
    let e = errors(pred, truth, coords, mode)?;
    Ok(e.iter().sum::<f64>() / e.len() as f64)
}

/// Mean error over misclassified samples only; `None` when there are none.
pub fn ame(pred: &[usize], truth: &[usize], coords: &LocationCoords, mode: DistanceMode) -> Result<Option<f64>> {
    let e = errors(pred, truth, coords, mode)?;
    let wrong: Vec<f64> = e
        .iter()
        .zip(pred.iter().zip(truth))
        .filter(|(_, (p, t))| p != t)
        .map(|(&d, _)| d)
        .collect();
    Ok((!wrong.is_empty()).then(|| wrong.iter().sum::<f64>() / wrong.len() as f64))
}
