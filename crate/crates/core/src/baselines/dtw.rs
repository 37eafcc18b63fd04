use crate::dataset::CsiMatrix;
use crate::error::{shape_err, Error, Result};
use crate::scalar::Scalar;

/// Time-major copy of a series: `len` frames of `channels` values each.
#[derive(Debug, Clone, PartialEq)]
pub struct Frames {
    pub channels: usize,
    pub len: usize,
    pub data: Vec<f64>,
}

impl Frames {
    pub fn from_matrix<T: Scalar>(m: &CsiMatrix<T>) -> Self {
        let (c, l) = (m.channels(), m.len());
        let mut data = vec![0.0; c * l];
        for ch in 0..c {
            for (t, v) in m.channel(ch).iter().enumerate() {
                data[t * c + ch] = v.as_f64();
            }
        }
        Self { channels: c, len: l, data }
    }

    /// Single-channel series.
    pub fn scalar(values: &[f64]) -> Self {
        Self { channels: 1, len: values.len(), data: values.to_vec() }
    }

    fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * self.channels..][..self.channels]
    }
}

/// Dependent multichannel DTW: the local cost is the Euclidean distance
/// between whole frames, summed along the cheapest monotone alignment.
/// `band` restricts alignments to `|i − j| ≤ band`.
pub fn dtw_distance<T: Scalar>(a: &CsiMatrix<T>, b: &CsiMatrix<T>, band: Option<usize>) -> Result<f64> {
    dtw_frames(&Frames::from_matrix(a), &Frames::from_matrix(b), band)
}

pub fn dtw_frames(a: &Frames, b: &Frames, band: Option<usize>) -> Result<f64> {
    if a.channels != b.channels {
        return Err(shape_err!("dtw: {} vs {} channels", a.channels, b.channels));
    }
    let (n, m) = (a.len, b.len);
    if n == 0 || m == 0 {
        return Err(shape_err!("dtw: empty series ({n} and {m} frames)"));
    }
    if let Some(r) = band {
        if n.abs_diff(m) > r {
            return Err(Error::InfeasibleBand(format!(
                "band radius {r} admits no path between lengths {n} and {m}"
            )));
        }
    }
    let r = band.unwrap_or(usize::MAX);
    let cost = |i: usize, j: usize| {
        a.frame(i)
            .iter()
            .zip(b.frame(j))
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    };
    let mut prev = vec![f64::INFINITY; m];
    let mut cur = vec![f64::INFINITY; m];
    for i in 0..n {
        cur.fill(f64::INFINITY);
        let lo = i.saturating_sub(r);
        let hi = i.saturating_add(r).min(m - 1);
        for j in lo..=hi {
            let best = if i == 0 && j == 0 {
                0.0
            } else {
                let up = if i > 0 { prev[j] } else { f64::INFINITY };
                let left = if j > 0 { cur[j - 1] } else { f64::INFINITY };
                let diag = if i > 0 && j > 0 { prev[j - 1] } else { f64::INFINITY };
                up.min(left).min(diag)
            };
            cur[j] = best + cost(i, j);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m - 1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Minimum over every monotone alignment path, enumerated recursively.
    fn brute(a: &Frames, b: &Frames, band: Option<usize>) -> f64 {
        fn walk(a: &Frames, b: &Frames, band: Option<usize>, i: usize, j: usize) -> f64 {
            if band.is_some_and(|r| i.abs_diff(j) > r) {
                return f64::INFINITY;
            }
            let c: f64 = a.frame(i).iter().zip(b.frame(j)).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            if i + 1 == a.len && j + 1 == b.len {
                return c;
            }
            let mut best = f64::INFINITY;
            if i + 1 < a.len {
                best = best.min(walk(a, b, band, i + 1, j));
            }
            if j + 1 < b.len {
                best = best.min(walk(a, b, band, i, j + 1));
            }
            if i + 1 < a.len && j + 1 < b.len {
                best = best.min(walk(a, b, band, i + 1, j + 1));
            }
            c + best
        }
        walk(a, b, band, 0, 0)
    }

    #[test]
    fn small_cases() {
        let d = |a: &[f64], b: &[f64]| dtw_frames(&Frames::scalar(a), &Frames::scalar(b), None).unwrap();
        assert_eq!(d(&[2.0], &[5.0]), 3.0);
        assert_eq!(d(&[1.0, 4.0, 2.0], &[1.0, 4.0, 2.0]), 0.0);
        // (0,0) (1,0) (2,1) aligns both zeros of `a` to the first zero of `b`.
        assert_eq!(d(&[0.0, 0.0, 1.0], &[0.0, 1.0]), 0.0);
        assert_eq!(brute(&Frames::scalar(&[0.0, 0.0, 1.0]), &Frames::scalar(&[0.0, 1.0]), None), 0.0);
        assert_eq!(d(&[0.0, 3.0], &[0.0, 0.0, 0.0]), 3.0);
    }

    #[test]
    fn multichannel_cost_is_frame_euclidean() {
        let a = CsiMatrix::new(2, 1, vec![0.0f32, 0.0]).unwrap();
        let b = CsiMatrix::new(2, 1, vec![3.0f32, 4.0]).unwrap();
        assert_eq!(dtw_distance(&a, &b, None).unwrap(), 5.0);
    }

    #[test]
    fn infeasible_band() {
        let a = Frames::scalar(&[0.0; 5]);
        let b = Frames::scalar(&[0.0; 2]);
        assert!(matches!(dtw_frames(&a, &b, Some(2)), Err(Error::InfeasibleBand(_))));
        assert_eq!(dtw_frames(&a, &b, Some(3)).unwrap(), 0.0);
    }

    fn series(max_len: usize, channels: usize) -> impl Strategy<Value = Frames> {
        (1..=max_len).prop_flat_map(move |len| {
            prop::collection::vec(-3.0f64..3.0, len * channels)
                .prop_map(move |data| Frames { channels, len, data })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn dp_equals_exhaustive_enumeration(a in series(6, 2), b in series(6, 2), r in 0usize..7) {
            let full = dtw_frames(&a, &b, None).unwrap();
            prop_assert!((full - brute(&a, &b, None)).abs() < 1e-9);
            if a.len.abs_diff(b.len) <= r {
                let banded = dtw_frames(&a, &b, Some(r)).unwrap();
                prop_assert!((banded - brute(&a, &b, Some(r))).abs() < 1e-9);
            }
        }

        #[test]
        fn symmetric_zero_self_band_monotone(a in series(12, 3), b in series(12, 3)) {
            let ab = dtw_frames(&a, &b, None).unwrap();
            prop_assert_eq!(ab, dtw_frames(&b, &a, None).unwrap());
            prop_assert_eq!(dtw_frames(&a, &a, None).unwrap(), 0.0);
            prop_assert_eq!(dtw_frames(&a, &a, Some(0)).unwrap(), 0.0);
            let mut last = f64::INFINITY;
            for r in a.len.abs_diff(b.len)..=12 {
                let d = dtw_frames(&a, &b, Some(r)).unwrap();
                prop_assert!(d <= last);
                last = d;
            }
            prop_assert_eq!(dtw_frames(&a, &b, Some(usize::MAX)).unwrap(), ab);
            prop_assert_eq!(last, ab);
        }
    }
}
