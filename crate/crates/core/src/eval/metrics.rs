use log::warn;
use num_traits::{FromPrimitive, Num};

use super::ConfusionMatrix;

/// Per-class precision, recall and F1, plus overall accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMetrics<V> {
    pub precision: Vec<V>,
    pub recall: Vec<V>,
    pub f1: Vec<V>,
    /// `None` for an empty matrix.
    pub accuracy: Option<V>,
    /// Zero denominators encountered, one message each.
    pub warnings: Vec<String>,
}

/// `2PR / (P + R)`, or 0 when `P + R = 0`.
pub fn f1_score<V: Num + Copy>(p: V, r: V) -> V {
    let s = p + r;
    if s == V::zero() {
        V::zero()
    } else {
        (V::one() + V::one()) * p * r / s
    }
}

fn ratio<V: Num + FromPrimitive>(num: u64, den: u64) -> Option<V> {
    (den > 0).then(|| V::from_u64(num).expect("count fits") / V::from_u64(den).expect("count fits"))
}

/// Generic over the value type so that exact rationals can be used to check
/// the arithmetic.
pub fn class_metrics<V: Num + FromPrimitive + Copy>(cm: &ConfusionMatrix) -> ClassMetrics<V> {
    let k = cm.classes();
    let mut out = ClassMetrics {
        precision: Vec::with_capacity(k),
        recall: Vec::with_capacity(k),
        f1: Vec::with_capacity(k),
        accuracy: ratio(cm.trace(), cm.total()),
        warnings: Vec::new(),
    };
    for c in 0..k {
        let hit = cm.get(c, c);
        let p = ratio(hit, cm.col_sum(c)).unwrap_or_else(|| {
            out.warnings.push(format!("class {c}: never predicted, precision set to 0"));
            V::zero()
        });
        let r = ratio(hit, cm.row_sum(c)).unwrap_or_else(|| {
            out.warnings.push(format!("class {c}: absent from ground truth, recall set to 0"));
            V::zero()
        });
        out.precision.push(p);
        out.recall.push(r);
        out.f1.push(f1_score(p, r));
    }
    if !out.warnings.is_empty() {
        warn!("{} undefined precision/recall values set to 0: {}", out.warnings.len(), out.warnings.join("; "));
    }
    out
}

/// Support-weighted mean recall; `None` for an empty matrix.
pub fn micro_recall<V: Num + FromPrimitive + Copy>(cm: &ConfusionMatrix, m: &ClassMetrics<V>) -> Option<V> {
    let total = V::from_u64(cm.total())?;
    if total == V::zero() {
        return None;
    }
    let weighted = (0..cm.classes()).fold(V::zero(), |acc, c| {
        acc + V::from_u64(cm.row_sum(c)).expect("count fits") * m.recall[c]
    });
    Some(weighted / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::confusion;
    use num_rational::Ratio;
    use proptest::prelude::*;

    type Q = Ratio<i64>;

    #[test]
    fn published_f1_values() {
        // up: P 0.90, R 0.98, printed F1 0.94
        let up = f1_score(0.90f64, 0.98);
        assert!((up - 1.764 / 1.88).abs() < 1e-12);
        assert!((up - 0.9382).abs() < 1e-4);
        assert!((up - 0.94).abs() <= 0.005);
        // circle: P 0.97, R 0.77; the formula gives 0.8585, the table prints 0.82
        let circle = f1_score(0.97f64, 0.77);
        assert!((circle - 1.4938 / 1.74).abs() < 1e-12);
        assert!((circle - 0.8585).abs() < 1e-4);
        assert!((circle - 0.82).abs() > 0.03);
    }

    #[test]
    fn absent_class_is_zero_with_warning() {
        let cm = confusion(&[0, 1, 1], &[0, 1, 0], 3).unwrap();
        let m = class_metrics::<f64>(&cm);
        assert_eq!((m.precision[2], m.recall[2], m.f1[2]), (0.0, 0.0, 0.0));
        assert_eq!(m.warnings.len(), 2);
        assert_eq!(m.precision[1], 0.5);
        assert_eq!(m.recall[0], 0.5);
    }

    /// Straight from the definitions, over the raw pairs rather than the matrix.
    fn brute(preds: &[usize], labels: &[usize], k: usize) -> Vec<(Q, Q, Q)> {
        (0..k)
            .map(|c| {
                let tp = preds.iter().zip(labels).filter(|&(&p, &t)| p == c && t == c).count() as i64;
                let pp = preds.iter().filter(|&&p| p == c).count() as i64;
                let ap = labels.iter().filter(|&&t| t == c).count() as i64;
                let p = if pp == 0 { Q::from_integer(0) } else { Q::new(tp, pp) };
                let r = if ap == 0 { Q::from_integer(0) } else { Q::new(tp, ap) };
                let f = if tp == 0 { Q::from_integer(0) } else { Q::new(2 * tp, pp + ap) };
                (p, r, f)
            })
            .collect()
    }

    #[test]
    fn hand_built_matrix_matches_brute_force_exactly() {
        let labels = [0, 0, 0, 1, 1, 2, 2, 2, 2, 3, 4, 5, 5, 5];
        let preds = [0, 1, 0, 1, 2, 2, 2, 0, 2, 5, 4, 5, 3, 5];
        let cm = confusion(&preds, &labels, 6).unwrap();
        let m = class_metrics::<Q>(&cm);
        for (c, (p, r, f)) in brute(&preds, &labels, 6).into_iter().enumerate() {
            assert_eq!((m.precision[c], m.recall[c], m.f1[c]), (p, r, f), "class {c}");
        }
        assert_eq!(m.accuracy, Some(Q::new(9, 14)));
        assert_eq!(micro_recall(&cm, &m), m.accuracy);
    }

    proptest! {
        #[test]
        fn exact_metrics_and_micro_recall_identity(
            pairs in prop::collection::vec((0usize..6, 0usize..6), 1..120),
        ) {
            let (preds, labels): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
            let cm = confusion(&preds, &labels, 6).unwrap();
            let m = class_metrics::<Q>(&cm);
            for (c, (p, r, f)) in brute(&preds, &labels, 6).into_iter().enumerate() {
                prop_assert_eq!((m.precision[c], m.recall[c], m.f1[c]), (p, r, f));
                prop_assert!(p >= Q::from_integer(0) && p <= Q::from_integer(1));
            }
            prop_assert_eq!(micro_recall(&cm, &m), m.accuracy);
        }
    }
}
