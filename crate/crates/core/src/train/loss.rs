use crate::error::{shape_err, Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

fn check_finite(scores: &[f64]) -> Result<()> {
    if scores.iter().all(|s| s.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric(format!("non-finite score in {scores:?}")))
    }
}

fn log_sum_exp(scores: &[f64]) -> f64 {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln()
}

pub fn softmax(scores: &[f64]) -> Result<Vec<f64>> {
    check_finite(scores)?;
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

pub fn log_softmax(scores: &[f64]) -> Result<Vec<f64>> {
    check_finite(scores)?;
    let lse = log_sum_exp(scores);
    Ok(scores.iter().map(|s| s - lse).collect())
}

/// `−log softmax(scores)[target]`, in log-sum-exp form.
pub fn cross_entropy(scores: &[f64], target: usize) -> Result<f64> {
    if target >= scores.len() {
        return Err(Error::Label(format!(
            "class {target} outside 0..{}",
            scores.len().saturating_sub(1)
        )));
    }
    check_finite(scores)?;
    Ok((log_sum_exp(scores) - scores[target]).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointLossValue {
    pub total: f64,
    pub activity_part: f64,
    pub location_part: f64,
    pub lambda: f64,
}

/// Loss value plus the gradients with respect to both score tensors.
#[derive(Debug, Clone)]
pub struct JointLoss<T: Scalar> {
    pub value: JointLossValue,
    pub grad_activity: Tensor<T>,
    pub grad_location: Tensor<T>,
}

/// Mean cross entropy and its gradient `(softmax − onehot) / B · weight`.
fn mean_ce<T: Scalar>(scores: &Tensor<T>, labels: &[usize], weight: f64) -> Result<(f64, Tensor<T>)> {
    let (b, k) = (scores.dim(0), scores.dim(1));
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(b * k);
    for (i, &t) in labels.iter().enumerate() {
        let row: Vec<f64> = scores.row(i).iter().map(|v| v.as_f64()).collect();
        loss += cross_entropy(&row, t)?;
        for (j, p) in softmax(&row)?.into_iter().enumerate() {
            let onehot = if j == t { 1.0 } else { 0.0 };
            grad.push(T::of((p - onehot) / b as f64 * weight));
        }
    }
    Ok((loss / b as f64, Tensor::from_vec(&[b, k], grad)?))
}

/// `L = mean CE(activity) + λ · mean CE(location)`.
pub fn joint_loss<T: Scalar>(
    act_scores: &Tensor<T>,
    loc_scores: &Tensor<T>,
    act_labels: &[usize],
    loc_labels: &[usize],
    lambda: f64,
) -> Result<JointLoss<T>> {
    act_scores.expect_rank(2, "activity scores")?;
    loc_scores.expect_rank(2, "location scores")?;
    let b = act_scores.dim(0);
    if b == 0 || loc_scores.dim(0) != b || act_labels.len() != b || loc_labels.len() != b {
        return Err(shape_err!(
            "joint loss: scores {:?}/{:?} with {}/{} labels",
            act_scores.shape(),
            loc_scores.shape(),
            act_labels.len(),
            loc_labels.len()
        ));
    }
    let (activity_part, grad_activity) = mean_ce(act_scores, act_labels, 1.0)?;
    let (location_part, grad_location) = mean_ce(loc_scores, loc_labels, lambda)?;
    Ok(JointLoss {
        value: JointLossValue {
            total: activity_part + lambda * location_part,
            activity_part,
            location_part,
            lambda,
        },
        grad_activity,
        grad_location,
    })
}
