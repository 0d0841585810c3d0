use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Numerically stable softmax of one logit row.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    /// `ce + penalty`.
    pub loss: f64,
    pub ce: f64,
    pub penalty: f64,
    /// Gradient of the mean cross-entropy with respect to the logits.
    pub dlogits: Tensor,
    /// `2λ(θ − θ₀)`.
    pub penalty_grad: Vec<f64>,
}

/// Mean cross-entropy over the batch plus `λ·Σ(θ−θ₀)²`.
pub fn loss_ce_l2sp(logits: &Tensor, labels: &[usize], theta: &[f64], anchor: &[f64], lambda: f64) -> Result<LossOutput> {
    let n = logits.rows();
    let c = logits.shape()[1];
    if labels.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: labels.len() });
    }
    if theta.len() != anchor.len() {
        return Err(Error::DimensionMismatch {
            expected: theta.len(),
            got: anchor.len(),
        });
    }
    if let Some(&y) = labels.iter().find(|&&y| y >= c) {
        return Err(Error::InvalidArgument(format!("label {y} out of range for {c} classes")));
    }
    let mut ce = 0.0;
    let mut d = Vec::with_capacity(n * c);
    for (i, &y) in labels.iter().enumerate() {
        let row = logits.row(i);
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
        ce += lse - row[y];
        for (k, p) in softmax(row).into_iter().enumerate() {
            let t = if k == y { 1.0 } else { 0.0 };
            d.push((p - t) / n as f64);
        }
    }
    ce /= n as f64;
    let mut penalty = 0.0;
    let mut penalty_grad = Vec::with_capacity(theta.len());
    for (t, a) in theta.iter().zip(anchor) {
        let diff = t - a;
        penalty += diff * diff;
        penalty_grad.push(2.0 * lambda * diff);
    }
    penalty *= lambda;
    Ok(LossOutput {
        loss: ce + penalty,
        ce,
        penalty,
        dlogits: Tensor::new(vec![n, c], d)?,
        penalty_grad,
    })
}
