//! Simulator losses. Predictions are network outputs in (0, 1); truths are
//! ranks in `[1, N]`. A prediction maps to the rank `1 + (N - 1) * output`.

/// Rank implied by a normalized prediction.
pub fn denormalize(output: f64, entity_count: usize) -> f64 {
    1.0 + (entity_count as f64 - 1.0) * output
}

pub fn normalize_rank(rank: f64, entity_count: usize) -> f64 {
    (rank - 1.0) / (entity_count as f64 - 1.0)
}

/// Reciprocal-rank mass normalized over the batch.
fn reciprocal_distribution(ranks: impl Iterator<Item = f64>) -> Vec<f64> {
    let inv: Vec<f64> = ranks.map(|r| 1.0 / r).collect();
    let total: f64 = inv.iter().sum();
    inv.into_iter().map(|v| v / total).collect()
}

/// `KL(p_true || p_pred)` between the reciprocal-rank distributions of the
/// batch.
pub fn kl_loss(pred: &[f64], true_ranks: &[f64], entity_count: usize) -> f64 {
    kl_loss_grad(pred, true_ranks, entity_count, None)
}

/// As [`kl_loss`]; when `grad` is given, adds the derivative with respect
/// to each prediction into it.
pub fn kl_loss_grad(pred: &[f64], true_ranks: &[f64], entity_count: usize, grad: Option<&mut [f64]>) -> f64 {
    assert_eq!(pred.len(), true_ranks.len());
    let p = reciprocal_distribution(true_ranks.iter().copied());
    let rhat: Vec<f64> = pred.iter().map(|&o| denormalize(o, entity_count)).collect();
    let q = reciprocal_distribution(rhat.iter().copied());
    let kl = p
        .iter()
        .zip(&q)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, qi)| pi * (pi / qi).ln())
        .sum::<f64>()
        .max(0.0);
    if let Some(grad) = grad {
        let scale = entity_count as f64 - 1.0;
        for (((g, pi), qi), r) in grad.iter_mut().zip(&p).zip(&q).zip(&rhat) {
            *g += scale * (pi - qi) / r;
        }
    }
    kl
}

/// Mean squared error between predictions and normalized true ranks.
pub fn mse_loss(pred: &[f64], true_ranks: &[f64], entity_count: usize) -> f64 {
    mse_loss_grad(pred, true_ranks, entity_count, None, 1.0)
}

/// As [`mse_loss`]; adds `weight * d mse / d pred` into `grad` when given.
pub fn mse_loss_grad(
    pred: &[f64],
    true_ranks: &[f64],
    entity_count: usize,
    grad: Option<&mut [f64]>,
    weight: f64,
) -> f64 {
    assert_eq!(pred.len(), true_ranks.len());
    let n = pred.len() as f64;
    let diffs: Vec<f64> = pred
        .iter()
        .zip(true_ranks)
        .map(|(&o, &r)| o - normalize_rank(r, entity_count))
        .collect();
    if let Some(grad) = grad {
        for (g, d) in grad.iter_mut().zip(&diffs) {
            *g += weight * 2.0 * d / n;
        }
    }
    diffs.iter().map(|d| d * d).sum::<f64>() / n
}
