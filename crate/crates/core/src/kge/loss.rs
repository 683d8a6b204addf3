//! Training losses over positive scores and their `k` negatives each.
//!
//! Negatives are laid out positive-major: the negatives of positive `i`
//! occupy `neg[i*k .. (i+1)*k]`.

use serde::{Deserialize, Serialize};

use crate::kge::config::{HyperparamConfig, LossKind};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum LossFn {
    MarginRanking { margin: f64 },
    Bce,
    CrossEntropy,
}

impl LossFn {
    pub fn from_config(config: &HyperparamConfig) -> Self {
        match config.loss {
            LossKind::MarginRanking => LossFn::MarginRanking {
                margin: config.margin.unwrap_or(1.0),
            },
            LossKind::Bce => LossFn::Bce,
            LossKind::CrossEntropy => LossFn::CrossEntropy,
        }
    }

    pub fn value(&self, pos: &[f64], neg: &[f64]) -> f64 {
        let mut gp = vec![0.0; pos.len()];
        let mut gn = vec![0.0; neg.len()];
        self.value_and_grad(pos, neg, &mut gp, &mut gn)
    }

    /// Returns the loss and overwrites `grad_pos`/`grad_neg` with its
    /// derivative with respect to each score.
    pub fn value_and_grad(&self, pos: &[f64], neg: &[f64], grad_pos: &mut [f64], grad_neg: &mut [f64]) -> f64 {
        assert!(
            !pos.is_empty() && neg.len().is_multiple_of(pos.len()),
            "each positive needs the same number of negatives"
        );
        let k = neg.len() / pos.len();
        grad_pos.fill(0.0);
        grad_neg.fill(0.0);
        match *self {
            LossFn::MarginRanking { margin } => {
                let w = 1.0 / neg.len() as f64;
                let mut total = 0.0;
                for (i, &p) in pos.iter().enumerate() {
                    for j in i * k..(i + 1) * k {
                        let violation = margin - p + neg[j];
                        if violation > 0.0 {
                            total += violation;
                            grad_pos[i] -= w;
                            grad_neg[j] += w;
                        }
                    }
                }
                total * w
            }
            LossFn::Bce => {
                let w = 1.0 / (pos.len() + neg.len()) as f64;
                let mut total = 0.0;
                for (g, &p) in grad_pos.iter_mut().zip(pos) {
                    // -log sigmoid(p)
                    total += softplus(-p);
                    *g = -sigmoid(-p) * w;
                }
                for (g, &n) in grad_neg.iter_mut().zip(neg) {
                    // -log(1 - sigmoid(n))
                    total += softplus(n);
                    *g = sigmoid(n) * w;
                }
                total * w
            }
            LossFn::CrossEntropy => {
                let w = 1.0 / pos.len() as f64;
                let mut total = 0.0;
                for (i, &p) in pos.iter().enumerate() {
                    let negs = &neg[i * k..(i + 1) * k];
                    let max = negs.iter().copied().fold(p, f64::max);
                    let z: f64 = (p - max).exp() + negs.iter().map(|&n| (n - max).exp()).sum::<f64>();
                    let log_z = max + z.ln();
                    total += log_z - p;
                    grad_pos[i] = ((p - log_z).exp() - 1.0) * w;
                    for (j, &n) in negs.iter().enumerate() {
                        grad_neg[i * k + j] = (n - log_z).exp() * w;
                    }
                }
                total * w
            }
        }
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn margin_examples() {
        let loss = LossFn::MarginRanking { margin: 1.0 };
        assert_eq!(loss.value(&[5.0], &[1.0]), 0.0);
        assert_eq!(loss.value(&[0.0], &[0.0]), 1.0);
    }

    #[test]
    fn cross_entropy_of_equal_logits() {
        let v = LossFn::CrossEntropy.value(&[0.0], &[0.0]);
        assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn bce_of_zero_scores() {
        let v = LossFn::Bce.value(&[0.0, 0.0], &[0.0, 0.0, 0.0, 0.0]);
        assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn extreme_scores_stay_finite() {
        for loss in [LossFn::MarginRanking { margin: 2.0 }, LossFn::Bce, LossFn::CrossEntropy] {
            let v = loss.value(&[-800.0, 900.0], &[900.0, -800.0, 1e3, -1e3]);
            assert!(v.is_finite(), "{loss:?}");
        }
    }
}
