use serde::{Deserialize, Serialize};

use crate::features::{QueryFeatureVector, FEATURE_COUNT};
use crate::kge::{HyperparamConfig, LossKind, SamplerKind};

pub const HYPER_DIM: usize = 12;
pub const STRUCT_DIM: usize = FEATURE_COUNT;

/// Largest grid values, used to bring counts onto a unit scale.
const NEGATIVES_SCALE: f64 = 125.0;
const DIMENSION_SCALE: f64 = 250.0;
/// log10 floor for a zero regularisation coefficient.
const LOG10_FLOOR: f64 = -12.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodedInput {
    pub hyper: [f64; HYPER_DIM],
    pub structure: [f64; STRUCT_DIM],
}

/// Per-feature z-score statistics, fitted once on the simulator's
/// training rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    pub fn identity() -> Self {
        NormStats {
            mean: vec![0.0; STRUCT_DIM],
            std: vec![1.0; STRUCT_DIM],
        }
    }

    /// Population mean and standard deviation of each feature. A constant
    /// feature gets standard deviation 1 so it encodes to 0.
    pub fn fit<'a, I>(rows: I) -> Self
    where
        I: IntoIterator<Item = &'a QueryFeatureVector>,
        I::IntoIter: Clone,
    {
        let rows = rows.into_iter();
        let mut count = 0usize;
        let mut mean = vec![0.0; STRUCT_DIM];
        for fv in rows.clone() {
            count += 1;
            for (m, v) in mean.iter_mut().zip(fv.to_array()) {
                *m += v;
            }
        }
        if count == 0 {
            return Self::identity();
        }
        for m in &mut mean {
            *m /= count as f64;
        }
        let mut var = vec![0.0; STRUCT_DIM];
        for fv in rows {
            for ((s, v), m) in var.iter_mut().zip(fv.to_array()).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / count as f64).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        NormStats { mean, std }
    }

    pub fn normalize(&self, fv: &QueryFeatureVector) -> [f64; STRUCT_DIM] {
        let mut out = fv.to_array();
        for ((x, m), s) in out.iter_mut().zip(&self.mean).zip(&self.std) {
            *x = (*x - m) / s;
        }
        out
    }
}

/// Sampler one-hot (3), loss one-hot (3), log10 learning rate, log10
/// regularisation coefficient, margin or 0, negatives / 125,
/// dimension / 250, margin-present flag.
pub fn encode_hyperparams(config: &HyperparamConfig) -> [f64; HYPER_DIM] {
    let mut h = [0.0; HYPER_DIM];
    h[match config.sampler {
        SamplerKind::Basic => 0,
        SamplerKind::Bernoulli => 1,
        SamplerKind::PseudoTyped => 2,
    }] = 1.0;
    h[3 + match config.loss {
        LossKind::MarginRanking => 0,
        LossKind::Bce => 1,
        LossKind::CrossEntropy => 2,
    }] = 1.0;
    h[6] = config.learning_rate.log10().max(LOG10_FLOOR);
    h[7] = if config.reg_coefficient > 0.0 {
        config.reg_coefficient.log10().max(LOG10_FLOOR)
    } else {
        LOG10_FLOOR
    };
    h[8] = config.margin.unwrap_or(0.0);
    h[9] = f64::from(config.negatives) / NEGATIVES_SCALE;
    h[10] = config.dimension as f64 / DIMENSION_SCALE;
    h[11] = f64::from(u8::from(config.margin.is_some()));
    h
}

pub fn encode(config: &HyperparamConfig, fv: &QueryFeatureVector, norm: &NormStats) -> EncodedInput {
    EncodedInput {
        hyper: encode_hyperparams(config),
        structure: norm.normalize(fv),
    }
}
