//! TWIG: a network that simulates the ranks a KGE model assigns to each
//! link-prediction query from hyperparameter and graph-structure features.

pub mod encode;
pub mod loss;
pub mod network;
mod train;

use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use encode::{encode, encode_hyperparams, EncodedInput, NormStats, HYPER_DIM, STRUCT_DIM};
pub use loss::{denormalize, kl_loss, mse_loss, normalize_rank};
pub use network::{Architecture, Trace, TwigNet};
pub use train::{dataset_loss, finetune_twig, init_twig, train_twig};

use crate::error::{Error, Result};
use crate::eval::mrr;
use crate::features::QueryFeatureVector;
use crate::kge::HyperparamConfig;

/// All queries of one `(kg, config, replicate)` run with their true ranks.
/// Feature rows are shared between runs on the same graph.
#[derive(Clone, Debug, PartialEq)]
pub struct RankBatch {
    pub kg: String,
    pub config: HyperparamConfig,
    pub seed: u64,
    pub entity_count: usize,
    pub features: Arc<Vec<QueryFeatureVector>>,
    pub ranks: Vec<f64>,
}

impl RankBatch {
    pub fn id(&self) -> BatchId {
        BatchId {
            kg: self.kg.clone(),
            config_hash: self.config.config_hash(),
            seed: self.seed,
        }
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BatchId {
    pub kg: String,
    pub config_hash: String,
    pub seed: u64,
}

impl std::fmt::Display for BatchId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}/{}", self.kg, self.config_hash, self.seed)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TwigSettings {
    pub phase1_epochs: usize,
    pub phase2_epochs: usize,
    pub learning_rate: f64,
    /// Weight of the MSE term in the second phase and in finetuning.
    pub mse_weight: f64,
    pub seed: u64,
    pub architecture: Architecture,
}

impl Default for TwigSettings {
    fn default() -> Self {
        TwigSettings {
            phase1_epochs: 5,
            phase2_epochs: 10,
            learning_rate: 5e-3,
            mse_weight: 1.0,
            seed: 0,
            architecture: Architecture::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrainingPhase {
    Initialized,
    /// KL divergence only.
    Distribution,
    /// KL divergence plus MSE.
    Joint,
    Finetuned,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwigModel {
    pub net: TwigNet,
    pub norm: NormStats,
    pub phase: TrainingPhase,
    pub settings: TwigSettings,
    /// Batches seen in pretraining, then in finetuning.
    pub manifest: Vec<BatchId>,
    pub finetune_manifest: Vec<BatchId>,
}

impl TwigModel {
    pub fn encode(&self, config: &HyperparamConfig, fv: &QueryFeatureVector) -> EncodedInput {
        encode(config, fv, &self.norm)
    }

    pub fn forward(&self, input: &EncodedInput) -> Result<f64> {
        if input.hyper.iter().chain(&input.structure).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        Ok(self.net.forward(input))
    }

    /// Normalized rank predictions for every query of the batch.
    pub fn predict(&self, batch: &RankBatch) -> Result<Vec<f64>> {
        batch
            .features
            .iter()
            .map(|fv| self.forward(&self.encode(&batch.config, fv)))
            .collect()
    }

    pub fn predict_ranks(&self, batch: &RankBatch) -> Result<Vec<f64>> {
        Ok(self
            .predict(batch)?
            .into_iter()
            .map(|o| denormalize(o, batch.entity_count))
            .collect())
    }

    /// MRR of the denormalized predicted ranks.
    pub fn predict_mrr(&self, batch: &RankBatch) -> Result<f64> {
        mrr(&self.predict_ranks(batch)?)
    }

    /// `KL + mse_weight * MSE` on one batch; overwrites `grad` with its
    /// gradient with respect to the network parameters.
    pub fn loss_and_gradient(&self, batch: &RankBatch, mse_weight: f64, grad: &mut [f64]) -> Result<f64> {
        train::batch_step(&self.net, &self.norm, batch, mse_weight, grad)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
