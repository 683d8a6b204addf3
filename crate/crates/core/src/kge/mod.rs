//! ComplEx link predictor: configuration, scoring, negative sampling,
//! losses and training.

pub mod config;
pub mod loss;
pub mod model;
pub mod sampler;
pub mod train;

use serde::{Deserialize, Serialize};

pub use config::{HyperparamConfig, LossKind, SamplerKind};
pub use loss::LossFn;
pub use model::ComplexModel;
pub use sampler::NegativeSampler;
pub use train::{batch_objective, train, train_with_log, TrainingLog, BATCH_SIZE};

use crate::kg::KnowledgeGraph;

/// Model checkpoint with its provenance and dictionaries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KgeCheckpoint {
    pub kg: String,
    pub config: HyperparamConfig,
    pub seed: u64,
    pub entities: Vec<String>,
    pub relations: Vec<String>,
    pub model: ComplexModel,
}

impl KgeCheckpoint {
    pub fn new(kg: &KnowledgeGraph, config: HyperparamConfig, model: ComplexModel) -> Self {
        let dicts = kg.dictionaries();
        KgeCheckpoint {
            kg: kg.name().to_owned(),
            config,
            seed: model.seed(),
            entities: dicts.entities,
            relations: dicts.relations,
            model,
        }
    }
}
