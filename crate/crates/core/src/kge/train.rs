use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kg::{KnowledgeGraph, Triple};
use crate::kge::config::HyperparamConfig;
use crate::kge::loss::LossFn;
use crate::kge::model::ComplexModel;
use crate::kge::sampler::NegativeSampler;
use crate::optim::Adam;

pub const BATCH_SIZE: usize = 128;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingLog {
    /// Mean batch objective (loss plus regulariser) of each epoch.
    pub epoch_losses: Vec<f64>,
}

/// Loss over one batch plus the N3 penalty on every entity and relation row
/// the batch touches. Overwrites `grad` with the gradient.
pub fn batch_objective(
    model: &ComplexModel,
    positives: &[Triple],
    negatives: &[Triple],
    loss: LossFn,
    reg_coefficient: f64,
    grad: &mut [f64],
) -> f64 {
    grad.fill(0.0);
    let pos: Vec<f64> = positives.iter().map(|t| model.score_unchecked(t)).collect();
    let neg: Vec<f64> = negatives.iter().map(|t| model.score_unchecked(t)).collect();
    let mut gp = vec![0.0; pos.len()];
    let mut gn = vec![0.0; neg.len()];
    let mut value = loss.value_and_grad(&pos, &neg, &mut gp, &mut gn);

    for (t, &g) in positives.iter().zip(&gp).chain(negatives.iter().zip(&gn)) {
        if g != 0.0 {
            model.accumulate_score_grad(t, g, grad);
        }
    }

    if reg_coefficient > 0.0 {
        let mut entities: Vec<u32> = Vec::with_capacity(2 * (positives.len() + negatives.len()));
        let mut relations: Vec<u32> = Vec::with_capacity(positives.len());
        for t in positives.iter().chain(negatives) {
            entities.push(t.s);
            entities.push(t.o);
            relations.push(t.p);
        }
        entities.sort_unstable();
        entities.dedup();
        relations.sort_unstable();
        relations.dedup();

        let width = 2 * model.dim();
        let offsets = entities
            .iter()
            .map(|&e| model.entity_offset(e))
            .chain(relations.iter().map(|&r| model.relation_offset(r)));
        let params = model.params();
        for off in offsets {
            for i in off..off + width {
                let x = params[i];
                value += reg_coefficient * x.abs().powi(3);
                grad[i] += 3.0 * reg_coefficient * x * x.abs();
            }
        }
    }
    value
}

pub fn train(kg: &KnowledgeGraph, config: &HyperparamConfig, seed: u64) -> Result<ComplexModel> {
    train_with_log(kg, config, seed).map(|(model, _)| model)
}

/// Adam over shuffled batches of [`BATCH_SIZE`] training triples for
/// `config.epochs` epochs. Fully determined by `(kg, config, seed)`.
pub fn train_with_log(
    kg: &KnowledgeGraph,
    config: &HyperparamConfig,
    seed: u64,
) -> Result<(ComplexModel, TrainingLog)> {
    config.validate()?;
    if kg.entity_count() < 2 {
        return Err(Error::InvalidConfig("training needs at least two entities".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = ComplexModel::random(kg.entity_count(), kg.relation_count(), config.dimension, seed, &mut rng);
    let sampler = NegativeSampler::new(config.sampler, kg);
    let loss = LossFn::from_config(config);
    let k = config.negatives as usize;

    let mut adam = Adam::new(model.params().len(), config.learning_rate);
    let mut grad = vec![0.0; model.params().len()];
    let mut order: Vec<usize> = (0..kg.train().len()).collect();
    let mut positives = Vec::with_capacity(BATCH_SIZE);
    let mut negatives = Vec::with_capacity(BATCH_SIZE * k);
    let mut log = TrainingLog::default();

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_total = 0.0;
        let mut batches = 0usize;
        for (b, chunk) in order.chunks(BATCH_SIZE).enumerate() {
            positives.clear();
            positives.extend(chunk.iter().map(|&i| kg.train()[i]));
            negatives.clear();
            for pos in &positives {
                sampler.sample_into(pos, k, &mut rng, &mut negatives);
            }
            let value = batch_objective(&model, &positives, &negatives, loss, config.reg_coefficient, &mut grad);
            if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: b.to_string(),
                });
            }
            adam.step(model.params_mut(), &grad);
            epoch_total += value;
            batches += 1;
        }
        log.epoch_losses.push(epoch_total / batches as f64);
    }
    debug_assert!(model.is_finite());
    Ok((model, log))
}
