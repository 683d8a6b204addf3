use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::optim::Adam;
use crate::twig::encode::{encode_hyperparams, EncodedInput, NormStats};
use crate::twig::loss::{kl_loss_grad, mse_loss_grad};
use crate::twig::network::{Trace, TwigNet};
use crate::twig::{RankBatch, TrainingPhase, TwigModel, TwigSettings};

pub(crate) fn batch_step(
    net: &TwigNet,
    norm: &NormStats,
    batch: &RankBatch,
    mse_weight: f64,
    grad: &mut [f64],
) -> Result<f64> {
    if batch.is_empty() || batch.features.len() != batch.ranks.len() {
        return Err(Error::InvalidConfig(format!(
            "batch {} has {} feature rows for {} ranks",
            batch.id(),
            batch.features.len(),
            batch.ranks.len()
        )));
    }
    if batch.entity_count < 2 {
        return Err(Error::InvalidConfig(format!(
            "batch {} needs at least two entities",
            batch.id()
        )));
    }
    grad.fill(0.0);
    let hyper = encode_hyperparams(&batch.config);
    let mut traces = vec![Trace::default(); batch.len()];
    let mut preds = Vec::with_capacity(batch.len());
    for (fv, trace) in batch.features.iter().zip(&mut traces) {
        let input = EncodedInput {
            hyper,
            structure: norm.normalize(fv),
        };
        if input.hyper.iter().chain(&input.structure).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        preds.push(net.forward_traced(&input, trace));
    }
    let mut d_pred = vec![0.0; preds.len()];
    let mut value = kl_loss_grad(&preds, &batch.ranks, batch.entity_count, Some(&mut d_pred));
    if mse_weight != 0.0 {
        value += mse_weight * mse_loss_grad(&preds, &batch.ranks, batch.entity_count, Some(&mut d_pred), mse_weight);
    }
    for (trace, &d) in traces.iter().zip(&d_pred) {
        net.backward(trace, d, grad);
    }
    Ok(value)
}

/// Fits normalization statistics on every training row and draws the
/// initial weights from `settings.seed`.
pub fn init_twig(runs: &[RankBatch], settings: &TwigSettings) -> Result<TwigModel> {
    if runs.is_empty() {
        return Err(Error::InvalidConfig("no training batches".into()));
    }
    settings.architecture.validate().map_err(Error::InvalidConfig)?;
    let norm = NormStats::fit(runs.iter().flat_map(|b| b.features.iter()));
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let net = TwigNet::random(settings.architecture.clone(), &mut rng);
    Ok(TwigModel {
        net,
        norm,
        phase: TrainingPhase::Initialized,
        settings: settings.clone(),
        manifest: runs.iter().map(RankBatch::id).collect(),
        finetune_manifest: Vec::new(),
    })
}

fn shuffle_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn run_epochs(
    model: &mut TwigModel,
    runs: &[RankBatch],
    epochs: usize,
    mse_weight: f64,
    adam: &mut Adam,
    rng: &mut ChaCha8Rng,
    epoch_offset: usize,
) -> Result<()> {
    let mut grad = vec![0.0; model.net.params().len()];
    let mut order: Vec<usize> = (0..runs.len()).collect();
    for epoch in 0..epochs {
        order.shuffle(rng);
        for &i in &order {
            let batch = &runs[i];
            let value = batch_step(&model.net, &model.norm, batch, mse_weight, &mut grad)?;
            if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss {
                    epoch: epoch_offset + epoch,
                    batch: batch.id().to_string(),
                });
            }
            adam.step(model.net.params_mut(), &grad);
        }
    }
    Ok(())
}

/// Two-phase training: KL divergence alone, then KL plus weighted MSE.
/// One optimizer step per batch; batch order reshuffled every epoch.
pub fn train_twig(runs: &[RankBatch], settings: &TwigSettings) -> Result<TwigModel> {
    let mut model = init_twig(runs, settings)?;
    let mut adam = Adam::new(model.net.params().len(), settings.learning_rate);
    let mut rng = shuffle_rng(settings.seed, 1);
    run_epochs(&mut model, runs, settings.phase1_epochs, 0.0, &mut adam, &mut rng, 0)?;
    if settings.phase1_epochs > 0 {
        model.phase = TrainingPhase::Distribution;
    }
    run_epochs(
        &mut model,
        runs,
        settings.phase2_epochs,
        settings.mse_weight,
        &mut adam,
        &mut rng,
        settings.phase1_epochs,
    )?;
    if settings.phase2_epochs > 0 {
        model.phase = TrainingPhase::Joint;
    }
    Ok(model)
}

/// Continues joint KL + MSE training on `runs` with a fresh optimizer.
/// Normalization statistics are kept from pretraining.
pub fn finetune_twig(
    model: &TwigModel,
    runs: &[RankBatch],
    epochs: usize,
    learning_rate: f64,
    seed: u64,
) -> Result<TwigModel> {
    let mut tuned = model.clone();
    if epochs == 0 || runs.is_empty() {
        return Ok(tuned);
    }
    let mut adam = Adam::new(tuned.net.params().len(), learning_rate);
    let mut rng = shuffle_rng(seed, 2);
    let weight = tuned.settings.mse_weight;
    run_epochs(&mut tuned, runs, epochs, weight, &mut adam, &mut rng, 0)?;
    tuned.phase = TrainingPhase::Finetuned;
    tuned.finetune_manifest.extend(runs.iter().map(RankBatch::id));
    Ok(tuned)
}

/// Mean over batches of `KL + mse_weight * MSE`.
pub fn dataset_loss(model: &TwigModel, runs: &[RankBatch], mse_weight: f64) -> Result<f64> {
    let mut grad = vec![0.0; model.net.params().len()];
    let mut total = 0.0;
    for batch in runs {
        total += batch_step(&model.net, &model.norm, batch, mse_weight, &mut grad)?;
    }
    Ok(total / runs.len().max(1) as f64)
}
