use proptest::prelude::*;
use twig_core::eval::mrr;
use twig_core::harness::{build_batch, KgData};
use twig_core::kge::HyperparamConfig;
use twig_core::synth::{generate_kg, SynthKgSpec, SyntheticRanks};
use twig_core::twig::{
    dataset_loss, denormalize, finetune_twig, init_twig, kl_loss, mse_loss, train_twig, RankBatch, TrainingPhase,
    TwigModel, TwigSettings,
};

fn synthetic_batches(seed: u64) -> Vec<RankBatch> {
    let kg = generate_kg(&SynthKgSpec::small("synthetic"), seed).unwrap();
    let data = KgData::new(&kg);
    let f = SyntheticRanks::default();
    [1e-2, 1e-3, 1e-4, 1e-5, 1e-6]
        .iter()
        .map(|&lr| {
            let config = HyperparamConfig {
                learning_rate: lr,
                ..Default::default()
            };
            build_batch(&data, &f.run(&data, &config, 1).unwrap()).unwrap()
        })
        .collect()
}

#[test]
fn training_lowers_the_joint_loss() {
    let runs = synthetic_batches(1);
    let settings = TwigSettings::default();
    let initial = init_twig(&runs, &settings).unwrap();
    let trained = train_twig(&runs, &settings).unwrap();
    let before = dataset_loss(&initial, &runs, 1.0).unwrap();
    let after = dataset_loss(&trained, &runs, 1.0).unwrap();
    assert!(after < before, "{after} >= {before}");
    assert_eq!(trained.phase, TrainingPhase::Joint);
    assert_eq!(
        (trained.settings.phase1_epochs, trained.settings.phase2_epochs),
        (5, 10)
    );
    assert_eq!(trained.manifest.len(), runs.len());
}

#[test]
fn same_seed_same_checkpoint() {
    let runs = synthetic_batches(2);
    let settings = TwigSettings {
        seed: 7,
        ..Default::default()
    };
    let a = train_twig(&runs, &settings).unwrap().to_json().unwrap();
    let b = train_twig(&runs, &settings).unwrap().to_json().unwrap();
    assert_eq!(a, b);
    let other = TwigSettings {
        seed: 8,
        ..Default::default()
    };
    assert_ne!(a, train_twig(&runs, &other).unwrap().to_json().unwrap());
}

#[test]
fn finetuning_zero_epochs_is_a_no_op() {
    let runs = synthetic_batches(3);
    let model = train_twig(&runs, &TwigSettings::default()).unwrap();
    let same = finetune_twig(&model, &runs[..2], 0, 5e-3, 0).unwrap();
    assert_eq!(same, model);
}

#[test]
fn finetuning_fits_the_new_runs_and_keeps_normalization() {
    let runs = synthetic_batches(4);
    let pretrained = train_twig(&runs[..3], &TwigSettings::default()).unwrap();
    let other = synthetic_batches(5);
    let target = &other[3..];
    let before = dataset_loss(&pretrained, target, 1.0).unwrap();
    let tuned = finetune_twig(&pretrained, target, 10, 5e-3, 0).unwrap();
    let after = dataset_loss(&tuned, target, 1.0).unwrap();
    assert!(after < before, "{after} >= {before}");
    assert_eq!(tuned.phase, TrainingPhase::Finetuned);
    assert_eq!(tuned.finetune_manifest.len(), target.len());

    assert_eq!(tuned.norm, pretrained.norm);
    let row = &target[0].features[0];
    let config = &target[0].config;
    assert_eq!(tuned.encode(config, row), pretrained.encode(config, row));
}

fn with_output_bias(model: &TwigModel, bias: f64) -> TwigModel {
    let mut m = model.clone();
    let params = m.net.params_mut();
    params.fill(0.0);
    // the final output bias is the last parameter
    *params.last_mut().unwrap() = bias;
    m
}

#[test]
fn predicted_mrr_limits_and_consistency() {
    let runs = synthetic_batches(6);
    let model = init_twig(&runs, &TwigSettings::default()).unwrap();
    let batch = &runs[0];
    let n = batch.entity_count as f64;

    let best = with_output_bias(&model, -60.0).predict_mrr(batch).unwrap();
    assert!((best - 1.0).abs() < 1e-12);
    let worst = with_output_bias(&model, 60.0).predict_mrr(batch).unwrap();
    assert!((worst - 1.0 / n).abs() < 1e-12);

    let outputs = model.predict(batch).unwrap();
    let ranks: Vec<f64> = outputs.iter().map(|&o| denormalize(o, batch.entity_count)).collect();
    assert_eq!(model.predict_mrr(batch).unwrap(), mrr(&ranks).unwrap());
    assert!(outputs.iter().all(|&o| o > 0.0 && o < 1.0));
}

#[test]
fn checkpoint_round_trip() {
    let runs = synthetic_batches(7);
    let model = train_twig(&runs, &TwigSettings::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("twig.json");
    model.save(&path).unwrap();
    let loaded = TwigModel::load(&path).unwrap();
    assert_eq!(loaded, model);
    assert_eq!(loaded.predict(&runs[0]).unwrap(), model.predict(&runs[0]).unwrap());
}

#[test]
fn empty_training_set_is_rejected() {
    assert!(train_twig(&[], &TwigSettings::default()).is_err());
}

proptest! {
    #[test]
    fn kl_is_non_negative(pairs in prop::collection::vec((0.0f64..1.0, 1u32..100), 1..40)) {
        let pred: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let truth: Vec<f64> = pairs.iter().map(|p| f64::from(p.1)).collect();
        prop_assert!(kl_loss(&pred, &truth, 100) >= 0.0);
        prop_assert!(mse_loss(&pred, &truth, 100) >= 0.0);
    }

    #[test]
    fn matching_predictions_cost_nothing(ranks in prop::collection::vec(1u32..=64, 1..40)) {
        // entity count 65 makes every normalized rank a multiple of 1/64,
        // which round-trips exactly
        let truth: Vec<f64> = ranks.iter().map(|&r| f64::from(r)).collect();
        let pred: Vec<f64> = truth.iter().map(|r| (r - 1.0) / 64.0).collect();
        prop_assert_eq!(kl_loss(&pred, &truth, 65), 0.0);
        prop_assert_eq!(mse_loss(&pred, &truth, 65), 0.0);
    }
}
