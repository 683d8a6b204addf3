mod common;

use twig_core::kge::{HyperparamConfig, LossFn, LossKind, SamplerKind};

use common::{check_kge, check_twig};

const TOLERANCE: f64 = 1e-4;

#[test]
fn kge_losses_match_finite_differences() {
    let losses = [LossFn::MarginRanking { margin: 1.0 }, LossFn::Bce, LossFn::CrossEntropy];
    for loss in losses {
        for instance in 0..10 {
            let err = check_kge(loss, 0.0, instance);
            assert!(err < TOLERANCE, "{loss:?} instance {instance}: {err:e}");
        }
    }
}

#[test]
fn n3_penalty_matches_finite_differences() {
    for loss in [LossFn::Bce, LossFn::CrossEntropy] {
        for instance in 0..10 {
            let err = check_kge(loss, 0.05, 100 + instance);
            assert!(err < TOLERANCE, "{loss:?}+N3 instance {instance}: {err:e}");
        }
    }
}

#[test]
fn margin_config_maps_to_margin_loss() {
    let config = HyperparamConfig {
        loss: LossKind::MarginRanking,
        margin: Some(2.0),
        sampler: SamplerKind::Bernoulli,
        ..Default::default()
    };
    assert_eq!(LossFn::from_config(&config), LossFn::MarginRanking { margin: 2.0 });
}

#[test]
fn twig_network_matches_finite_differences() {
    for instance in 0..10u64 {
        for weight in [0.0, 1.0] {
            let err = check_twig(instance, weight);
            assert!(err < TOLERANCE, "instance {instance} weight {weight}: {err:e}");
        }
    }
}
