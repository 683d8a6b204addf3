mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use twig_core::eval::{EvalOptions, RunResult};
use twig_core::harness::{
    enumerate_grid, fraction_count, generate_ground_truth, grid_hash, make_split, r_squared, run_experiment,
    ExperimentConfig, ExperimentReport, FinetuneSettings, GridSpec, GroundTruth, KgData, RunManifest, SplitMode,
    SplitPlan,
};
use twig_core::kge::{LossKind, SamplerKind};
use twig_core::synth::SyntheticRanks;
use twig_core::twig::TwigSettings;

use common::random_kg;

#[test]
fn default_grid_matches_independent_count() {
    let spec = GridSpec::default();
    let free = spec.losses.iter().filter(|l| !l.uses_margin()).count();
    let with_margin = spec.losses.len() - free;
    let per_loss = spec.samplers.len()
        * spec.negatives.len()
        * spec.learning_rates.len()
        * spec.dimensions.len()
        * spec.reg_coefficients.len();
    assert_eq!(per_loss * with_margin * spec.margins.len(), 729);
    assert_eq!(per_loss * free, 486);

    let grid = enumerate_grid(&spec).unwrap();
    assert_eq!(grid.len(), 1215);
    assert_eq!(grid.iter().filter(|c| c.margin.is_some()).count(), 729);
    let hashes: BTreeSet<String> = grid.iter().map(|c| c.config_hash()).collect();
    assert_eq!(hashes.len(), 1215);
    assert_eq!(enumerate_grid(&GridSpec::reduced()).unwrap().len(), 96);
}

#[test]
fn grid_hash_tracks_contents_and_order() {
    let grid = enumerate_grid(&GridSpec::reduced()).unwrap();
    let mut reordered = grid.clone();
    reordered.swap(0, 1);
    assert_eq!(grid_hash(&grid), grid_hash(&grid.clone()));
    assert_ne!(grid_hash(&grid), grid_hash(&reordered));
}

proptest! {
    #[test]
    fn unseen_split_partitions_the_grid(n in 1usize..400, f in 0.0f64..0.9, seed in any::<u64>()) {
        let plan = SplitPlan { test_fraction: f, split_seed: seed, ..Default::default() };
        let split = make_split(n, &plan).unwrap();
        prop_assert_eq!(split.test.len(), fraction_count(n, f));
        let train: BTreeSet<usize> = split.train.iter().copied().collect();
        let test: BTreeSet<usize> = split.test.iter().copied().collect();
        prop_assert!(train.is_disjoint(&test));
        prop_assert_eq!(train.len() + test.len(), n);
        prop_assert_eq!(make_split(n, &plan).unwrap(), split);
    }

    #[test]
    fn smaller_shots_nest_in_larger_ones(n in 4usize..400, seed in any::<u64>()) {
        let plan = |shot| SplitPlan {
            mode: SplitMode::HoldoutKg,
            holdout_kg: Some("held".into()),
            shot_fraction: shot,
            split_seed: seed,
            ..Default::default()
        };
        let small = make_split(n, &plan(0.05)).unwrap();
        let large = make_split(n, &plan(0.25)).unwrap();
        let zero = make_split(n, &plan(0.0)).unwrap();
        prop_assert!(small.finetune.iter().all(|c| large.finetune.contains(c)));
        prop_assert!(zero.finetune.is_empty());
        prop_assert_eq!(zero.holdout_test.len(), n);
        prop_assert!(large.holdout_test.iter().all(|c| !large.finetune.contains(c)));
        // the finetune draw does not disturb the unseen-hyperparameter partition
        prop_assert_eq!(&small.test, &large.test);
    }
}

#[test]
fn bad_fractions_are_rejected() {
    for f in [-0.1, 1.0, 1.5, f64::NAN] {
        let plan = SplitPlan {
            test_fraction: f,
            ..Default::default()
        };
        assert!(make_split(10, &plan).is_err(), "{f}");
    }
}

#[test]
fn r_squared_examples() {
    assert!((r_squared(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap() - 0.5).abs() < 1e-12);
    assert_eq!(r_squared(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
    assert_eq!(r_squared(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap(), 0.0);
    assert!(r_squared(&[2.0, 2.0], &[1.0, 3.0]).is_err());
}

fn tiny_grid() -> GridSpec {
    GridSpec {
        samplers: vec![SamplerKind::Basic],
        negatives: vec![2],
        losses: vec![LossKind::CrossEntropy, LossKind::Bce],
        margins: vec![],
        learning_rates: vec![1e-2],
        dimensions: vec![2, 4, 6, 8, 10],
        reg_coefficients: vec![1e-6],
        epochs: 2,
        replicate_seeds: vec![1, 2],
    }
}

#[test]
fn sweep_resumes_without_recomputing() {
    let kgs = [
        random_kg(20, 2, 60, 5, 6, 1).with_name("first"),
        random_kg(25, 3, 70, 5, 6, 2).with_name("second"),
    ];
    let spec = tiny_grid();
    let grid = enumerate_grid(&spec).unwrap();
    assert_eq!(grid.len(), 10);
    let dir = tempfile::tempdir().unwrap();
    let seeds = &spec.replicate_seeds;

    let first = generate_ground_truth(&kgs, &grid, seeds, Some(dir.path()), EvalOptions::default()).unwrap();
    assert_eq!((first.computed, first.reused, first.failures.len()), (40, 0, 0));

    // drop some results as if the sweep had been interrupted
    for config in &grid[..3] {
        let stem = RunResult::stem(dir.path(), "second", config, 2);
        std::fs::remove_file(stem.with_extension("json")).unwrap();
    }
    let second = generate_ground_truth(&kgs, &grid, seeds, Some(dir.path()), EvalOptions::default()).unwrap();
    assert_eq!((second.computed, second.reused), (3, 37));
    assert_eq!(first.results, second.results);

    let names: Vec<String> = kgs.iter().map(|k| k.name().to_owned()).collect();
    let truth = GroundTruth::load(dir.path(), &names, &grid, seeds).unwrap();
    assert_eq!(truth.len(), 40);

    let manifest = RunManifest::from_sweep(&kgs, &grid, seeds, EvalOptions::default(), &second);
    assert_eq!(manifest.results.len(), 40);
    assert_eq!(manifest.config_count, 10);
}

#[test]
fn missing_ground_truth_is_reported() {
    let grid = enumerate_grid(&tiny_grid()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let err = GroundTruth::load(dir.path(), &["nothing".to_owned()], &grid, &[1]).unwrap_err();
    assert!(err.to_string().contains("nothing"));
}

#[test]
fn report_round_trips_and_verifies() {
    let kg = random_kg(40, 3, 200, 10, 40, 9).with_name("g");
    let data = vec![KgData::new(&kg)];
    let grid = enumerate_grid(&GridSpec {
        learning_rates: vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6],
        ..tiny_grid()
    })
    .unwrap();
    let f = SyntheticRanks::default();
    let truth = GroundTruth::new(grid.iter().map(|c| f.run(&data[0], c, 1).unwrap()));
    let plan = SplitPlan {
        test_fraction: 0.2,
        ..Default::default()
    };
    let out = run_experiment(
        &data,
        &grid,
        &[1],
        &truth,
        &plan,
        &TwigSettings::default(),
        &FinetuneSettings::default(),
    )
    .unwrap();
    let report = out.report;
    report.verify().unwrap();
    assert_eq!(report.evaluations.len(), 1);
    assert_eq!(report.evaluations[0].pairs.len(), 10);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    report.save(&path).unwrap();
    assert_eq!(ExperimentReport::load(&path).unwrap(), report);

    let mut tampered = report.clone();
    tampered.evaluations[0].r2 += 0.5;
    assert!(tampered.verify().is_err());
}

#[test]
fn holdout_needs_a_known_graph() {
    let kg = random_kg(30, 2, 100, 5, 20, 4).with_name("g");
    let data = vec![KgData::new(&kg)];
    let grid = enumerate_grid(&tiny_grid()).unwrap();
    let truth = GroundTruth::default();
    let plan = SplitPlan {
        mode: SplitMode::HoldoutKg,
        holdout_kg: Some("absent".into()),
        ..Default::default()
    };
    let err = run_experiment(
        &data,
        &grid,
        &[1],
        &truth,
        &plan,
        &TwigSettings::default(),
        &FinetuneSettings::default(),
    )
    .unwrap_err();
    assert!(err.to_string().contains("absent"));
}

#[test]
fn experiment_config_parses_with_defaults() {
    let text = r#"{
        "kg": [{"name": "toy", "dir": "data/toy"}],
        "grid": {"learning_rates": [0.01]},
        "split": {"mode": "holdout-kg", "holdout_kg": "toy", "shot_fraction": 0.05}
    }"#;
    let config: ExperimentConfig = serde_json::from_str(text).unwrap();
    assert_eq!(config.kgs[0].name, "toy");
    assert_eq!(config.grid.learning_rates, vec![0.01]);
    assert_eq!(config.grid.dimensions, GridSpec::default().dimensions);
    assert_eq!(config.split.mode, SplitMode::HoldoutKg);
    assert_eq!(config.twig, TwigSettings::default());
    assert!(config.eval.filtered);
}
