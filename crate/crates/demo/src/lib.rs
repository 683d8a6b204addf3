//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Each exported function takes plain values and returns a JSON string; the
//! same logic is available natively through the `*_json` functions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use twig_core::eval::{evaluate, EvalOptions};
use twig_core::features::{featurize_kg, GraphStats};
use twig_core::harness::{enumerate_grid, run_experiment, FinetuneSettings, GridSpec, GroundTruth, KgData, SplitPlan};
use twig_core::kge::{train_with_log, ComplexModel, HyperparamConfig};
use twig_core::synth::{generate_kg, SynthKgSpec, SyntheticRanks};
use twig_core::twig::TwigSettings;
use twig_core::{KnowledgeGraph, Split};
use wasm_bindgen::prelude::*;

type DemoResult<T> = Result<T, String>;

fn graph(train: &str, valid: &str, test: &str) -> DemoResult<KnowledgeGraph> {
    KnowledgeGraph::from_tsv("pasted", train, valid, test).map_err(|e| e.to_string())
}

#[derive(Serialize)]
pub struct FeatureSummary {
    pub entities: usize,
    pub relations: usize,
    pub queries: usize,
    pub csv: String,
}

pub fn features_json(train: &str, valid: &str, test: &str) -> DemoResult<String> {
    let kg = graph(train, valid, test)?;
    let table = featurize_kg(&kg, &GraphStats::build(&kg), Split::Test);
    let summary = FeatureSummary {
        entities: kg.entity_count(),
        relations: kg.relation_count(),
        queries: table.len(),
        csv: table.to_csv(),
    };
    serde_json::to_string(&summary).map_err(|e| e.to_string())
}

#[derive(Serialize)]
pub struct ToyRun {
    pub epoch_losses: Vec<f64>,
    pub mrr: f64,
    /// MRR of the untrained, randomly initialised model.
    pub baseline_mrr: f64,
}

pub fn toy_training_json(
    train: &str,
    valid: &str,
    test: &str,
    dimension: usize,
    epochs: usize,
    learning_rate: f64,
    seed: u64,
) -> DemoResult<String> {
    let kg = graph(train, valid, test)?;
    let config = HyperparamConfig {
        dimension,
        epochs,
        learning_rate,
        ..Default::default()
    };
    let err = |e: twig_core::Error| e.to_string();
    let (model, log) = train_with_log(&kg, &config, seed).map_err(err)?;
    let trained = evaluate(&model, &kg, &config, seed, EvalOptions::default()).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let untrained = ComplexModel::random(kg.entity_count(), kg.relation_count(), dimension, seed, &mut rng);
    let baseline = evaluate(&untrained, &kg, &config, seed, EvalOptions::default()).map_err(err)?;
    let run = ToyRun {
        epoch_losses: log.epoch_losses,
        mrr: trained.mrr,
        baseline_mrr: baseline.mrr,
    };
    serde_json::to_string(&run).map_err(|e| e.to_string())
}

#[derive(Serialize)]
pub struct SimulatorFit {
    pub r2: f64,
    /// `(true MRR, predicted MRR)` per held-out configuration.
    pub points: Vec<(f64, f64)>,
}

/// Fits the simulator to analytic ranks on a small synthetic graph and
/// scores it on unseen configurations.
pub fn simulator_fit_json(seed: u64, epochs: usize) -> DemoResult<String> {
    let err = |e: twig_core::Error| e.to_string();
    let kg = generate_kg(&SynthKgSpec::small("synthetic"), seed).map_err(err)?;
    let data = vec![KgData::new(&kg)];
    let spec = GridSpec {
        learning_rates: vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6],
        ..GridSpec::reduced()
    };
    let grid = enumerate_grid(&spec).map_err(err)?;
    let ranks = SyntheticRanks::default();
    let truth = GroundTruth::new(
        grid.iter()
            .map(|c| ranks.run(&data[0], c, 1))
            .collect::<twig_core::Result<Vec<_>>>()
            .map_err(err)?,
    );
    let plan = SplitPlan {
        split_seed: seed,
        test_fraction: 0.2,
        ..Default::default()
    };
    let twig = TwigSettings {
        phase1_epochs: epochs / 3,
        phase2_epochs: epochs - epochs / 3,
        seed,
        ..Default::default()
    };
    let out = run_experiment(&data, &grid, &[1], &truth, &plan, &twig, &FinetuneSettings::default()).map_err(err)?;
    let eval = &out.report.evaluations[0];
    let fit = SimulatorFit {
        r2: eval.r2,
        points: eval.pairs.iter().map(|p| (p.true_mrr, p.predicted_mrr)).collect(),
    };
    serde_json::to_string(&fit).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn featurize(train: &str, valid: &str, test: &str) -> Result<String, JsError> {
    features_json(train, valid, test).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn train_toy(
    train: &str,
    valid: &str,
    test: &str,
    dimension: usize,
    epochs: usize,
    learning_rate: f64,
    seed: u32,
) -> Result<String, JsError> {
    toy_training_json(train, valid, test, dimension, epochs, learning_rate, u64::from(seed))
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn simulator_fit(seed: u32, epochs: usize) -> Result<String, JsError> {
    simulator_fit_json(u64::from(seed), epochs).map_err(|e| JsError::new(&e))
}
