//! Joins features with ground-truth ranks, trains the simulator and scores
//! it by R² between true and predicted MRR per configuration.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{sha256_hex, RunResult};
use crate::features::{featurize_kg, GraphStats, QueryFeatureVector};
use crate::harness::grid::grid_hash;
use crate::harness::metrics::r_squared;
use crate::harness::split::{make_split, SplitMode, SplitPlan};
use crate::kg::{Direction, KnowledgeGraph, Split};
use crate::kge::HyperparamConfig;
use crate::twig::{finetune_twig, train_twig, RankBatch, TwigModel, TwigSettings};

/// Test-split features of one graph, in rank-record order.
#[derive(Clone, Debug)]
pub struct KgData {
    pub name: String,
    pub entity_count: usize,
    pub features: Arc<Vec<QueryFeatureVector>>,
}

impl KgData {
    pub fn new(kg: &KnowledgeGraph) -> Self {
        let stats = GraphStats::build(kg);
        let table = featurize_kg(kg, &stats, Split::Test);
        KgData {
            name: kg.name().to_owned(),
            entity_count: kg.entity_count(),
            features: Arc::new(table.rows.into_iter().map(|r| r.features).collect()),
        }
    }
}

/// Stored runs keyed by `(graph, config hash, seed)`.
#[derive(Clone, Debug, Default)]
pub struct GroundTruth {
    runs: HashMap<(String, String, u64), RunResult>,
}

impl GroundTruth {
    pub fn new(results: impl IntoIterator<Item = RunResult>) -> Self {
        let runs = results
            .into_iter()
            .map(|r| ((r.kg.clone(), r.config.config_hash(), r.seed), r))
            .collect();
        GroundTruth { runs }
    }

    /// Loads every cell from a result store written by the sweep.
    pub fn load(root: &Path, kgs: &[String], configs: &[HyperparamConfig], seeds: &[u64]) -> Result<Self> {
        let mut runs = HashMap::new();
        for kg in kgs {
            for config in configs {
                for &seed in seeds {
                    let run = RunResult::load(root, kg, config, seed)?.ok_or_else(|| Error::MissingGroundTruth {
                        kg: kg.clone(),
                        config: config.config_hash(),
                        seed,
                    })?;
                    runs.insert((kg.clone(), config.config_hash(), seed), run);
                }
            }
        }
        Ok(GroundTruth { runs })
    }

    pub fn len(&self) -> usize {
        self.runs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    pub fn get(&self, kg: &str, config: &HyperparamConfig, seed: u64) -> Result<&RunResult> {
        self.runs
            .get(&(kg.to_owned(), config.config_hash(), seed))
            .ok_or_else(|| Error::MissingGroundTruth {
                kg: kg.to_owned(),
                config: config.config_hash(),
                seed,
            })
    }
}

/// Pairs each feature row with its rank by `(triple index, direction)`.
pub fn build_batch(data: &KgData, run: &RunResult) -> Result<RankBatch> {
    let n = data.features.len();
    if run.ranks.len() != n {
        return Err(Error::InvalidConfig(format!(
            "{}/{}/{}: {} rank records for {} queries",
            run.kg,
            run.config.config_hash(),
            run.seed,
            run.ranks.len(),
            n
        )));
    }
    let mut ranks = vec![f64::NAN; n];
    for r in &run.ranks {
        let slot = 2 * r.triple_index + usize::from(r.direction == Direction::Tail);
        if slot >= n || !ranks[slot].is_nan() {
            return Err(Error::InvalidConfig(format!(
                "{}/{}: bad rank record {:?}",
                run.kg,
                run.config.config_hash(),
                r
            )));
        }
        ranks[slot] = r.rank;
    }
    Ok(RankBatch {
        kg: data.name.clone(),
        config: run.config,
        seed: run.seed,
        entity_count: data.entity_count,
        features: Arc::clone(&data.features),
        ranks,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FinetuneSettings {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// MSE weight while finetuning; the pretraining weight when unset.
    pub mse_weight: Option<f64>,
}

impl Default for FinetuneSettings {
    fn default() -> Self {
        FinetuneSettings {
            epochs: 10,
            learning_rate: 5e-3,
            seed: 0,
            mse_weight: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MrrPair {
    pub config_hash: String,
    pub true_mrr: f64,
    pub predicted_mrr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KgEvaluation {
    pub kg: String,
    /// `unseen-hyperparameters`, `0-shot`, or `<p>%-shot`.
    pub setting: String,
    pub r2: f64,
    pub pairs: Vec<MrrPair>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub grid_hash: String,
    pub replicate_seeds: Vec<u64>,
    pub plan: SplitPlan,
    pub twig: TwigSettings,
    pub finetune: Option<FinetuneSettings>,
    pub checkpoint_sha256: String,
    pub finetuned_checkpoint_sha256: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub mode: SplitMode,
    pub evaluations: Vec<KgEvaluation>,
    pub provenance: Provenance,
}

impl ExperimentReport {
    pub fn r2(&self, kg: &str, setting: &str) -> Option<f64> {
        self.evaluations
            .iter()
            .find(|e| e.kg == kg && e.setting == setting)
            .map(|e| e.r2)
    }

    /// Checks every stored R² against a recomputation from its pairs.
    pub fn verify(&self) -> Result<()> {
        for e in &self.evaluations {
            let truth: Vec<f64> = e.pairs.iter().map(|p| p.true_mrr).collect();
            let pred: Vec<f64> = e.pairs.iter().map(|p| p.predicted_mrr).collect();
            let r2 = r_squared(&truth, &pred)?;
            if (r2 - e.r2).abs() > 1e-10 {
                return Err(Error::UndefinedRSquared(format!(
                    "{} {}: stored {} but pairs give {}",
                    e.kg, e.setting, e.r2, r2
                )));
            }
        }
        Ok(())
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

/// One batch per `(graph, configuration index, seed)`.
pub fn assemble_batches(
    data: &[&KgData],
    grid: &[HyperparamConfig],
    indices: &[usize],
    seeds: &[u64],
    truth: &GroundTruth,
) -> Result<Vec<RankBatch>> {
    let mut out = Vec::with_capacity(data.len() * indices.len() * seeds.len());
    for d in data {
        for &i in indices {
            for &seed in seeds {
                out.push(build_batch(d, truth.get(&d.name, &grid[i], seed)?)?);
            }
        }
    }
    Ok(out)
}

/// True MRR averaged over replicates against the simulator's MRR, for each
/// listed configuration on one graph.
pub fn evaluate_configs(
    model: &TwigModel,
    data: &KgData,
    grid: &[HyperparamConfig],
    indices: &[usize],
    seeds: &[u64],
    truth: &GroundTruth,
    setting: &str,
) -> Result<KgEvaluation> {
    let mut pairs = Vec::with_capacity(indices.len());
    for &i in indices {
        let config = &grid[i];
        let mut true_mrr = 0.0;
        for &seed in seeds {
            true_mrr += truth.get(&data.name, config, seed)?.mrr;
        }
        true_mrr /= seeds.len() as f64;
        // features and entity count do not depend on the replicate
        let batch = RankBatch {
            kg: data.name.clone(),
            config: *config,
            seed: seeds[0],
            entity_count: data.entity_count,
            features: Arc::clone(&data.features),
            ranks: vec![1.0; data.features.len()],
        };
        pairs.push(MrrPair {
            config_hash: config.config_hash(),
            true_mrr,
            predicted_mrr: model.predict_mrr(&batch)?,
        });
    }
    let truth_v: Vec<f64> = pairs.iter().map(|p| p.true_mrr).collect();
    let pred_v: Vec<f64> = pairs.iter().map(|p| p.predicted_mrr).collect();
    Ok(KgEvaluation {
        kg: data.name.clone(),
        setting: setting.to_owned(),
        r2: r_squared(&truth_v, &pred_v)?,
        pairs,
    })
}

pub fn shot_label(shot_fraction: f64) -> String {
    if shot_fraction <= 0.0 {
        "0-shot".to_owned()
    } else {
        format!("{}%-shot", (shot_fraction * 100.0).round())
    }
}

pub const UNSEEN_HYPERPARAMETERS: &str = "unseen-hyperparameters";

/// Everything an experiment produces: the report plus the checkpoints it
/// was computed from.
#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub report: ExperimentReport,
    pub pretrained: TwigModel,
    pub finetuned: Option<TwigModel>,
}

pub fn run_experiment(
    data: &[KgData],
    grid: &[HyperparamConfig],
    seeds: &[u64],
    truth: &GroundTruth,
    plan: &SplitPlan,
    twig: &TwigSettings,
    finetune: &FinetuneSettings,
) -> Result<ExperimentOutput> {
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("no replicate seeds".into()));
    }
    let split = make_split(grid.len(), plan)?;
    let holdout = match plan.mode {
        SplitMode::UnseenHyperparameters => None,
        SplitMode::HoldoutKg => {
            let name = plan
                .holdout_kg
                .as_deref()
                .ok_or_else(|| Error::InvalidConfig("holdout-kg mode needs a held-out graph".into()))?;
            Some(
                data.iter()
                    .find(|d| d.name == name)
                    .ok_or_else(|| Error::UnknownKg(name.to_owned()))?,
            )
        }
    };
    let seen: Vec<&KgData> = data
        .iter()
        .filter(|d| holdout.is_none_or(|h| h.name != d.name))
        .collect();
    if seen.is_empty() {
        return Err(Error::InvalidConfig(
            "no training graphs left after the hold-out".into(),
        ));
    }

    let train_batches = assemble_batches(&seen, grid, &split.train, seeds, truth)?;
    let pretrained = train_twig(&train_batches, twig)?;

    let mut evaluations = Vec::new();
    for d in &seen {
        evaluations.push(evaluate_configs(
            &pretrained,
            d,
            grid,
            &split.test,
            seeds,
            truth,
            UNSEEN_HYPERPARAMETERS,
        )?);
    }

    let mut finetuned = None;
    if let Some(h) = holdout {
        let label = shot_label(plan.shot_fraction);
        let model = if split.finetune.is_empty() {
            pretrained.clone()
        } else {
            let batches = assemble_batches(&[h], grid, &split.finetune, seeds, truth)?;
            let mut base = pretrained.clone();
            if let Some(w) = finetune.mse_weight {
                base.settings.mse_weight = w;
            }
            let tuned = finetune_twig(&base, &batches, finetune.epochs, finetune.learning_rate, finetune.seed)?;
            finetuned = Some(tuned.clone());
            tuned
        };
        evaluations.push(evaluate_configs(
            &model,
            h,
            grid,
            &split.holdout_test,
            seeds,
            truth,
            &label,
        )?);
    }

    let digest = |m: &TwigModel| m.to_json().map(|j| sha256_hex(j.as_bytes()));
    let report = ExperimentReport {
        mode: plan.mode,
        evaluations,
        provenance: Provenance {
            grid_hash: grid_hash(grid),
            replicate_seeds: seeds.to_vec(),
            plan: plan.clone(),
            twig: twig.clone(),
            finetune: holdout.map(|_| finetune.clone()),
            checkpoint_sha256: digest(&pretrained)?,
            finetuned_checkpoint_sha256: finetuned.as_ref().map(digest).transpose()?,
        },
    };
    Ok(ExperimentOutput {
        report,
        pretrained,
        finetuned,
    })
}
