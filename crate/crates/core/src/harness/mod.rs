//! Study orchestration: grid enumeration, ground-truth sweeps,
//! configuration splits, simulator experiments and reporting.

pub mod experiment;
pub mod grid;
pub mod metrics;
pub mod split;
pub mod sweep;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use experiment::{
    assemble_batches, build_batch, evaluate_configs, run_experiment, shot_label, ExperimentOutput, ExperimentReport,
    FinetuneSettings, GroundTruth, KgData, KgEvaluation, MrrPair, Provenance, UNSEEN_HYPERPARAMETERS,
};
pub use grid::{enumerate_grid, grid_hash, GridSpec};
pub use metrics::r_squared;
pub use split::{fraction_count, make_split, ConfigSplit, SplitMode, SplitPlan};
pub use sweep::{generate_ground_truth, run_cell, worker_count, SweepFailure, SweepOutcome, WORKERS_ENV};

use crate::error::{Error, Result};
use crate::eval::EvalOptions;
use crate::kg::KnowledgeGraph;
use crate::twig::TwigSettings;

/// Where to find one graph: either a directory holding `train.txt`,
/// `valid.txt` and `test.txt`, or the three files explicitly.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KgSource {
    pub name: String,
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub train: Option<PathBuf>,
    #[serde(default)]
    pub valid: Option<PathBuf>,
    #[serde(default)]
    pub test: Option<PathBuf>,
}

impl KgSource {
    /// Relative paths resolve against `base`.
    pub fn load(&self, base: &Path) -> Result<KnowledgeGraph> {
        let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        let pick = |explicit: &Option<PathBuf>, file: &str| -> Result<PathBuf> {
            match (explicit, &self.dir) {
                (Some(p), _) => Ok(resolve(p)),
                (None, Some(d)) => Ok(resolve(d).join(file)),
                (None, None) => Err(Error::InvalidConfig(format!(
                    "graph '{}' needs either dir or train/valid/test paths",
                    self.name
                ))),
            }
        };
        KnowledgeGraph::parse(
            self.name.clone(),
            &pick(&self.train, "train.txt")?,
            &pick(&self.valid, "valid.txt")?,
            &pick(&self.test, "test.txt")?,
        )
    }
}

/// Contents of an experiment configuration file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(rename = "kg")]
    pub kgs: Vec<KgSource>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub split: SplitPlan,
    #[serde(default)]
    pub twig: TwigSettings,
    #[serde(default)]
    pub finetune: FinetuneSettings,
    #[serde(default)]
    pub eval: EvalOptions,
}

impl ExperimentConfig {
    pub fn load_kgs(&self, base: &Path) -> Result<Vec<KnowledgeGraph>> {
        self.kgs.iter().map(|k| k.load(base)).collect()
    }
}

/// Summary written at the root of a run directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub kgs: Vec<String>,
    pub grid_hash: String,
    pub config_count: usize,
    pub replicate_seeds: Vec<u64>,
    pub eval: EvalOptions,
    pub results: Vec<ManifestEntry>,
    pub failures: Vec<SweepFailure>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub kg: String,
    pub config_hash: String,
    pub seed: u64,
    pub mrr: f64,
}

impl RunManifest {
    pub fn from_sweep(
        kgs: &[KnowledgeGraph],
        configs: &[crate::kge::HyperparamConfig],
        seeds: &[u64],
        eval: EvalOptions,
        outcome: &SweepOutcome,
    ) -> Self {
        RunManifest {
            kgs: kgs.iter().map(|k| k.name().to_owned()).collect(),
            grid_hash: grid_hash(configs),
            config_count: configs.len(),
            replicate_seeds: seeds.to_vec(),
            eval,
            results: outcome
                .results
                .iter()
                .map(|r| ManifestEntry {
                    kg: r.kg.clone(),
                    config_hash: r.config.config_hash(),
                    seed: r.seed,
                    mrr: r.mrr,
                })
                .collect(),
            failures: outcome.failures.clone(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }
}
