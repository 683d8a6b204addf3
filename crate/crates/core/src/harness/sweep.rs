//! Ground-truth generation: one ComplEx training and evaluation per
//! `(graph, configuration, replicate seed)` cell.

use std::path::Path;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::eval::{evaluate, EvalOptions, RunResult};
use crate::kg::KnowledgeGraph;
use crate::kge::{train, HyperparamConfig};

/// Environment variable holding the worker-pool size.
pub const WORKERS_ENV: &str = "TWIG_WORKERS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepFailure {
    pub kg: String,
    pub config_hash: String,
    pub seed: u64,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepOutcome {
    /// In cell order: graph, then configuration, then seed.
    pub results: Vec<RunResult>,
    pub computed: usize,
    pub reused: usize,
    pub failures: Vec<SweepFailure>,
}

pub fn run_cell(kg: &KnowledgeGraph, config: &HyperparamConfig, seed: u64, options: EvalOptions) -> Result<RunResult> {
    let model = train(kg, config, seed)?;
    evaluate(&model, kg, config, seed, options)
}

enum CellOutcome {
    Reused(RunResult),
    Computed(RunResult),
    Failed(SweepFailure),
}

/// Runs every missing cell. With a `store`, results already on disk (and
/// passing their content hash) are reused and new ones are written as they
/// finish. A failing cell is logged and reported without stopping the sweep.
pub fn generate_ground_truth(
    kgs: &[KnowledgeGraph],
    configs: &[HyperparamConfig],
    seeds: &[u64],
    store: Option<&Path>,
    options: EvalOptions,
) -> Result<SweepOutcome> {
    let cells: Vec<(&KnowledgeGraph, &HyperparamConfig, u64)> = kgs
        .iter()
        .flat_map(|kg| configs.iter().flat_map(move |c| seeds.iter().map(move |&s| (kg, c, s))))
        .collect();

    let run = |&(kg, config, seed): &(&KnowledgeGraph, &HyperparamConfig, u64)| -> Result<CellOutcome> {
        if let Some(root) = store {
            if let Some(done) = RunResult::load(root, kg.name(), config, seed)? {
                return Ok(CellOutcome::Reused(done));
            }
        }
        match run_cell(kg, config, seed, options) {
            Ok(result) => {
                if let Some(root) = store {
                    result.save(root)?;
                }
                info!("{}/{}/{}: mrr {:.4}", kg.name(), config.config_hash(), seed, result.mrr);
                Ok(CellOutcome::Computed(result))
            }
            Err(e) => {
                warn!("{}/{}/{} failed: {e}", kg.name(), config.config_hash(), seed);
                Ok(CellOutcome::Failed(SweepFailure {
                    kg: kg.name().to_owned(),
                    config_hash: config.config_hash(),
                    seed,
                    message: e.to_string(),
                }))
            }
        }
    };

    let outcomes: Vec<CellOutcome> = run_all(&cells, run)?;
    let mut out = SweepOutcome::default();
    for o in outcomes {
        match o {
            CellOutcome::Reused(r) => {
                out.reused += 1;
                out.results.push(r);
            }
            CellOutcome::Computed(r) => {
                out.computed += 1;
                out.results.push(r);
            }
            CellOutcome::Failed(f) => out.failures.push(f),
        }
    }
    Ok(out)
}

pub fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

#[cfg(feature = "parallel")]
fn run_all<T, U, F>(items: &[T], f: F) -> Result<Vec<U>>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> Result<U> + Sync + Send,
{
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .map_err(|e| crate::error::Error::InvalidConfig(format!("worker pool: {e}")))?;
    pool.install(|| items.par_iter().map(f).collect())
}

#[cfg(not(feature = "parallel"))]
fn run_all<T, U, F>(items: &[T], f: F) -> Result<Vec<U>>
where
    F: Fn(&T) -> Result<U>,
{
    items.iter().map(f).collect()
}
