use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitMode {
    /// Hold out a fraction of configurations, identically on every graph.
    UnseenHyperparameters,
    /// Additionally hold out one whole graph.
    HoldoutKg,
}

impl std::str::FromStr for SplitMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "unseen-hyperparameters" => Ok(SplitMode::UnseenHyperparameters),
            "holdout-kg" => Ok(SplitMode::HoldoutKg),
            other => Err(format!("unknown split mode '{other}'")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitPlan {
    pub mode: SplitMode,
    pub test_fraction: f64,
    pub holdout_kg: Option<String>,
    /// Share of the held-out graph's configurations used for finetuning.
    pub shot_fraction: f64,
    pub split_seed: u64,
    /// Whether finetuning configurations are removed from the held-out
    /// graph's test set (only matters when `shot_fraction > 0`).
    pub exclude_finetune_from_test: bool,
}

impl Default for SplitPlan {
    fn default() -> Self {
        SplitPlan {
            mode: SplitMode::UnseenHyperparameters,
            test_fraction: 0.10,
            holdout_kg: None,
            shot_fraction: 0.0,
            split_seed: 0,
            exclude_finetune_from_test: true,
        }
    }
}

/// Indices into the configuration grid, each list sorted.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigSplit {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    /// Held-out graph only.
    pub finetune: Vec<usize>,
    /// Held-out graph only.
    pub holdout_test: Vec<usize>,
}

/// `round(n * fraction)`, at least 1 for a positive fraction.
pub fn fraction_count(n: usize, fraction: f64) -> usize {
    if fraction <= 0.0 || n == 0 {
        0
    } else {
        ((n as f64 * fraction).round() as usize).clamp(1, n)
    }
}

fn check_fraction(f: f64) -> Result<()> {
    if (0.0..1.0).contains(&f) {
        Ok(())
    } else {
        Err(Error::InvalidFraction(f))
    }
}

/// Partitions `0..config_count` according to `plan`; a pure function of
/// its arguments.
pub fn make_split(config_count: usize, plan: &SplitPlan) -> Result<ConfigSplit> {
    check_fraction(plan.test_fraction)?;
    check_fraction(plan.shot_fraction)?;

    let mut rng = ChaCha8Rng::seed_from_u64(plan.split_seed);
    let mut order: Vec<usize> = (0..config_count).collect();
    order.shuffle(&mut rng);
    let held = fraction_count(config_count, plan.test_fraction);
    let mut test = order[..held].to_vec();
    let mut train = order[held..].to_vec();
    test.sort_unstable();
    train.sort_unstable();

    let (mut finetune, mut holdout_test) = (Vec::new(), Vec::new());
    if plan.mode == SplitMode::HoldoutKg {
        // an independent stream, so the finetune draw does not move the
        // unseen-hyperparameter partition
        rng.set_stream(1);
        let mut order: Vec<usize> = (0..config_count).collect();
        order.shuffle(&mut rng);
        let shots = fraction_count(config_count, plan.shot_fraction);
        finetune = order[..shots].to_vec();
        holdout_test = if shots > 0 && plan.exclude_finetune_from_test {
            order[shots..].to_vec()
        } else {
            order.clone()
        };
        finetune.sort_unstable();
        holdout_test.sort_unstable();
    }
    Ok(ConfigSplit {
        train,
        test,
        finetune,
        holdout_test,
    })
}
