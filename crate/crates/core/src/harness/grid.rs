use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::sha256_hex;
use crate::kge::{HyperparamConfig, LossKind, SamplerKind};

/// Value lists of every hyperparameter plus the replicate seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub samplers: Vec<SamplerKind>,
    pub negatives: Vec<u32>,
    pub losses: Vec<LossKind>,
    /// Only applied to margin-ranking configurations.
    pub margins: Vec<f64>,
    pub learning_rates: Vec<f64>,
    pub dimensions: Vec<usize>,
    pub reg_coefficients: Vec<f64>,
    pub epochs: usize,
    pub replicate_seeds: Vec<u64>,
}

impl Default for GridSpec {
    /// The full 1215-configuration grid with four replicates.
    fn default() -> Self {
        GridSpec {
            samplers: SamplerKind::ALL.to_vec(),
            negatives: vec![5, 25, 125],
            losses: LossKind::ALL.to_vec(),
            margins: vec![0.5, 1.0, 2.0],
            learning_rates: vec![1e-2, 1e-4, 1e-6],
            dimensions: vec![50, 100, 250],
            reg_coefficients: vec![1e-2, 1e-4, 1e-6],
            epochs: 100,
            replicate_seeds: vec![1, 2, 3, 4],
        }
    }
}

impl GridSpec {
    /// Two values per hyperparameter (96 configurations), one replicate.
    pub fn reduced() -> Self {
        GridSpec {
            samplers: vec![SamplerKind::Basic, SamplerKind::Bernoulli],
            negatives: vec![5, 25],
            losses: vec![LossKind::MarginRanking, LossKind::CrossEntropy],
            margins: vec![0.5, 2.0],
            learning_rates: vec![1e-2, 1e-4],
            dimensions: vec![50, 100],
            reg_coefficients: vec![1e-2, 1e-6],
            epochs: 100,
            replicate_seeds: vec![1],
        }
    }
}

/// Enumerates the grid in lexicographic order of (sampler, negatives, loss,
/// margin, learning rate, dimension, regularisation).
pub fn enumerate_grid(spec: &GridSpec) -> Result<Vec<HyperparamConfig>> {
    let empty = |what: &str| Err(Error::InvalidConfig(format!("grid has no {what} values")));
    if spec.samplers.is_empty() {
        return empty("sampler");
    }
    if spec.negatives.is_empty() {
        return empty("negatives");
    }
    if spec.losses.is_empty() {
        return empty("loss");
    }
    if spec.learning_rates.is_empty() {
        return empty("learning-rate");
    }
    if spec.dimensions.is_empty() {
        return empty("dimension");
    }
    if spec.reg_coefficients.is_empty() {
        return empty("regularisation");
    }
    if spec.margins.is_empty() && spec.losses.contains(&LossKind::MarginRanking) {
        return empty("margin");
    }

    let mut out = Vec::new();
    for &sampler in &spec.samplers {
        for &negatives in &spec.negatives {
            for &loss in &spec.losses {
                let margins: Vec<Option<f64>> = if loss.uses_margin() {
                    spec.margins.iter().copied().map(Some).collect()
                } else {
                    vec![None]
                };
                for margin in margins {
                    for &learning_rate in &spec.learning_rates {
                        for &dimension in &spec.dimensions {
                            for &reg_coefficient in &spec.reg_coefficients {
                                let config = HyperparamConfig {
                                    sampler,
                                    negatives,
                                    loss,
                                    margin,
                                    learning_rate,
                                    dimension,
                                    reg_coefficient,
                                    epochs: spec.epochs,
                                };
                                config.validate()?;
                                out.push(config);
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Hash of the ordered configuration list.
pub fn grid_hash(configs: &[HyperparamConfig]) -> String {
    let joined: Vec<String> = configs.iter().map(HyperparamConfig::canonical_string).collect();
    sha256_hex(joined.join("\n").as_bytes())[..16].to_owned()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn narrowed_grid_has_one_config() {
        let spec = GridSpec {
            samplers: vec![SamplerKind::Basic],
            negatives: vec![5],
            losses: vec![LossKind::Bce],
            margins: vec![1.0],
            learning_rates: vec![1e-2],
            dimensions: vec![50],
            reg_coefficients: vec![1e-6],
            ..Default::default()
        };
        let grid = enumerate_grid(&spec).unwrap();
        assert_eq!(grid.len(), 1);
        assert_eq!(grid[0].margin, None);
    }

    #[test]
    fn reduced_grid_size() {
        // margin ranking: 2^6, cross entropy: 2^5
        assert_eq!(enumerate_grid(&GridSpec::reduced()).unwrap().len(), 64 + 32);
    }

    #[test]
    fn order_is_lexicographic() {
        let grid = enumerate_grid(&GridSpec::default()).unwrap();
        assert_eq!(grid[0].sampler, SamplerKind::Basic);
        assert_eq!(grid[0].margin, Some(0.5));
        assert_eq!(grid[1].reg_coefficient, 1e-4);
        assert_eq!(grid.last().unwrap().sampler, SamplerKind::PseudoTyped);
        assert_eq!(grid.last().unwrap().loss, LossKind::CrossEntropy);
        assert_eq!(
            grid_hash(&grid),
            grid_hash(&enumerate_grid(&GridSpec::default()).unwrap())
        );
    }

    #[test]
    fn empty_list_is_an_error() {
        let spec = GridSpec {
            dimensions: vec![],
            ..Default::default()
        };
        assert!(enumerate_grid(&spec).is_err());
    }
}
