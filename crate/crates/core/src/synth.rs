//! Synthetic inputs for desk-scale runs.
//!
//! [`generate_kg`] builds a typed graph. Entities belong to latent clusters
//! and carry a heavy-tailed activity. A handful of latent link patterns map
//! each subject cluster to an object cluster; every relation is a thinned
//! copy of one pattern, possibly inverted. Held-out triples are therefore
//! predictable from related relations, as in small curated graphs.
//!
//! [`SyntheticRanks`] assigns every query a rank that is a known smooth
//! function of two structural features and the learning rate, which gives
//! the simulator an exact target.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Poisson};

use crate::error::{Error, Result};
use crate::eval::{mrr, RankRecord, RunResult};
use crate::features::QueryFeatureVector;
use crate::harness::KgData;
use crate::kg::{Direction, KnowledgeGraph};
use crate::kge::HyperparamConfig;
use crate::twig::denormalize;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthKgSpec {
    pub name: String,
    pub entities: usize,
    pub relations: usize,
    pub clusters: usize,
    /// Latent link patterns shared by the relations.
    pub patterns: usize,
    /// Mean number of objects per participating subject in a pattern.
    pub links_per_subject: f64,
    /// Upper bound on the chance that a pattern link shows up in a
    /// relation; each relation draws its own rate from `[keep / 4, keep]`,
    /// which spreads relation frequencies.
    pub keep: f64,
    /// Chance that a subject cluster takes part in a relation at all.
    pub participation: f64,
    /// Log-scale spread of per-entity activity.
    pub activity_sigma: f64,
    pub valid_fraction: f64,
    pub test_fraction: f64,
}

impl SynthKgSpec {
    /// About 100 entities, 25 relations and 5k training triples.
    pub fn kinships_like() -> Self {
        SynthKgSpec {
            name: "synth-kinships".into(),
            entities: 104,
            relations: 25,
            clusters: 16,
            patterns: 3,
            links_per_subject: 10.0,
            keep: 1.0,
            participation: 0.8,
            activity_sigma: 0.6,
            valid_fraction: 0.1,
            test_fraction: 0.1,
        }
    }

    /// Under a thousand triples; fast enough for grid sweeps.
    pub fn small(name: &str) -> Self {
        SynthKgSpec {
            name: name.into(),
            entities: 150,
            relations: 8,
            clusters: 8,
            patterns: 3,
            links_per_subject: 3.0,
            keep: 0.8,
            participation: 0.7,
            activity_sigma: 0.8,
            valid_fraction: 0.1,
            test_fraction: 0.1,
        }
    }
}

pub fn generate_kg(spec: &SynthKgSpec, seed: u64) -> Result<KnowledgeGraph> {
    if spec.entities < 2 || spec.relations == 0 || spec.clusters == 0 || spec.patterns == 0 {
        return Err(Error::InvalidConfig(
            "synthetic graph needs entities, relations, clusters and patterns".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clusters = spec.clusters.min(spec.entities);

    // every cluster gets at least one entity, the rest are spread at random
    let mut cluster_of: Vec<usize> = (0..spec.entities).map(|e| e % clusters).collect();
    for c in cluster_of.iter_mut().skip(clusters) {
        *c = rng.random_range(0..clusters);
    }
    cluster_of.shuffle(&mut rng);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); clusters];
    for (e, &c) in cluster_of.iter().enumerate() {
        members[c].push(e);
    }

    let activity_dist = LogNormal::new(0.0, spec.activity_sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let activity: Vec<f64> = (0..spec.entities).map(|_| activity_dist.sample(&mut rng)).collect();

    let mut pattern_links: Vec<Vec<(usize, usize)>> = Vec::with_capacity(spec.patterns);
    for _ in 0..spec.patterns {
        let target: Vec<usize> = (0..clusters).map(|_| rng.random_range(0..clusters)).collect();
        let active: Vec<bool> = (0..clusters)
            .map(|_| rng.random::<f64>() < spec.participation)
            .collect();
        let mut links = Vec::new();
        let mut seen = HashSet::new();
        for s in 0..spec.entities {
            let c = cluster_of[s];
            if !active[c] {
                continue;
            }
            let pool = &members[target[c]];
            let weights: Vec<f64> = pool.iter().map(|&o| activity[o]).collect();
            let total: f64 = weights.iter().sum();
            let lambda = spec.links_per_subject * activity[s].sqrt();
            let count = Poisson::new(lambda.max(1e-9))
                .map(|p| p.sample(&mut rng) as usize)
                .unwrap_or(0);
            for _ in 0..count {
                let mut x = rng.random::<f64>() * total;
                let mut pick = pool[pool.len() - 1];
                for (&o, &w) in pool.iter().zip(&weights) {
                    if x < w {
                        pick = o;
                        break;
                    }
                    x -= w;
                }
                if seen.insert((s, pick)) {
                    links.push((s, pick));
                }
            }
        }
        pattern_links.push(links);
    }

    let mut triples: Vec<(usize, usize, usize)> = Vec::new();
    for r in 0..spec.relations {
        let pattern = &pattern_links[r % spec.patterns];
        let inverted = rng.random::<bool>();
        let keep = spec.keep * rng.random_range(0.25..=1.0);
        for &(a, b) in pattern {
            if rng.random::<f64>() < keep {
                let (s, o) = if inverted { (b, a) } else { (a, b) };
                triples.push((s, r, o));
            }
        }
    }
    if triples.len() < 3 {
        return Err(Error::InvalidConfig("synthetic graph came out empty".into()));
    }
    triples.shuffle(&mut rng);

    let n = triples.len();
    let n_test = ((n as f64 * spec.test_fraction).round() as usize).max(1);
    let n_valid = (n as f64 * spec.valid_fraction).round() as usize;
    let render =
        |ts: &[(usize, usize, usize)]| -> String { ts.iter().map(|(s, r, o)| format!("e{s}\tr{r}\te{o}\n")).collect() };
    let (test, rest) = triples.split_at(n_test);
    let (valid, train) = rest.split_at(n_valid.min(rest.len().saturating_sub(1)));
    KnowledgeGraph::from_tsv(spec.name.clone(), &render(train), &render(valid), &render(test))
}

/// Ground-truth ranks defined by a fixed function:
///
/// `rank = 1 + (N - 1) * sigmoid(bias - lr_weight * (log10(lr) + 4)
///          + s_deg_weight * ln(1 + s_deg) - op_weight * ln(1 + o_p_cofreq))`
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticRanks {
    pub bias: f64,
    pub lr_weight: f64,
    pub s_deg_weight: f64,
    pub op_weight: f64,
}

impl Default for SyntheticRanks {
    fn default() -> Self {
        SyntheticRanks {
            bias: -1.5,
            lr_weight: 1.0,
            s_deg_weight: 0.4,
            op_weight: 0.9,
        }
    }
}

impl SyntheticRanks {
    pub fn normalized(&self, config: &HyperparamConfig, fv: &QueryFeatureVector) -> f64 {
        let z = self.bias - self.lr_weight * (config.learning_rate.log10() + 4.0)
            + self.s_deg_weight * fv.s_deg.ln_1p()
            - self.op_weight * fv.o_p_cofreq.ln_1p();
        crate::kge::loss::sigmoid(z)
    }

    pub fn rank(&self, config: &HyperparamConfig, fv: &QueryFeatureVector, entity_count: usize) -> f64 {
        denormalize(self.normalized(config, fv), entity_count)
    }

    /// A run whose ranks follow this function, in the order of `data`'s rows.
    pub fn run(&self, data: &KgData, config: &HyperparamConfig, seed: u64) -> Result<RunResult> {
        let ranks: Vec<RankRecord> = data
            .features
            .iter()
            .enumerate()
            .map(|(i, fv)| RankRecord {
                triple_index: i / 2,
                direction: if i % 2 == 0 { Direction::Head } else { Direction::Tail },
                rank: self.rank(config, fv, data.entity_count),
            })
            .collect();
        let mrr = mrr(&ranks.iter().map(|r| r.rank).collect::<Vec<_>>())?;
        Ok(RunResult {
            kg: data.name.clone(),
            config: *config,
            seed,
            ranks,
            mrr,
        })
    }
}
