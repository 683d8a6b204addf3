//! Rank-based link-prediction evaluation.
//!
//! Every candidate entity is substituted into the open slot of a query and
//! scored. By default candidates that form a known triple (any split) are
//! filtered out, and ties are broken "realistically": the answer sits in
//! the middle of the candidates it ties with.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kg::{Direction, EntityId, KnowledgeGraph, RelationId, Triple};
use crate::kge::{ComplexModel, HyperparamConfig};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TiePolicy {
    /// `1 + higher + tied / 2`
    #[default]
    Realistic,
    /// `1 + higher`
    Optimistic,
    /// `1 + higher + tied`
    Pessimistic,
}

impl std::str::FromStr for TiePolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "realistic" => Ok(TiePolicy::Realistic),
            "optimistic" => Ok(TiePolicy::Optimistic),
            "pessimistic" => Ok(TiePolicy::Pessimistic),
            other => Err(format!("unknown tie policy '{other}'")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalOptions {
    pub filtered: bool,
    pub tie_policy: TiePolicy,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            filtered: true,
            tie_policy: TiePolicy::Realistic,
        }
    }
}

/// Known answers of every `(s, p, ?)` and `(?, p, o)` pattern across all splits.
#[derive(Clone, Debug, Default)]
pub struct FilterIndex {
    tails: HashMap<(EntityId, RelationId), Vec<EntityId>>,
    heads: HashMap<(RelationId, EntityId), Vec<EntityId>>,
}

impl FilterIndex {
    pub fn new(kg: &KnowledgeGraph) -> Self {
        let mut index = FilterIndex::default();
        for t in kg.all_triples() {
            index.tails.entry((t.s, t.p)).or_default().push(t.o);
            index.heads.entry((t.p, t.o)).or_default().push(t.s);
        }
        for v in index.tails.values_mut().chain(index.heads.values_mut()) {
            v.sort_unstable();
        }
        index
    }

    /// Known entities for the open slot of `triple` queried in `direction`.
    pub fn known(&self, triple: &Triple, direction: Direction) -> &[EntityId] {
        let hit = match direction {
            Direction::Head => self.heads.get(&(triple.p, triple.o)),
            Direction::Tail => self.tails.get(&(triple.s, triple.p)),
        };
        hit.map_or(&[], Vec::as_slice)
    }
}

/// Rank of `scores[answer]` among all candidates not excluded.
pub fn rank_among(scores: &[f64], answer: usize, excluded: impl Fn(usize) -> bool, tie_policy: TiePolicy) -> f64 {
    let target = scores[answer];
    let (mut higher, mut tied) = (0usize, 0usize);
    for (i, &s) in scores.iter().enumerate() {
        if i == answer || excluded(i) {
            continue;
        }
        if s > target {
            higher += 1;
        } else if s == target {
            tied += 1;
        }
    }
    let (higher, tied) = (higher as f64, tied as f64);
    match tie_policy {
        TiePolicy::Realistic => 1.0 + higher + tied / 2.0,
        TiePolicy::Optimistic => 1.0 + higher,
        TiePolicy::Pessimistic => 1.0 + higher + tied,
    }
}

pub fn rank_query(
    model: &ComplexModel,
    triple: &Triple,
    direction: Direction,
    filter: &FilterIndex,
    options: EvalOptions,
) -> Result<f64> {
    let mut scores = Vec::with_capacity(model.entity_count());
    rank_query_with(model, triple, direction, filter, options, &mut scores)
}

fn rank_query_with(
    model: &ComplexModel,
    triple: &Triple,
    direction: Direction,
    filter: &FilterIndex,
    options: EvalOptions,
    scores: &mut Vec<f64>,
) -> Result<f64> {
    // bounds check before the unchecked batch scoring
    model.score(triple)?;
    let answer = match direction {
        Direction::Head => {
            model.score_heads(triple.p, triple.o, scores);
            triple.s
        }
        Direction::Tail => {
            model.score_tails(triple.s, triple.p, scores);
            triple.o
        }
    };
    let known = if options.filtered {
        filter.known(triple, direction)
    } else {
        &[]
    };
    Ok(rank_among(
        scores,
        answer as usize,
        |i| known.binary_search(&(i as EntityId)).is_ok(),
        options.tie_policy,
    ))
}

pub fn mrr(ranks: &[f64]) -> Result<f64> {
    if ranks.is_empty() {
        return Err(Error::EmptyRanks);
    }
    Ok(ranks.iter().map(|r| 1.0 / r).sum::<f64>() / ranks.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankRecord {
    pub triple_index: usize,
    pub direction: Direction,
    pub rank: f64,
}

/// Ranks of every test query for one `(kg, config, seed)` training run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub kg: String,
    pub config: HyperparamConfig,
    pub seed: u64,
    pub ranks: Vec<RankRecord>,
    pub mrr: f64,
}

/// Scores both queries of every test triple. Records are in triple order,
/// head query first.
pub fn evaluate(
    model: &ComplexModel,
    kg: &KnowledgeGraph,
    config: &HyperparamConfig,
    seed: u64,
    options: EvalOptions,
) -> Result<RunResult> {
    let filter = FilterIndex::new(kg);
    let per_triple = |(i, t): (usize, &Triple)| -> Result<[RankRecord; 2]> {
        let mut scores = Vec::with_capacity(kg.entity_count());
        let mut out = [RankRecord {
            triple_index: i,
            direction: Direction::Head,
            rank: 0.0,
        }; 2];
        for (slot, direction) in Direction::BOTH.into_iter().enumerate() {
            out[slot].direction = direction;
            out[slot].rank = rank_query_with(model, t, direction, &filter, options, &mut scores)?;
        }
        Ok(out)
    };

    #[cfg(feature = "parallel")]
    let pairs: Vec<[RankRecord; 2]> = {
        use rayon::prelude::*;
        kg.test()
            .par_iter()
            .enumerate()
            .map(per_triple)
            .collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let pairs: Vec<[RankRecord; 2]> = kg.test().iter().enumerate().map(per_triple).collect::<Result<_>>()?;

    let ranks: Vec<RankRecord> = pairs.into_iter().flatten().collect();
    let mrr = mrr(&ranks.iter().map(|r| r.rank).collect::<Vec<_>>())?;
    Ok(RunResult {
        kg: kg.name().to_owned(),
        config: *config,
        seed,
        ranks,
        mrr,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct RunSidecar {
    kg: String,
    config: HyperparamConfig,
    config_hash: String,
    seed: u64,
    mrr: f64,
    query_count: usize,
    ranks_sha256: String,
}

impl RunResult {
    pub fn rank_values(&self) -> Vec<f64> {
        self.ranks.iter().map(|r| r.rank).collect()
    }

    /// `<root>/<kg>/<config-hash>/<seed>` without extension.
    pub fn stem(root: &Path, kg: &str, config: &HyperparamConfig, seed: u64) -> PathBuf {
        root.join(kg).join(config.config_hash()).join(seed.to_string())
    }

    pub fn ranks_csv(&self) -> String {
        let mut out = String::from("triple_index,direction,rank\n");
        for r in &self.ranks {
            let _ = writeln!(out, "{},{},{}", r.triple_index, r.direction, r.rank);
        }
        out
    }

    /// Writes the rank CSV and its JSON sidecar under `root`.
    pub fn save(&self, root: &Path) -> Result<PathBuf> {
        let stem = Self::stem(root, &self.kg, &self.config, self.seed);
        let dir = stem.parent().expect("stem has a parent");
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv = self.ranks_csv();
        let sidecar = RunSidecar {
            kg: self.kg.clone(),
            config: self.config,
            config_hash: self.config.config_hash(),
            seed: self.seed,
            mrr: self.mrr,
            query_count: self.ranks.len(),
            ranks_sha256: sha256_hex(csv.as_bytes()),
        };
        let csv_path = stem.with_extension("csv");
        let json_path = stem.with_extension("json");
        fs::write(&csv_path, csv).map_err(|e| Error::io(&csv_path, e))?;
        fs::write(&json_path, serde_json::to_string_pretty(&sidecar)?).map_err(|e| Error::io(&json_path, e))?;
        Ok(stem)
    }

    /// Loads a stored run. Returns `Ok(None)` when the files are absent,
    /// describe another configuration, or fail their content hash.
    pub fn load(root: &Path, kg: &str, config: &HyperparamConfig, seed: u64) -> Result<Option<RunResult>> {
        let stem = Self::stem(root, kg, config, seed);
        let (csv_path, json_path) = (stem.with_extension("csv"), stem.with_extension("json"));
        let (Ok(csv), Ok(json)) = (fs::read_to_string(&csv_path), fs::read_to_string(&json_path)) else {
            return Ok(None);
        };
        let Ok(sidecar) = serde_json::from_str::<RunSidecar>(&json) else {
            return Ok(None);
        };
        if sidecar.kg != kg
            || sidecar.seed != seed
            || sidecar.config != *config
            || sidecar.ranks_sha256 != sha256_hex(csv.as_bytes())
        {
            return Ok(None);
        }
        let ranks = parse_rank_csv(&csv, &csv_path)?;
        if ranks.len() != sidecar.query_count {
            return Ok(None);
        }
        Ok(Some(RunResult {
            kg: sidecar.kg,
            config: sidecar.config,
            seed,
            ranks,
            mrr: sidecar.mrr,
        }))
    }
}

fn parse_rank_csv(csv: &str, path: &Path) -> Result<Vec<RankRecord>> {
    let bad = |line: usize, found: usize| Error::Parse {
        file: path.display().to_string(),
        line,
        found,
    };
    csv.lines()
        .enumerate()
        .skip(1)
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(bad(i + 1, fields.len()));
            }
            Ok(RankRecord {
                triple_index: fields[0].parse().map_err(|_| bad(i + 1, 3))?,
                direction: fields[1].parse().map_err(|_| bad(i + 1, 3))?,
                rank: fields[2].parse().map_err(|_| bad(i + 1, 3))?,
            })
        })
        .collect()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
