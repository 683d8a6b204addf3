//! Per-query structural features computed from the training split.
//!
//! Every link-prediction query carries 23 values: the direction flag, the
//! degrees and co-occurrence counts of the ground-truth triple, and
//! aggregates over the one-hop neighbourhood of each endpoint.
//!
//! Conventions:
//! * degree counts incident training triples in either direction; a
//!   self-loop adds 2 and makes the node its own neighbour;
//! * `*_num_edges` counts distinct predicates on incident triples;
//! * min/max/mean over an empty neighbourhood are 0.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{Direction, EntityId, KnowledgeGraph, RelationId, Split, Triple};

pub const FEATURE_COUNT: usize = 23;

/// Column names, in the order of [`QueryFeatureVector::to_array`].
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "is_head",
    "s_deg",
    "o_deg",
    "p_freq",
    "s_p_cofreq",
    "o_p_cofreq",
    "s_o_cofreq",
    "s_min_deg_neighbour",
    "s_max_deg_neighbour",
    "s_mean_deg_neighbour",
    "o_min_deg_neighbour",
    "o_max_deg_neighbour",
    "o_mean_deg_neighbour",
    "s_num_neighbours",
    "o_num_neighbours",
    "s_min_freq_edge",
    "s_max_freq_edge",
    "s_mean_freq_edge",
    "o_min_freq_edge",
    "o_max_freq_edge",
    "o_mean_freq_edge",
    "s_num_edges",
    "o_num_edges",
];

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NodeStats {
    pub degree: u32,
    /// Distinct adjacent entities, sorted.
    pub neighbors: Vec<EntityId>,
    /// One entry per incident training triple (two for a self-loop).
    pub incident_predicates: Vec<RelationId>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GlobalStats {
    pub predicate_freq: Vec<u32>,
    pub sp_cofreq: HashMap<(EntityId, RelationId), u32>,
    pub op_cofreq: HashMap<(EntityId, RelationId), u32>,
    pub so_cofreq: HashMap<(EntityId, EntityId), u32>,
}

impl GlobalStats {
    pub fn predicate_freq(&self, p: RelationId) -> u32 {
        self.predicate_freq.get(p as usize).copied().unwrap_or(0)
    }

    pub fn sp(&self, s: EntityId, p: RelationId) -> u32 {
        self.sp_cofreq.get(&(s, p)).copied().unwrap_or(0)
    }

    pub fn op(&self, o: EntityId, p: RelationId) -> u32 {
        self.op_cofreq.get(&(o, p)).copied().unwrap_or(0)
    }

    pub fn so(&self, s: EntityId, o: EntityId) -> u32 {
        self.so_cofreq.get(&(s, o)).copied().unwrap_or(0)
    }
}

/// Neighbourhood aggregates of one entity; depends only on the entity.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct NodeSummary {
    degree: f64,
    min_deg_neighbour: f64,
    max_deg_neighbour: f64,
    mean_deg_neighbour: f64,
    num_neighbours: f64,
    min_freq_edge: f64,
    max_freq_edge: f64,
    mean_freq_edge: f64,
    num_edges: f64,
}

/// Statistics over a graph's training split.
#[derive(Clone, Debug)]
pub struct GraphStats {
    nodes: Vec<NodeStats>,
    global: GlobalStats,
    summaries: Vec<NodeSummary>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QueryFeatureVector {
    pub is_head: f64,
    pub s_deg: f64,
    pub o_deg: f64,
    pub p_freq: f64,
    pub s_p_cofreq: f64,
    pub o_p_cofreq: f64,
    pub s_o_cofreq: f64,
    pub s_min_deg_neighbour: f64,
    pub s_max_deg_neighbour: f64,
    pub s_mean_deg_neighbour: f64,
    pub o_min_deg_neighbour: f64,
    pub o_max_deg_neighbour: f64,
    pub o_mean_deg_neighbour: f64,
    pub s_num_neighbours: f64,
    pub o_num_neighbours: f64,
    pub s_min_freq_edge: f64,
    pub s_max_freq_edge: f64,
    pub s_mean_freq_edge: f64,
    pub o_min_freq_edge: f64,
    pub o_max_freq_edge: f64,
    pub o_mean_freq_edge: f64,
    pub s_num_edges: f64,
    pub o_num_edges: f64,
}

impl QueryFeatureVector {
    pub fn to_array(&self) -> [f64; FEATURE_COUNT] {
        [
            self.is_head,
            self.s_deg,
            self.o_deg,
            self.p_freq,
            self.s_p_cofreq,
            self.o_p_cofreq,
            self.s_o_cofreq,
            self.s_min_deg_neighbour,
            self.s_max_deg_neighbour,
            self.s_mean_deg_neighbour,
            self.o_min_deg_neighbour,
            self.o_max_deg_neighbour,
            self.o_mean_deg_neighbour,
            self.s_num_neighbours,
            self.o_num_neighbours,
            self.s_min_freq_edge,
            self.s_max_freq_edge,
            self.s_mean_freq_edge,
            self.o_min_freq_edge,
            self.o_max_freq_edge,
            self.o_mean_freq_edge,
            self.s_num_edges,
            self.o_num_edges,
        ]
    }

    pub fn from_array(v: [f64; FEATURE_COUNT]) -> Self {
        QueryFeatureVector {
            is_head: v[0],
            s_deg: v[1],
            o_deg: v[2],
            p_freq: v[3],
            s_p_cofreq: v[4],
            o_p_cofreq: v[5],
            s_o_cofreq: v[6],
            s_min_deg_neighbour: v[7],
            s_max_deg_neighbour: v[8],
            s_mean_deg_neighbour: v[9],
            o_min_deg_neighbour: v[10],
            o_max_deg_neighbour: v[11],
            o_mean_deg_neighbour: v[12],
            s_num_neighbours: v[13],
            o_num_neighbours: v[14],
            s_min_freq_edge: v[15],
            s_max_freq_edge: v[16],
            s_mean_freq_edge: v[17],
            o_min_freq_edge: v[18],
            o_max_freq_edge: v[19],
            o_mean_freq_edge: v[20],
            s_num_edges: v[21],
            o_num_edges: v[22],
        }
    }
}

impl GraphStats {
    /// Scans `kg.train` once. Entities absent from the training split get
    /// zeroed statistics.
    pub fn build(kg: &KnowledgeGraph) -> Self {
        let n = kg.entity_count();
        let mut nodes = vec![NodeStats::default(); n];
        let mut global = GlobalStats {
            predicate_freq: vec![0; kg.relation_count()],
            ..Default::default()
        };

        for t in kg.train() {
            for end in [t.s, t.o] {
                let node = &mut nodes[end as usize];
                node.degree += 1;
                node.incident_predicates.push(t.p);
            }
            nodes[t.s as usize].neighbors.push(t.o);
            nodes[t.o as usize].neighbors.push(t.s);

            global.predicate_freq[t.p as usize] += 1;
            *global.sp_cofreq.entry((t.s, t.p)).or_default() += 1;
            *global.op_cofreq.entry((t.o, t.p)).or_default() += 1;
            *global.so_cofreq.entry((t.s, t.o)).or_default() += 1;
        }
        for node in &mut nodes {
            node.neighbors.sort_unstable();
            node.neighbors.dedup();
            node.incident_predicates.sort_unstable();
        }

        let summaries = nodes.iter().map(|node| summarize(node, &nodes, &global)).collect();
        GraphStats {
            nodes,
            global,
            summaries,
        }
    }

    pub fn node(&self, e: EntityId) -> &NodeStats {
        &self.nodes[e as usize]
    }

    pub fn global(&self) -> &GlobalStats {
        &self.global
    }

    /// Features of the query obtained by blanking one slot of `triple`.
    /// Both endpoint groups always describe the ground-truth triple.
    pub fn featurize_query(&self, triple: &Triple, direction: Direction) -> QueryFeatureVector {
        let s = self.summaries[triple.s as usize];
        let o = self.summaries[triple.o as usize];
        let g = &self.global;
        QueryFeatureVector {
            is_head: f64::from(direction == Direction::Head),
            s_deg: s.degree,
            o_deg: o.degree,
            p_freq: f64::from(g.predicate_freq(triple.p)),
            s_p_cofreq: f64::from(g.sp(triple.s, triple.p)),
            o_p_cofreq: f64::from(g.op(triple.o, triple.p)),
            s_o_cofreq: f64::from(g.so(triple.s, triple.o)),
            s_min_deg_neighbour: s.min_deg_neighbour,
            s_max_deg_neighbour: s.max_deg_neighbour,
            s_mean_deg_neighbour: s.mean_deg_neighbour,
            o_min_deg_neighbour: o.min_deg_neighbour,
            o_max_deg_neighbour: o.max_deg_neighbour,
            o_mean_deg_neighbour: o.mean_deg_neighbour,
            s_num_neighbours: s.num_neighbours,
            o_num_neighbours: o.num_neighbours,
            s_min_freq_edge: s.min_freq_edge,
            s_max_freq_edge: s.max_freq_edge,
            s_mean_freq_edge: s.mean_freq_edge,
            o_min_freq_edge: o.min_freq_edge,
            o_max_freq_edge: o.max_freq_edge,
            o_mean_freq_edge: o.mean_freq_edge,
            s_num_edges: s.num_edges,
            o_num_edges: o.num_edges,
        }
    }
}

fn summarize(node: &NodeStats, nodes: &[NodeStats], global: &GlobalStats) -> NodeSummary {
    let (min_deg, max_deg, mean_deg) =
        min_max_mean(node.neighbors.iter().map(|&nb| f64::from(nodes[nb as usize].degree)));
    let (min_freq, max_freq, mean_freq) = min_max_mean(
        node.incident_predicates
            .iter()
            .map(|&p| f64::from(global.predicate_freq(p))),
    );
    let mut distinct = node.incident_predicates.clone();
    distinct.dedup();
    NodeSummary {
        degree: f64::from(node.degree),
        min_deg_neighbour: min_deg,
        max_deg_neighbour: max_deg,
        mean_deg_neighbour: mean_deg,
        num_neighbours: node.neighbors.len() as f64,
        min_freq_edge: min_freq,
        max_freq_edge: max_freq,
        mean_freq_edge: mean_freq,
        num_edges: distinct.len() as f64,
    }
}

fn min_max_mean(values: impl Iterator<Item = f64>) -> (f64, f64, f64) {
    let mut count = 0usize;
    let (mut min, mut max, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for v in values {
        count += 1;
        min = min.min(v);
        max = max.max(v);
        sum += v;
    }
    if count == 0 {
        (0.0, 0.0, 0.0)
    } else {
        (min, max, sum / count as f64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub triple_index: usize,
    pub direction: Direction,
    pub features: QueryFeatureVector,
}

/// Two rows per triple of one split: triple order, head query first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    pub split: Split,
    pub rows: Vec<FeatureRow>,
}

pub fn featurize_kg(kg: &KnowledgeGraph, stats: &GraphStats, split: Split) -> FeatureTable {
    let rows = kg
        .split(split)
        .iter()
        .enumerate()
        .flat_map(|(i, t)| {
            Direction::BOTH.map(|direction| FeatureRow {
                triple_index: i,
                direction,
                features: stats.featurize_query(t, direction),
            })
        })
        .collect();
    FeatureTable { split, rows }
}

impl FeatureTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("triple_index,direction");
        for name in FEATURE_NAMES {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{},{}", row.triple_index, row.direction);
            for v in row.features.to_array() {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}
