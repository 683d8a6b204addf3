//! Negative samplers: each negative replaces exactly one of the subject or
//! object of a positive triple.

use std::collections::HashMap;

use rand::Rng;

use crate::kg::{EntityId, KnowledgeGraph, Triple};
use crate::kge::config::SamplerKind;

#[derive(Clone, Debug)]
pub struct NegativeSampler {
    kind: SamplerKind,
    entity_count: u32,
    head_prob: Vec<f64>,
    /// Sorted subjects seen with each relation in training.
    head_domain: Vec<Vec<EntityId>>,
    /// Sorted objects seen with each relation in training.
    tail_domain: Vec<Vec<EntityId>>,
}

impl NegativeSampler {
    pub fn new(kind: SamplerKind, kg: &KnowledgeGraph) -> Self {
        let r = kg.relation_count();
        let mut head_domain = vec![Vec::new(); r];
        let mut tail_domain = vec![Vec::new(); r];
        let mut tails_of: Vec<HashMap<EntityId, u32>> = vec![HashMap::new(); r];
        let mut heads_of: Vec<HashMap<EntityId, u32>> = vec![HashMap::new(); r];
        for t in kg.train() {
            head_domain[t.p as usize].push(t.s);
            tail_domain[t.p as usize].push(t.o);
            *tails_of[t.p as usize].entry(t.s).or_default() += 1;
            *heads_of[t.p as usize].entry(t.o).or_default() += 1;
        }
        for d in head_domain.iter_mut().chain(tail_domain.iter_mut()) {
            d.sort_unstable();
            d.dedup();
        }
        let head_prob = tails_of
            .iter()
            .zip(&heads_of)
            .map(|(tph_counts, hpt_counts)| {
                if tph_counts.is_empty() {
                    return 0.5;
                }
                let tph = mean_count(tph_counts);
                let hpt = mean_count(hpt_counts);
                tph / (tph + hpt)
            })
            .collect();
        NegativeSampler {
            kind,
            entity_count: kg.entity_count() as u32,
            head_prob,
            head_domain,
            tail_domain,
        }
    }

    pub fn kind(&self) -> SamplerKind {
        self.kind
    }

    /// Probability that a negative for relation `p` corrupts the head.
    pub fn head_probability(&self, p: u32) -> f64 {
        match self.kind {
            SamplerKind::Bernoulli => self.head_prob.get(p as usize).copied().unwrap_or(0.5),
            SamplerKind::Basic | SamplerKind::PseudoTyped => 0.5,
        }
    }

    /// Appends `k` negatives of `positive` to `out`. Needs at least two entities.
    pub fn sample_into<R: Rng + ?Sized>(&self, positive: &Triple, k: usize, rng: &mut R, out: &mut Vec<Triple>) {
        debug_assert!(self.entity_count >= 2, "cannot corrupt with fewer than two entities");
        let head_prob = self.head_probability(positive.p);
        for _ in 0..k {
            let corrupt_head = rng.random::<f64>() < head_prob;
            let original = if corrupt_head { positive.s } else { positive.o };
            let replacement = match self.kind {
                SamplerKind::PseudoTyped => {
                    let domains = if corrupt_head {
                        &self.head_domain
                    } else {
                        &self.tail_domain
                    };
                    let domain = domains.get(positive.p as usize).map_or(&[][..], Vec::as_slice);
                    if domain.len() > 1 {
                        pick_other(domain, original, rng)
                    } else {
                        self.uniform_other(original, rng)
                    }
                }
                SamplerKind::Basic | SamplerKind::Bernoulli => self.uniform_other(original, rng),
            };
            let mut neg = *positive;
            if corrupt_head {
                neg.s = replacement;
            } else {
                neg.o = replacement;
            }
            out.push(neg);
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, positive: &Triple, k: usize, rng: &mut R) -> Vec<Triple> {
        let mut out = Vec::with_capacity(k);
        self.sample_into(positive, k, rng, &mut out);
        out
    }

    fn uniform_other<R: Rng + ?Sized>(&self, original: EntityId, rng: &mut R) -> EntityId {
        let r = rng.random_range(0..self.entity_count - 1);
        if r >= original {
            r + 1
        } else {
            r
        }
    }
}

/// Uniform draw from a sorted domain, excluding `original` if present.
fn pick_other<R: Rng + ?Sized>(domain: &[EntityId], original: EntityId, rng: &mut R) -> EntityId {
    match domain.binary_search(&original) {
        Ok(pos) => {
            let i = rng.random_range(0..domain.len() - 1);
            domain[if i >= pos { i + 1 } else { i }]
        }
        Err(_) => domain[rng.random_range(0..domain.len())],
    }
}

fn mean_count(counts: &HashMap<EntityId, u32>) -> f64 {
    counts.values().map(|&c| f64::from(c)).sum::<f64>() / counts.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn kg() -> KnowledgeGraph {
        let train = "A\tr\tB\nD\tr\tC\nA\tq\tA\nE\tone\tF\nF\tone\tG\nG\tone\tE\nA\tmany\tB\nA\tmany\tC\nA\tmany\tD\n";
        KnowledgeGraph::from_tsv("s", train, "", "B\tr\tC\n").unwrap()
    }

    fn differing_slots(a: &Triple, b: &Triple) -> usize {
        usize::from(a.s != b.s) + usize::from(a.p != b.p) + usize::from(a.o != b.o)
    }

    #[test]
    fn every_negative_differs_in_one_entity_slot() {
        let kg = kg();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for kind in SamplerKind::ALL {
            let sampler = NegativeSampler::new(kind, &kg);
            for pos in kg.train() {
                let negs = sampler.sample(pos, 5, &mut rng);
                assert_eq!(negs.len(), 5);
                for n in &negs {
                    assert_eq!(differing_slots(pos, n), 1, "{kind:?} {pos:?} {n:?}");
                    assert_eq!(n.p, pos.p);
                }
            }
        }
    }

    #[test]
    fn bernoulli_is_even_on_one_to_one() {
        let kg = kg();
        let sampler = NegativeSampler::new(SamplerKind::Bernoulli, &kg);
        let one = kg.relations().id("one").unwrap();
        assert_eq!(sampler.head_probability(one), 0.5);
        // A -many-> {B,C,D}: tph 3, hpt 1
        let many = kg.relations().id("many").unwrap();
        assert!((sampler.head_probability(many) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn pseudo_typed_stays_in_domain() {
        let kg = kg();
        let r = kg.relations().id("r").unwrap();
        let objects = [kg.entities().id("B").unwrap(), kg.entities().id("C").unwrap()];
        let sampler = NegativeSampler::new(SamplerKind::PseudoTyped, &kg);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pos = kg.train()[0];
        assert_eq!(pos.p, r);
        for n in sampler.sample(&pos, 200, &mut rng) {
            if n.s == pos.s {
                assert!(objects.contains(&n.o));
            }
        }
    }

    #[test]
    fn pseudo_typed_small_domain_falls_back() {
        let kg = kg();
        let q = kg.relations().id("q").unwrap();
        let pos = *kg.train().iter().find(|t| t.p == q).unwrap();
        let sampler = NegativeSampler::new(SamplerKind::PseudoTyped, &kg);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let negs = sampler.sample(&pos, 50, &mut rng);
        assert!(negs.iter().all(|n| differing_slots(&pos, n) == 1));
    }
}
