//! ComplEx embeddings and scoring.
//!
//! All parameters live in one flat vector: one row of `2d` values per
//! entity, then one per relation. Each row stores the `d` real parts
//! followed by the `d` imaginary parts.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{EntityId, RelationId, Triple};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexModel {
    dim: usize,
    entity_count: usize,
    relation_count: usize,
    seed: u64,
    params: Vec<f64>,
}

impl ComplexModel {
    pub fn zeros(entity_count: usize, relation_count: usize, dim: usize, seed: u64) -> Self {
        ComplexModel {
            dim,
            entity_count,
            relation_count,
            seed,
            params: vec![0.0; (entity_count + relation_count) * 2 * dim],
        }
    }

    /// Every coordinate i.i.d. normal with standard deviation `1/sqrt(d)`.
    pub fn random<R: Rng + ?Sized>(
        entity_count: usize,
        relation_count: usize,
        dim: usize,
        seed: u64,
        rng: &mut R,
    ) -> Self {
        let mut model = Self::zeros(entity_count, relation_count, dim, seed);
        let normal = Normal::new(0.0, 1.0 / (dim as f64).sqrt()).expect("valid std");
        for p in &mut model.params {
            *p = normal.sample(rng);
        }
        model
    }

    /// Builds a model from explicit `(re, im)` rows.
    pub fn from_rows(entities: &[(Vec<f64>, Vec<f64>)], relations: &[(Vec<f64>, Vec<f64>)], seed: u64) -> Self {
        let dim = entities.first().map_or(0, |(re, _)| re.len());
        let mut params = Vec::with_capacity((entities.len() + relations.len()) * 2 * dim);
        for (re, im) in entities.iter().chain(relations) {
            assert!(re.len() == dim && im.len() == dim, "ragged embedding rows");
            params.extend_from_slice(re);
            params.extend_from_slice(im);
        }
        ComplexModel {
            dim,
            entity_count: entities.len(),
            relation_count: relations.len(),
            seed,
            params,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entity_count(&self) -> usize {
        self.entity_count
    }

    pub fn relation_count(&self) -> usize {
        self.relation_count
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub(crate) fn entity_offset(&self, e: EntityId) -> usize {
        e as usize * 2 * self.dim
    }

    pub(crate) fn relation_offset(&self, r: RelationId) -> usize {
        (self.entity_count + r as usize) * 2 * self.dim
    }

    pub fn entity(&self, e: EntityId) -> (&[f64], &[f64]) {
        let off = self.entity_offset(e);
        let row = &self.params[off..off + 2 * self.dim];
        row.split_at(self.dim)
    }

    pub fn relation(&self, r: RelationId) -> (&[f64], &[f64]) {
        let off = self.relation_offset(r);
        let row = &self.params[off..off + 2 * self.dim];
        row.split_at(self.dim)
    }

    fn check(&self, t: &Triple) -> Result<()> {
        for (kind, id, count) in [
            ("entity", t.s as usize, self.entity_count),
            ("relation", t.p as usize, self.relation_count),
            ("entity", t.o as usize, self.entity_count),
        ] {
            if id >= count {
                return Err(Error::IndexOutOfRange { kind, id, count });
            }
        }
        Ok(())
    }

    /// `Re(<e_s, e_p, conj(e_o)>)`.
    pub fn score(&self, t: &Triple) -> Result<f64> {
        self.check(t)?;
        Ok(self.score_unchecked(t))
    }

    pub(crate) fn score_unchecked(&self, t: &Triple) -> f64 {
        let (sr, si) = self.entity(t.s);
        let (pr, pi) = self.relation(t.p);
        let (or, oi) = self.entity(t.o);
        let mut acc = 0.0;
        for k in 0..self.dim {
            acc += sr[k] * pr[k] * or[k] + si[k] * pr[k] * oi[k] + sr[k] * pi[k] * oi[k] - si[k] * pi[k] * or[k];
        }
        acc
    }

    /// Scores of `(s, p, e)` for every entity `e`, written into `out`.
    pub fn score_tails(&self, s: EntityId, p: RelationId, out: &mut Vec<f64>) {
        let (sr, si) = self.entity(s);
        let (pr, pi) = self.relation(p);
        // e_s * e_p
        let are: Vec<f64> = (0..self.dim).map(|k| sr[k] * pr[k] - si[k] * pi[k]).collect();
        let aim: Vec<f64> = (0..self.dim).map(|k| sr[k] * pi[k] + si[k] * pr[k]).collect();
        out.clear();
        out.extend((0..self.entity_count as EntityId).map(|e| {
            let (or, oi) = self.entity(e);
            dot(&are, or) + dot(&aim, oi)
        }));
    }

    /// Scores of `(e, p, o)` for every entity `e`, written into `out`.
    pub fn score_heads(&self, p: RelationId, o: EntityId, out: &mut Vec<f64>) {
        let (pr, pi) = self.relation(p);
        let (or, oi) = self.entity(o);
        // e_p * conj(e_o)
        let bre: Vec<f64> = (0..self.dim).map(|k| pr[k] * or[k] + pi[k] * oi[k]).collect();
        let bim: Vec<f64> = (0..self.dim).map(|k| pi[k] * or[k] - pr[k] * oi[k]).collect();
        out.clear();
        out.extend((0..self.entity_count as EntityId).map(|e| {
            let (sr, si) = self.entity(e);
            dot(sr, &bre) - dot(si, &bim)
        }));
    }

    /// Adds `weight * d score(t) / d params` into `grad`.
    pub(crate) fn accumulate_score_grad(&self, t: &Triple, weight: f64, grad: &mut [f64]) {
        let d = self.dim;
        let (so, po, oo) = (
            self.entity_offset(t.s),
            self.relation_offset(t.p),
            self.entity_offset(t.o),
        );
        for k in 0..d {
            let (sr, si) = (self.params[so + k], self.params[so + d + k]);
            let (pr, pi) = (self.params[po + k], self.params[po + d + k]);
            let (or, oi) = (self.params[oo + k], self.params[oo + d + k]);
            grad[so + k] += weight * (pr * or + pi * oi);
            grad[so + d + k] += weight * (pr * oi - pi * or);
            grad[po + k] += weight * (sr * or + si * oi);
            grad[po + d + k] += weight * (sr * oi - si * or);
            grad[oo + k] += weight * (sr * pr - si * pi);
            grad[oo + d + k] += weight * (sr * pi + si * pr);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
