//! Independent reference implementations used by the integration tests.
//! Everything here works by re-scanning plain triple lists.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twig_core::features::{QueryFeatureVector, FEATURE_COUNT};
use twig_core::kge::{batch_objective, ComplexModel, HyperparamConfig, LossFn};
use twig_core::twig::{init_twig, RankBatch, TwigSettings};
use twig_core::{Direction, KnowledgeGraph, Triple};

/// Uniformly random graph with distinct triples in every split.
pub fn random_kg(
    entities: usize,
    relations: usize,
    train: usize,
    valid: usize,
    test: usize,
    seed: u64,
) -> KnowledgeGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = BTreeSet::new();
    let mut draw = |n: usize| {
        let mut out = String::new();
        let mut count = 0;
        while count < n {
            let t = (
                rng.random_range(0..entities),
                rng.random_range(0..relations),
                rng.random_range(0..entities),
            );
            if seen.insert(t) {
                out.push_str(&format!("n{}\trel{}\tn{}\n", t.0, t.1, t.2));
                count += 1;
            }
        }
        out
    };
    let (tr, va, te) = (draw(train), draw(valid), draw(test));
    KnowledgeGraph::from_tsv("random", &tr, &va, &te).unwrap()
}

fn degree(train: &[Triple], e: u32) -> f64 {
    train
        .iter()
        .map(|t| u32::from(t.s == e) + u32::from(t.o == e))
        .sum::<u32>() as f64
}

fn neighbours(train: &[Triple], e: u32) -> BTreeSet<u32> {
    let mut out = BTreeSet::new();
    for t in train {
        if t.s == e {
            out.insert(t.o);
        }
        if t.o == e {
            out.insert(t.s);
        }
    }
    out
}

fn predicate_frequency(train: &[Triple], p: u32) -> f64 {
    train.iter().filter(|t| t.p == p).count() as f64
}

/// Frequencies of the predicate of every incident triple, a self-loop
/// counted once per endpoint.
fn incident_frequencies(train: &[Triple], e: u32) -> Vec<f64> {
    let mut out = Vec::new();
    for t in train {
        for end in [t.s, t.o] {
            if end == e {
                out.push(predicate_frequency(train, t.p));
            }
        }
    }
    out
}

fn stats(values: &[f64]) -> [f64; 3] {
    if values.is_empty() {
        return [0.0; 3];
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    [min, max, values.iter().sum::<f64>() / values.len() as f64]
}

fn endpoint(train: &[Triple], e: u32) -> [f64; 9] {
    let nb = neighbours(train, e);
    let nb_deg: Vec<f64> = nb.iter().map(|&n| degree(train, n)).collect();
    let freq = incident_frequencies(train, e);
    let distinct: BTreeSet<u32> = train.iter().filter(|t| t.s == e || t.o == e).map(|t| t.p).collect();
    let [dmin, dmax, dmean] = stats(&nb_deg);
    let [fmin, fmax, fmean] = stats(&freq);
    [
        degree(train, e),
        dmin,
        dmax,
        dmean,
        nb.len() as f64,
        fmin,
        fmax,
        fmean,
        distinct.len() as f64,
    ]
}

/// All 23 features of a query by full scans of the training list.
pub fn brute_force_features(train: &[Triple], t: &Triple, direction: Direction) -> [f64; FEATURE_COUNT] {
    let s = endpoint(train, t.s);
    let o = endpoint(train, t.o);
    let count = |f: &dyn Fn(&Triple) -> bool| train.iter().filter(|x| f(x)).count() as f64;
    [
        if direction == Direction::Head { 1.0 } else { 0.0 },
        s[0],
        o[0],
        predicate_frequency(train, t.p),
        count(&|x| x.s == t.s && x.p == t.p),
        count(&|x| x.o == t.o && x.p == t.p),
        count(&|x| x.s == t.s && x.o == t.o),
        s[1],
        s[2],
        s[3],
        o[1],
        o[2],
        o[3],
        s[4],
        o[4],
        s[5],
        s[6],
        s[7],
        o[5],
        o[6],
        o[7],
        s[8],
        o[8],
    ]
}

pub fn features_equal(a: &QueryFeatureVector, b: &[f64; FEATURE_COUNT]) -> bool {
    a.to_array().iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

/// `Re(<s, p, conj(o)>)` with explicit complex arithmetic.
pub fn complex_score(model: &ComplexModel, t: &Triple) -> f64 {
    let (sr, si) = model.entity(t.s);
    let (pr, pi) = model.relation(t.p);
    let (or, oi) = model.entity(t.o);
    let mut total = 0.0;
    for k in 0..model.dim() {
        // (s * p) then times conj(o)
        let (ar, ai) = (sr[k] * pr[k] - si[k] * pi[k], sr[k] * pi[k] + si[k] * pr[k]);
        total += ar * or[k] + ai * oi[k];
    }
    total
}

/// Rank by sorting every candidate score, skipping known true answers
/// other than the target, and splitting ties in half.
pub fn brute_force_rank(
    model: &ComplexModel,
    kg: &KnowledgeGraph,
    t: &Triple,
    direction: Direction,
    filtered: bool,
) -> f64 {
    let known: Vec<Triple> = kg.all_triples().copied().collect();
    let substitute = |e: u32| match direction {
        Direction::Head => Triple { s: e, ..*t },
        Direction::Tail => Triple { o: e, ..*t },
    };
    let target = complex_score(model, t);
    let mut others: Vec<f64> = (0..kg.entity_count() as u32)
        .map(substitute)
        .filter(|c| c != t)
        .filter(|c| !filtered || !known.contains(c))
        .map(|c| complex_score(model, &c))
        .collect();
    others.sort_by(|a, b| b.total_cmp(a));
    let higher = others.iter().take_while(|&&s| s > target).count();
    let tied = others[higher..].iter().take_while(|&&s| s == target).count();
    1.0 + higher as f64 + tied as f64 / 2.0
}

/// Worst relative error between `analytic` and central differences of `f`
/// at `params`. Components where both gradients are below `floor` in
/// magnitude are skipped: their relative error is rounding noise.
pub fn gradient_check(
    params: &mut [f64],
    analytic: &[f64],
    mut f: impl FnMut(&[f64]) -> f64,
    step: f64,
    floor: f64,
) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..params.len() {
        let keep = params[i];
        params[i] = keep + step;
        let up = f(params);
        params[i] = keep - step;
        let down = f(params);
        params[i] = keep;
        let numeric = (up - down) / (2.0 * step);
        let scale = numeric.abs().max(analytic[i].abs());
        if scale >= floor {
            worst = worst.max((numeric - analytic[i]).abs() / scale);
        }
    }
    worst
}

fn random_triples(rng: &mut ChaCha8Rng, n: usize, entities: u32, relations: u32) -> Vec<Triple> {
    (0..n)
        .map(|_| Triple {
            s: rng.random_range(0..entities),
            p: rng.random_range(0..relations),
            o: rng.random_range(0..entities),
        })
        .collect()
}

/// Gradient check of one random ComplEx batch objective.
/// A step of 1e-5 balances rounding noise against the truncation error of the cubic penalty.
pub fn check_kge(loss: LossFn, reg: f64, instance: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(instance);
    let model = ComplexModel::random(7, 3, 4, instance, &mut rng);
    let k = 3;
    let positives = random_triples(&mut rng, 5, 7, 3);
    let negatives = random_triples(&mut rng, 5 * k, 7, 3);
    let mut grad = vec![0.0; model.params().len()];
    batch_objective(&model, &positives, &negatives, loss, reg, &mut grad);

    let mut probe = model.clone();
    let mut scratch = vec![0.0; grad.len()];
    let mut params = model.params().to_vec();
    gradient_check(
        &mut params,
        &grad,
        |p| {
            probe.params_mut().copy_from_slice(p);
            batch_objective(&probe, &positives, &negatives, loss, reg, &mut scratch)
        },
        1e-5,
        1e-6,
    )
}

pub fn random_batch(rng: &mut ChaCha8Rng, queries: usize, entity_count: usize) -> RankBatch {
    let features = (0..queries)
        .map(|_| {
            let mut v = [0.0; FEATURE_COUNT];
            v[0] = f64::from(rng.random::<bool>());
            for x in &mut v[1..] {
                *x = f64::from(rng.random_range(0u32..40));
            }
            QueryFeatureVector::from_array(v)
        })
        .collect();
    let config = HyperparamConfig {
        learning_rate: [1e-2, 1e-4, 1e-6][rng.random_range(0..3)],
        negatives: [5, 25, 125][rng.random_range(0..3)],
        ..Default::default()
    };
    RankBatch {
        kg: "random".into(),
        config,
        seed: 0,
        entity_count,
        features: Arc::new(features),
        ranks: (0..queries)
            .map(|_| f64::from(rng.random_range(2..=entity_count as u32)) / 2.0 + 0.5)
            .collect(),
    }
}

/// Gradient check of the simulator's joint loss on one random batch. The
/// loss is O(1) while many weight gradients are O(1e-6), so a 1e-6 step
/// leaves rounding noise near 1e-4 relative; 1e-4 keeps it negligible.
pub fn check_twig(instance: u64, mse_weight: f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(instance);
    let batch = random_batch(&mut rng, 12, 50);
    let settings = TwigSettings {
        seed: instance,
        ..Default::default()
    };
    let model = init_twig(std::slice::from_ref(&batch), &settings).unwrap();
    let mut grad = vec![0.0; model.net.params().len()];
    model.loss_and_gradient(&batch, mse_weight, &mut grad).unwrap();
    let mut probe = model.clone();
    let mut scratch = vec![0.0; grad.len()];
    let mut params = model.net.params().to_vec();
    gradient_check(
        &mut params,
        &grad,
        |p| {
            probe.net.params_mut().copy_from_slice(p);
            probe.loss_and_gradient(&batch, mse_weight, &mut scratch).unwrap()
        },
        1e-4,
        1e-6,
    )
}
