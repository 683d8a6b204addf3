mod common;

use proptest::prelude::*;
use twig_core::features::{featurize_kg, GraphStats, QueryFeatureVector};
use twig_core::{Direction, KnowledgeGraph, Split};

use common::{brute_force_features, features_equal, random_kg};

#[test]
fn matches_full_scan_on_random_graph() {
    let kg = random_kg(200, 10, 1000, 50, 100, 17);
    let stats = GraphStats::build(&kg);
    let table = featurize_kg(&kg, &stats, Split::Test);
    assert_eq!(table.len(), 200);
    for row in &table.rows {
        let t = kg.test()[row.triple_index];
        let expected = brute_force_features(kg.train(), &t, row.direction);
        assert!(
            features_equal(&row.features, &expected),
            "query {} {:?}: {:?} vs {:?}",
            row.triple_index,
            row.direction,
            row.features.to_array(),
            expected
        );
    }
}

#[test]
fn self_loops_and_isolated_entities() {
    let kg = KnowledgeGraph::from_tsv("loops", "a\tr\ta\na\tr\tb\nb\tq\tc\n", "", "a\tq\tz\nz\tr\ta\n").unwrap();
    let stats = GraphStats::build(&kg);
    for t in kg.test() {
        for d in Direction::BOTH {
            let fv = stats.featurize_query(t, d);
            assert!(features_equal(&fv, &brute_force_features(kg.train(), t, d)));
        }
    }
    let a = kg.entities().id("a").unwrap();
    assert_eq!(stats.node(a).degree, 3);
    assert_eq!(stats.node(a).neighbors, vec![a, kg.entities().id("b").unwrap()]);
}

fn triples_strategy() -> impl Strategy<Value = Vec<(u8, u8, u8)>> {
    prop::collection::vec((0u8..12, 0u8..3, 0u8..12), 1..60)
}

fn tsv(ts: &[(u8, u8, u8)]) -> String {
    ts.iter().map(|(s, p, o)| format!("e{s}\tr{p}\te{o}\n")).collect()
}

fn dedup(mut ts: Vec<(u8, u8, u8)>) -> Vec<(u8, u8, u8)> {
    let mut seen = std::collections::HashSet::new();
    ts.retain(|t| seen.insert(*t));
    ts
}

fn features_by_label(kg: &KnowledgeGraph, s: &str, p: &str, o: &str, d: Direction) -> QueryFeatureVector {
    let stats = GraphStats::build(kg);
    let t = twig_core::Triple {
        s: kg.entities().id(s).unwrap(),
        p: kg.relations().id(p).unwrap(),
        o: kg.entities().id(o).unwrap(),
    };
    stats.featurize_query(&t, d)
}

proptest! {
    #[test]
    fn training_order_does_not_matter(ts in triples_strategy(), seed in any::<u64>()) {
        let ts = dedup(ts);
        let mut shuffled = ts.clone();
        use rand::{seq::SliceRandom, SeedableRng};
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let query = ts[0];
        let test = format!("e{}\tr{}\te{}x\n", query.0, query.1, query.2);
        let a = KnowledgeGraph::from_tsv("a", &tsv(&ts), "", &test).unwrap();
        let b = KnowledgeGraph::from_tsv("b", &tsv(&shuffled), "", &test).unwrap();
        let (s, p) = (format!("e{}", query.0), format!("r{}", query.1));
        let o = format!("e{}x", query.2);
        for d in Direction::BOTH {
            prop_assert_eq!(features_by_label(&a, &s, &p, &o, d), features_by_label(&b, &s, &p, &o, d));
        }
    }

    #[test]
    fn evaluation_triples_never_leak(ts in triples_strategy(), extra in triples_strategy()) {
        let ts = dedup(ts);
        let extra: Vec<_> = dedup(extra).into_iter().filter(|t| !ts.contains(t)).collect();
        prop_assume!(!extra.is_empty());
        let (valid, test) = extra.split_at(extra.len() / 2);
        prop_assume!(!test.is_empty());
        let with = KnowledgeGraph::from_tsv("with", &tsv(&ts), &tsv(valid), &tsv(test)).unwrap();
        let q = test[0];
        let alone = KnowledgeGraph::from_tsv("alone", &tsv(&ts), "", &tsv(&[q])).unwrap();
        let (s, p, o) = (format!("e{}", q.0), format!("r{}", q.1), format!("e{}", q.2));
        for d in Direction::BOTH {
            prop_assert_eq!(features_by_label(&with, &s, &p, &o, d), features_by_label(&alone, &s, &p, &o, d));
        }
    }

    #[test]
    fn agrees_with_oracle(ts in triples_strategy(), q in (0u8..12, 0u8..3, 0u8..12)) {
        let ts = dedup(ts);
        prop_assume!(!ts.contains(&q));
        let kg = KnowledgeGraph::from_tsv("g", &tsv(&ts), "", &tsv(&[q])).unwrap();
        let stats = GraphStats::build(&kg);
        let t = kg.test()[0];
        for d in Direction::BOTH {
            prop_assert!(features_equal(&stats.featurize_query(&t, d), &brute_force_features(kg.train(), &t, d)));
        }
    }
}

#[test]
fn csv_has_header_and_one_row_per_query() {
    let kg = random_kg(30, 3, 60, 0, 10, 2);
    let stats = GraphStats::build(&kg);
    let csv = featurize_kg(&kg, &stats, Split::Test).to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 21);
    assert!(lines[0].starts_with("triple_index,direction,is_head,s_deg"));
    assert_eq!(lines[1].split(',').count(), 25);
}
