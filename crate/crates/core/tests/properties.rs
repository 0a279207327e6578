use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use ontoeval::backends::Payload;
use ontoeval::datasets::{build_relation_triples, build_taxonomy_pairs, split_dataset, Provenance, SplitSpec, TypePairItem};
use ontoeval::eval::metrics::{map_at_k, prf1};
use ontoeval::eval::{map_term_type, normalize, AnswerSpace, Prediction};
use ontoeval::model::{Partition, RelationAssertion, Task, Taxonomy, TypeNode};

fn pred(id: String, labels: Vec<String>) -> Prediction {
    Prediction {
        item_id: id,
        ranked_labels: labels,
        raw_text: String::new(),
        ambiguous: false,
    }
}

/// Leveled DAG: `widths[l]` nodes on level l, each non-root node with a
/// non-empty parent set on the level above, chosen by bit masks.
fn leveled_dag() -> impl Strategy<Value = Taxonomy> {
    prop::collection::vec(1usize..5, 1..5).prop_flat_map(|widths| {
        let masks: Vec<_> = widths
            .iter()
            .enumerate()
            .skip(1)
            .map(|(l, &w)| prop::collection::vec(1u32..(1 << widths[l - 1]), w))
            .collect();
        (Just(widths), masks)
    })
    .prop_map(|(widths, masks)| {
        let name = |l: usize, i: usize| format!("L{l}N{i}");
        let mut nodes = Vec::new();
        let mut edges = BTreeSet::new();
        for i in 0..widths[0] {
            nodes.push(TypeNode::new(name(0, i), 0));
        }
        for (l, row) in masks.iter().enumerate().map(|(l, row)| (l + 1, row)) {
            for (i, mask) in row.iter().enumerate() {
                nodes.push(TypeNode::new(name(l, i), l));
                for p in (0..widths[l - 1]).filter(|p| mask & (1 << p) != 0) {
                    edges.insert((name(l, i), name(l - 1, p)));
                }
            }
        }
        Taxonomy::new(nodes, edges)
    })
}

/// All-pairs shortest hop counts from descendants up to ancestors.
fn floyd_warshall(tax: &Taxonomy) -> BTreeMap<(String, String), usize> {
    let labels: Vec<String> = tax.nodes.iter().map(|n| n.label.clone()).collect();
    let n = labels.len();
    let idx: BTreeMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let inf = usize::MAX / 4;
    let mut d = vec![vec![inf; n]; n];
    for (c, p) in &tax.parent_edges {
        d[idx[c.as_str()]][idx[p.as_str()]] = 1;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    let mut out = BTreeMap::new();
    for i in 0..n {
        for j in 0..n {
            if d[i][j] < inf {
                // (ancestor, descendant)
                out.insert((labels[j].clone(), labels[i].clone()), d[i][j]);
            }
        }
    }
    out
}

fn pair_set(items: &[TypePairItem], label: bool) -> BTreeSet<(String, String)> {
    items.iter().filter(|i| i.label == label).map(|i| (i.a.clone(), i.b.clone())).collect()
}

proptest! {
    #[test]
    fn normalize_is_idempotent(s in "\\PC{0,24}") {
        let once = normalize(&s);
        prop_assert_eq!(normalize(&once), once.clone());
        prop_assert!(!once.contains("  "));
        prop_assert_eq!(once.trim(), once.as_str());
    }

    #[test]
    fn normalize_ignores_case_and_edge_punctuation(word in "[a-z]{2,10}( [a-z]{2,10}){0,2}") {
        prop_assume!(!["a", "an", "the"].contains(&word.split(' ').next().unwrap()));
        let noisy = format!("  \"{}.\" ", word.to_uppercase());
        prop_assert_eq!(normalize(&noisy), word);
    }

    #[test]
    fn taxonomy_pairs_match_reachability(tax in leveled_dag()) {
        let items = build_taxonomy_pairs(&tax, None).unwrap();
        let closure: BTreeSet<(String, String)> = floyd_warshall(&tax).into_keys().collect();
        let inverted: BTreeSet<(String, String)> = closure.iter().map(|(a, b)| (b.clone(), a.clone())).collect();
        prop_assert_eq!(pair_set(&items, true), closure.clone());
        prop_assert_eq!(pair_set(&items, false), inverted);
        prop_assert_eq!(items.len(), 2 * closure.len());
    }

    #[test]
    fn gap_limited_pairs_match_shortest_paths(tax in leveled_dag(), gap in 1usize..4) {
        let items = build_taxonomy_pairs(&tax, Some(gap)).unwrap();
        let dist = floyd_warshall(&tax);
        let expected: BTreeSet<(String, String)> =
            dist.iter().filter(|(_, &d)| d <= gap).map(|(k, _)| k.clone()).collect();
        prop_assert_eq!(pair_set(&items, true), expected);
        for item in &items {
            let hops = dist[&if item.label { (item.a.clone(), item.b.clone()) } else { (item.b.clone(), item.a.clone()) }];
            let expected = match (item.label, hops == 1) {
                (true, true) => Provenance::Direct,
                (true, false) => Provenance::Transitive,
                (false, true) => Provenance::Inverted,
                (false, false) => Provenance::TransitiveInverted,
            };
            prop_assert_eq!(item.provenance, expected);
        }
    }

    #[test]
    fn split_is_exact_stratified_and_order_free(
        labels in prop::collection::vec(any::<bool>(), 0..120),
        num in 1u64..10,
        extra in 0u64..10,
        seed in any::<u64>(),
    ) {
        let spec = SplitSpec::new(num, num + extra, seed).unwrap();
        let items: Vec<TypePairItem> = labels.iter().enumerate().map(|(i, &label)| TypePairItem {
            item_id: format!("B-{i:06}"),
            a: "x".into(),
            b: "y".into(),
            label,
            provenance: Provenance::Direct,
            partition: None,
        }).collect();
        let n = items.len() as u64;
        let (train, test) = split_dataset(items.clone(), &spec);
        prop_assert_eq!(train.len() as u64, n * extra / (num + extra));
        prop_assert_eq!(train.len() + test.len(), items.len());
        prop_assert!(train.iter().all(|i| i.partition == Some(Partition::Train)));
        prop_assert!(test.iter().all(|i| i.partition == Some(Partition::Test)));
        // Each stratum's train share is within one item of its exact quota.
        for stratum in [true, false] {
            let size = labels.iter().filter(|&&l| l == stratum).count() as f64;
            let got = train.iter().filter(|i| i.label == stratum).count() as f64;
            let quota = size * train.len() as f64 / n.max(1) as f64;
            prop_assert!((got - quota).abs() < 1.0 + 1e-9, "{got} vs {quota}");
        }
        let mut reversed = items;
        reversed.reverse();
        let (train2, test2) = split_dataset(reversed, &spec);
        prop_assert_eq!(train, train2);
        prop_assert_eq!(test, test2);
    }

    #[test]
    fn relation_negatives_are_fresh_distinct_and_seeded(
        n_types in 1usize..6,
        n_rel in 1usize..4,
        picks in prop::collection::vec((0usize..6, 0usize..4, 0usize..6), 1..10),
        want in 0usize..40,
        seed in any::<u64>(),
    ) {
        let ty = |i: usize| format!("T{}", i % n_types);
        let rel = |i: usize| format!("r{}", i % n_rel);
        let tax = Taxonomy::new((0..n_types).map(|i| TypeNode::new(ty(i), 0)).collect(), BTreeSet::new());
        let asserted: BTreeSet<RelationAssertion> =
            picks.iter().map(|&(h, r, t)| RelationAssertion::new(ty(h), rel(r), ty(t))).collect();
        let relations: Vec<_> = asserted.iter().cloned().collect();
        let names: BTreeSet<String> = relations.iter().map(|r| r.relation.clone()).collect();
        let space = n_types * n_types * names.len();
        let result = build_relation_triples(&relations, &tax, want, seed);
        if want > space - asserted.len() {
            prop_assert!(result.is_err());
            return Ok(());
        }
        let items = result.unwrap();
        let pos: BTreeSet<RelationAssertion> = items.iter().filter(|i| i.label)
            .map(|i| RelationAssertion::new(i.h.clone(), i.r.clone(), i.t.clone())).collect();
        let neg: Vec<RelationAssertion> = items.iter().filter(|i| !i.label)
            .map(|i| RelationAssertion::new(i.h.clone(), i.r.clone(), i.t.clone())).collect();
        prop_assert_eq!(pos, asserted.clone());
        prop_assert_eq!(neg.len(), want);
        let distinct: BTreeSet<_> = neg.iter().cloned().collect();
        prop_assert_eq!(distinct.len(), want);
        for t in &neg {
            prop_assert!(!asserted.contains(t));
            prop_assert!(names.contains(&t.relation));
            prop_assert!(tax.node(&t.head_type).is_some() && tax.node(&t.tail_type).is_some());
        }
        prop_assert_eq!(build_relation_triples(&relations, &tax, want, seed).unwrap(), items);
    }

    #[test]
    fn map_at_k_matches_direct_definition(
        rows in prop::collection::vec(
            (prop::collection::btree_set(0u8..8, 1..4), prop::collection::vec(0u8..8, 0..6)),
            1..20,
        ),
        k in 1usize..6,
    ) {
        let mut golds = BTreeMap::new();
        let mut preds = Vec::new();
        for (i, (gold, ranked)) in rows.iter().enumerate() {
            let id = format!("i{i}");
            golds.insert(id.clone(), gold.iter().map(|g| format!("t{g}")).collect::<BTreeSet<_>>());
            preds.push(pred(id, ranked.iter().map(|r| format!("t{r}")).collect()));
        }
        // AP@k = (1 / min(k, |G|)) * sum_{i<=k} P@i * rel(i).
        let mut oracle = 0.0;
        for p in &preds {
            let gold = &golds[&p.item_id];
            let cut: Vec<&String> = p.ranked_labels.iter().take(k).collect();
            let mut ap = 0.0;
            // rel(i): a gold label not already seen higher in the ranking.
            let rel = |i: usize| gold.contains(cut[i]) && !cut[..i].contains(&cut[i]);
            for i in 0..cut.len() {
                if rel(i) {
                    let hits = (0..=i).filter(|&j| rel(j)).count();
                    ap += hits as f64 / (i + 1) as f64;
                }
            }
            oracle += ap / k.min(gold.len()) as f64;
        }
        oracle /= preds.len() as f64;
        let got = map_at_k(&preds, &golds, k).unwrap();
        prop_assert!((got - oracle).abs() < 1e-12, "{got} vs {oracle}");
        prop_assert!((0.0..=1.0).contains(&got));
    }

    #[test]
    fn prf_matches_confusion_counts(rows in prop::collection::vec((any::<bool>(), 0u8..3), 1..60)) {
        let mut golds = BTreeMap::new();
        let mut preds = Vec::new();
        for (i, &(gold, answer)) in rows.iter().enumerate() {
            let id = format!("i{i}");
            golds.insert(id.clone(), gold);
            let labels = match answer {
                0 => vec![],
                1 => vec!["true".to_string()],
                _ => vec!["false".to_string()],
            };
            preds.push(pred(id, labels));
        }
        let said_true: Vec<bool> = rows.iter().map(|&(_, a)| a == 1).collect();
        let tp = rows.iter().zip(&said_true).filter(|((g, _), &s)| *g && s).count() as f64;
        let predicted = said_true.iter().filter(|&&s| s).count() as f64;
        let actual = rows.iter().filter(|(g, _)| *g).count() as f64;
        let p = if predicted > 0.0 { tp / predicted } else { 0.0 };
        let r = if actual > 0.0 { tp / actual } else { 0.0 };
        let f1 = if tp > 0.0 { 2.0 * tp / (predicted + actual) } else { 0.0 };
        let got = prf1(&preds, &golds).unwrap();
        prop_assert!((got.precision - p).abs() < 1e-12);
        prop_assert!((got.recall - r).abs() < 1e-12);
        prop_assert!((got.f1 - f1).abs() < 1e-12);
        prop_assert_eq!(got.misses, rows.iter().filter(|(_, a)| *a == 0).count());
        prop_assert_eq!(got.tp + got.fp + got.fn_ + got.tn, rows.len());
    }

    #[test]
    fn answer_variants_are_disjoint_and_echoes_map_back(
        names in prop::collection::btree_map("[a-z]{3,8}", prop::option::of("[a-z]{3,8}( [a-z]{3,8})?"), 1..8),
        synonyms in prop::collection::btree_map("[a-z]{3,8}", prop::collection::vec("[a-z]{3,8}", 0..3), 0..8),
    ) {
        let space = AnswerSpace::new(Task::A, &names, &synonyms).unwrap();
        let mut seen = BTreeSet::new();
        for variants in space.labels.values() {
            for v in variants {
                prop_assert!(seen.insert(v.clone()), "variant {v} claimed twice");
            }
        }
        for label in names.keys() {
            let p = map_term_type("x", &Payload::Text(format!("{label}.")), &space);
            prop_assert_eq!(p.top(), Some(label.as_str()));
            let surface = space.preferred_surface(label, names[label].as_deref());
            let p = map_term_type("x", &Payload::Text(surface), &space);
            prop_assert_eq!(p.top(), Some(label.as_str()));
        }
    }
}
