mod common;

use clsvm_core::ranker::{expand_pairs, kendall_tau, recover_scores, Pair, RankConfig};
use proptest::prelude::*;

#[test]
fn chained_rankings_recover_total_order() {
    let (ids, anns) = common::chained_annotations(30, 4, 60, 1);
    let r = recover_scores(&expand_pairs(&anns).unwrap(), &RankConfig::default()).unwrap();
    let got: Vec<f64> = ids.iter().map(|id| r.scores[id]).collect();
    let truth: Vec<f64> = (0..30).map(|i| -(i as f64)).collect();
    assert_eq!(kendall_tau(&got, &truth), 1.0);
    assert_eq!(got.iter().cloned().fold(f64::INFINITY, f64::min), 0.0);
    assert_eq!(got.iter().cloned().fold(f64::NEG_INFINITY, f64::max), 10.0);
    assert_eq!(r.diagnostics.violated_pairs, 0);
    assert_eq!(r.diagnostics.components, 1);
}

fn gap(pairs: &[Pair], a: &str, b: &str) -> f64 {
    let r = recover_scores(pairs, &RankConfig::default()).unwrap();
    r.raw_scores[a] - r.raw_scores[b]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn renaming_items_renames_scores(seed in 0u64..1000, items in 5usize..15) {
        let (ids, anns) = common::chained_annotations(items, 3, 2 * items, seed);
        let pairs = expand_pairs(&anns).unwrap();
        let rename = |s: &str| format!("zz-{}", s.chars().rev().collect::<String>());
        let renamed: Vec<Pair> = pairs.iter().map(|(w, l)| (rename(w), rename(l))).collect();
        let a = recover_scores(&pairs, &RankConfig::default()).unwrap();
        let b = recover_scores(&renamed, &RankConfig::default()).unwrap();
        for id in &ids {
            prop_assert_eq!(a.scores[id], b.scores[&rename(id)]);
        }
    }

    #[test]
    fn scores_stay_in_range(seed in 0u64..1000, items in 3usize..12) {
        let (_, anns) = common::chained_annotations(items, 3, items, seed);
        let mut pairs = expand_pairs(&anns).unwrap();
        // add a contradicting pair so the data is not a clean order
        pairs.push((pairs[0].1.clone(), pairs[0].0.clone()));
        let r = recover_scores(&pairs, &RankConfig::default()).unwrap();
        prop_assert!(r.scores.values().all(|v| (0.0..=10.0).contains(v)));
    }

    #[test]
    fn repeated_evidence_does_not_shrink_gap(copies in 1usize..6) {
        // A beats B once; extra copies of that pair should not bring them closer
        let base: Vec<Pair> = vec![
            ("A".into(), "B".into()),
            ("B".into(), "A".into()),
            ("B".into(), "C".into()),
            ("A".into(), "C".into()),
        ];
        let mut more = base.clone();
        for _ in 0..copies {
            more.push(("A".into(), "B".into()));
        }
        prop_assert!(gap(&more, "A", "B") >= gap(&base, "A", "B") - 1e-3);
    }
}
