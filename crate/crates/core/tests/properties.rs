use std::collections::HashSet;

use proptest::prelude::*;

use corefkit::conllu::{parse_corpus, write_corpus};
use corefkit::decode::{plan_overlap, OverlapMode};
use corefkit::metrics::{b_cubed, ceaf, ceaf_similarities, max_weight_assignment, muc, CeafSimilarity};
use corefkit::synth::{generate, SynthSpec};

/// A partition of some of the mentions 0..n into at most `k` entities.
fn partition(n: u32, k: usize) -> impl Strategy<Value = Vec<Vec<u32>>> {
    prop::collection::vec(prop::option::of(0..k), n as usize).prop_map(move |owner| {
        let mut out = vec![Vec::new(); k];
        for (m, o) in owner.into_iter().enumerate() {
            if let Some(o) = o {
                out[o].push(m as u32);
            }
        }
        out.retain(|e| !e.is_empty());
        out
    })
}

fn overlap_mode() -> impl Strategy<Value = OverlapMode> {
    prop_oneof![Just(OverlapMode::None), Just(OverlapMode::Min), Just(OverlapMode::Max)]
}

proptest! {
    #[test]
    fn swapping_sides_swaps_precision_and_recall(g in partition(10, 4), s in partition(10, 4)) {
        for (a, b) in [
            (muc(&g, &s), muc(&s, &g)),
            (b_cubed(&g, &s), b_cubed(&s, &g)),
            (ceaf(&g, &s, CeafSimilarity::MentionCount), ceaf(&s, &g, CeafSimilarity::MentionCount)),
            (ceaf(&g, &s, CeafSimilarity::EntityF1), ceaf(&s, &g, CeafSimilarity::EntityF1)),
        ] {
            prop_assert!((a.precision - b.recall).abs() < 1e-12);
            prop_assert!((a.recall - b.precision).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&a.f1));
        }
    }

    #[test]
    fn identical_partitions_score_one(g in partition(12, 5)) {
        prop_assume!(g.iter().any(|e| e.len() > 1));
        prop_assert_eq!(muc(&g, &g).f1, 1.0);
        prop_assert_eq!(b_cubed(&g, &g).f1, 1.0);
        prop_assert_eq!(ceaf(&g, &g, CeafSimilarity::EntityF1).f1, 1.0);
    }

    #[test]
    fn assignment_is_injective_and_not_worse_than_identity(
        w in prop::collection::vec(prop::collection::vec(0.0f64..10.0, 4), 1..7)
    ) {
        let a = max_weight_assignment(&w);
        prop_assert_eq!(a.len(), w.len());
        let cols: Vec<usize> = a.iter().flatten().copied().collect();
        prop_assert_eq!(cols.iter().collect::<HashSet<_>>().len(), cols.len());
        prop_assert_eq!(cols.len(), w.len().min(4));
        let total: f64 = a.iter().enumerate().filter_map(|(i, j)| j.map(|j| w[i][j])).sum();
        let diagonal: f64 = (0..w.len().min(4)).map(|i| w[i][i]).sum();
        prop_assert!(total >= diagonal - 1e-9);
    }

    #[test]
    fn ceaf_similarity_is_bounded(g in partition(8, 3), s in partition(8, 3)) {
        for row in ceaf_similarities(&g, &s, CeafSimilarity::EntityF1) {
            prop_assert!(row.iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }

    #[test]
    fn overlap_windows_cover_every_segment(segments in 1usize..40, max in 2usize..8, mode in overlap_mode()) {
        let plan = plan_overlap(segments, max, mode).unwrap();
        let mut covered = vec![false; segments];
        let mut prev: Option<(usize, usize)> = None;
        for &(a, b) in &plan.windows {
            prop_assert!(a <= b && b < segments && b - a < max);
            if let Some((pa, pb)) = prev {
                prop_assert!(a > pa && b > pb);
                if mode == OverlapMode::None {
                    prop_assert_eq!(a, pb + 1);
                } else {
                    prop_assert!(a <= pb);
                }
            }
            covered[a..=b].iter_mut().for_each(|c| *c = true);
            prev = Some((a, b));
        }
        prop_assert!(covered.iter().all(|&c| c));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn synthetic_corpora_round_trip(seed in any::<u64>(), singleton_rate in 0.0f64..0.6, gap in 0usize..4) {
        let docs = generate(&SynthSpec {
            documents: 3,
            sentences_per_doc: 6,
            singleton_rate,
            cross_segment_rate: 0.5,
            cross_segment_gap: gap,
            seed,
            ..SynthSpec::default()
        })
        .unwrap();
        let text = write_corpus(&docs);
        let parsed = parse_corpus(&text).unwrap();
        prop_assert_eq!(&parsed, &docs);
        prop_assert_eq!(write_corpus(&parsed), text);
    }
}
