use proptest::prelude::*;

use equivar::augment::{stream_dissimilarity, token_dissimilarity};
use equivar::contrastive::{ema_update, info_nce, NegativeQueue};
use equivar::encoder::{init_params, Dims};
use equivar::eval::{auroc, average_precision, cosine_similarity, ScoredPair};

fn scored_sets() -> impl Strategy<Value = Vec<ScoredPair>> {
    prop::collection::vec((0u8..8, any::<bool>()), 2..100).prop_map(|v| {
        let mut s: Vec<ScoredPair> = v.into_iter().map(|(x, label)| ScoredPair { score: f64::from(x), label }).collect();
        s[0].label = true;
        s[1].label = false;
        s
    })
}

fn concordance(s: &[ScoredPair]) -> f64 {
    let mut total = 0.0;
    let mut n = 0.0;
    for p in s.iter().filter(|p| p.label) {
        for q in s.iter().filter(|q| !q.label) {
            n += 1.0;
            total += match p.score.partial_cmp(&q.score).unwrap() {
                std::cmp::Ordering::Greater => 1.0,
                std::cmp::Ordering::Equal => 0.5,
                std::cmp::Ordering::Less => 0.0,
            };
        }
    }
    total / n
}

fn threshold_ap(s: &[ScoredPair]) -> f64 {
    let positives = s.iter().filter(|p| p.label).count() as f64;
    let mut cuts: Vec<f64> = s.iter().map(|p| p.score).collect();
    cuts.sort_by(|a, b| b.total_cmp(a));
    cuts.dedup();
    let mut prev = 0.0;
    let mut ap = 0.0;
    for c in cuts {
        let above: Vec<_> = s.iter().filter(|p| p.score >= c).collect();
        let tp = above.iter().filter(|p| p.label).count() as f64;
        ap += (tp / positives - prev) * tp / above.len() as f64;
        prev = tp / positives;
    }
    ap
}

proptest! {
    #[test]
    fn auroc_matches_pairwise_enumeration(s in scored_sets()) {
        let (a, se) = auroc(&s).unwrap();
        prop_assert!((a - concordance(&s)).abs() < 1e-12);
        prop_assert!(se >= 0.0);
    }

    #[test]
    fn auroc_is_a_rank_statistic(s in scored_sets(), scale in 0.1f64..10.0, shift in -5.0f64..5.0) {
        let t: Vec<ScoredPair> = s.iter().map(|p| ScoredPair { score: (p.score * scale + shift).exp(), label: p.label }).collect();
        prop_assert_eq!(auroc(&s).unwrap().0, auroc(&t).unwrap().0);
    }

    #[test]
    fn average_precision_matches_threshold_enumeration(s in scored_sets()) {
        let ap = average_precision(&s).unwrap();
        prop_assert!((ap - threshold_ap(&s)).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&ap));
    }

    #[test]
    fn stream_dissimilarity_is_a_bounded_symmetric_distance(
        a in prop::collection::vec(0u8..4, 0..20),
        b in prop::collection::vec(0u8..4, 0..20),
    ) {
        let d = stream_dissimilarity(&a, &b);
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(d, stream_dissimilarity(&b, &a));
        prop_assert_eq!(stream_dissimilarity(&a, &a), 0.0);
    }

    #[test]
    fn cosine_is_symmetric_and_bounded(
        u in prop::collection::vec(-10.0f64..10.0, 5),
        v in prop::collection::vec(-10.0f64..10.0, 5),
    ) {
        prop_assume!(u.iter().any(|x| x.abs() > 1e-3) && v.iter().any(|x| x.abs() > 1e-3));
        let c = cosine_similarity(&u, &v).unwrap();
        prop_assert!((-1.0..=1.0).contains(&c));
        prop_assert_eq!(c, cosine_similarity(&v, &u).unwrap());
    }

    #[test]
    fn info_nce_is_nonnegative(
        q in prop::collection::vec(-1.0f64..1.0, 4),
        k in prop::collection::vec(-1.0f64..1.0, 4),
        negs in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 4), 0..6),
        t in 0.05f64..5.0,
    ) {
        let refs: Vec<&[f64]> = negs.iter().map(Vec::as_slice).collect();
        let r = info_nce(&q, &k, &refs, t).unwrap();
        prop_assert!(r.loss >= 0.0 && r.loss.is_finite());
    }

    #[test]
    fn queue_holds_min_of_capacity_and_pushes(cap in 1usize..40, steps in 0usize..30, r in 1usize..8) {
        let mut q = NegativeQueue::new(cap);
        for t in 0..steps {
            for i in 0..r {
                q.push(vec![0.0], t * r + i);
            }
        }
        prop_assert_eq!(q.len(), cap.min(steps * r));
        let oldest = q.iter().next().map(|(_, tag)| tag);
        if let Some(oldest) = oldest {
            prop_assert_eq!(oldest, steps * r - q.len());
        }
    }

    #[test]
    fn ema_stays_between_its_inputs(m in 0.0f64..1.0, s1 in 0u64..100, s2 in 0u64..100) {
        let dims = Dims { vocab: 3, d_tok: 2, d_hid: 2, d_out: 2 };
        let (k0, q) = (init_params(dims, s1), init_params(dims, s2));
        let mut k = k0.clone();
        ema_update(&mut k, &q, m).unwrap();
        for ((a, b), c) in k0.w1.iter().zip(&q.w1).zip(&k.w1) {
            prop_assert!(*c >= a.min(*b) - 1e-15 && *c <= a.max(*b) + 1e-15);
        }
    }
}

#[test]
fn token_dissimilarity_examples() {
    assert_eq!(token_dissimilarity("a + b", "a + b").unwrap(), 0.0);
    assert_eq!(token_dissimilarity("x = 'q';", "x = \"q\";").unwrap(), 0.0);
    assert!((token_dissimilarity("a b c", "a x c").unwrap() - 1.0 / 3.0).abs() < 1e-12);
}
