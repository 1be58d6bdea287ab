//! Property suites for the numerical invariants: range closure, convexity,
//! fusion monotonicity, class independence, metric invariances, and
//! serialization round-trips.

use frc::eval::{
    classify_and_split, estimate_stability, f1_score, monotonicity_score, robustness_score,
    DistanceKind, EvalPair, StabilityPair,
};
use frc::fuzzy::{
    aggregate_local, fuse_global, normalize_weights, ClassSet, Keyword, MembershipVector, SubUnit,
    TOLERANCE,
};
use frc::perturb::{PerturbKind, PerturbedRecord};
use proptest::prelude::*;

fn classes3() -> ClassSet {
    ClassSet::new(["positive", "negative", "other"], true).unwrap()
}

fn degree() -> impl Strategy<Value = f64> {
    (0..=1000u32).prop_map(|k| k as f64 / 1000.0)
}

fn membership_vec(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(degree(), dim)
}

fn keyword_set(dim: usize) -> impl Strategy<Value = Vec<Keyword>> {
    prop::collection::vec(membership_vec(dim), 1..8).prop_map(|vs| {
        vs.into_iter()
            .enumerate()
            .map(|(i, values)| {
                Keyword::new(format!("k{i}"), MembershipVector::new(values).unwrap()).unwrap()
            })
            .collect()
    })
}

fn subunits_and_weights(dim: usize) -> impl Strategy<Value = (Vec<SubUnit>, Vec<Vec<f64>>)> {
    prop::collection::vec((membership_vec(dim), prop::collection::vec(0.0..3.0f64, dim)), 1..6)
        .prop_map(move |rows| {
            let classes = classes3();
            let mut subunits = Vec::new();
            let mut raw = Vec::new();
            for (i, (values, mut weights)) in rows.into_iter().enumerate() {
                subunits.push(
                    SubUnit::from_keywords(
                        format!("s{i}"),
                        vec![Keyword::new("k", MembershipVector::new(values).unwrap()).unwrap()],
                        &classes,
                    )
                    .unwrap(),
                );
                if i == 0 {
                    for w in &mut weights {
                        *w += 0.01;
                    }
                }
                raw.push(weights);
            }
            (subunits, raw)
        })
}

proptest! {
    // range closure: outputs stay in [0,1] whenever inputs do
    #[test]
    fn aggregation_and_fusion_stay_in_unit_range(
        (subunits, raw) in subunits_and_weights(3),
        keywords in keyword_set(3),
    ) {
        let classes = classes3();
        let local = aggregate_local(&keywords, &classes).unwrap();
        for &v in local.values() {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        let weights = normalize_weights(&raw).unwrap();
        let fused = fuse_global(&subunits, &weights).unwrap();
        for &v in fused.values() {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    // convexity: fused value lies in the interval spanned by the sub-units
    #[test]
    fn fusion_is_convex_per_class((subunits, raw) in subunits_and_weights(3)) {
        let weights = normalize_weights(&raw).unwrap();
        let fused = fuse_global(&subunits, &weights).unwrap();
        for c in 0..3 {
            let lo = subunits.iter().map(|s| s.memberships.get(c)).fold(f64::INFINITY, f64::min);
            let hi = subunits.iter().map(|s| s.memberships.get(c)).fold(0.0_f64, f64::max);
            prop_assert!(fused.get(c) >= lo - 1e-12 && fused.get(c) <= hi + 1e-12,
                "class {}: {} outside [{}, {}]", c, fused.get(c), lo, hi);
        }
    }

    // monotonicity of fusion: raising one sub-unit degree never lowers the
    // fused degree under fixed weights
    #[test]
    fn fusion_is_monotone_in_each_subunit(
        (subunits, raw) in subunits_and_weights(3),
        bump in 0.0..1.0f64,
        pick in any::<prop::sample::Index>(),
    ) {
        let classes = classes3();
        let weights = normalize_weights(&raw).unwrap();
        let fused = fuse_global(&subunits, &weights).unwrap();
        let j = pick.index(subunits.len());
        let mut bumped = subunits.clone();
        let mut values = bumped[j].memberships.values().to_vec();
        values[0] = (values[0] + bump).min(1.0);
        bumped[j] = SubUnit::from_keywords(
            bumped[j].text.clone(),
            vec![Keyword::new("k", MembershipVector::new(values).unwrap()).unwrap()],
            &classes,
        ).unwrap();
        let fused_bumped = fuse_global(&bumped, &weights).unwrap();
        prop_assert!(fused_bumped.get(0) >= fused.get(0) - 1e-12);
    }

    // max monotonicity: adding a keyword never decreases any class degree
    #[test]
    fn adding_a_keyword_never_decreases_local_degrees(
        keywords in keyword_set(3),
        extra in membership_vec(3),
    ) {
        let classes = classes3();
        let before = aggregate_local(&keywords, &classes).unwrap();
        let mut extended = keywords;
        extended.push(Keyword::new("extra", MembershipVector::new(extra).unwrap()).unwrap());
        let after = aggregate_local(&extended, &classes).unwrap();
        for c in 0..3 {
            prop_assert!(after.get(c) >= before.get(c));
        }
    }

    // class independence: changing class-0 memberships and weights leaves
    // every other class's fused value bit-identical
    #[test]
    fn fusion_is_class_independent(
        (subunits, raw) in subunits_and_weights(3),
        replacement in membership_vec(1),
    ) {
        let classes = classes3();
        let weights = normalize_weights(&raw).unwrap();
        let fused = fuse_global(&subunits, &weights).unwrap();
        let mut changed = subunits.clone();
        let mut values = changed[0].memberships.values().to_vec();
        values[0] = replacement[0];
        changed[0] = SubUnit::from_keywords(
            changed[0].text.clone(),
            vec![Keyword::new("k", MembershipVector::new(values).unwrap()).unwrap()],
            &classes,
        ).unwrap();
        let fused_changed = fuse_global(&changed, &weights).unwrap();
        // bit-identical, not approximately equal
        prop_assert_eq!(fused.get(1).to_bits(), fused_changed.get(1).to_bits());
        prop_assert_eq!(fused.get(2).to_bits(), fused_changed.get(2).to_bits());
    }

    // weight normalization: per-class sums land on 1 within tolerance
    #[test]
    fn normalized_weight_columns_sum_to_one((_, raw) in subunits_and_weights(3)) {
        let weights = normalize_weights(&raw).unwrap();
        for c in 0..3 {
            let sum: f64 = (0..weights.m()).map(|j| weights.get(j, c)).sum();
            prop_assert!((sum - 1.0).abs() < TOLERANCE);
        }
    }

    // RS stays in [0,1] for degree-bounded pairs
    #[test]
    fn robustness_score_is_bounded(
        pairs in prop::collection::vec((membership_vec(2), membership_vec(2)), 1..40)
    ) {
        let pairs: Vec<EvalPair> = pairs.into_iter()
            .map(|(a, b)| EvalPair::new(a, b))
            .collect();
        for c in 0..2 {
            let rs = robustness_score(&pairs, c).unwrap();
            prop_assert!((0.0..=1.0).contains(&rs));
        }
    }

    // MS is invariant under a strictly increasing affine transform applied
    // to both members of every pair (deltas stay clear of the dead band)
    #[test]
    fn monotonicity_score_is_sgn_invariant(
        raw in prop::collection::vec((0.0..0.45f64, prop::sample::select(vec![-1i8, 0, 1])), 1..40),
        slope in 0.1..0.9f64,
        intercept in 0.0..0.05f64,
    ) {
        let pairs: Vec<EvalPair> = raw.iter().map(|(base, label)| {
            // build a pair whose delta is 0 or at least 1e-3 in magnitude
            let delta = match label { 1 => 0.1, -1 => -0.1, _ => 0.0 };
            EvalPair::new(vec![*base + 0.2], vec![*base + 0.2 + delta]).with_labels(vec![*label])
        }).collect();
        let transformed: Vec<EvalPair> = pairs.iter().map(|p| {
            EvalPair::new(
                p.original.iter().map(|v| intercept + slope * v).collect(),
                p.perturbed.iter().map(|v| intercept + slope * v).collect(),
            ).with_labels(p.shift_labels.clone().unwrap())
        }).collect();
        let ms = monotonicity_score(&pairs, 0).unwrap();
        let ms_t = monotonicity_score(&transformed, 0).unwrap();
        prop_assert_eq!(ms, ms_t);
    }

    // label and bucket are invariant under a common additive shift when the
    // arithmetic is exact (members and shift on a 1/64 grid)
    #[test]
    fn classification_is_shift_invariant(
        a in 0..=32u32,
        b in 0..=32u32,
        shift in 0..=32u32,
    ) {
        let (a, b, shift) = (a as f64 / 64.0, b as f64 / 64.0, shift as f64 / 64.0);
        let base = classify_and_split(&MembershipVector::new(vec![a, b]).unwrap(), 0.3).unwrap();
        let shifted = classify_and_split(
            &MembershipVector::new(vec![a + shift, b + shift]).unwrap(),
            0.3,
        ).unwrap();
        prop_assert_eq!(base, shifted);
    }

    // F1 is permutation-invariant over record order
    #[test]
    fn f1_is_permutation_invariant(
        records in prop::collection::vec(
            (prop::sample::select(vec!["positive", "negative"]),
             prop::option::of(prop::sample::select(vec!["positive", "negative"]))),
            1..30,
        ),
        seed in any::<u64>(),
    ) {
        let gold: Vec<String> = records.iter().map(|(g, _)| g.to_string()).collect();
        let preds: Vec<Option<String>> =
            records.iter().map(|(_, p)| p.map(str::to_string)).collect();
        let f1 = f1_score(&preds, &gold).unwrap();

        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut order: Vec<usize> = (0..records.len()).collect();
        order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let gold_s: Vec<String> = order.iter().map(|&i| gold[i].clone()).collect();
        let preds_s: Vec<Option<String>> = order.iter().map(|&i| preds[i].clone()).collect();
        prop_assert_eq!(f1, f1_score(&preds_s, &gold_s).unwrap());
    }

    // scaling all membership deltas by c > 0 scales k_hat by exactly c
    #[test]
    fn stability_estimate_scales_linearly(
        pairs in prop::collection::vec((0.2..0.8f64, 0.0..0.2f64), 1..20),
        scale_num in 1..=8u32,
    ) {
        let scale = scale_num as f64 / 8.0;
        let base: Vec<StabilityPair> = pairs.iter().enumerate().map(|(i, (o, d))| StabilityPair {
            original_text: format!("text number {i} alpha"),
            perturbed_text: format!("text number {i} beta"),
            pair: EvalPair::new(vec![*o], vec![o + d]),
        }).collect();
        let scaled: Vec<StabilityPair> = base.iter().map(|p| StabilityPair {
            original_text: p.original_text.clone(),
            perturbed_text: p.perturbed_text.clone(),
            pair: EvalPair::new(
                p.pair.original.clone(),
                p.pair.original.iter().zip(&p.pair.perturbed)
                    .map(|(o, q)| o + (q - o) * scale).collect(),
            ),
        }).collect();
        let full = estimate_stability(&base, DistanceKind::TokenLevenshtein).unwrap();
        let part = estimate_stability(&scaled, DistanceKind::TokenLevenshtein).unwrap();
        prop_assert!((part.k_hat - full.k_hat * scale).abs() < 1e-12);
    }

    // perturbed records and eval pairs survive serialization bit-identically
    #[test]
    fn perturbed_records_round_trip(
        original in "[a-z ]{1,30}",
        perturbed in "[a-z ]{1,30}",
        label in prop::sample::select(vec![-1i8, 0, 1]),
        monotonic in any::<bool>(),
    ) {
        let record = PerturbedRecord {
            id: "r:1".to_string(),
            source_id: "r".to_string(),
            original_text: original,
            perturbed_text: perturbed,
            kind: if monotonic { PerturbKind::Monotonic } else { PerturbKind::RobustLow },
            shift_labels: monotonic.then(|| {
                [("positive".to_string(), label), ("negative".to_string(), 0)]
                    .into_iter().collect()
            }),
        };
        let line = serde_json::to_string(&record).unwrap();
        let back: PerturbedRecord = serde_json::from_str(&line).unwrap();
        prop_assert_eq!(&back, &record);
        prop_assert_eq!(serde_json::to_string(&back).unwrap(), line);
    }
}
