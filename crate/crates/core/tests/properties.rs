use std::collections::BTreeMap;

use proptest::prelude::*;

use prunecal::calibration::{
    accuracy, apply_temperature, aurc, bootstrap_ci, brier, cv_temperature, ece, fit_temperature, nll,
    selective_accuracy,
};
use prunecal::records::{format_prediction_line, parse_prediction_line};
use prunecal::selection::{
    cosine_sim_matrix, coverage_vector, greedy_select, marginal_score, select, SelectionConfig,
    Strategy as Selector,
};
use prunecal::surrogate::{nominal_confidence, SurrogateConfig};
use prunecal::{PredictionRecord, TokenFeatureSet};

fn feature_set(max_tokens: usize, max_dim: usize) -> impl Strategy<Value = TokenFeatureSet> {
    (1..=max_tokens, 1..=max_dim).prop_flat_map(|(v, d)| {
        (
            prop::collection::vec(-4.0f32..4.0, v * d),
            prop::collection::vec(0.01f32..2.0, v),
        )
            .prop_map(move |(f, a)| TokenFeatureSet::new(v, d, f, a).unwrap())
    })
}

fn any_finite_f32() -> impl Strategy<Value = f32> {
    any::<f32>().prop_filter("finite", |x| x.is_finite())
}

fn record() -> impl Strategy<Value = PredictionRecord> {
    (2usize..6)
        .prop_flat_map(|k| (prop::collection::vec(0.0f64..1.0, k), 0..k, "[a-z]{1,6}", "[a-z_]{1,8}"))
        .prop_filter_map("non-zero mass", |(weights, truth, id, split)| {
            let total: f64 = weights.iter().sum();
            if total <= 1e-9 {
                return None;
            }
            let probs: BTreeMap<String, f64> =
                weights.iter().enumerate().map(|(i, w)| (format!("l{i}"), w / total)).collect();
            PredictionRecord::new(id, split, probs, format!("l{truth}")).ok()
        })
}

fn records(max: usize) -> impl Strategy<Value = Vec<PredictionRecord>> {
    prop::collection::vec(record(), 1..=max)
}

fn binary(c: f64, correct: bool) -> PredictionRecord {
    let base = PredictionRecord::from_pairs("x", "s", [("yes", c), ("no", 1.0 - c)], "yes").unwrap();
    let predicted = base.predicted_label().to_string();
    let other = if predicted == "yes" { "no" } else { "yes" };
    let truth = if correct { predicted.as_str() } else { other };
    PredictionRecord::from_pairs("x", "s", [("yes", c), ("no", 1.0 - c)], truth).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn feature_bytes_round_trip_exactly(
        (v, d) in (1usize..6, 1usize..6),
        seed_values in prop::collection::vec(any_finite_f32(), 36),
        attention in prop::collection::vec(0.0f32..1e6, 6),
    ) {
        let features: Vec<f32> = seed_values.iter().copied().cycle().take(v * d).collect();
        let fs = TokenFeatureSet::new(v, d, features, attention[..v].to_vec()).unwrap();
        let bytes = fs.to_bytes();
        let back = TokenFeatureSet::from_bytes(&bytes).unwrap();
        prop_assert_eq!(back.to_bytes(), bytes);
        let same_bits = back.features().iter().zip(fs.features()).all(|(a, b)| a.to_bits() == b.to_bits());
        prop_assert!(same_bits);
    }

    #[test]
    fn prediction_lines_round_trip(r in record()) {
        let line = format_prediction_line(&r);
        prop_assert_eq!(parse_prediction_line(&line, 1).unwrap(), r);
    }

    #[test]
    fn flipped_correct_flag_is_rejected(r in record()) {
        let line = format_prediction_line(&r);
        let flipped = if r.correct() {
            line.replace("\"correct\":true", "\"correct\":false")
        } else {
            line.replace("\"correct\":false", "\"correct\":true")
        };
        prop_assert!(parse_prediction_line(&flipped, 3).is_err());
    }

    #[test]
    fn marginal_scores_diminish_on_supersets(
        fs in feature_set(10, 5),
        picks in prop::collection::vec((any::<bool>(), any::<bool>()), 10),
        v_pick in any::<prop::sample::Index>(),
        alpha in 0.0f64..2.0,
        p in 1.0f64..3.0,
    ) {
        let n = fs.num_tokens();
        let v = v_pick.index(n);
        let big: Vec<usize> = (0..n).filter(|&u| u != v && picks[u].0).collect();
        let small: Vec<usize> = big.iter().copied().filter(|&u| picks[u].1).collect();
        let sim = cosine_sim_matrix(&fs);
        let at_big = marginal_score(v, &big, &sim, fs.attention(), alpha, p).unwrap();
        let at_small = marginal_score(v, &small, &sim, fs.attention(), alpha, p).unwrap();
        prop_assert!(at_big <= at_small + 1e-12);
    }

    #[test]
    fn greedy_step_scores_never_increase(fs in feature_set(16, 6), k in 1usize..16, alpha in 0.0f64..2.0, p in 1.0f64..3.0) {
        let k = k.min(fs.num_tokens());
        let config = SelectionConfig::new(Selector::CoverageSaliency, k).with_alpha(alpha).with_gap_power(p);
        let r = greedy_select(&fs, &config).unwrap();
        prop_assert!(r.step_scores.windows(2).all(|w| w[1] <= w[0]), "{:?}", r.step_scores);
    }

    #[test]
    fn coverage_grows_along_greedy_trajectory(fs in feature_set(14, 5), alpha in 0.0f64..2.0) {
        let config = SelectionConfig::new(Selector::CoverageSaliency, fs.num_tokens()).with_alpha(alpha);
        let r = greedy_select(&fs, &config).unwrap();
        let sim = cosine_sim_matrix(&fs);
        let mut prev = coverage_vector(&sim, &[]).unwrap();
        for t in 1..=r.kept.len() {
            let cur = coverage_vector(&sim, &r.kept[..t]).unwrap();
            prop_assert!(cur.iter().zip(&prev).all(|(c, p)| c >= p));
            prev = cur;
        }
        prop_assert_eq!(prev, r.coverage_final);
    }

    #[test]
    fn boosting_attention_never_delays_first_pick(
        fs in feature_set(12, 4),
        t_pick in any::<prop::sample::Index>(),
        factor in 1.01f32..5.0,
        alpha in 0.1f64..2.0,
    ) {
        let t = t_pick.index(fs.num_tokens());
        let rank = |fs: &TokenFeatureSet| {
            let sim = cosine_sim_matrix(fs);
            let scores: Vec<f64> =
                (0..fs.num_tokens()).map(|v| marginal_score(v, &[], &sim, fs.attention(), alpha, 1.0).unwrap()).collect();
            (0..fs.num_tokens()).filter(|&u| scores[u] > scores[t] || (scores[u] == scores[t] && u < t)).count()
        };
        let mut boosted = fs.attention().to_vec();
        boosted[t] *= factor;
        prop_assert!(rank(&fs.with_attention(boosted).unwrap()) <= rank(&fs));
    }

    #[test]
    fn every_strategy_keeps_k_distinct_tokens_deterministically(
        fs in feature_set(20, 4),
        k in 1usize..20,
        seed in any::<u64>(),
        which in 0usize..4,
    ) {
        let k = k.min(fs.num_tokens());
        let config = SelectionConfig::new(Selector::ALL[which], k).with_seed(seed).with_alpha(0.5);
        let r = select(&fs, &config).unwrap();
        let mut sorted = r.kept.clone();
        sorted.sort_unstable();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), k);
        prop_assert!(r.kept.iter().all(|&i| i < fs.num_tokens()));
        prop_assert_eq!(select(&fs, &config).unwrap(), r);
    }

    #[test]
    fn metric_ranges(rs in records(40)) {
        let e = ece(&rs, 15).unwrap();
        let a = aurc(&rs).unwrap();
        let b = brier(&rs).unwrap();
        prop_assert!((0.0..=1.0).contains(&e));
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!((0.0..=2.0).contains(&b));
        prop_assert!(nll(&rs).unwrap() >= 0.0);
    }

    #[test]
    fn metrics_are_permutation_invariant(rs in records(30), rotate in 0usize..30) {
        let mut shuffled = rs.clone();
        shuffled.reverse();
        let len = shuffled.len();
        shuffled.rotate_left(rotate % len);
        for (x, y) in [
            (ece(&rs, 15).unwrap(), ece(&shuffled, 15).unwrap()),
            (brier(&rs).unwrap(), brier(&shuffled).unwrap()),
            (nll(&rs).unwrap(), nll(&shuffled).unwrap()),
        ] {
            prop_assert!((x - y).abs() < 1e-12);
        }
        let mut confs: Vec<f64> = rs.iter().map(|r| r.confidence()).collect();
        confs.sort_by(f64::total_cmp);
        if confs.windows(2).all(|w| w[0] != w[1]) {
            prop_assert!((aurc(&rs).unwrap() - aurc(&shuffled).unwrap()).abs() < 1e-12);
            prop_assert_eq!(selective_accuracy(&rs, 0.5).unwrap(), selective_accuracy(&shuffled, 0.5).unwrap());
        }
    }

    #[test]
    fn matched_bins_have_zero_ece(blocks in prop::collection::vec((0usize..3, 1usize..4), 1..8)) {
        // Each block is calibrated on its own: conf 1/2 with one of two right,
        // 3/4 with three of four right, 1 with all right.
        let mut rs = Vec::new();
        for (kind, copies) in blocks {
            for _ in 0..copies {
                match kind {
                    0 => rs.extend([binary(0.5, true), binary(0.5, false)]),
                    1 => rs.extend([binary(0.75, true), binary(0.75, true), binary(0.75, true), binary(0.75, false)]),
                    _ => rs.push(binary(1.0, true)),
                }
            }
        }
        prop_assert!(ece(&rs, 15).unwrap() < 1e-12);
    }

    #[test]
    fn temperature_preserves_normalization_and_argmax(rs in records(20), t in 0.01f64..100.0) {
        let scaled = apply_temperature(&rs, t).unwrap();
        for (a, b) in rs.iter().zip(&scaled) {
            let sum: f64 = b.probs().values().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
            prop_assert_eq!(a.predicted_label(), b.predicted_label());
        }
        prop_assert_eq!(accuracy(&rs).unwrap(), accuracy(&scaled).unwrap());
    }

    #[test]
    fn temperature_fit_never_raises_nll(rs in records(30)) {
        let fit = fit_temperature(&rs).unwrap();
        prop_assert!(fit.nll_after <= nll(&rs).unwrap());
        prop_assert_eq!(fit.nll_before, nll(&rs).unwrap());
    }

    #[test]
    fn cross_validated_scaling_keeps_order_and_accuracy(rs in records(40), seed in any::<u64>()) {
        prop_assume!(rs.len() >= 5);
        let cv = cv_temperature(&rs, 5, seed).unwrap();
        let ids = |v: &[PredictionRecord]| v.iter().map(|r| r.example_id().to_string()).collect::<Vec<_>>();
        prop_assert_eq!(ids(&cv.records), ids(&rs));
        prop_assert_eq!(accuracy(&cv.records).unwrap(), accuracy(&rs).unwrap());
    }

    #[test]
    fn constant_metric_has_zero_width_interval(rs in records(20), seed in any::<u64>()) {
        let ci = bootstrap_ci(&rs, |_| Ok(0.25), 50, 0.95, seed).unwrap();
        prop_assert_eq!(ci, (0.25, 0.25));
    }

    #[test]
    fn surrogate_confidence_rises_with_distractor_mass(e in 0.0f64..=1.0, m1 in 0.0f64..=1.0, m2 in 0.0f64..=1.0) {
        prop_assume!(m1 < m2);
        let cfg = SurrogateConfig::default();
        prop_assert!(nominal_confidence(e, m2, &cfg) > nominal_confidence(e, m1, &cfg));
    }
}
