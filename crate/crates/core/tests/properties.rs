mod common;

use common::corpus::{family, sequence};
use proptest::prelude::*;
use qgends::classify::{classify, GaffneyStatus};
use qgends::metric_graph::{truncate, volume_family};
use qgends::scalar::Scalar;
use qgends::series::SeriesSum;
use qgends::{parse_spec, ExtendedCount, SequenceSpec};

fn seq(text: &str) -> SequenceSpec {
    SequenceSpec::from_json(&serde_json::from_str(text).unwrap(), "$").unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spec_round_trip(spec in family()) {
        let text = spec.serialize();
        let back = parse_spec(&text).unwrap();
        prop_assert_eq!(&back, &spec);
        prop_assert_eq!(back.serialize(), text);
    }

    #[test]
    fn partial_plus_tail_is_sum(text in sequence(), n in 0u64..40) {
        let nf = seq(&text).normal_form();
        match (nf.sum(), nf.tail_sum(n)) {
            (SeriesSum::Finite(total), SeriesSum::Finite(tail)) => {
                let head = nf.partial_sum(n);
                if let (Some(t), Some(r), Scalar::Exact(h)) = (&total.exact, &tail.exact, &head) {
                    prop_assert_eq!(t, &(h + r));
                }
                let approx = nf.partial_sum_f64(n) + tail.value;
                prop_assert!((approx - total.value).abs() <= 1e-12 * total.value.abs().max(1.0) + total.abs_error + tail.abs_error);
                // positive terms: partial sums increase towards the total
                prop_assert!(nf.partial_sum_f64(n) <= total.value * (1.0 + 1e-12) + total.abs_error);
            }
            (SeriesSum::Divergent, SeriesSum::Divergent) => {}
            (a, b) => prop_assert!(false, "sum {:?} but tail {:?}", a, b),
        }
    }

    #[test]
    fn brute_force_partial_sums_agree_with_classification(text in sequence()) {
        let nf = seq(&text).normal_form();
        let s = |n: u64| nf.partial_sum_f64(n);
        let (n1, n2, n3) = (1u64 << 14, 1u64 << 15, 1u64 << 16);
        let (s1, s2, s3) = (s(n1), s(n2), s(n3));
        match nf.sum() {
            SeriesSum::Finite(v) => {
                let errs: Vec<f64> = [1u64, 16, 256, 4096, n1, n2, n3].iter().map(|&n| v.value - s(n)).collect();
                let slack = 1e-12 * v.value.max(1.0) + v.abs_error;
                prop_assert!(errs.windows(2).all(|w| w[1] <= w[0] + slack), "{:?}", errs);
                prop_assert!(errs[6] >= -slack);
                // convergent grammar terms decay at least like n^-p with p > 1, so doubling increments halve
                prop_assert!((s3 - s2) <= 0.7 * (s2 - s1) + slack, "{} {} {}", s1, s2, s3);
            }
            SeriesSum::Divergent => {
                prop_assert!(!s3.is_finite() || s3 - s2 > 0.7 * (s2 - s1), "{} {} {}", s1, s2, s3);
            }
        }
    }

    #[test]
    fn geometric_sum_matches_closed_form(a in 1i64..5, num in 1i64..8, den in 2i64..9) {
        prop_assume!(num < den);
        let text = format!(r#"{{"kind":"geometric","a":{a},"r":"{num}/{den}"}}"#);
        let SeriesSum::Finite(v) = seq(&text).normal_form().sum() else {
            return Err(TestCaseError::fail("geometric series with r < 1 diverged"));
        };
        let expected = Scalar::ratio(a * den, den - num);
        prop_assert_eq!(v.exact.as_ref(), expected.as_exact());
    }

    #[test]
    fn path_metric_triangle_inequality(spec in family(), picks in prop::collection::vec(any::<prop::sample::Index>(), 3)) {
        let g = truncate(&spec, 3).unwrap();
        let n = g.vertex_count();
        let [u, v, w] = [picks[0].index(n), picks[1].index(n), picks[2].index(n)];
        let d = |x, y| g.path_metric(x, y).unwrap();
        prop_assert!(d(u, w) <= d(u, v) + d(v, w) + 1e-12 * (1.0 + d(u, v) + d(v, w)));
        prop_assert!((d(u, v) - d(v, u)).abs() <= 1e-12 * (1.0 + d(u, v)));
        prop_assert_eq!(d(u, u), 0.0);
    }

    #[test]
    fn truncation_scales_with_lengths(spec in family()) {
        let g = truncate(&spec, 3).unwrap();
        let h = truncate(&spec.scaled(&Scalar::int(2)), 3).unwrap();
        prop_assert_eq!(g.vertex_count(), h.vertex_count());
        prop_assert!((h.volume() - 2.0 * g.volume()).abs() <= 1e-12 * g.volume().max(1.0));
    }

    #[test]
    fn rule_engine_is_sound(spec in family()) {
        let r = classify(&spec).unwrap();
        let c0 = r.ends.finite_volume;
        prop_assert_eq!(r.deficiency.gaffney_min, c0);
        prop_assert_eq!(r.deficiency.kirchhoff_min_lower_bound, c0);
        if c0 == ExtendedCount::ZERO || c0.is_infinite() {
            prop_assert_ne!(r.gaffney_status.status, GaffneyStatus::ClosedNotSelfAdjoint);
        }
        prop_assert_eq!(r.gaffney_status.status == GaffneyStatus::SelfAdjoint, c0 == ExtendedCount::ZERO);
        prop_assert_eq!(r.markovian_unique.unique, r.gaffney_status.status == GaffneyStatus::SelfAdjoint);
        if let qgends::Family::RadialTree { .. } = spec.family {
            let divergent = matches!(volume_family(&spec).unwrap(), SeriesSum::Divergent);
            prop_assert_eq!(r.gaffney_status.status == GaffneyStatus::SelfAdjoint, divergent);
            prop_assert_eq!(r.gaffney_status.status == GaffneyStatus::NotClosed, !divergent);
        }
    }

    #[test]
    fn verdicts_are_scale_invariant(spec in family(), up in any::<bool>()) {
        let c = if up { Scalar::int(2) } else { Scalar::ratio(1, 2) };
        let r = classify(&spec).unwrap();
        let s = classify(&spec.scaled(&c)).unwrap();
        prop_assert_eq!(r.gaffney_status, s.gaffney_status);
        prop_assert_eq!(r.kirchhoff_selfadjoint, s.kirchhoff_selfadjoint);
        prop_assert_eq!(r.markovian_unique, s.markovian_unique);
        prop_assert_eq!(r.deficiency, s.deficiency);
        prop_assert_eq!(r.ends.total, s.ends.total);
        prop_assert_eq!(r.ends.finite_volume, s.ends.finite_volume);
        prop_assert_eq!(r.ends.free_finite_volume, s.ends.free_finite_volume);
    }
}
