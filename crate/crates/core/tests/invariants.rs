use btsfpp::cli::OutputTable;
use btsfpp::process::{btsfpp_pmf, btsfpp_pmf_wright, total_count_pmf};
use btsfpp::shock::{failure_density, reliability, reliability_general_geometric, reliability_mixture};
use btsfpp::{BivariateCount, MixingLaw, ProcessParams, ThresholdDist};
use proptest::prelude::*;

fn params() -> impl Strategy<Value = ProcessParams> {
    (0.2f64..1.0, 0.0f64..2.0, 0.1f64..3.0, 0.1f64..3.0)
        .prop_map(|(a, th, l1, l2)| ProcessParams::new(a, th, l1, l2).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pmf_is_a_subprobability(p in params(), t in 0.05f64..3.0, k1 in 0u64..6, k2 in 0u64..6) {
        let v = btsfpp_pmf(&p, BivariateCount::new(k1, k2), t).unwrap();
        prop_assert!((0.0..=1.0).contains(&v));
        let mass: f64 = total_count_pmf(&p, t, 40).unwrap().iter().sum();
        prop_assert!(mass <= 1.0 + 1e-12);
    }

    #[test]
    fn wright_route_agrees_below_lambda(p in params(), t in 0.05f64..2.0, k1 in 0u64..4, k2 in 0u64..4) {
        prop_assume!(p.theta < 0.9 * p.total_rate());
        let k = BivariateCount::new(k1, k2);
        let r = btsfpp_pmf(&p, k, t).unwrap();
        let w = btsfpp_pmf_wright(&p, k, t).unwrap();
        prop_assert!((r - w).abs() <= 1e-10 * r.max(1e-3), "{} vs {}", r, w);
    }

    #[test]
    fn reliability_decreases_in_time(p in params(), q in 0.05f64..0.95, t in 0.0f64..3.0, dt in 0.01f64..1.0) {
        let d = ThresholdDist::Geometric { p: q };
        let r0 = reliability(&p, &d, t).unwrap();
        let r1 = reliability(&p, &d, t + dt).unwrap();
        prop_assert!(r1 <= r0 + 1e-13);
        prop_assert!((0.0..=1.0 + 1e-13).contains(&r0));
    }

    #[test]
    fn densities_split_in_rate_ratio(p in params(), m in 1u64..6, t in 0.1f64..3.0) {
        let d = ThresholdDist::Deterministic { m };
        let g1 = failure_density(&p, &d, 1, t).unwrap();
        let g2 = failure_density(&p, &d, 2, t).unwrap();
        prop_assert!(((g1 * p.lambda2) - (g2 * p.lambda1)).abs() <= 1e-12 * (g1 + g2).max(1e-300));
    }

    #[test]
    fn uniform_mixture_lies_between_its_extremes(a in 0.2f64..1.0, th in 0.0f64..3.0, t in 0.05f64..4.0) {
        let p = ProcessParams::new(a, th, 1.0, 1.0).unwrap();
        let s = p.subordinator();
        let mix = reliability_mixture(&s, 1.0, 1.0, &MixingLaw::Uniform, t).unwrap();
        let lo = reliability_general_geometric(&s, 1.0, 1.0, 1.0, t).unwrap();
        prop_assert!(lo <= mix + 1e-12 && mix <= 1.0);
    }

    #[test]
    fn csv_round_trip(rows in prop::collection::vec(prop::collection::vec(-1e300f64..1e300, 3), 0..8)) {
        let mut table = OutputTable::new(vec!["a".into(), "b".into(), "c".into()]);
        for r in &rows {
            table.push(r.clone()).unwrap();
        }
        let back = OutputTable::from_csv(&table.to_csv()).unwrap();
        prop_assert_eq!(back, table);
    }
}
