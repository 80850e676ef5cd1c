use fmm_io::bounds::{latency_lower, parallel_lower, sequential_lower, upper_bound, BoundQuery};
use proptest::prelude::*;

#[test]
fn exact_values_for_strassen() {
    let q = BoundQuery::strassen(1024, 64);
    let s = sequential_lower(&q).unwrap();
    // (1024 / 8)^lg7 * 64 = 7^7 * 64.
    assert_eq!(s.exact, Some(7u128.pow(7) * 64));
    assert_eq!(latency_lower(&q).unwrap().exact, Some(7u128.pow(7)));
    assert!(BoundQuery::new(4, 64, 2.807).validate().is_ok());
    assert!(!BoundQuery::new(4, 64, 2.807).in_regime());
    assert!(BoundQuery::new(0, 64, 2.807).validate().is_err());
    assert!(BoundQuery::new(8, 64, 2.0).validate().is_err());
}

proptest! {
    #[test]
    fn scaling_laws(n in 16u64..1_000_000, m in 1u64..100_000, p in 1u64..10_000, omega in 2.01f64..3.0) {
        let q = BoundQuery::new(n, m, omega);
        let s = sequential_lower(&q).unwrap();
        prop_assert!(s.value > 0.0);
        prop_assert_eq!(upper_bound(&q).unwrap().log2, s.log2);
        let par = parallel_lower(&q.with_p(p)).unwrap();
        prop_assert!((par.log2 - (s.log2 - (p as f64).log2())).abs() < 1e-9);
        let lat = latency_lower(&q).unwrap();
        prop_assert!((lat.log2 - (s.log2 - (m as f64).log2())).abs() < 1e-9);
        // Growing n grows the bound; growing M shrinks it (omega > 2).
        let bigger_n = sequential_lower(&BoundQuery::new(n + 1, m, omega)).unwrap();
        let bigger_m = sequential_lower(&BoundQuery::new(n, m + 1, omega)).unwrap();
        prop_assert!(bigger_n.log2 > s.log2);
        prop_assert!(bigger_m.log2 < s.log2);
    }
}
