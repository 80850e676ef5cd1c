use fmm_io::scheme::{BilinearScheme, Coeff};
use num_bigint::BigInt;
use num_traits::{One, Zero};
use proptest::prelude::*;

fn builtins() -> Vec<BilinearScheme> {
    vec![
        BilinearScheme::strassen(),
        BilinearScheme::winograd(),
        BilinearScheme::classical(2),
        BilinearScheme::classical(3),
    ]
}

fn to_coeff(v: &[i64], n: usize) -> Vec<Vec<Coeff>> {
    (0..n).map(|r| (0..n).map(|c| Coeff::from_integer(BigInt::from(v[r * n + c]))).collect()).collect()
}

fn classical_product(a: &[Vec<Coeff>], b: &[Vec<Coeff>]) -> Vec<Vec<Coeff>> {
    let n = a.len();
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).fold(Coeff::zero(), |acc, t| acc + &a[i][t] * &b[t][j])).collect())
        .collect()
}

#[test]
fn builtins_validate() {
    for s in builtins() {
        let r = s.validate().unwrap();
        assert!(r.valid, "{}", s.name);
        assert!(r.witness.is_none());
        assert!((r.omega0 - (s.m as f64).ln() / (s.n0 as f64).ln()).abs() < 1e-12);
    }
}

#[test]
fn classical_dec1_is_disconnected() {
    let r = BilinearScheme::classical(2).validate().unwrap();
    assert!(!r.dec1_connected);
    assert_eq!(r.dec1_components, 4);
    assert!(BilinearScheme::strassen().validate().unwrap().dec1_connected);
    assert!(BilinearScheme::winograd().validate().unwrap().dec1_connected);
}

#[test]
fn builtin_names_resolve() {
    assert_eq!(BilinearScheme::builtin("classical3").unwrap().n0, 3);
    assert_eq!(BilinearScheme::builtin("classical4x4").unwrap().m, 64);
    assert!(BilinearScheme::builtin("classical3x4").is_err());
    assert!(BilinearScheme::builtin("no-such-scheme").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn one_level_equals_classical_product(
        which in 0usize..4,
        a in prop::collection::vec(-50i64..50, 9),
        b in prop::collection::vec(-50i64..50, 9),
    ) {
        let s = &builtins()[which];
        let n = s.n0;
        let (a, b) = (to_coeff(&a, n), to_coeff(&b, n));
        prop_assert_eq!(s.apply(&a, &b), classical_product(&a, &b));
    }

    #[test]
    fn document_round_trip(which in 0usize..4) {
        let s = &builtins()[which];
        let back = BilinearScheme::parse(&s.to_document()).unwrap();
        prop_assert_eq!(&back, s);
    }

    #[test]
    fn perturbed_coefficient_breaks_validity(
        which in 0usize..3,
        part in 0usize..3,
        row in 0usize..7,
        col in 0usize..4,
    ) {
        let mut s = builtins()[which].clone();
        let cell = match part {
            0 => &mut s.u[row][col],
            1 => &mut s.v[row][col],
            _ => &mut s.w[col][row],
        };
        *cell = &*cell + Coeff::one();
        let r = s.validate().unwrap();
        prop_assert!(!r.valid);
        prop_assert!(r.witness.is_some());
    }
}
