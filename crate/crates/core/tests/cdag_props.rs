use fmm_io::cdag::{
    build_dec, build_full, build_part, decompose, expand_binary, export, import, regularize, BuildOptions, Part,
    TreeShape,
};
use fmm_io::BilinearScheme;
use proptest::prelude::*;

fn pick(codes: &[u8]) -> Vec<BilinearScheme> {
    codes
        .iter()
        .map(|c| match c % 3 {
            0 => BilinearScheme::strassen(),
            1 => BilinearScheme::winograd(),
            _ => BilinearScheme::classical(2),
        })
        .collect()
}

#[test]
fn dec_level_sizes_for_small_k() {
    let s = [BilinearScheme::strassen()];
    assert_eq!(build_dec(&s, 1).unwrap().level_sizes(), vec![4, 7]);
    assert_eq!(build_dec(&s, 2).unwrap().level_sizes(), vec![16, 28, 49]);
    assert_eq!(build_dec(&s, 2).unwrap().num_vertices(), 93);
}

#[test]
fn unit_row_identification_option() {
    let s = [BilinearScheme::strassen()];
    let merged = build_part(&s, 1, Part::EncA, BuildOptions { identify_unit_rows: true }).unwrap();
    let copies = build_part(&s, 1, Part::EncA, BuildOptions { identify_unit_rows: false }).unwrap();
    assert_eq!(merged.num_edges(), 10);
    assert_eq!(copies.num_edges(), 12);
    assert!(copies.num_vertices() > merged.num_vertices());
}

#[test]
fn dec_of_classical_is_disconnected() {
    let g = build_dec(&[BilinearScheme::classical(2)], 1).unwrap();
    assert_eq!(g.weak_components(), 4);
    assert_eq!(build_dec(&[BilinearScheme::strassen()], 2).unwrap().weak_components(), 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn structure_of_mixed_graphs(codes in prop::collection::vec(any::<u8>(), 1..4)) {
        let s = pick(&codes);
        let k = s.len();
        let dec = build_dec(&s, k).unwrap();
        prop_assert!(dec.ids_are_topological());
        let sizes = dec.level_sizes();
        // Level i has n^2 entries per path: (prod of m above) * (prod of n0^2 below).
        for i in 1..=k + 1 {
            let above: usize = s[..i - 1].iter().map(|x| x.m).product();
            let below: usize = s[i - 1..].iter().map(|x| x.n0 * x.n0).product();
            prop_assert_eq!(sizes[i - 1], above * below);
        }
        let full = build_full(&s, k, BuildOptions::default()).unwrap();
        prop_assert!(full.ids_are_topological());
        prop_assert_eq!(full.outputs().len(), dec.outputs().len());
        prop_assert_eq!(import(&export(&full)).unwrap(), full);
    }

    #[test]
    fn expansion_and_regularization(codes in prop::collection::vec(any::<u8>(), 1..3), seed in any::<u64>()) {
        let s = pick(&codes);
        let dec = build_dec(&s, s.len()).unwrap();
        for shape in [TreeShape::LeftChain, TreeShape::Random(seed)] {
            let e = expand_binary(&dec, shape);
            prop_assert!(e.max_in_degree() <= 2);
            prop_assert_eq!(e.original_ids().len(), dec.num_vertices());
            let d = e.max_degree().max(6);
            let r = regularize(&e, d).unwrap();
            prop_assert!((0..r.num_vertices()).all(|v| r.degree(v) == d));
            prop_assert_eq!(import(&export(&r)).unwrap(), r);
        }
    }

    #[test]
    fn decomposition_partitions_edges(codes in prop::collection::vec(0u8..2, 1..4)) {
        let s = pick(&codes);
        let g = build_dec(&s, s.len()).unwrap();
        let copies = decompose(&g, 1).unwrap();
        let mut covered: Vec<(usize, usize)> = copies.iter().flat_map(|c| c.edges.iter().copied()).collect();
        covered.sort_unstable();
        let mut all: Vec<(usize, usize)> = g.edges().collect();
        all.sort_unstable();
        prop_assert_eq!(covered, all);
    }
}
