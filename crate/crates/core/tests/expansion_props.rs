use fmm_io::expansion::{
    exact_expansion, heuristic_expansion, spectral_bounds, structured_seeds, study_graph, HeuristicConfig,
    StudyConfig, UGraph,
};
use fmm_io::BilinearScheme;
use num_rational::Ratio;
use proptest::prelude::*;

/// Random connected graph: a random spanning tree plus extra edges, padded with loops.
fn graph_strategy() -> impl Strategy<Value = UGraph> {
    (4usize..13)
        .prop_flat_map(|n| {
            let parents = (1..n).map(|v| 0..v).collect::<Vec<_>>();
            let extra = prop::collection::vec((0..n, 0..n), 0..2 * n);
            (Just(n), parents, extra)
        })
        .prop_map(|(n, parents, extra)| {
            let mut edges: Vec<(usize, usize)> = parents.iter().enumerate().map(|(i, &p)| (i + 1, p)).collect();
            edges.extend(extra.into_iter().filter(|(a, b)| a != b));
            let mut deg = vec![0; n];
            for &(a, b) in &edges {
                deg[a] += 1;
                deg[b] += 1;
            }
            let d = deg.into_iter().max().unwrap_or(1);
            UGraph::from_edges(n, &edges, d).unwrap()
        })
}

#[test]
fn strassen_dec1_exact_value() {
    let g = study_graph(&BilinearScheme::strassen(), 1, &StudyConfig::default()).unwrap();
    let u = UGraph::from_cdag(&g).unwrap();
    let e = exact_expansion(&u, None).unwrap();
    assert_eq!(e.ratio, Some(Ratio::new(1, 18)));
    let h = heuristic_expansion(&u, &structured_seeds(&g), HeuristicConfig::new(1, 10_000));
    assert_eq!(h.ratio, e.ratio);
}

#[test]
fn heuristic_is_deterministic_per_seed() {
    let g = study_graph(&BilinearScheme::winograd(), 2, &StudyConfig::default()).unwrap();
    let u = UGraph::from_cdag(&g).unwrap();
    let seeds = structured_seeds(&g);
    let a = heuristic_expansion(&u, &seeds, HeuristicConfig::new(5, 2000));
    let b = heuristic_expansion(&u, &seeds, HeuristicConfig::new(5, 2000));
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sandwich_on_random_graphs(g in graph_strategy(), seed in 0u64..1000) {
        let exact = exact_expansion(&g, None).unwrap();
        let heur = heuristic_expansion(&g, &[], HeuristicConfig::new(seed, 2000));
        let spec = spectral_bounds(&g).unwrap();
        prop_assert!(spec.lower <= exact.value + 1e-9);
        prop_assert!(exact.value <= spec.upper + 1e-9);
        prop_assert!(exact.ratio <= heur.ratio);
        prop_assert_eq!(exact.recompute(&g), exact.ratio);
        prop_assert_eq!(heur.recompute(&g), heur.ratio);
        let w = heur.witness.as_ref().unwrap();
        prop_assert!(!w.is_empty() && w.len() <= g.num_vertices() / 2);
    }

    #[test]
    fn size_cap_is_respected(g in graph_strategy(), cap in 1usize..4, seed in 0u64..100) {
        let capped = exact_expansion(&g, Some(cap)).unwrap();
        let free = exact_expansion(&g, None).unwrap();
        prop_assert!(capped.witness.as_ref().unwrap().len() <= cap);
        prop_assert!(free.ratio <= capped.ratio);
        let h = heuristic_expansion(&g, &[], HeuristicConfig::new(seed, 500).with_cap(cap));
        prop_assert!(h.witness.as_ref().unwrap().len() <= cap);
        prop_assert!(capped.ratio <= h.ratio);
    }
}
