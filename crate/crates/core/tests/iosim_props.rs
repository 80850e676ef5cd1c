use fmm_io::cdag::{build_full, BuildOptions, Cdag};
use fmm_io::iosim::{
    dfs_schedule, random_topo_schedule, segment_bound, simulate, simulate_implicit, Policy, Schedule,
};
use fmm_io::BilinearScheme;
use proptest::prelude::*;

fn graph(which: u8, k: usize) -> Cdag {
    let s = match which % 3 {
        0 => BilinearScheme::strassen(),
        1 => BilinearScheme::winograd(),
        _ => BilinearScheme::classical(2),
    };
    build_full(&[s], k, BuildOptions::default()).unwrap()
}

fn policy(b: bool) -> Policy {
    if b {
        Policy::Belady
    } else {
        Policy::Lru
    }
}

#[test]
fn large_memory_pays_compulsory_traffic_only() {
    for k in 1..=3 {
        let g = graph(0, k);
        let sched = dfs_schedule(&g, None).unwrap();
        for p in [Policy::Belady, Policy::Lru] {
            let r = simulate(&g, &sched, g.num_vertices(), p).unwrap();
            assert_eq!(r.total as usize, g.inputs().len() + g.outputs().len());
        }
    }
}

/// Random topological orders lose to depth-first on H_3 with small M.
#[test]
fn random_orders_mostly_lose_to_dfs() {
    let g = graph(0, 3);
    let m = 16;
    let dfs = simulate(&g, &dfs_schedule(&g, None).unwrap(), m, Policy::Belady).unwrap().total;
    let worse = (0..20u64)
        .filter(|&seed| simulate(&g, &random_topo_schedule(&g, seed), m, Policy::Belady).unwrap().total >= dfs)
        .count();
    assert!(worse >= 18, "random >= dfs in only {worse} of 20 seeds");
}

#[test]
fn random_schedule_is_seeded() {
    let g = graph(1, 3);
    assert_eq!(random_topo_schedule(&g, 9), random_topo_schedule(&g, 9));
    assert_ne!(random_topo_schedule(&g, 9).order, random_topo_schedule(&g, 10).order);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn conservation_and_lower_bounds(
        which in any::<u8>(),
        k in 1usize..4,
        seed in any::<u64>(),
        random in any::<bool>(),
        belady in any::<bool>(),
        m in 5usize..200,
        s in 1usize..400,
    ) {
        let g = graph(which, k);
        let sched: Schedule = if random { random_topo_schedule(&g, seed) } else { dfs_schedule(&g, None).unwrap() };
        let r = simulate(&g, &sched, m, policy(belady)).unwrap();
        prop_assert_eq!(r.executed as usize, sched.order.len());
        prop_assert_eq!(r.executed as usize, g.num_vertices() - g.inputs().len());
        prop_assert_eq!(r.reads, r.compulsory_reads + r.reloads);
        prop_assert_eq!(r.writes, r.spills + r.output_flushes);
        prop_assert_eq!(r.total, r.reads + r.writes);
        prop_assert!(r.reads >= r.distinct_inputs_used);
        prop_assert!(r.writes as usize >= g.outputs().len());
        prop_assert!(r.peak_resident <= m);
        let b = segment_bound(&g, &sched, s, m).unwrap();
        prop_assert!(r.total >= b.bound);
        prop_assert!(b.bound as i64 >= b.raw);
        prop_assert!(b.bound >= b.edges_only_bound);
    }

    #[test]
    fn implicit_matches_explicit(which in 0u8..3, k in 1usize..4, m in 5usize..100, belady in any::<bool>(), cut in 0usize..4) {
        let g = graph(which, k);
        let cutoff = (cut < 3).then_some(cut);
        let explicit = simulate(&g, &dfs_schedule(&g, cutoff).unwrap(), m, policy(belady)).unwrap();
        let implicit = simulate_implicit(&g.meta.schemes, k, true, cutoff, m, policy(belady)).unwrap();
        prop_assert_eq!(explicit, implicit);
    }
}
