//! Two-level memory simulation of CDAG schedules.
//!
//! Fast memory holds `M` words, one per value. Inputs start in slow memory.
//! Before a vertex executes, each operand that is not resident is read; the
//! result then takes one word. A computed value evicted while it still has
//! uses is written once and is clean from then on. A value with no remaining
//! use is dropped; an output is written at that point unless already spilled.
//! Each vertex executes exactly once.

mod engine;
mod plan;
mod sweep;

use std::collections::{BTreeMap, HashSet};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::cdag::{Cdag, CdagError, Layout, Part, VertexKind};

pub use engine::{Access, Memory, Tally};
pub use plan::{block_depth_for, simulate_implicit, DfsPlan, Visit};
pub use sweep::{loglog_slope, parse_csv, parse_range, sweep, to_csv, SweepConfig, SweepRow, SweepSchedule, CSV_HEADER};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("M = {m} is below the {need} words one operation needs")]
    MemoryTooSmall { m: usize, need: usize },
    #[error("schedule is not topological: vertex {vertex} runs before its operand {operand}")]
    NotTopological { vertex: usize, operand: usize },
    #[error("schedule is not a permutation of the non-input vertices: {0}")]
    NotPermutation(String),
    #[error("graph lacks recursive structure: {0}")]
    NoRecursiveMeta(String),
    #[error("segment size must be at least 1")]
    SegmentSize,
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Cdag(#[from] CdagError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    /// Evict the value whose next use is furthest in the future.
    Belady,
    Lru,
}

impl Policy {
    pub fn label(self) -> &'static str {
        match self {
            Policy::Belady => "belady",
            Policy::Lru => "lru",
        }
    }
}

impl FromStr for Policy {
    type Err = IoError;
    fn from_str(s: &str) -> Result<Self, IoError> {
        match s.to_ascii_lowercase().as_str() {
            "belady" | "min" | "opt" => Ok(Policy::Belady),
            "lru" => Ok(Policy::Lru),
            _ => Err(IoError::Config(format!("unknown policy `{s}` (belady, lru)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScheduleKind {
    /// Depth-first recursion; subproblems at `cutoff_depth` run as blocks.
    Dfs { cutoff_depth: Option<usize> },
    BfsByLevel,
    RandomTopo(u64),
    User,
}

impl ScheduleKind {
    pub fn label(&self) -> String {
        match self {
            ScheduleKind::Dfs { cutoff_depth: None } => "dfs".into(),
            ScheduleKind::Dfs { cutoff_depth: Some(d) } => format!("dfs(cutoff={d})"),
            ScheduleKind::BfsByLevel => "bfs".into(),
            ScheduleKind::RandomTopo(s) => format!("random({s})"),
            ScheduleKind::User => "user".into(),
        }
    }
}

/// A total order of the non-input vertices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    pub order: Vec<usize>,
    pub kind: ScheduleKind,
}

impl Schedule {
    pub fn user(order: Vec<usize>) -> Self {
        Self { order, kind: ScheduleKind::User }
    }

    /// Position of every vertex in the order; inputs get `None`.
    pub fn positions(&self, n: usize) -> Vec<Option<usize>> {
        let mut pos = vec![None; n];
        for (t, &v) in self.order.iter().enumerate() {
            if v < n {
                pos[v] = Some(t);
            }
        }
        pos
    }

    /// Check the order is a permutation of the non-input vertices of `g` and
    /// that every operand is an input or runs earlier.
    pub fn validate(&self, g: &Cdag) -> Result<Vec<Option<usize>>, IoError> {
        let n = g.num_vertices();
        let mut pos = vec![None; n];
        for (t, &v) in self.order.iter().enumerate() {
            if v >= n {
                return Err(IoError::NotPermutation(format!("vertex {v} out of range")));
            }
            if g.in_degree(v) == 0 {
                return Err(IoError::NotPermutation(format!("input {v} is scheduled")));
            }
            if pos[v].replace(t).is_some() {
                return Err(IoError::NotPermutation(format!("vertex {v} appears twice")));
            }
        }
        if let Some(v) = (0..n).find(|&v| g.in_degree(v) > 0 && pos[v].is_none()) {
            return Err(IoError::NotPermutation(format!("vertex {v} is missing")));
        }
        for &v in &self.order {
            for &u in g.preds(v) {
                if g.in_degree(u) > 0 && pos[u] >= pos[v] {
                    return Err(IoError::NotTopological { vertex: v, operand: u });
                }
            }
        }
        Ok(pos)
    }
}

fn full_layout(g: &Cdag) -> Result<Layout, IoError> {
    let meta = &g.meta;
    if meta.part != Part::Full {
        return Err(IoError::NoRecursiveMeta(format!("part is {:?}, dfs needs a full graph", meta.part)));
    }
    if meta.expanded.is_some() || meta.schemes.is_empty() {
        return Err(IoError::NoRecursiveMeta("dfs needs a collapsed graph built from schemes".into()));
    }
    let layout = Layout::new(&meta.schemes, meta.k, Part::Full, meta.identify_unit_rows)?;
    if layout.num_vertices() != g.num_vertices() {
        return Err(IoError::NoRecursiveMeta("vertex count does not match the recursive layout".into()));
    }
    Ok(layout)
}

/// Depth-first recursive order of a full graph. Each recursion step computes,
/// per product, that product's encoded operands and then recurses; the
/// decode of the step comes last. Subproblems at `cutoff_depth` are emitted
/// whole: encode A, encode B, products, decode.
pub fn dfs_schedule(g: &Cdag, cutoff_depth: Option<usize>) -> Result<Schedule, IoError> {
    let layout = full_layout(g)?;
    let plan = DfsPlan::new(layout, cutoff_depth);
    let mut order = Vec::with_capacity(g.num_vertices());
    plan.walk(|v: Visit| order.push(v.id as usize));
    Ok(Schedule { order, kind: ScheduleKind::Dfs { cutoff_depth } })
}

/// Non-input vertices by distance from the inputs, then by id.
pub fn bfs_schedule(g: &Cdag) -> Schedule {
    let mut depth = vec![0usize; g.num_vertices()];
    let topo = topological(g);
    for &v in &topo {
        depth[v] = g.preds(v).iter().map(|&u| depth[u] + 1).max().unwrap_or(0);
    }
    let mut order: Vec<usize> = (0..g.num_vertices()).filter(|&v| g.in_degree(v) > 0).collect();
    order.sort_by_key(|&v| (depth[v], v));
    Schedule { order, kind: ScheduleKind::BfsByLevel }
}

fn topological(g: &Cdag) -> Vec<usize> {
    let n = g.num_vertices();
    let mut indeg: Vec<usize> = (0..n).map(|v| g.in_degree(v)).collect();
    let mut stack: Vec<usize> = (0..n).rev().filter(|&v| indeg[v] == 0).collect();
    let mut out = Vec::with_capacity(n);
    while let Some(v) = stack.pop() {
        out.push(v);
        for &s in g.succs(v) {
            indeg[s] -= 1;
            if indeg[s] == 0 {
                stack.push(s);
            }
        }
    }
    out
}

/// Topological order built by repeatedly picking a uniformly random ready vertex.
pub fn random_topo_schedule(g: &Cdag, seed: u64) -> Schedule {
    let n = g.num_vertices();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pending: Vec<usize> = (0..n).map(|v| g.in_degree(v)).collect();
    let mut ready: Vec<usize> = Vec::new();
    let release = |v: usize, pending: &mut Vec<usize>, ready: &mut Vec<usize>| {
        for &s in g.succs(v) {
            pending[s] -= 1;
            if pending[s] == 0 {
                ready.push(s);
            }
        }
    };
    for v in 0..n {
        if g.in_degree(v) == 0 {
            release(v, &mut pending, &mut ready);
        }
    }
    let mut order = Vec::with_capacity(n);
    while !ready.is_empty() {
        let i = rng.random_range(0..ready.len());
        let v = ready.swap_remove(i);
        order.push(v);
        release(v, &mut pending, &mut ready);
    }
    Schedule { order, kind: ScheduleKind::RandomTopo(seed) }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SimReport {
    pub reads: u64,
    pub writes: u64,
    pub total: u64,
    pub m_words: usize,
    pub policy: Policy,
    pub schedule: String,
    pub peak_resident: usize,
    pub executed: u64,
    /// First reads of inputs.
    pub compulsory_reads: u64,
    /// Reads of values that had been evicted.
    pub reloads: u64,
    /// Writes of evicted dirty values.
    pub spills: u64,
    /// Writes of outputs never spilled.
    pub output_flushes: u64,
    pub distinct_inputs_used: u64,
}

impl SimReport {
    pub(crate) fn from_tally(t: Tally, m_words: usize, policy: Policy, schedule: String) -> Self {
        Self {
            reads: t.compulsory_reads + t.reloads,
            writes: t.spills + t.output_flushes,
            total: t.compulsory_reads + t.reloads + t.spills + t.output_flushes,
            m_words,
            policy,
            schedule,
            peak_resident: t.peak,
            executed: t.executed,
            compulsory_reads: t.compulsory_reads,
            reloads: t.reloads,
            spills: t.spills,
            output_flushes: t.output_flushes,
            distinct_inputs_used: t.compulsory_reads,
        }
    }
}

/// Words one operation needs: its distinct operands plus the result.
pub fn memory_needed(g: &Cdag) -> usize {
    (0..g.num_vertices())
        .map(|v| g.preds(v).iter().collect::<HashSet<_>>().len() + 1)
        .max()
        .unwrap_or(1)
}

/// Consumer positions of every vertex in schedule order, CSR.
struct Uses {
    off: Vec<usize>,
    at: Vec<u64>,
    cursor: Vec<usize>,
}

impl Uses {
    fn new(g: &Cdag, pos: &[Option<usize>]) -> Self {
        let n = g.num_vertices();
        let mut off = Vec::with_capacity(n + 1);
        let mut at = Vec::with_capacity(g.num_edges());
        off.push(0);
        for v in 0..n {
            let start = at.len();
            at.extend(g.succs(v).iter().filter_map(|&s| pos[s].map(|p| p as u64)));
            at[start..].sort_unstable();
            off.push(at.len());
        }
        let cursor = off[..n].to_vec();
        Self { off, at, cursor }
    }

    /// First use strictly after `t`.
    fn next_after(&mut self, v: usize, t: u64) -> Option<u64> {
        let end = self.off[v + 1];
        let c = &mut self.cursor[v];
        while *c < end && self.at[*c] <= t {
            *c += 1;
        }
        (*c < end).then(|| self.at[*c])
    }
}

/// Run `sched` on `g` with `m_words` of fast memory.
pub fn simulate(g: &Cdag, sched: &Schedule, m_words: usize, policy: Policy) -> Result<SimReport, IoError> {
    let need = memory_needed(g);
    if m_words < need {
        return Err(IoError::MemoryTooSmall { m: m_words, need });
    }
    let pos = sched.validate(g)?;
    let mut uses = Uses::new(g, &pos);
    let outputs = g.output_mask();
    let mut mem = Memory::new(m_words, policy);
    let mut operands: Vec<Access> = Vec::new();
    for (t, &v) in sched.order.iter().enumerate() {
        let t = t as u64;
        operands.clear();
        for &u in g.preds(v) {
            if operands.iter().any(|a| a.id == u as u64) {
                continue;
            }
            operands.push(Access { id: u as u64, input: g.in_degree(u) == 0, output: outputs[u], next: None });
        }
        for a in operands.iter_mut() {
            a.next = uses.next_after(a.id as usize, t);
        }
        let next = uses.next_after(v, t);
        mem.execute(t, v as u64, &operands, next, outputs[v]);
    }
    let tally = mem.finish();
    Ok(SimReport::from_tally(tally, m_words, policy, sched.kind.label()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Segment {
    /// `|R_S|`: vertices outside the segment with an edge into it.
    pub reads: usize,
    /// `|W_S|`: vertices in the segment used later or of output kind.
    pub writes: usize,
    /// `|W_S|` counting edges only.
    pub writes_edges_only: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentBoundReport {
    pub segment_size: usize,
    pub m_words: usize,
    pub segments: Vec<Segment>,
    /// `sum max(0, |R_S| - M) + max(0, |W_S| - M)`.
    pub bound: u64,
    /// `sum |R_S| + |W_S| - 2M`, unclamped.
    pub raw: i64,
    /// Clamped bound with the edge-only `W_S`.
    pub edges_only_bound: u64,
    /// Theoretical segment size `9 M^(omega0 / 2)`, when known.
    pub theoretical_s: Option<f64>,
}

/// Partition the order into contiguous segments of `s` vertices and bound the I/O.
pub fn segment_bound(g: &Cdag, sched: &Schedule, s: usize, m_words: usize) -> Result<SegmentBoundReport, IoError> {
    if s == 0 {
        return Err(IoError::SegmentSize);
    }
    let pos = sched.validate(g)?;
    let outputs = g.output_mask();
    let mut segments = Vec::new();
    let mut seen_r: HashSet<usize> = HashSet::new();
    for (index, chunk) in sched.order.chunks(s).enumerate() {
        let (a, b) = (index * s, index * s + chunk.len());
        seen_r.clear();
        let mut writes = 0;
        let mut writes_edges_only = 0;
        for &v in chunk {
            for &u in g.preds(v) {
                if pos[u].is_none_or(|p| p < a) {
                    seen_r.insert(u);
                }
            }
            let later = g.succs(v).iter().any(|&x| pos[x].is_some_and(|p| p >= b));
            writes_edges_only += usize::from(later);
            writes += usize::from(later || outputs[v]);
        }
        segments.push(Segment { reads: seen_r.len(), writes, writes_edges_only });
    }
    Ok(summarize(s, m_words, segments, None))
}

fn summarize(s: usize, m: usize, segments: Vec<Segment>, theoretical_s: Option<f64>) -> SegmentBoundReport {
    let clamp = |x: usize| x.saturating_sub(m) as u64;
    let bound = segments.iter().map(|x| clamp(x.reads) + clamp(x.writes)).sum();
    let edges_only_bound = segments.iter().map(|x| clamp(x.reads) + clamp(x.writes_edges_only)).sum();
    let raw = segments.iter().map(|x| x.reads as i64 + x.writes as i64 - 2 * m as i64).sum();
    SegmentBoundReport { segment_size: s, m_words: m, segments, bound, raw, edges_only_bound, theoretical_s }
}

/// Segment sizes `1, 2, 4, ...` up to the schedule length.
pub fn segment_grid(len: usize) -> Vec<usize> {
    let mut grid = Vec::new();
    let mut s = 1;
    while s < len {
        grid.push(s);
        s *= 2;
    }
    grid.push(len.max(1));
    grid
}

/// Best clamped bound over the geometric grid of segment sizes.
pub fn optimal_segment_bound(g: &Cdag, sched: &Schedule, m_words: usize) -> Result<SegmentBoundReport, IoError> {
    let mut best: Option<SegmentBoundReport> = None;
    for s in segment_grid(sched.order.len()) {
        let r = segment_bound(g, sched, s, m_words)?;
        if best.as_ref().is_none_or(|b| r.bound > b.bound) {
            best = Some(r);
        }
    }
    let mut best = best.expect("grid is nonempty");
    let omega0 = g.meta.schemes.first().map(|s| s.omega0());
    best.theoretical_s = omega0.map(|w| 9.0 * (m_words as f64).powf(w / 2.0));
    Ok(best)
}

/// Clamped bounds for every grid size, keyed by segment size.
pub fn segment_profile(g: &Cdag, sched: &Schedule, m_words: usize) -> Result<BTreeMap<usize, u64>, IoError> {
    segment_grid(sched.order.len())
        .into_iter()
        .map(|s| segment_bound(g, sched, s, m_words).map(|r| (s, r.bound)))
        .collect()
}

/// Number of output-kind vertices, for reporting.
pub fn count_outputs(g: &Cdag) -> usize {
    g.count_kind(VertexKind::Output)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cdag::{build_full, BuildOptions};
    use crate::scheme::BilinearScheme;

    fn h(k: usize) -> Cdag {
        build_full(&[BilinearScheme::strassen()], k, BuildOptions::default()).unwrap()
    }

    #[test]
    fn compulsory_traffic_only() {
        let g = h(1);
        let s = dfs_schedule(&g, None).unwrap();
        let r = simulate(&g, &s, 50, Policy::Belady).unwrap();
        assert_eq!((r.reads, r.writes), (8, 4));
        let r = simulate(&g, &s, g.num_vertices(), Policy::Lru).unwrap();
        assert_eq!(r.total, 12);
    }

    #[test]
    fn h1_dfs_groups_products() {
        let g = h(1);
        let s = dfs_schedule(&g, None).unwrap();
        assert_eq!(s.order.len(), g.num_vertices() - 8);
        s.validate(&g).unwrap();
        let prods: Vec<usize> = s.order.iter().copied().filter(|&v| g.kind(v) == VertexKind::Product).collect();
        assert_eq!(prods.len(), 7);
        // Outputs come last.
        assert!(s.order[s.order.len() - 4..].iter().all(|&v| g.kind(v) == VertexKind::Output));
    }

    #[test]
    fn schedules_are_topological() {
        for k in 1..=4 {
            let g = h(k);
            dfs_schedule(&g, None).unwrap().validate(&g).unwrap();
            dfs_schedule(&g, Some(1)).unwrap().validate(&g).unwrap();
            bfs_schedule(&g).validate(&g).unwrap();
            random_topo_schedule(&g, 5).validate(&g).unwrap();
        }
        assert_eq!(random_topo_schedule(&h(2), 3), random_topo_schedule(&h(2), 3));
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = h(1);
        let s = dfs_schedule(&g, None).unwrap();
        assert!(matches!(simulate(&g, &s, 3, Policy::Lru), Err(IoError::MemoryTooSmall { .. })));
        let mut rev = s.clone();
        rev.order.reverse();
        assert!(matches!(simulate(&g, &rev, 50, Policy::Lru), Err(IoError::NotTopological { .. })));
        let mut short = s.clone();
        short.order.pop();
        assert!(matches!(simulate(&g, &short, 50, Policy::Lru), Err(IoError::NotPermutation(_))));
    }

    #[test]
    fn segment_bound_edge_cases() {
        let g = h(2);
        let s = dfs_schedule(&g, None).unwrap();
        let r = segment_bound(&g, &s, 10, g.num_vertices()).unwrap();
        assert_eq!(r.bound, 0);
        let all = segment_bound(&g, &s, s.order.len(), 0).unwrap();
        assert_eq!(all.bound as usize, 32 + 16);
        assert!(segment_bound(&g, &s, 0, 4).is_err());
    }

    #[test]
    fn simulation_dominates_segment_bound() {
        let g = h(3);
        for sched in [dfs_schedule(&g, None).unwrap(), random_topo_schedule(&g, 1)] {
            for m in [8, 16, 64] {
                let sim = simulate(&g, &sched, m, Policy::Belady).unwrap();
                let best = optimal_segment_bound(&g, &sched, m).unwrap();
                assert!(sim.total >= best.bound, "m={m}");
                assert!(best.bound as i64 >= best.raw);
            }
        }
    }
}
