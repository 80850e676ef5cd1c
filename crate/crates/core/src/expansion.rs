//! Edge expansion of regular graphs.
//!
//! For a `d`-regular graph, `h_s(G) = min |E(U, V \ U)| / (d |U|)` over nonempty
//! `U` with `|U| <= s`; `h(G)` takes `s = |V| / 2`. Edges are undirected and
//! self-loops count toward the degree but never cross a cut.
//!
//! Exact values come from enumerating connected subsets only. This loses
//! nothing: if `U` splits into components `U_1, ..., U_r` with no edges between
//! them, then `cut(U) = sum cut(U_i)` and `|U| = sum |U_i|`, so the smallest
//! ratio `cut(U_i) / |U_i|` is at most `cut(U) / |U|`, and every `U_i` is
//! smaller than `U`.

use std::cmp::Ordering;

use nalgebra::{DMatrix, SymmetricEigen};
use num_rational::Ratio;
use num_traits::ToPrimitive;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::cdag::{
    build_dec, decompose, expand_binary, regularize, Cdag, CdagError, GraphCopy, Layout, Part, TreeShape,
};
use crate::scheme::BilinearScheme;

#[derive(Debug, Error)]
pub enum ExpansionError {
    #[error("graph is not regular: vertex {vertex} has degree {degree}, expected {expected}")]
    NotRegular { vertex: usize, degree: usize, expected: usize },
    #[error("vertex {vertex} has degree {degree} above the regular degree {d}")]
    DegreeTooLarge { vertex: usize, degree: usize, d: usize },
    #[error("graph has no vertices")]
    Empty,
    #[error("exact enumeration over {vertices} vertices with size cap {cap} exceeds the guard of {limit} candidates")]
    TooLarge { vertices: usize, cap: usize, limit: u64 },
    #[error("{vertices} vertices exceed the dense eigensolver limit of {limit}")]
    SpectralTooLarge { vertices: usize, limit: usize },
    #[error("eigensolver residual {residual:e} above tolerance")]
    NoConvergence { residual: f64 },
    #[error("the base expansion from `{0}` has no exact value")]
    Inexact(&'static str),
    #[error("edge ({0}, {1}) references a missing vertex")]
    BadEdge(usize, usize),
    #[error(transparent)]
    Cdag(#[from] CdagError),
}

/// Exhaustive enumeration is always allowed up to this many vertices.
pub const EXACT_VERTEX_LIMIT: usize = 30;
/// Candidate limit for larger graphs when a size cap is given.
pub const EXACT_CANDIDATE_LIMIT: u64 = 1 << 25;
/// Largest graph handed to the dense eigensolver.
pub const SPECTRAL_LIMIT: usize = 4000;
pub const RESIDUAL_TOL: f64 = 1e-10;

/// Undirected `d`-regular multigraph; loops fill each vertex up to degree `d`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UGraph {
    adj: Vec<Vec<usize>>,
    d: usize,
}

impl UGraph {
    /// Build from undirected edges; every vertex is padded with loops to degree `d`.
    pub fn from_edges(n: usize, edges: &[(usize, usize)], d: usize) -> Result<Self, ExpansionError> {
        if n == 0 {
            return Err(ExpansionError::Empty);
        }
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(ExpansionError::BadEdge(a, b));
            }
            if a == b {
                continue;
            }
            adj[a].push(b);
            adj[b].push(a);
        }
        if let Some((v, l)) = adj.iter().enumerate().find(|(_, l)| l.len() > d) {
            return Err(ExpansionError::DegreeTooLarge { vertex: v, degree: l.len(), d });
        }
        Ok(Self { adj, d })
    }

    /// Undirected view of a regularized graph.
    pub fn from_cdag(g: &Cdag) -> Result<Self, ExpansionError> {
        if g.num_vertices() == 0 {
            return Err(ExpansionError::Empty);
        }
        let d = g.meta.regular_degree.unwrap_or_else(|| g.degree(0));
        if let Some(v) = (0..g.num_vertices()).find(|&v| g.degree(v) != d) {
            return Err(ExpansionError::NotRegular { vertex: v, degree: g.degree(v), expected: d });
        }
        let adj = (0..g.num_vertices())
            .map(|v| g.preds(v).iter().chain(g.succs(v)).copied().collect())
            .collect();
        Ok(Self { adj, d })
    }

    /// A copy from a decomposition, padded with loops to degree `d`.
    pub fn from_copy(copy: &GraphCopy, d: usize) -> Result<Self, ExpansionError> {
        let local = |v: usize| copy.vertices.binary_search(&v).expect("copy edge endpoints are copy vertices");
        let edges: Vec<(usize, usize)> = copy.edges.iter().map(|&(a, b)| (local(a), local(b))).collect();
        Self::from_edges(copy.vertices.len(), &edges, d)
    }

    pub fn num_vertices(&self) -> usize {
        self.adj.len()
    }

    pub fn degree(&self) -> usize {
        self.d
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn loops(&self, v: usize) -> usize {
        self.d - self.adj[v].len()
    }

    pub fn cut(&self, set: &[usize]) -> u64 {
        let mut inside = vec![false; self.num_vertices()];
        for &v in set {
            inside[v] = true;
        }
        let crossing: usize = set.iter().map(|&v| self.adj[v].iter().filter(|&&u| !inside[u]).count()).sum();
        crossing as u64
    }

    pub fn components(&self) -> usize {
        let n = self.num_vertices();
        let mut seen = vec![false; n];
        let mut count = 0;
        for s in 0..n {
            if seen[s] {
                continue;
            }
            count += 1;
            seen[s] = true;
            let mut stack = vec![s];
            while let Some(v) = stack.pop() {
                for &u in &self.adj[v] {
                    if !std::mem::replace(&mut seen[u], true) {
                        stack.push(u);
                    }
                }
            }
        }
        count
    }

    fn default_cap(&self, cap: Option<usize>) -> usize {
        let half = self.num_vertices() / 2;
        cap.map_or(half, |c| c.min(half)).max(1).min(self.num_vertices())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    Heuristic,
    SpectralLower,
    DecompositionLower,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Heuristic => "heuristic",
            Method::SpectralLower => "spectral-lower",
            Method::DecompositionLower => "decomposition-lower",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionReport {
    pub method: Method,
    pub value: f64,
    /// Exact value when the method produces one.
    pub ratio: Option<Ratio<u64>>,
    pub size_cap: Option<usize>,
    pub witness: Option<Vec<usize>>,
    pub cut: Option<u64>,
    pub degree: usize,
    pub seed: Option<u64>,
    /// Subsets enumerated (exact) or search steps taken (heuristic).
    pub evaluated: u64,
}

impl ExpansionReport {
    /// Recompute `cut / (d |U|)` from the graph; `None` without a witness.
    pub fn recompute(&self, g: &UGraph) -> Option<Ratio<u64>> {
        let w = self.witness.as_ref()?;
        Some(ratio(g.cut(w), g.degree(), w.len()))
    }
}

fn ratio(cut: u64, d: usize, size: usize) -> Ratio<u64> {
    Ratio::new(cut, (d * size) as u64)
}

fn ratio_f64(r: &Ratio<u64>) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// `cut_a / size_a < cut_b / size_b`.
fn less(cut_a: u64, size_a: usize, cut_b: u64, size_b: usize) -> bool {
    (cut_a as u128) * (size_b as u128) < (cut_b as u128) * (size_a as u128)
}

fn binomial_sum(n: usize, cap: usize, limit: u64) -> u64 {
    let mut total = 0u64;
    let mut c = 1u128;
    for j in 1..=cap {
        c = c * (n + 1 - j) as u128 / j as u128;
        total = total.saturating_add(c.min(u64::MAX as u128) as u64);
        if total > limit {
            return total;
        }
    }
    total
}

struct Enumerator<'a> {
    g: &'a UGraph,
    cap: usize,
    in_set: Vec<bool>,
    /// Edges from each vertex into the current set (with multiplicity).
    touch: Vec<u32>,
    set: Vec<usize>,
    cut: u64,
    best: (u64, Vec<usize>),
    evaluated: u64,
}

impl Enumerator<'_> {
    fn push(&mut self, w: usize) {
        let g = self.g;
        self.cut = self.cut + g.adj[w].len() as u64 - 2 * self.touch[w] as u64;
        self.in_set[w] = true;
        self.set.push(w);
        for &u in &g.adj[w] {
            self.touch[u] += 1;
        }
    }

    fn pop(&mut self) {
        let g = self.g;
        let w = self.set.pop().unwrap();
        for &u in &g.adj[w] {
            self.touch[u] -= 1;
        }
        self.in_set[w] = false;
        self.cut = self.cut + 2 * self.touch[w] as u64 - g.adj[w].len() as u64;
    }

    fn record(&mut self) {
        self.evaluated += 1;
        if less(self.cut, self.set.len(), self.best.0, self.best.1.len()) {
            self.best = (self.cut, self.set.clone());
        }
    }

    /// ESU extension step rooted at `root`.
    fn extend(&mut self, root: usize, ext: Vec<usize>) {
        self.record();
        if self.set.len() == self.cap {
            return;
        }
        let mut ext = ext;
        while let Some(w) = ext.pop() {
            let mut next = ext.clone();
            for &u in &self.g.adj[w] {
                if u > root && !self.in_set[u] && self.touch[u] == 0 && u != w && !next.contains(&u) {
                    next.push(u);
                }
            }
            self.push(w);
            self.extend(root, next);
            self.pop();
        }
    }
}

/// Exhaustive `h_s` over connected subsets of size at most `size_cap` (default `|V|/2`).
pub fn exact_expansion(g: &UGraph, size_cap: Option<usize>) -> Result<ExpansionReport, ExpansionError> {
    let n = g.num_vertices();
    let cap = g.default_cap(size_cap);
    if n > EXACT_VERTEX_LIMIT && binomial_sum(n, cap, EXACT_CANDIDATE_LIMIT) > EXACT_CANDIDATE_LIMIT {
        return Err(ExpansionError::TooLarge { vertices: n, cap, limit: EXACT_CANDIDATE_LIMIT });
    }
    let mut e = Enumerator {
        g,
        cap,
        in_set: vec![false; n],
        touch: vec![0; n],
        set: Vec::with_capacity(cap),
        cut: 0,
        best: (u64::MAX, vec![0]),
        evaluated: 0,
    };
    for v in 0..n {
        let ext: Vec<usize> = {
            let mut x: Vec<usize> = g.adj[v].iter().copied().filter(|&u| u > v).collect();
            x.sort_unstable();
            x.dedup();
            x
        };
        e.push(v);
        e.extend(v, ext);
        e.pop();
    }
    let (cut, mut witness) = e.best;
    witness.sort_unstable();
    let r = ratio(cut, g.d, witness.len());
    Ok(ExpansionReport {
        method: Method::Exact,
        value: ratio_f64(&r),
        ratio: Some(r),
        size_cap,
        witness: Some(witness),
        cut: Some(cut),
        degree: g.d,
        seed: None,
        evaluated: e.evaluated,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeuristicConfig {
    pub size_cap: Option<usize>,
    pub seed: u64,
    /// Total search steps: each seed evaluation and each move costs one.
    pub budget: u64,
}

impl HeuristicConfig {
    pub fn new(seed: u64, budget: u64) -> Self {
        Self { size_cap: None, seed, budget }
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.size_cap = Some(cap);
        self
    }
}

struct Search<'a> {
    g: &'a UGraph,
    cap: usize,
    member: Vec<bool>,
    touch: Vec<u32>,
    set: Vec<usize>,
    cut: u64,
}

impl<'a> Search<'a> {
    fn new(g: &'a UGraph, cap: usize) -> Self {
        let n = g.num_vertices();
        Self { g, cap, member: vec![false; n], touch: vec![0; n], set: Vec::new(), cut: 0 }
    }

    fn clear(&mut self) {
        for v in std::mem::take(&mut self.set) {
            self.member[v] = false;
            for &u in &self.g.adj[v] {
                self.touch[u] = 0;
            }
        }
        self.cut = 0;
    }

    fn size(&self) -> usize {
        self.member.iter().filter(|&&m| m).count()
    }

    fn toggle(&mut self, v: usize) {
        let deg = self.g.adj[v].len() as u64;
        let t = self.touch[v] as u64;
        if self.member[v] {
            self.cut = self.cut + 2 * t - deg;
            self.member[v] = false;
            for &u in &self.g.adj[v] {
                self.touch[u] -= 1;
            }
        } else {
            self.cut = self.cut + deg - 2 * t;
            self.member[v] = true;
            self.set.push(v);
            for &u in &self.g.adj[v] {
                self.touch[u] += 1;
            }
        }
    }

    fn load(&mut self, vs: &[usize]) {
        self.clear();
        for &v in vs {
            if !self.member[v] {
                self.toggle(v);
            }
        }
    }

    fn members(&self) -> Vec<usize> {
        let mut m: Vec<usize> = self.set.iter().copied().filter(|&v| self.member[v]).collect();
        m.sort_unstable();
        m.dedup();
        m
    }

    /// Best single add or remove, if it strictly improves the current ratio.
    fn best_move(&self, size: usize) -> Option<(usize, u64, usize)> {
        let mut best: Option<(usize, u64, usize)> = None;
        let (mut bc, mut bs) = (self.cut, size);
        for v in 0..self.g.num_vertices() {
            let deg = self.g.adj[v].len() as u64;
            let t = self.touch[v] as u64;
            let (c, s) = if self.member[v] {
                if size == 1 {
                    continue;
                }
                (self.cut + 2 * t - deg, size - 1)
            } else {
                if size == self.cap {
                    continue;
                }
                (self.cut + deg - 2 * t, size + 1)
            };
            if less(c, s, bc, bs) {
                best = Some((v, c, s));
                (bc, bs) = (c, s);
            }
        }
        best
    }
}

/// Local search for an upper bound on `h_s`: every seed set is evaluated and
/// descended first, then random connected starts until the budget is spent.
/// Restart `r` draws from `(seed, r)`, so a larger budget only extends the run.
pub fn heuristic_expansion(g: &UGraph, seeds: &[Vec<usize>], cfg: HeuristicConfig) -> ExpansionReport {
    let n = g.num_vertices();
    let cap = g.default_cap(cfg.size_cap);
    let mut s = Search::new(g, cap);
    let mut steps = 0u64;
    let mut best: (u64, Vec<usize>) = (u64::MAX, Vec::new());
    let descend = |s: &mut Search, steps: &mut u64, best: &mut (u64, Vec<usize>)| {
        let mut size = s.size();
        loop {
            if best.1.is_empty() || less(s.cut, size, best.0, best.1.len()) {
                *best = (s.cut, s.members());
            }
            if *steps >= cfg.budget {
                return;
            }
            *steps += 1;
            match s.best_move(size) {
                Some((v, _, ns)) => {
                    s.toggle(v);
                    size = ns;
                }
                None => return,
            }
        }
    };
    for seed_set in seeds {
        if steps >= cfg.budget {
            break;
        }
        let mut set: Vec<usize> = seed_set.iter().copied().filter(|&v| v < n).collect();
        set.sort_unstable();
        set.dedup();
        if set.is_empty() || set.len() > cap {
            continue;
        }
        s.load(&set);
        descend(&mut s, &mut steps, &mut best);
    }
    let mut restart = 0u64;
    while steps < cfg.budget {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(restart);
        restart += 1;
        let start = random_ball(g, &mut rng, cap);
        s.load(&start);
        steps += 1;
        descend(&mut s, &mut steps, &mut best);
    }
    if best.1.is_empty() {
        // Zero budget: report the first vertex.
        best = (g.cut(&[0]), vec![0]);
    }
    let (cut, witness) = best;
    let r = ratio(cut, g.d, witness.len());
    ExpansionReport {
        method: Method::Heuristic,
        value: ratio_f64(&r),
        ratio: Some(r),
        size_cap: cfg.size_cap,
        witness: Some(witness),
        cut: Some(cut),
        degree: g.d,
        seed: Some(cfg.seed),
        evaluated: steps,
    }
}

/// Breadth-first ball of random size around a random vertex, neighbors shuffled.
fn random_ball(g: &UGraph, rng: &mut ChaCha8Rng, cap: usize) -> Vec<usize> {
    let n = g.num_vertices();
    let target = rng.random_range(1..=cap);
    let root = rng.random_range(0..n);
    let mut seen = vec![false; n];
    seen[root] = true;
    let mut out = vec![root];
    let mut head = 0;
    while out.len() < target && head < out.len() {
        let v = out[head];
        head += 1;
        let mut nb: Vec<usize> = g.adj[v].iter().copied().filter(|&u| !seen[u]).collect();
        nb.sort_unstable();
        nb.dedup();
        nb.shuffle(rng);
        for u in nb {
            if out.len() == target {
                break;
            }
            seen[u] = true;
            out.push(u);
        }
    }
    out
}

/// Candidate sets derived from the recursive structure of a decoding graph,
/// in ids of `g`: level prefixes, single levels, recursive subproblems and
/// unions of sibling subproblems, and copies of `Dec_1` from the decomposition.
/// Graphs without decoding structure get no seeds.
pub fn structured_seeds(g: &Cdag) -> Vec<Vec<usize>> {
    let mut seeds = Vec::new();
    let meta = &g.meta;
    if meta.part != Part::Dec || meta.schemes.is_empty() {
        return seeds;
    }
    let originals = g.original_ids();
    let chains = g.chains();
    let lift = |collapsed: &mut dyn Iterator<Item = usize>| -> Vec<usize> {
        let mut out = Vec::new();
        for c in collapsed {
            let v = originals[c];
            out.push(v);
            out.extend_from_slice(&chains[v]);
        }
        out.sort_unstable();
        out
    };
    let Ok(layout) = Layout::new(&meta.schemes, meta.k, Part::Dec, true) else {
        return seeds;
    };
    if layout.num_vertices() != originals.len() {
        return seeds;
    }
    let k = meta.k;
    let mut prefix = Vec::new();
    for level in 1..=k + 1 {
        let r = layout.dec_range(level);
        seeds.push(lift(&mut r.clone()));
        prefix.extend(r);
        seeds.push(lift(&mut prefix.iter().copied()));
    }
    // Subproblem t levels down from the root: levels t+1..=k+1 under path 0, and
    // the union of the first r siblings.
    for t in 1..=k {
        let m = layout.scheme(t).m;
        for siblings in 1..=m {
            let mut collapsed = Vec::new();
            for level in t + 1..=k + 1 {
                let d = layout.dim(level);
                let below = layout.paths(level) / layout.paths(t + 1);
                // Paths at depth t+1 are `parent * m + j`; siblings of path 0 are 0..m.
                for path in 0..siblings * below {
                    for e in 0..d * d {
                        collapsed.push(layout.dec_id(level, path * d * d + e));
                    }
                }
            }
            seeds.push(lift(&mut collapsed.into_iter()));
        }
    }
    if let Ok(copies) = decompose(g, 1) {
        seeds.extend(copies.into_iter().take(64).map(|c| c.vertices));
    }
    seeds
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralBounds {
    /// Second-smallest eigenvalue of `I - A / d`.
    pub lambda2: f64,
    pub lower: f64,
    pub upper: f64,
    pub residual: f64,
}

/// Cheeger sandwich `lambda2 / 2 <= h <= sqrt(2 lambda2)`.
pub fn spectral_bounds(g: &UGraph) -> Result<SpectralBounds, ExpansionError> {
    let n = g.num_vertices();
    if n > SPECTRAL_LIMIT {
        return Err(ExpansionError::SpectralTooLarge { vertices: n, limit: SPECTRAL_LIMIT });
    }
    if n < 2 || g.components() > 1 {
        return Ok(SpectralBounds { lambda2: 0.0, lower: 0.0, upper: 0.0, residual: 0.0 });
    }
    let d = g.d as f64;
    let mut l = DMatrix::<f64>::zeros(n, n);
    for v in 0..n {
        l[(v, v)] = g.adj[v].len() as f64 / d;
        for &u in &g.adj[v] {
            l[(v, u)] -= 1.0 / d;
        }
    }
    let eig = SymmetricEigen::new(l.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap_or(Ordering::Equal));
    let i = order[1];
    let lambda2 = eig.eigenvalues[i].max(0.0);
    let x = eig.eigenvectors.column(i);
    let scale = eig.eigenvalues.iter().fold(1.0f64, |a, &b| a.max(b.abs()));
    let residual = (&l * x - x * eig.eigenvalues[i]).norm() / scale;
    if !residual.is_finite() || residual > RESIDUAL_TOL {
        return Err(ExpansionError::NoConvergence { residual });
    }
    Ok(SpectralBounds { lambda2, lower: lambda2 / 2.0, upper: (2.0 * lambda2).sqrt(), residual })
}

/// Lower bound from a decomposition into `Dec_b` copies: `h_s(g) >= h_base * d' / d`
/// for every `s <= |V(base)| / 2`.
pub fn decomposition_bound(
    g: &Cdag,
    base_depth: usize,
    h_base: &ExpansionReport,
) -> Result<ExpansionReport, ExpansionError> {
    let ug = UGraph::from_cdag(g)?;
    let copies = decompose(g, base_depth)?;
    let base_size = copies.iter().map(|c| c.vertices.len()).min().unwrap_or(0);
    let base = h_base.ratio.ok_or(ExpansionError::Inexact(h_base.method.label()))?;
    let r = base * Ratio::new(h_base.degree as u64, ug.d as u64);
    Ok(ExpansionReport {
        method: Method::DecompositionLower,
        value: ratio_f64(&r),
        ratio: Some(r),
        size_cap: Some(base_size / 2),
        witness: None,
        cut: None,
        degree: ug.d,
        seed: None,
        evaluated: copies.len() as u64,
    })
}

/// Exact expansion of the decomposition base, at the degree of `g`. Isomorphic
/// copies share one computation; otherwise the minimum over all copies is taken.
pub fn base_expansion(g: &Cdag, base_depth: usize) -> Result<ExpansionReport, ExpansionError> {
    let d = UGraph::from_cdag(g)?.d;
    let copies = decompose(g, base_depth)?;
    let isomorphic = copies.iter().all(|c| c.map.is_some());
    let mut best: Option<ExpansionReport> = None;
    for c in if isomorphic { &copies[..1] } else { &copies[..] } {
        let r = exact_expansion(&UGraph::from_copy(c, d)?, None)?;
        if best.as_ref().is_none_or(|b| r.ratio < b.ratio) {
            best = Some(r);
        }
    }
    let mut best = best.ok_or(ExpansionError::Empty)?;
    best.witness = None;
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyConfig {
    /// Regular degree; raised to the maximum degree when smaller.
    pub degree: usize,
    pub shape: TreeShape,
    pub seed: u64,
    pub budget: u64,
    /// Skip the eigensolver above this many vertices.
    pub spectral_limit: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self { degree: 6, shape: TreeShape::LeftChain, seed: 1, budget: 10_000, spectral_limit: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub k: usize,
    pub vertices: usize,
    pub degree: usize,
    pub exact: Option<f64>,
    pub heuristic: ExpansionReport,
    /// Heuristic restricted to the decomposition cap.
    pub capped: ExpansionReport,
    pub spectral: Option<SpectralBounds>,
    /// Value of `U = l_1` (the outputs with their chains).
    pub level1: f64,
    pub decomposition: ExpansionReport,
    /// Smallest upper estimate.
    pub upper: f64,
    /// `upper * (m / n0^2)^k`.
    pub normalized: f64,
}

/// Expanded, regularized `Dec_k` for a study.
pub fn study_graph(scheme: &BilinearScheme, k: usize, cfg: &StudyConfig) -> Result<Cdag, ExpansionError> {
    let g = expand_binary(&build_dec(std::slice::from_ref(scheme), k)?, cfg.shape);
    let d = cfg.degree.max(g.max_degree());
    Ok(regularize(&g, d)?)
}

pub fn scaling_study(
    scheme: &BilinearScheme,
    ks: &[usize],
    cfg: &StudyConfig,
) -> Result<Vec<StudyRow>, ExpansionError> {
    let mut rows = Vec::with_capacity(ks.len());
    for &k in ks {
        let g = study_graph(scheme, k, cfg)?;
        let ug = UGraph::from_cdag(&g)?;
        let n = ug.num_vertices();
        let seeds = structured_seeds(&g);
        let exact = if n <= EXACT_VERTEX_LIMIT { Some(exact_expansion(&ug, None)?) } else { None };
        let heuristic = heuristic_expansion(&ug, &seeds, HeuristicConfig::new(cfg.seed, cfg.budget));
        let h_base = base_expansion(&g, 1)?;
        let decomposition = decomposition_bound(&g, 1, &h_base)?;
        let capped = heuristic_expansion(
            &ug,
            &seeds,
            HeuristicConfig::new(cfg.seed, cfg.budget).with_cap(decomposition.size_cap.unwrap_or(1)),
        );
        let spectral = if n <= cfg.spectral_limit { Some(spectral_bounds(&ug)?) } else { None };
        let level1 = {
            let l1 = &seeds[0];
            ratio_f64(&ratio(ug.cut(l1), ug.d, l1.len()))
        };
        let upper = exact.as_ref().map_or(heuristic.value, |e| e.value.min(heuristic.value));
        let growth = scheme.m as f64 / (scheme.n0 * scheme.n0) as f64;
        rows.push(StudyRow {
            k,
            vertices: n,
            degree: ug.d,
            exact: exact.map(|e| e.value),
            heuristic,
            capped,
            spectral,
            level1,
            decomposition,
            upper,
            normalized: upper * growth.powi(k as i32),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k4() -> UGraph {
        let e: Vec<(usize, usize)> = (0..4).flat_map(|a| (a + 1..4).map(move |b| (a, b))).collect();
        UGraph::from_edges(4, &e, 3).unwrap()
    }

    fn c4() -> UGraph {
        UGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0)], 2).unwrap()
    }

    fn strassen_dec1() -> Cdag {
        study_graph(&BilinearScheme::strassen(), 1, &StudyConfig::default()).unwrap()
    }

    #[test]
    fn complete_graph() {
        let r = exact_expansion(&k4(), None).unwrap();
        assert_eq!(r.ratio, Some(Ratio::new(2, 3)));
        assert_eq!(r.witness.as_ref().unwrap().len(), 2);
        assert_eq!(r.recompute(&k4()), r.ratio);
    }

    #[test]
    fn cycle_spectrum() {
        let s = spectral_bounds(&c4()).unwrap();
        assert!((s.lambda2 - 1.0).abs() < 1e-12);
        assert!((s.lower - 0.5).abs() < 1e-12 && (s.upper - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(exact_expansion(&c4(), None).unwrap().ratio, Some(Ratio::new(1, 2)));
    }

    #[test]
    fn classical_dec1_is_disconnected() {
        let g = regularize(&build_dec(&[BilinearScheme::classical(2)], 1).unwrap(), 2).unwrap();
        let ug = UGraph::from_cdag(&g).unwrap();
        let r = exact_expansion(&ug, None).unwrap();
        assert_eq!(r.cut, Some(0));
        assert_eq!(r.witness.unwrap().len(), 3);
        assert_eq!(spectral_bounds(&ug).unwrap().lower, 0.0);
    }

    #[test]
    fn strassen_dec1_sandwich() {
        let g = strassen_dec1();
        let ug = UGraph::from_cdag(&g).unwrap();
        assert_eq!(ug.num_vertices(), 15);
        let exact = exact_expansion(&ug, None).unwrap();
        let s = spectral_bounds(&ug).unwrap();
        assert!(s.lower <= exact.value && exact.value <= s.upper);
        let h = heuristic_expansion(&ug, &structured_seeds(&g), HeuristicConfig::new(7, 10_000));
        assert_eq!(h.ratio, exact.ratio);
        let blind = heuristic_expansion(&ug, &[], HeuristicConfig::new(7, 10_000));
        assert_eq!(blind.ratio, exact.ratio);
    }

    #[test]
    fn heuristic_is_monotone_in_budget() {
        let g = study_graph(&BilinearScheme::strassen(), 2, &StudyConfig::default()).unwrap();
        let ug = UGraph::from_cdag(&g).unwrap();
        let mut last = f64::INFINITY;
        for budget in [1, 10, 100, 1000, 3000] {
            let r = heuristic_expansion(&ug, &[], HeuristicConfig::new(3, budget));
            assert!(r.value <= last);
            assert_eq!(r.recompute(&ug), r.ratio);
            last = r.value;
        }
    }

    #[test]
    fn small_set_expansion_is_monotone_in_cap() {
        let ug = UGraph::from_cdag(&strassen_dec1()).unwrap();
        let vals: Vec<_> = (1..=7).map(|s| exact_expansion(&ug, Some(s)).unwrap().ratio.unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[1] <= w[0]), "{vals:?}");
    }

    #[test]
    fn decomposition_bound_at_full_depth_is_exact() {
        let g = strassen_dec1();
        let exact = exact_expansion(&UGraph::from_cdag(&g).unwrap(), None).unwrap();
        let b = decomposition_bound(&g, 1, &exact).unwrap();
        assert_eq!(b.ratio, exact.ratio);
        assert_eq!(base_expansion(&g, 1).unwrap().ratio, exact.ratio);
    }

    #[test]
    fn guard_rejects_large_instances() {
        let g = study_graph(&BilinearScheme::strassen(), 2, &StudyConfig::default()).unwrap();
        let ug = UGraph::from_cdag(&g).unwrap();
        assert!(matches!(exact_expansion(&ug, None), Err(ExpansionError::TooLarge { .. })));
        assert!(exact_expansion(&ug, Some(3)).is_ok());
    }

    #[test]
    fn not_regular() {
        let g = build_dec(&[BilinearScheme::strassen()], 1).unwrap();
        assert!(matches!(UGraph::from_cdag(&g), Err(ExpansionError::NotRegular { .. })));
    }
}
