//! Computation DAGs of recursive bilinear algorithms.
//!
//! Graphs are stored in compressed adjacency form with predecessors kept in
//! operand order. Edges point from producer to consumer. Self-loops added by
//! [`regularize`] are kept as a per-vertex count and never appear in the edge
//! lists.

mod build;
mod decompose;
mod doc;
mod layout;

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scheme::{BilinearScheme, SchemeError};

pub use build::{build_dec, build_enc, build_full, build_part, BuildOptions};
pub use decompose::{decompose, GraphCopy};
pub use doc::{export, import};
pub use layout::{Layout, SIDE_A, SIDE_B};

#[derive(Debug, Error)]
pub enum CdagError {
    #[error("at least one scheme is required")]
    EmptySchemes,
    #[error("recursion depth must be at least 1")]
    ZeroDepth,
    #[error("{got} schemes given for depth {k}; expected 1 or {k}")]
    SchemeCount { got: usize, k: usize },
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error("scheme `{0}` is not a valid bilinear scheme")]
    InvalidScheme(String),
    #[error("target degree {d} is below the maximum degree {max}")]
    DegreeTooSmall { d: usize, max: usize },
    #[error("operation needs a decoding graph (part dec), got {0:?}")]
    NotDec(Part),
    #[error("base depth {b} must divide the depth {k} and lie in [1, k]")]
    BaseDepth { b: usize, k: usize },
    #[error("per-level schemes differ across decomposition spans of depth {0}")]
    MixedSchemes(usize),
    #[error("vertex {0} has no level annotation")]
    MissingLevel(usize),
    #[error("vertex {0} is out of range")]
    VertexRange(usize),
    #[error("malformed graph document: {0}")]
    Malformed(String),
    #[error("edge references unknown vertex id {0}")]
    DanglingEdge(usize),
    #[error("graph contains a cycle through vertex {0}")]
    Cycle(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexKind {
    Input,
    Product,
    Add,
    Output,
}

/// Which sub-DAG a graph (or a vertex of a full graph) belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Dec,
    EncA,
    EncB,
    Full,
    Custom,
}

impl std::str::FromStr for Part {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "dec" => Ok(Part::Dec),
            "enca" | "encA" | "enc_a" => Ok(Part::EncA),
            "encb" | "encB" | "enc_b" => Ok(Part::EncB),
            "full" => Ok(Part::Full),
            other => Err(format!("unknown part `{other}` (expected dec, encA, encB or full)")),
        }
    }
}

/// Shape of the binary trees replacing high in-degree vertices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TreeShape {
    /// `((x1 + x2) + x3) + ...` in operand order.
    #[default]
    LeftChain,
    /// Random full binary tree drawn from a seeded generator.
    Random(u64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Meta {
    /// One scheme (stationary) or one per recursion level, outermost first.
    pub schemes: Vec<BilinearScheme>,
    pub k: usize,
    pub part: Part,
    /// Unit encoding rows identified with their input vertex.
    pub identify_unit_rows: bool,
    pub expanded: Option<TreeShape>,
    pub regular_degree: Option<usize>,
}

impl Meta {
    pub fn custom() -> Self {
        Self {
            schemes: Vec::new(),
            k: 0,
            part: Part::Custom,
            identify_unit_rows: true,
            expanded: None,
            regular_degree: None,
        }
    }

    /// Schemes expanded to one entry per recursion level.
    pub fn level_schemes(&self) -> Vec<BilinearScheme> {
        match self.schemes.len() {
            1 => vec![self.schemes[0].clone(); self.k],
            _ => self.schemes.clone(),
        }
    }

    pub fn scheme_names(&self) -> Vec<String> {
        self.schemes.iter().map(|s| s.name.clone()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Vertex {
    pub id: usize,
    pub kind: VertexKind,
    /// Level index; 1 is the output side of a decoding graph.
    pub level: Option<usize>,
    pub part: Part,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cdag {
    pub meta: Meta,
    kinds: Vec<VertexKind>,
    levels: Vec<Option<usize>>,
    parts: Vec<Part>,
    pred_off: Vec<usize>,
    preds: Vec<usize>,
    succ_off: Vec<usize>,
    succs: Vec<usize>,
    outputs: Vec<usize>,
    loops: Vec<usize>,
    /// For vertices introduced by binary expansion: the vertex whose tree they belong to.
    origin: Vec<Option<usize>>,
}

/// Incremental construction of a [`Cdag`]; vertices may reference any id, the
/// result is checked for dangling endpoints and cycles in [`GraphBuilder::finish`].
#[derive(Debug, Clone, Default)]
pub struct GraphBuilder {
    kinds: Vec<VertexKind>,
    levels: Vec<Option<usize>>,
    parts: Vec<Part>,
    pred_off: Vec<usize>,
    preds: Vec<usize>,
    loops: Vec<usize>,
    origin: Vec<Option<usize>>,
}

impl GraphBuilder {
    pub fn with_capacity(vertices: usize, edges: usize) -> Self {
        let mut pred_off = Vec::with_capacity(vertices + 1);
        pred_off.push(0);
        Self {
            kinds: Vec::with_capacity(vertices),
            levels: Vec::with_capacity(vertices),
            parts: Vec::with_capacity(vertices),
            pred_off,
            preds: Vec::with_capacity(edges),
            loops: Vec::with_capacity(vertices),
            origin: Vec::with_capacity(vertices),
        }
    }

    pub fn new() -> Self {
        Self::with_capacity(0, 0)
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn push(
        &mut self,
        kind: VertexKind,
        level: Option<usize>,
        part: Part,
        preds: &[usize],
    ) -> usize {
        self.push_full(kind, level, part, preds, 0, None)
    }

    pub fn push_full(
        &mut self,
        kind: VertexKind,
        level: Option<usize>,
        part: Part,
        preds: &[usize],
        loops: usize,
        origin: Option<usize>,
    ) -> usize {
        if self.pred_off.is_empty() {
            self.pred_off.push(0);
        }
        let id = self.kinds.len();
        self.kinds.push(kind);
        self.levels.push(level);
        self.parts.push(part);
        self.preds.extend_from_slice(preds);
        self.pred_off.push(self.preds.len());
        self.loops.push(loops);
        self.origin.push(origin);
        id
    }

    pub fn finish(mut self, meta: Meta, outputs: Vec<usize>) -> Result<Cdag, CdagError> {
        if self.pred_off.is_empty() {
            self.pred_off.push(0);
        }
        let n = self.kinds.len();
        if let Some(&bad) = self.preds.iter().chain(&outputs).find(|&&p| p >= n) {
            return Err(CdagError::DanglingEdge(bad));
        }
        if let Some(bad) = self.origin.iter().flatten().find(|&&o| o >= n) {
            return Err(CdagError::DanglingEdge(*bad));
        }
        let mut succ_count = vec![0usize; n + 1];
        for &p in &self.preds {
            succ_count[p + 1] += 1;
        }
        for i in 0..n {
            succ_count[i + 1] += succ_count[i];
        }
        let succ_off = succ_count;
        let mut fill = succ_off.clone();
        let mut succs = vec![0usize; self.preds.len()];
        for v in 0..n {
            for &p in &self.preds[self.pred_off[v]..self.pred_off[v + 1]] {
                succs[fill[p]] = v;
                fill[p] += 1;
            }
        }
        let g = Cdag {
            meta,
            kinds: self.kinds,
            levels: self.levels,
            parts: self.parts,
            pred_off: self.pred_off,
            preds: self.preds,
            succ_off,
            succs,
            outputs,
            loops: self.loops,
            origin: self.origin,
        };
        if let Some(v) = g.find_cycle_vertex() {
            return Err(CdagError::Cycle(v));
        }
        Ok(g)
    }
}

impl Cdag {
    pub fn num_vertices(&self) -> usize {
        self.kinds.len()
    }

    pub fn num_edges(&self) -> usize {
        self.preds.len()
    }

    pub fn vertex(&self, id: usize) -> Vertex {
        Vertex { id, kind: self.kinds[id], level: self.levels[id], part: self.parts[id] }
    }

    pub fn vertices(&self) -> impl Iterator<Item = Vertex> + '_ {
        (0..self.num_vertices()).map(|v| self.vertex(v))
    }

    pub fn kind(&self, v: usize) -> VertexKind {
        self.kinds[v]
    }

    pub fn level(&self, v: usize) -> Option<usize> {
        self.levels[v]
    }

    pub fn part_of(&self, v: usize) -> Part {
        self.parts[v]
    }

    pub fn preds(&self, v: usize) -> &[usize] {
        &self.preds[self.pred_off[v]..self.pred_off[v + 1]]
    }

    pub fn succs(&self, v: usize) -> &[usize] {
        &self.succs[self.succ_off[v]..self.succ_off[v + 1]]
    }

    pub fn in_degree(&self, v: usize) -> usize {
        self.pred_off[v + 1] - self.pred_off[v]
    }

    pub fn out_degree(&self, v: usize) -> usize {
        self.succ_off[v + 1] - self.succ_off[v]
    }

    pub fn loops(&self, v: usize) -> usize {
        self.loops[v]
    }

    pub fn origin(&self, v: usize) -> Option<usize> {
        self.origin[v]
    }

    /// Total degree counting each loop once.
    pub fn degree(&self, v: usize) -> usize {
        self.in_degree(v) + self.out_degree(v) + self.loops[v]
    }

    pub fn max_degree(&self) -> usize {
        (0..self.num_vertices()).map(|v| self.degree(v)).max().unwrap_or(0)
    }

    pub fn max_in_degree(&self) -> usize {
        (0..self.num_vertices()).map(|v| self.in_degree(v)).max().unwrap_or(0)
    }

    pub fn max_out_degree(&self) -> usize {
        (0..self.num_vertices()).map(|v| self.out_degree(v)).max().unwrap_or(0)
    }

    /// Vertices of in-degree zero, ascending.
    pub fn inputs(&self) -> Vec<usize> {
        (0..self.num_vertices()).filter(|&v| self.in_degree(v) == 0).collect()
    }

    pub fn outputs(&self) -> &[usize] {
        &self.outputs
    }

    pub fn is_output(&self, v: usize) -> bool {
        self.outputs.contains(&v)
    }

    /// Output flags indexed by vertex.
    pub fn output_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.num_vertices()];
        for &o in &self.outputs {
            mask[o] = true;
        }
        mask
    }

    /// All edges as `(src, dst)`, grouped by destination in operand order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_vertices()).flat_map(move |v| self.preds(v).iter().map(move |&p| (p, v)))
    }

    pub fn count_kind(&self, kind: VertexKind) -> usize {
        self.kinds.iter().filter(|&&k| k == kind).count()
    }

    /// Sizes of the levels `1..=max_level`, index 0 is level 1.
    pub fn level_sizes(&self) -> Vec<usize> {
        let max = self.levels.iter().flatten().copied().max().unwrap_or(0);
        let mut sizes = vec![0; max];
        for l in self.levels.iter().flatten() {
            sizes[l - 1] += 1;
        }
        sizes
    }

    /// Vertices at level `l`, ascending.
    pub fn level_members(&self, l: usize) -> Vec<usize> {
        (0..self.num_vertices()).filter(|&v| self.levels[v] == Some(l)).collect()
    }

    pub fn is_vertex_subset(&self, set: &[usize]) -> bool {
        set.iter().all(|&v| v < self.num_vertices())
    }

    /// Ids of the vertices that were not introduced by binary expansion, ascending.
    /// For an expanded graph this maps collapsed ids to expanded ids.
    pub fn original_ids(&self) -> Vec<usize> {
        (0..self.num_vertices()).filter(|&v| self.origin[v].is_none()).collect()
    }

    /// For each vertex, the expansion vertices whose origin it is, in id order.
    pub fn chains(&self) -> Vec<Vec<usize>> {
        let mut chains = vec![Vec::new(); self.num_vertices()];
        for v in 0..self.num_vertices() {
            if let Some(o) = self.origin[v] {
                chains[o].push(v);
            }
        }
        chains
    }

    /// Number of edges with exactly one endpoint in `set` (loops never count).
    pub fn cut_size(&self, set: &[usize]) -> usize {
        let mut inside = vec![false; self.num_vertices()];
        for &v in set {
            inside[v] = true;
        }
        self.edges().filter(|&(a, b)| inside[a] != inside[b]).count()
    }

    /// Kahn's algorithm; returns a vertex on a cycle if one exists.
    fn find_cycle_vertex(&self) -> Option<usize> {
        let n = self.num_vertices();
        let mut indeg: Vec<usize> = (0..n).map(|v| self.in_degree(v)).collect();
        let mut queue: VecDeque<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
        let mut seen = 0;
        while let Some(v) = queue.pop_front() {
            seen += 1;
            for &s in self.succs(v) {
                indeg[s] -= 1;
                if indeg[s] == 0 {
                    queue.push_back(s);
                }
            }
        }
        if seen == n {
            None
        } else {
            indeg.iter().position(|&d| d > 0)
        }
    }

    /// True iff every vertex id is larger than the ids of its predecessors.
    pub fn ids_are_topological(&self) -> bool {
        (0..self.num_vertices()).all(|v| self.preds(v).iter().all(|&p| p < v))
    }

    /// Number of weakly connected components.
    pub fn weak_components(&self) -> usize {
        let n = self.num_vertices();
        let mut comp = vec![usize::MAX; n];
        let mut count = 0;
        let mut stack = Vec::new();
        for s in 0..n {
            if comp[s] != usize::MAX {
                continue;
            }
            comp[s] = count;
            stack.push(s);
            while let Some(v) = stack.pop() {
                for &u in self.preds(v).iter().chain(self.succs(v)) {
                    if comp[u] == usize::MAX {
                        comp[u] = count;
                        stack.push(u);
                    }
                }
            }
            count += 1;
        }
        count
    }
}

/// Replace every vertex of in-degree `z > 2` by a full binary tree of `z - 1`
/// binary operations. The `z - 2` new vertices are placed immediately before
/// the vertex they feed and carry it as their origin; the original vertex keeps
/// its kind and becomes the root of the tree.
pub fn expand_binary(g: &Cdag, shape: TreeShape) -> Cdag {
    let n = g.num_vertices();
    let extra: usize = (0..n).map(|v| g.in_degree(v).saturating_sub(2)).sum();
    if extra == 0 {
        let mut out = g.clone();
        out.meta.expanded = Some(shape);
        return out;
    }
    let mut rng = match shape {
        TreeShape::Random(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        TreeShape::LeftChain => None,
    };
    // New id of each old vertex.
    let mut new_id = vec![0usize; n];
    let mut next = 0;
    for (v, id) in new_id.iter_mut().enumerate() {
        next += g.in_degree(v).saturating_sub(2);
        *id = next;
        next += 1;
    }
    let mut b = GraphBuilder::with_capacity(n + extra, g.num_edges() + 2 * extra);
    // Operands of the tree in terms of new ids; tree leaves are original operands.
    let mut items: Vec<usize> = Vec::new();
    for v in 0..n {
        let preds: Vec<usize> = g.preds(v).iter().map(|&p| new_id[p]).collect();
        let root = new_id[v];
        let origin = g.origin(v).map(|o| new_id[o]);
        if preds.len() <= 2 {
            b.push_full(g.kind(v), g.level(v), g.part_of(v), &preds, g.loops(v), origin);
            continue;
        }
        items.clear();
        items.extend_from_slice(&preds);
        let internal = preds.len() - 2;
        for _ in 0..internal {
            let (x, y) = match rng.as_mut() {
                None => (items.remove(0), items.remove(0)),
                Some(r) => {
                    items.shuffle(r);
                    let i = r.random_range(0..items.len() - 1);
                    let x = items.remove(i);
                    let y = items.remove(i);
                    (x, y)
                }
            };
            let id = b.push_full(VertexKind::Add, g.level(v), g.part_of(v), &[x, y], 0, Some(root));
            match rng {
                None => items.insert(0, id),
                Some(_) => items.push(id),
            }
        }
        b.push_full(g.kind(v), g.level(v), g.part_of(v), &items, g.loops(v), origin);
    }
    let outputs = g.outputs.iter().map(|&o| new_id[o]).collect();
    let mut meta = g.meta.clone();
    meta.expanded = Some(shape);
    b.finish(meta, outputs).expect("expansion preserves acyclicity")
}

/// Add self-loops so every vertex has total degree exactly `d`.
pub fn regularize(g: &Cdag, d: usize) -> Result<Cdag, CdagError> {
    let max = g.max_degree();
    if d < max {
        return Err(CdagError::DegreeTooSmall { d, max });
    }
    let mut out = g.clone();
    for v in 0..out.num_vertices() {
        let deg = out.in_degree(v) + out.out_degree(v);
        out.loops[v] = d - deg;
    }
    out.meta.regular_degree = Some(d);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelProfile {
    /// `(level, |l_i|, sigma_i)` for every level.
    pub levels: Vec<(usize, usize, f64)>,
    /// `|U| / |V|`.
    pub sigma: f64,
}

/// Per-level occupancy `sigma_i = |U ∩ l_i| / |l_i|` of a vertex set.
pub fn level_profile(g: &Cdag, set: &[usize]) -> Result<LevelProfile, CdagError> {
    if let Some(v) = (0..g.num_vertices()).find(|&v| g.level(v).is_none()) {
        return Err(CdagError::MissingLevel(v));
    }
    if let Some(&v) = set.iter().find(|&&v| v >= g.num_vertices()) {
        return Err(CdagError::VertexRange(v));
    }
    let sizes = g.level_sizes();
    let mut hits = vec![0usize; sizes.len()];
    let mut seen = vec![false; g.num_vertices()];
    let mut distinct = 0;
    for &v in set {
        if !std::mem::replace(&mut seen[v], true) {
            hits[g.level(v).unwrap() - 1] += 1;
            distinct += 1;
        }
    }
    let levels = sizes
        .iter()
        .zip(&hits)
        .enumerate()
        .map(|(i, (&size, &hit))| {
            let sigma = if size == 0 { 0.0 } else { hit as f64 / size as f64 };
            (i + 1, size, sigma)
        })
        .collect();
    Ok(LevelProfile { levels, sigma: distinct as f64 / g.num_vertices().max(1) as f64 })
}

/// Validate a per-level scheme list for depth `k`; returns one scheme per level.
pub(crate) fn level_schemes(
    schemes: &[BilinearScheme],
    k: usize,
) -> Result<Vec<BilinearScheme>, CdagError> {
    if schemes.is_empty() {
        return Err(CdagError::EmptySchemes);
    }
    if k == 0 {
        return Err(CdagError::ZeroDepth);
    }
    if schemes.len() != 1 && schemes.len() != k {
        return Err(CdagError::SchemeCount { got: schemes.len(), k });
    }
    for s in schemes {
        if !s.validate()?.valid {
            return Err(CdagError::InvalidScheme(s.name.clone()));
        }
    }
    Ok(if schemes.len() == 1 { vec![schemes[0].clone(); k] } else { schemes.to_vec() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strassen_dec(k: usize) -> Cdag {
        build_dec(&[BilinearScheme::strassen()], k).unwrap()
    }

    #[test]
    fn expansion_of_strassen_dec1() {
        let g = strassen_dec(1);
        let e = expand_binary(&g, TreeShape::LeftChain);
        assert_eq!(e.num_vertices(), 15);
        assert_eq!(e.inputs().len(), g.inputs().len());
        assert_eq!(e.outputs().len(), g.outputs().len());
        assert!(e.max_in_degree() <= 2);
        // C11 has four operands: two chain vertices plus the root.
        let c11 = e.outputs()[0];
        assert_eq!(e.chains()[c11].len(), 2);
        assert_eq!(e.original_ids().len(), g.num_vertices());
        let r = expand_binary(&g, TreeShape::Random(3));
        assert_eq!(r.num_vertices(), 15);
        assert!(r.max_in_degree() <= 2);
        assert_eq!(r.num_edges(), e.num_edges());
    }

    #[test]
    fn expansion_is_identity_on_binary_graphs() {
        let g = build_dec(&[BilinearScheme::classical(2)], 1).unwrap();
        let e = expand_binary(&g, TreeShape::LeftChain);
        assert_eq!(e.num_vertices(), g.num_vertices());
        assert_eq!(e.edges().collect::<Vec<_>>(), g.edges().collect::<Vec<_>>());
    }

    #[test]
    fn regularize_preserves_cuts_and_hits_target() {
        let e = expand_binary(&strassen_dec(2), TreeShape::LeftChain);
        let r = regularize(&e, 6).unwrap();
        assert!((0..r.num_vertices()).all(|v| r.degree(v) == 6));
        let set: Vec<usize> = (0..r.num_vertices()).step_by(3).collect();
        assert_eq!(r.cut_size(&set), e.cut_size(&set));
        let tight = regularize(&e, e.max_degree()).unwrap();
        assert!((0..tight.num_vertices()).any(|v| tight.loops(v) == 0));
        assert!(matches!(
            regularize(&e, e.max_degree() - 1),
            Err(CdagError::DegreeTooSmall { .. })
        ));
    }

    #[test]
    fn level_profiles() {
        let g = strassen_dec(2);
        let l1 = g.level_members(1);
        let p = level_profile(&g, &l1).unwrap();
        assert_eq!(p.levels, vec![(1, 16, 1.0), (2, 28, 0.0), (3, 49, 0.0)]);
        let all: Vec<usize> = (0..g.num_vertices()).collect();
        let p = level_profile(&g, &all).unwrap();
        assert!(p.levels.iter().all(|&(_, _, s)| s == 1.0));
        assert_eq!(p.sigma, 1.0);
    }

    #[test]
    fn builder_rejects_cycles_and_dangling_ids() {
        let mut b = GraphBuilder::new();
        b.push(VertexKind::Add, None, Part::Custom, &[1]);
        b.push(VertexKind::Add, None, Part::Custom, &[0]);
        assert!(matches!(b.finish(Meta::custom(), vec![]), Err(CdagError::Cycle(_))));
        let mut b = GraphBuilder::new();
        b.push(VertexKind::Add, None, Part::Custom, &[4]);
        assert!(matches!(b.finish(Meta::custom(), vec![]), Err(CdagError::DanglingEdge(4))));
    }
}
