//! Depth-first schedule of a full recursive graph, computed from the layout.
//!
//! Every subproblem at a given level emits the same number of vertices, so the
//! schedule position of any vertex follows from the digits of its path. Next
//! uses come from walking the consumer tree of a value (identified encoding
//! slots forward the value to the next level) and skipping children whose
//! schedule range lies entirely in the past. No graph is materialized, which
//! is what makes `n = 512` affordable.

use crate::cdag::{Layout, Part, SIDE_A, SIDE_B};
use crate::scheme::BilinearScheme;

use super::engine::{Access, Memory};
use super::{IoError, Policy, ScheduleKind, SimReport};

/// A vertex as the schedule emits it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Visit {
    pub part: Part,
    pub level: usize,
    pub slot: usize,
    pub id: u64,
}

#[derive(Debug, Clone)]
pub struct DfsPlan {
    layout: Layout,
    k: usize,
    /// Subproblems at this level are emitted whole; `k + 1` disables blocks.
    c: usize,
    m: Vec<usize>,
    n0: Vec<usize>,
    dim: Vec<usize>,
    d2: Vec<u64>,
    created: [Vec<Vec<bool>>; 2],
    rank: [Vec<Vec<usize>>; 2],
    ncreated: [Vec<u64>; 2],
    /// Vertices emitted by one level-`i` subproblem.
    size: Vec<u64>,
    /// `pg[i][j]`: offset of product `j`'s group inside a level-`i` subproblem.
    pg: Vec<Vec<u64>>,
    /// Encoding vertices emitted for product `j` at level `i`.
    ce: Vec<Vec<u64>>,
    /// Per side and level: rows using each block column, ascending.
    cols: [Vec<Vec<Vec<usize>>>; 2],
    /// Per level: outputs fed by each product.
    wcols: Vec<Vec<Vec<usize>>>,
    r: Vec<u64>,
    a_off: Vec<u64>,
    b_off: Vec<u64>,
    b_base: u64,
    p_base: u64,
    d_off: Vec<u64>,
}

/// Cutoff depth at which a subproblem's three blocks fit: `3 N^2 <= M`.
pub fn block_depth_for(layout: &Layout, m_words: usize) -> Option<usize> {
    (1..=layout.k() + 1).find(|&l| 3 * layout.dim(l) * layout.dim(l) <= m_words).map(|l| l - 1)
}

impl DfsPlan {
    pub fn new(layout: Layout, cutoff_depth: Option<usize>) -> Self {
        let k = layout.k();
        let c = cutoff_depth.map_or(k + 1, |d| (d + 1).min(k + 1));
        let mut m = vec![0; k + 2];
        let mut n0 = vec![0; k + 2];
        for i in 1..=k {
            m[i] = layout.scheme(i).m;
            n0[i] = layout.scheme(i).n0;
        }
        let dim: Vec<usize> = (0..=k + 1).map(|l| if l == 0 { 0 } else { layout.dim(l) }).collect();
        let d2: Vec<u64> = dim.iter().map(|&d| (d * d) as u64).collect();
        let mut created: [Vec<Vec<bool>>; 2] = [vec![Vec::new()], vec![Vec::new()]];
        let mut rank: [Vec<Vec<usize>>; 2] = [vec![Vec::new()], vec![Vec::new()]];
        let mut ncreated: [Vec<u64>; 2] = [vec![0], vec![0]];
        let mut cols: [Vec<Vec<Vec<usize>>>; 2] = [vec![Vec::new()], vec![Vec::new()]];
        for side in [SIDE_A, SIDE_B] {
            for i in 1..=k {
                let cr: Vec<bool> = (0..m[i]).map(|j| !layout.is_identified(side, i, j)).collect();
                let mut rk = vec![0; m[i]];
                let mut count = 0;
                for j in 0..m[i] {
                    rk[j] = count;
                    count += usize::from(cr[j]);
                }
                let mut cl = vec![Vec::new(); n0[i] * n0[i]];
                for j in 0..m[i] {
                    for &p in layout.enc_row(side, i, j) {
                        cl[p].push(j);
                    }
                }
                created[side].push(cr);
                rank[side].push(rk);
                ncreated[side].push(count as u64);
                cols[side].push(cl);
            }
        }
        let mut wcols = vec![Vec::new()];
        for i in 1..=k {
            let mut wc = vec![Vec::new(); m[i]];
            for o in 0..n0[i] * n0[i] {
                for &j in layout.dec_row(i, o) {
                    wc[j].push(o);
                }
            }
            wcols.push(wc);
        }
        let mut size = vec![0u64; k + 2];
        size[k + 1] = 1;
        let mut pg = vec![Vec::new(); k + 1];
        let mut ce = vec![Vec::new(); k + 1];
        for i in (1..=k).rev() {
            let cei: Vec<u64> = (0..m[i])
                .map(|j| (u64::from(created[SIDE_A][i][j]) + u64::from(created[SIDE_B][i][j])) * d2[i + 1])
                .collect();
            let mut p = vec![0u64; m[i] + 1];
            for j in 0..m[i] {
                p[j + 1] = p[j] + cei[j] + size[i + 1];
            }
            size[i] = p[m[i]] + d2[i];
            pg[i] = p;
            ce[i] = cei;
        }
        let mut plan = Self {
            layout,
            k,
            c,
            m,
            n0,
            dim,
            d2,
            created,
            rank,
            ncreated,
            size,
            pg,
            ce,
            cols,
            wcols,
            r: vec![0; k + 2],
            a_off: vec![0; k + 3],
            b_off: vec![0; k + 3],
            b_base: 0,
            p_base: 0,
            d_off: vec![0; k + 2],
        };
        plan.block_offsets();
        plan
    }

    fn block_offsets(&mut self) {
        let (k, c) = (self.k, self.c);
        if c > k {
            return;
        }
        for l in c..=k + 1 {
            self.r[l] = (self.layout.paths(l) / self.layout.paths(c)) as u64;
        }
        for l in c + 1..=k + 1 {
            self.a_off[l + 1] = self.a_off[l] + self.r[l - 1] * self.ncreated[SIDE_A][l - 1] * self.d2[l];
            self.b_off[l + 1] = self.b_off[l] + self.r[l - 1] * self.ncreated[SIDE_B][l - 1] * self.d2[l];
        }
        self.b_base = self.a_off[k + 2];
        self.p_base = self.b_base + self.b_off[k + 2];
        self.d_off[k] = self.p_base + self.r[k + 1];
        for l in (c + 1..=k).rev() {
            self.d_off[l - 1] = self.d_off[l] + self.r[l] * self.d2[l];
        }
        debug_assert_eq!(self.d_off[c] + self.d2[c], self.size[c]);
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn cutoff_level(&self) -> usize {
        self.c
    }

    /// Number of scheduled (non-input) vertices.
    pub fn len(&self) -> u64 {
        self.size[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Words one operation needs: the largest operand count plus the result.
    pub fn memory_needed(&self) -> usize {
        let mut most = 2;
        for i in 1..=self.k {
            for j in 0..self.m[i] {
                for side in [SIDE_A, SIDE_B] {
                    if self.created[side][i][j] {
                        most = most.max(self.layout.enc_row(side, i, j).len());
                    }
                }
            }
            for o in 0..self.n0[i] * self.n0[i] {
                most = most.max(self.layout.dec_row(i, o).len());
            }
        }
        most + 1
    }

    /// Offset of the level-`i` subproblem `q`; valid for `i <= c`.
    fn off(&self, i: usize, mut q: usize) -> u64 {
        let mut o = 0;
        for t in (1..i).rev() {
            let j = q % self.m[t];
            q /= self.m[t];
            o += self.pg[t][j] + self.ce[t][j];
        }
        o
    }

    fn block_start(&self, level: usize, q: usize) -> (u64, u64) {
        let r = self.r[level] as usize;
        (self.off(self.c, q / r), (q % r) as u64)
    }

    fn pos_enc(&self, side: usize, l: usize, slot: usize) -> u64 {
        let d2 = self.d2[l];
        let (q, e) = (slot / d2 as usize, slot as u64 % d2);
        let j = q % self.m[l - 1];
        if l - 1 < self.c {
            let shift = if side == SIDE_B { u64::from(self.created[SIDE_A][l - 1][j]) * d2 } else { 0 };
            self.off(l - 1, q / self.m[l - 1]) + self.pg[l - 1][j] + shift + e
        } else {
            let (bs, local) = self.block_start(l, q);
            let groups = (local / self.m[l - 1] as u64) * self.ncreated[side][l - 1] + self.rank[side][l - 1][j] as u64;
            let area = if side == SIDE_A { self.a_off[l] } else { self.b_base + self.b_off[l] };
            bs + area + groups * d2 + e
        }
    }

    fn pos_prod(&self, q: usize) -> u64 {
        if self.c > self.k {
            self.off(self.k + 1, q)
        } else {
            let (bs, local) = self.block_start(self.k + 1, q);
            bs + self.p_base + local
        }
    }

    fn pos_dec(&self, l: usize, slot: usize) -> u64 {
        if l == self.k + 1 {
            return self.pos_prod(slot);
        }
        let d2 = self.d2[l];
        let (q, e) = (slot / d2 as usize, slot as u64 % d2);
        if l < self.c {
            self.off(l, q) + self.size[l] - d2 + e
        } else {
            let (bs, local) = self.block_start(l, q);
            bs + self.d_off[l] + local * d2 + e
        }
    }

    /// Schedule position of a non-input vertex.
    pub fn position(&self, part: Part, level: usize, slot: usize) -> Option<u64> {
        match part {
            Part::EncA | Part::EncB if level == 1 => None,
            Part::EncA => Some(self.pos_enc(SIDE_A, level, slot)),
            Part::EncB => Some(self.pos_enc(SIDE_B, level, slot)),
            _ => Some(self.pos_dec(level, slot)),
        }
    }

    /// Position of a vertex given by canonical id.
    pub fn position_of(&self, id: usize) -> Option<u64> {
        let (part, level, slot) = self.layout.locate(id);
        self.position(part, level, slot)
    }

    fn enc_visit(&self, side: usize, level: usize, slot: usize) -> Visit {
        let part = if side == SIDE_A { Part::EncA } else { Part::EncB };
        Visit { part, level, slot, id: self.layout.enc_id(side, level, slot) as u64 }
    }

    fn dec_visit(&self, level: usize, slot: usize) -> Visit {
        Visit { part: Part::Dec, level, slot, id: self.layout.dec_id(level, slot) as u64 }
    }

    /// Emit every non-input vertex in schedule order.
    pub fn walk<F: FnMut(Visit)>(&self, mut f: F) {
        self.visit(1, 0, &mut f);
    }

    fn visit<F: FnMut(Visit)>(&self, i: usize, q: usize, f: &mut F) {
        if i == self.k + 1 {
            f(self.dec_visit(i, q));
            return;
        }
        if i >= self.c {
            self.block(q, f);
            return;
        }
        let d2 = self.d2[i + 1] as usize;
        for j in 0..self.m[i] {
            let child = q * self.m[i] + j;
            for side in [SIDE_A, SIDE_B] {
                if self.created[side][i][j] {
                    for e in 0..d2 {
                        f(self.enc_visit(side, i + 1, child * d2 + e));
                    }
                }
            }
            self.visit(i + 1, child, f);
        }
        let d2 = self.d2[i] as usize;
        for e in 0..d2 {
            f(self.dec_visit(i, q * d2 + e));
        }
    }

    fn block<F: FnMut(Visit)>(&self, q: usize, f: &mut F) {
        let (k, c) = (self.k, self.c);
        for side in [SIDE_A, SIDE_B] {
            for l in c + 1..=k + 1 {
                let r = self.r[l] as usize;
                let d2 = self.d2[l] as usize;
                for path in q * r..(q + 1) * r {
                    if self.created[side][l - 1][path % self.m[l - 1]] {
                        for e in 0..d2 {
                            f(self.enc_visit(side, l, path * d2 + e));
                        }
                    }
                }
            }
        }
        let r = self.r[k + 1] as usize;
        for path in q * r..(q + 1) * r {
            f(self.dec_visit(k + 1, path));
        }
        for l in (c..=k).rev() {
            let r = self.r[l] as usize;
            let d2 = self.d2[l] as usize;
            for s in q * r * d2..(q + 1) * r * d2 {
                f(self.dec_visit(l, s));
            }
        }
    }

    /// Resolved operands of a visit, appended to `out` as `(part, level, slot, id)`.
    pub fn operands(&self, v: &Visit, out: &mut Vec<Visit>) {
        let lay = &self.layout;
        match v.part {
            Part::EncA | Part::EncB => {
                let side = if v.part == Part::EncA { SIDE_A } else { SIDE_B };
                let (path, j, e) = lay.split_child(v.level, v.slot);
                for &p in lay.enc_row(side, v.level - 1, j) {
                    let s = lay.parent_slot(v.level - 1, path, p, e);
                    let (l2, s2) = lay.enc_resolve(side, v.level - 1, s);
                    out.push(self.enc_visit(side, l2, s2));
                }
            }
            _ if v.level == self.k + 1 => {
                for side in [SIDE_A, SIDE_B] {
                    let (l2, s2) = lay.enc_resolve(side, v.level, v.slot);
                    out.push(self.enc_visit(side, l2, s2));
                }
            }
            _ => {
                let l = v.level;
                let (dim, inner) = (self.dim[l], self.dim[l + 1]);
                let (path, e) = (v.slot / (dim * dim), v.slot % (dim * dim));
                let (row, col) = (e / dim, e % dim);
                let o = (row / inner) * self.n0[l] + col / inner;
                let e2 = (row % inner) * inner + col % inner;
                for &j in lay.dec_row(l, o) {
                    out.push(self.dec_visit(l + 1, (path * self.m[l] + j) * inner * inner + e2));
                }
            }
        }
    }

    /// Position of the first use of a value strictly after `t`.
    pub fn next_use(&self, v: &Visit, t: u64) -> Option<u64> {
        match v.part {
            Part::EncA => self.enc_next(SIDE_A, v.level, v.slot, t),
            Part::EncB => self.enc_next(SIDE_B, v.level, v.slot, t),
            _ => self.dec_next(v.level, v.slot, t),
        }
    }

    fn dec_next(&self, l: usize, slot: usize, t: u64) -> Option<u64> {
        if l == 1 {
            return None;
        }
        let d2 = self.d2[l] as usize;
        let (q, e) = (slot / d2, slot % d2);
        let s = l - 1;
        let (parent, j) = (q / self.m[s], q % self.m[s]);
        let (inner, dim) = (self.dim[l], self.dim[s]);
        let (er, ec) = (e / inner, e % inner);
        self.wcols[s][j]
            .iter()
            .map(|&o| {
                let (or, oc) = (o / self.n0[s], o % self.n0[s]);
                self.pos_dec(s, parent * dim * dim + (or * inner + er) * dim + oc * inner + ec)
            })
            .filter(|&p| p > t)
            .min()
    }

    fn enc_next(&self, side: usize, l: usize, slot: usize, t: u64) -> Option<u64> {
        if l == self.k + 1 {
            return Some(self.pos_prod(slot)).filter(|&p| p > t);
        }
        if l < self.c {
            let q = slot / self.d2[l] as usize;
            self.descend(side, l, slot, self.off(l, q), t)
        } else {
            self.enumerate(side, l, slot, t)
        }
    }

    /// Child block column `p` and entry inside it, for a slot at level `l`.
    fn child_entry(&self, l: usize, slot: usize) -> (usize, usize, usize) {
        let d2 = self.d2[l] as usize;
        let (q, e) = (slot / d2, slot % d2);
        let (dim, inner) = (self.dim[l], self.dim[l + 1]);
        let (row, col) = (e / dim, e % dim);
        let p = (row / inner) * self.n0[l] + col / inner;
        (q, p, (row % inner) * inner + col % inner)
    }

    /// Consumers of an encoding value at level `l < c`, whose subproblem starts at `o`.
    fn descend(&self, side: usize, l: usize, slot: usize, o: u64, t: u64) -> Option<u64> {
        let (q, p, e2) = self.child_entry(l, slot);
        let d2 = self.d2[l + 1];
        for &j in &self.cols[side][l][p] {
            if o + self.pg[l][j + 1] <= t + 1 {
                continue;
            }
            let cslot = (q * self.m[l] + j) * d2 as usize + e2;
            if self.created[side][l][j] {
                let shift = if side == SIDE_B { u64::from(self.created[SIDE_A][l][j]) * d2 } else { 0 };
                let pos = o + self.pg[l][j] + shift + e2 as u64;
                if pos > t {
                    return Some(pos);
                }
                continue;
            }
            let oc = o + self.pg[l][j] + self.ce[l][j];
            let found = if l + 1 == self.k + 1 && self.c > self.k {
                Some(oc).filter(|&x| x > t)
            } else if l + 1 < self.c {
                self.descend(side, l + 1, cslot, oc, t)
            } else {
                self.enumerate(side, l + 1, cslot, t)
            };
            if found.is_some() {
                return found;
            }
        }
        None
    }

    /// Exhaustive version of [`Self::descend`] for values inside a block.
    fn enumerate(&self, side: usize, l: usize, slot: usize, t: u64) -> Option<u64> {
        if l == self.k + 1 {
            return Some(self.pos_prod(slot)).filter(|&p| p > t);
        }
        let (q, p, e2) = self.child_entry(l, slot);
        let d2 = self.d2[l + 1] as usize;
        let mut best: Option<u64> = None;
        for &j in &self.cols[side][l][p] {
            let cslot = (q * self.m[l] + j) * d2 + e2;
            let cand = if self.created[side][l][j] {
                Some(self.pos_enc(side, l + 1, cslot)).filter(|&x| x > t)
            } else {
                self.enumerate(side, l + 1, cslot, t)
            };
            best = match (best, cand) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            };
        }
        best
    }
}

/// Simulate the depth-first schedule of `H_k` without building the graph.
pub fn simulate_implicit(
    schemes: &[BilinearScheme],
    k: usize,
    identify_unit_rows: bool,
    cutoff_depth: Option<usize>,
    m_words: usize,
    policy: Policy,
) -> Result<SimReport, IoError> {
    let layout = Layout::new(schemes, k, Part::Full, identify_unit_rows)?;
    let plan = DfsPlan::new(layout, cutoff_depth);
    let need = plan.memory_needed();
    if m_words < need {
        return Err(IoError::MemoryTooSmall { m: m_words, need });
    }
    let mut mem = Memory::new(m_words, policy);
    let mut ops: Vec<Visit> = Vec::with_capacity(16);
    let mut acc: Vec<Access> = Vec::with_capacity(16);
    let mut t = 0u64;
    plan.walk(|v| {
        ops.clear();
        plan.operands(&v, &mut ops);
        acc.clear();
        for u in &ops {
            if acc.iter().any(|a| a.id == u.id) {
                continue;
            }
            let input = u.level == 1 && u.part != Part::Dec;
            acc.push(Access { id: u.id, input, output: false, next: plan.next_use(u, t) });
        }
        let output = v.part == Part::Dec && v.level == 1;
        mem.execute(t, v.id, &acc, plan.next_use(&v, t), output);
        t += 1;
    });
    let kind = ScheduleKind::Dfs { cutoff_depth };
    Ok(SimReport::from_tally(mem.finish(), m_words, policy, kind.label()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cdag::{build_full, BuildOptions};
    use crate::iosim::{dfs_schedule, simulate};

    fn schemes() -> Vec<Vec<BilinearScheme>> {
        vec![
            vec![BilinearScheme::strassen()],
            vec![BilinearScheme::winograd()],
            vec![BilinearScheme::classical(2)],
            vec![BilinearScheme::strassen(), BilinearScheme::classical(3), BilinearScheme::winograd()],
        ]
    }

    #[test]
    fn positions_match_walk() {
        for s in schemes() {
            let k = if s.len() == 1 { 3 } else { s.len() };
            for cutoff in [None, Some(0), Some(1), Some(2), Some(k)] {
                let plan = DfsPlan::new(Layout::new(&s, k, Part::Full, true).unwrap(), cutoff);
                let mut t = 0u64;
                plan.walk(|v| {
                    assert_eq!(plan.position(v.part, v.level, v.slot), Some(t), "{v:?} cutoff {cutoff:?}");
                    assert_eq!(plan.position_of(v.id as usize), Some(t));
                    t += 1;
                });
                assert_eq!(t, plan.len());
            }
        }
    }

    #[test]
    fn next_use_matches_graph() {
        for s in schemes() {
            let k = if s.len() == 1 { 3 } else { s.len() };
            let g = build_full(&s, k, BuildOptions::default()).unwrap();
            for cutoff in [None, Some(1)] {
                let plan = DfsPlan::new(Layout::new(&s, k, Part::Full, true).unwrap(), cutoff);
                let sched = dfs_schedule(&g, cutoff).unwrap();
                let pos = sched.positions(g.num_vertices());
                let mut ops = Vec::new();
                let mut t = 0u64;
                plan.walk(|v| {
                    ops.clear();
                    plan.operands(&v, &mut ops);
                    let want: Vec<u64> = g.preds(v.id as usize).iter().map(|&u| u as u64).collect();
                    let got: Vec<u64> = ops.iter().map(|o| o.id).collect();
                    assert_eq!(got, want);
                    for u in ops.iter().chain(std::iter::once(&v)) {
                        let expect = g
                            .succs(u.id as usize)
                            .iter()
                            .filter_map(|&x| pos[x].map(|p| p as u64))
                            .filter(|&p| p > t)
                            .min();
                        assert_eq!(plan.next_use(u, t), expect, "{u:?} at {t}");
                    }
                    t += 1;
                });
            }
        }
    }

    #[test]
    fn implicit_equals_explicit() {
        for s in schemes().into_iter().take(3) {
            for k in 1..=3 {
                let g = build_full(&s, k, BuildOptions::default()).unwrap();
                for m in [8, 16, 48, 200] {
                    for policy in [Policy::Belady, Policy::Lru] {
                        for cutoff in [None, Some(1)] {
                            let sched = dfs_schedule(&g, cutoff).unwrap();
                            let a = simulate(&g, &sched, m, policy).unwrap();
                            let b = simulate_implicit(&s, k, true, cutoff, m, policy).unwrap();
                            assert_eq!(a, b, "{} k={k} m={m} {policy:?} {cutoff:?}", s[0].name);
                        }
                    }
                }
            }
        }
    }
}
