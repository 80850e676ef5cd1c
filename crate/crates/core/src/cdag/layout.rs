//! Arithmetic vertex numbering for recursive bilinear CDAGs.
//!
//! A vertex is addressed by `(part, level, slot)`. At level `i` there are
//! `P_i = m_1 ... m_{i-1}` subproblems of dimension `N_i = n0_i ... n0_k`;
//! subproblem `path` (mixed radix, outermost digit most significant) and
//! entry `(row, col)` give `slot = path * N_i^2 + row * N_i + col`.
//!
//! Encoding graphs run from level 1 (the input matrix) to level `k + 1` (the
//! product operands); the decoding graph runs from level `k + 1` (products) to
//! level 1 (the output matrix). Identified encoding slots (unit rows with
//! coefficient 1) are not vertices; they resolve to the slot they copy.
//! Canonical ids list encode A levels ascending, encode B levels ascending and
//! decode levels descending, each in slot order, so ids are topological.

use std::ops::Range;

use crate::scheme::BilinearScheme;

use super::{CdagError, Part};

/// Which encoding side.
pub const SIDE_A: usize = 0;
pub const SIDE_B: usize = 1;

#[derive(Debug, Clone)]
pub struct Layout {
    schemes: Vec<BilinearScheme>,
    k: usize,
    part: Part,
    identify: bool,
    /// `dims[i]` is `N_i` for `i in 1..=k+1`.
    dims: Vec<usize>,
    /// `paths[i]` is `P_i`.
    paths: Vec<usize>,
    /// Per side and scheme level (0-based): rank of each row among created rows.
    rank: [Vec<Vec<Option<usize>>>; 2],
    created: [Vec<usize>; 2],
    /// Per side and scheme level: source entry of identified rows.
    unit_src: [Vec<Vec<usize>>; 2],
    /// Nonzero columns of each `u`, `v` row and each `w` row.
    enc_nz: [Vec<Vec<Vec<usize>>>; 2],
    dec_nz: Vec<Vec<Vec<usize>>>,
    enc_offset: [Vec<usize>; 2],
    dec_offset: Vec<usize>,
    total: usize,
}

impl Layout {
    pub fn new(
        schemes: &[BilinearScheme],
        k: usize,
        part: Part,
        identify_unit_rows: bool,
    ) -> Result<Self, CdagError> {
        let schemes = super::level_schemes(schemes, k)?;
        Ok(Self::from_level_schemes(schemes, part, identify_unit_rows))
    }

    /// Like [`Layout::new`] but without validating the schemes.
    pub(crate) fn from_level_schemes(
        schemes: Vec<BilinearScheme>,
        part: Part,
        identify: bool,
    ) -> Self {
        let k = schemes.len();
        let mut dims = vec![1; k + 2];
        for i in (1..=k).rev() {
            dims[i] = dims[i + 1] * schemes[i - 1].n0;
        }
        let mut paths = vec![1; k + 2];
        for i in 2..=k + 1 {
            paths[i] = paths[i - 1] * schemes[i - 2].m;
        }
        let nz = |row: &Vec<crate::scheme::Coeff>| -> Vec<usize> {
            row.iter()
                .enumerate()
                .filter(|(_, c)| !num_traits::Zero::is_zero(*c))
                .map(|(i, _)| i)
                .collect()
        };
        let mut rank: [Vec<Vec<Option<usize>>>; 2] = [Vec::new(), Vec::new()];
        let mut created: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
        let mut unit_src: [Vec<Vec<usize>>; 2] = [Vec::new(), Vec::new()];
        let mut enc_nz: [Vec<Vec<Vec<usize>>>; 2] = [Vec::new(), Vec::new()];
        for side in [SIDE_A, SIDE_B] {
            for s in &schemes {
                let mat = if side == SIDE_A { &s.u } else { &s.v };
                let mut r = Vec::with_capacity(s.m);
                let mut src = vec![usize::MAX; s.m];
                let mut count = 0;
                for (j, row) in mat.iter().enumerate() {
                    match BilinearScheme::unit_row(row).filter(|_| identify) {
                        Some(p) => {
                            src[j] = p;
                            r.push(None);
                        }
                        None => {
                            r.push(Some(count));
                            count += 1;
                        }
                    }
                }
                rank[side].push(r);
                created[side].push(count);
                unit_src[side].push(src);
                enc_nz[side].push(mat.iter().map(nz).collect());
            }
        }
        let dec_nz = schemes.iter().map(|s| s.w.iter().map(nz).collect()).collect();
        let mut layout = Self {
            schemes,
            k,
            part,
            identify,
            dims,
            paths,
            rank,
            created,
            unit_src,
            enc_nz,
            dec_nz,
            enc_offset: [vec![0; k + 2], vec![0; k + 2]],
            dec_offset: vec![0; k + 2],
            total: 0,
        };
        let mut next = 0;
        let sides: &[usize] = match part {
            Part::Full => &[SIDE_A, SIDE_B],
            Part::EncA => &[SIDE_A],
            Part::EncB => &[SIDE_B],
            _ => &[],
        };
        for &side in sides {
            for l in 1..=k + 1 {
                layout.enc_offset[side][l] = next;
                next += layout.enc_level_size(side, l);
            }
        }
        if matches!(part, Part::Full | Part::Dec) {
            for l in (1..=k + 1).rev() {
                layout.dec_offset[l] = next;
                next += layout.slots(l);
            }
        }
        layout.total = next;
        layout
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn part(&self) -> Part {
        self.part
    }

    pub fn identify_unit_rows(&self) -> bool {
        self.identify
    }

    pub fn schemes(&self) -> &[BilinearScheme] {
        &self.schemes
    }

    pub fn scheme(&self, level: usize) -> &BilinearScheme {
        &self.schemes[level - 1]
    }

    /// `N_i`: dimension of a level-`i` subproblem.
    pub fn dim(&self, level: usize) -> usize {
        self.dims[level]
    }

    /// `P_i`: number of level-`i` subproblems.
    pub fn paths(&self, level: usize) -> usize {
        self.paths[level]
    }

    /// Slot count at a level: `P_i * N_i^2`.
    pub fn slots(&self, level: usize) -> usize {
        self.paths[level] * self.dims[level] * self.dims[level]
    }

    pub fn num_vertices(&self) -> usize {
        self.total
    }

    /// Number of created vertices of an encoding level.
    pub fn enc_level_size(&self, side: usize, level: usize) -> usize {
        if level == 1 {
            self.slots(1)
        } else {
            let i = level - 1;
            self.paths[i] * self.created[side][i - 1] * self.dims[level] * self.dims[level]
        }
    }

    /// Decoding level sizes `|l_1| ..= |l_{k+1}|`.
    pub fn dec_level_sizes(&self) -> Vec<usize> {
        (1..=self.k + 1).map(|l| self.slots(l)).collect()
    }

    /// Split an encoding slot at level `i + 1` into `(path at level i, row j, entry)`.
    #[inline]
    pub fn split_child(&self, level: usize, slot: usize) -> (usize, usize, usize) {
        let d2 = self.dims[level] * self.dims[level];
        let m = self.schemes[level - 2].m;
        let q = slot / d2;
        (q / m, q % m, slot % d2)
    }

    /// Slot at level `i` holding entry `p` (of the `n0_i x n0_i` block grid) of
    /// path `path`, offset `e` within the block.
    #[inline]
    pub fn parent_slot(&self, level: usize, path: usize, p: usize, e: usize) -> usize {
        let n0 = self.schemes[level - 1].n0;
        let inner = self.dims[level + 1];
        let (pr, pc) = (p / n0, p % n0);
        let (r, c) = (e / inner, e % inner);
        let dim = self.dims[level];
        path * dim * dim + (pr * inner + r) * dim + pc * inner + c
    }

    pub fn enc_created(&self, side: usize, level: usize, slot: usize) -> bool {
        if level == 1 {
            return true;
        }
        let (_, j, _) = self.split_child(level, slot);
        self.rank[side][level - 2][j].is_some()
    }

    /// Follow identified slots down to the created slot holding the same value.
    pub fn enc_resolve(&self, side: usize, mut level: usize, mut slot: usize) -> (usize, usize) {
        while level > 1 {
            let (path, j, e) = self.split_child(level, slot);
            if self.rank[side][level - 2][j].is_some() {
                break;
            }
            let p = self.unit_src[side][level - 2][j];
            slot = self.parent_slot(level - 1, path, p, e);
            level -= 1;
        }
        (level, slot)
    }

    /// Id of a created encoding slot.
    pub fn enc_id(&self, side: usize, level: usize, slot: usize) -> usize {
        let off = self.enc_offset[side][level];
        if level == 1 {
            return off + slot;
        }
        let (path, j, e) = self.split_child(level, slot);
        let d2 = self.dims[level] * self.dims[level];
        let rank = self.rank[side][level - 2][j].expect("slot is identified");
        off + (path * self.created[side][level - 2] + rank) * d2 + e
    }

    /// Id of the vertex holding the value of any encoding slot.
    pub fn enc_value_id(&self, side: usize, level: usize, slot: usize) -> usize {
        let (l, s) = self.enc_resolve(side, level, slot);
        self.enc_id(side, l, s)
    }

    pub fn dec_id(&self, level: usize, slot: usize) -> usize {
        self.dec_offset[level] + slot
    }

    /// Id range of a decoding level.
    pub fn dec_range(&self, level: usize) -> Range<usize> {
        let off = self.dec_offset[level];
        off..off + self.slots(level)
    }

    pub fn enc_range(&self, side: usize, level: usize) -> Range<usize> {
        let off = self.enc_offset[side][level];
        off..off + self.enc_level_size(side, level)
    }

    /// Inverse of [`Layout::enc_id`] on a created level `>= 2`: `(path, j, e)`.
    pub fn enc_locate(&self, side: usize, level: usize, id: usize) -> (usize, usize, usize) {
        let local = id - self.enc_offset[side][level];
        let d2 = self.dims[level] * self.dims[level];
        let cc = self.created[side][level - 2];
        let q = local / d2;
        let (path, rank) = (q / cc, q % cc);
        let j = self.rank[side][level - 2]
            .iter()
            .position(|&r| r == Some(rank))
            .expect("rank exists");
        (path, j, local % d2)
    }

    /// Operand slots (at level `level - 1`, unresolved) of an encoding slot at `level >= 2`.
    pub fn enc_operand_slots(&self, side: usize, level: usize, slot: usize) -> Vec<usize> {
        let (path, j, e) = self.split_child(level, slot);
        self.enc_nz[side][level - 2][j]
            .iter()
            .map(|&p| self.parent_slot(level - 1, path, p, e))
            .collect()
    }

    /// Nonzero columns of row `j` of `u` (side A) or `v` (side B) of a scheme level.
    pub fn enc_row(&self, side: usize, scheme_level: usize, j: usize) -> &[usize] {
        &self.enc_nz[side][scheme_level - 1][j]
    }

    pub fn dec_row(&self, scheme_level: usize, out: usize) -> &[usize] {
        &self.dec_nz[scheme_level - 1][out]
    }

    pub fn is_identified(&self, side: usize, scheme_level: usize, j: usize) -> bool {
        self.rank[side][scheme_level - 1][j].is_none()
    }

    pub fn unit_source(&self, side: usize, scheme_level: usize, j: usize) -> usize {
        self.unit_src[side][scheme_level - 1][j]
    }

    /// Operand slots at level `level + 1` of a decoding slot at `level <= k`.
    pub fn dec_operand_slots(&self, level: usize, slot: usize) -> Vec<usize> {
        let dim = self.dims[level];
        let inner = self.dims[level + 1];
        let s = &self.schemes[level - 1];
        let (path, e) = (slot / (dim * dim), slot % (dim * dim));
        let (row, col) = (e / dim, e % dim);
        let out = (row / inner) * s.n0 + col / inner;
        let e2 = (row % inner) * inner + col % inner;
        self.dec_nz[level - 1][out]
            .iter()
            .map(|&j| (path * s.m + j) * inner * inner + e2)
            .collect()
    }

    /// Canonical ids of the operands of vertex `id`, in operand order.
    pub fn operands(&self, id: usize) -> Vec<usize> {
        match self.locate(id) {
            (Part::EncA, 1, _) | (Part::EncB, 1, _) => Vec::new(),
            (Part::EncA, l, s) => self.enc_operands(SIDE_A, l, s),
            (Part::EncB, l, s) => self.enc_operands(SIDE_B, l, s),
            (_, l, s) if l == self.k + 1 => {
                if self.part == Part::Full {
                    vec![self.enc_value_id(SIDE_A, l, s), self.enc_value_id(SIDE_B, l, s)]
                } else {
                    Vec::new()
                }
            }
            (_, l, s) => {
                self.dec_operand_slots(l, s).into_iter().map(|t| self.dec_id(l + 1, t)).collect()
            }
        }
    }

    fn enc_operands(&self, side: usize, level: usize, slot: usize) -> Vec<usize> {
        self.enc_operand_slots(side, level, slot)
            .into_iter()
            .map(|t| self.enc_value_id(side, level - 1, t))
            .collect()
    }

    /// `(part, level, slot)` of a canonical id.
    pub fn locate(&self, id: usize) -> (Part, usize, usize) {
        if matches!(self.part, Part::Full | Part::Dec) && id >= self.dec_offset[self.k + 1] {
            for l in 1..=self.k + 1 {
                let r = self.dec_range(l);
                if r.contains(&id) {
                    return (Part::Dec, l, id - r.start);
                }
            }
        }
        for side in [SIDE_A, SIDE_B] {
            let part = if side == SIDE_A { Part::EncA } else { Part::EncB };
            if !(self.part == Part::Full || self.part == part) {
                continue;
            }
            for l in 1..=self.k + 1 {
                let r = self.enc_range(side, l);
                if r.contains(&id) {
                    if l == 1 {
                        return (part, 1, id - r.start);
                    }
                    let (path, j, e) = self.enc_locate(side, l, id);
                    let d2 = self.dims[l] * self.dims[l];
                    let m = self.schemes[l - 2].m;
                    return (part, l, (path * m + j) * d2 + e);
                }
            }
        }
        panic!("id {id} out of range");
    }

    /// Canonical id of a `(part, level, slot)` key, resolving identified slots.
    pub fn id_of(&self, part: Part, level: usize, slot: usize) -> usize {
        match part {
            Part::EncA => self.enc_value_id(SIDE_A, level, slot),
            Part::EncB => self.enc_value_id(SIDE_B, level, slot),
            _ => self.dec_id(level, slot),
        }
    }

    /// Ids of the output vertices in canonical order.
    pub fn output_ids(&self) -> Vec<usize> {
        match self.part {
            Part::EncA | Part::EncB => {
                let side = if self.part == Part::EncA { SIDE_A } else { SIDE_B };
                (0..self.slots(self.k + 1))
                    .map(|s| self.enc_value_id(side, self.k + 1, s))
                    .collect()
            }
            _ => self.dec_range(1).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strassen_level_sizes() {
        let s = BilinearScheme::strassen();
        for k in 1..=6 {
            let l = Layout::new(std::slice::from_ref(&s), k, Part::Dec, true).unwrap();
            for i in 1..=k + 1 {
                assert_eq!(l.slots(i), 4usize.pow((k + 1 - i) as u32) * 7usize.pow((i - 1) as u32));
            }
        }
    }

    #[test]
    fn resolve_follows_identified_rows() {
        let s = BilinearScheme::strassen();
        let l = Layout::new(&[s], 2, Part::EncA, true).unwrap();
        // Product 3 (index 2) of the outer level is A11; its inner product 3 is A11 of that block.
        let slot = 2 * 7 + 2;
        assert_eq!(l.enc_resolve(SIDE_A, 3, slot), (1, 0));
        // Product 4 (index 3) is A22, inner product 3 (A11 of A22) is entry (2, 2).
        assert_eq!(l.enc_resolve(SIDE_A, 3, 3 * 7 + 2), (1, 2 * 4 + 2));
    }

    #[test]
    fn locate_inverts_ids() {
        let s = BilinearScheme::winograd();
        let l = Layout::new(&[s], 2, Part::Full, true).unwrap();
        for id in 0..l.num_vertices() {
            let (p, lv, slot) = l.locate(id);
            assert_eq!(l.id_of(p, lv, slot), id);
        }
    }
}
