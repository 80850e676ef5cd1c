use crate::scheme::BilinearScheme;

use super::layout::{Layout, SIDE_A, SIDE_B};
use super::{level_schemes, Cdag, CdagError, GraphBuilder, Meta, Part, VertexKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildOptions {
    /// Merge an encoding row that copies one input entry with coefficient 1
    /// into that input vertex instead of creating a copy vertex.
    pub identify_unit_rows: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self { identify_unit_rows: true }
    }
}

fn meta_for(schemes: &[BilinearScheme], k: usize, part: Part, opts: BuildOptions) -> Meta {
    Meta {
        schemes: schemes.to_vec(),
        k,
        part,
        identify_unit_rows: opts.identify_unit_rows,
        expanded: None,
        regular_degree: None,
    }
}

/// `(level, path, row, col)` of a decoding vertex.
type Label = (usize, usize, usize, usize);

/// The decoding graph `Dec_k C`, assembled top-down: `Dec_{t+1}` is made of
/// `P` copies of the innermost `Dec_1` whose outputs are identified with the
/// inputs of `n0^2` copies of `Dec_t`, copy `q` taking output `q` of every
/// `Dec_1` copy.
pub fn build_dec(schemes: &[BilinearScheme], k: usize) -> Result<Cdag, CdagError> {
    let levels = level_schemes(schemes, k)?;
    let edges = top_down_edges(&levels);
    let layout = Layout::from_level_schemes(levels.clone(), Part::Dec, true);
    let id = |(l, path, r, c): Label| {
        let d = layout.dim(l);
        layout.dec_id(l, path * d * d + r * d + c)
    };
    let n = layout.num_vertices();
    let mut keyed: Vec<(usize, usize)> = edges.into_iter().map(|(a, b)| (id(b), id(a))).collect();
    keyed.sort_by_key(|&(dst, _)| dst);
    let mut b = GraphBuilder::with_capacity(n, keyed.len());
    let mut cursor = 0;
    let mut preds = Vec::new();
    for v in 0..n {
        preds.clear();
        while cursor < keyed.len() && keyed[cursor].0 == v {
            preds.push(keyed[cursor].1);
            cursor += 1;
        }
        let (_, level, _) = layout.locate(v);
        b.push(dec_kind(level, k), Some(level), Part::Dec, &preds);
    }
    let outputs = layout.output_ids();
    b.finish(meta_for(schemes, k, Part::Dec, BuildOptions::default()), outputs)
}

fn dec_kind(level: usize, k: usize) -> VertexKind {
    if level == 1 {
        VertexKind::Output
    } else if level == k + 1 {
        VertexKind::Product
    } else {
        VertexKind::Add
    }
}

fn top_down_edges(levels: &[BilinearScheme]) -> Vec<(Label, Label)> {
    let base = |s: &BilinearScheme| -> Vec<(Label, Label)> {
        let mut e = Vec::new();
        for (out, row) in s.w.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                if !num_traits::Zero::is_zero(c) {
                    e.push(((2, j, 0, 0), (1, 0, out / s.n0, out % s.n0)));
                }
            }
        }
        e
    };
    let mut edges = base(&levels[0]);
    let mut prefix_paths = levels[0].m;
    for (t, s) in levels.iter().enumerate().skip(1) {
        let depth = t + 1;
        // Innermost Dec_1 copies, one per path of the previous depth.
        let bottom = base(s);
        let mut next = Vec::with_capacity(edges.len() * s.n0 * s.n0 + prefix_paths * bottom.len());
        for path in 0..prefix_paths {
            for &((_, j, _, _), (_, _, r, c)) in &bottom {
                next.push(((depth + 1, path * s.m + j, 0, 0), (depth, path, r, c)));
            }
        }
        // n0^2 copies of the previous graph, copy q refining every entry by q.
        let relabel = |(l, path, r, c): Label, qr: usize, qc: usize| {
            (l, path, r * s.n0 + qr, c * s.n0 + qc)
        };
        for qr in 0..s.n0 {
            for qc in 0..s.n0 {
                for &(a, b) in &edges {
                    next.push((relabel(a, qr, qc), relabel(b, qr, qc)));
                }
            }
        }
        edges = next;
        prefix_paths *= s.m;
    }
    edges
}

/// Encoding graph of one side (`Part::EncA` or `Part::EncB`).
pub fn build_enc(
    schemes: &[BilinearScheme],
    k: usize,
    part: Part,
    opts: BuildOptions,
) -> Result<Cdag, CdagError> {
    match part {
        Part::EncA | Part::EncB => build_part(schemes, k, part, opts),
        other => Err(CdagError::Malformed(format!("build_enc needs encA or encB, got {other:?}"))),
    }
}

/// The full graph `H_k`: both encodings wired pairwise into the products of `Dec_k C`.
pub fn build_full(schemes: &[BilinearScheme], k: usize, opts: BuildOptions) -> Result<Cdag, CdagError> {
    build_part(schemes, k, Part::Full, opts)
}

/// Materialize any part from the arithmetic layout.
pub fn build_part(
    schemes: &[BilinearScheme],
    k: usize,
    part: Part,
    opts: BuildOptions,
) -> Result<Cdag, CdagError> {
    if part == Part::Custom {
        return Err(CdagError::Malformed("cannot build a custom part".into()));
    }
    let layout = Layout::new(schemes, k, part, opts.identify_unit_rows)?;
    materialize(&layout, meta_for(schemes, k, part, opts))
}

pub(crate) fn materialize(layout: &Layout, meta: Meta) -> Result<Cdag, CdagError> {
    let k = layout.k();
    let part = layout.part();
    let mut b = GraphBuilder::with_capacity(layout.num_vertices(), 3 * layout.num_vertices());
    let sides: &[(usize, Part)] = match part {
        Part::Full => &[(SIDE_A, Part::EncA), (SIDE_B, Part::EncB)],
        Part::EncA => &[(SIDE_A, Part::EncA)],
        Part::EncB => &[(SIDE_B, Part::EncB)],
        _ => &[],
    };
    let mut preds = Vec::new();
    for &(side, vpart) in sides {
        for _ in 0..layout.slots(1) {
            b.push(VertexKind::Input, Some(1), vpart, &[]);
        }
        for level in 2..=k + 1 {
            for slot in 0..layout.slots(level) {
                if !layout.enc_created(side, level, slot) {
                    continue;
                }
                preds.clear();
                preds.extend(
                    layout
                        .enc_operand_slots(side, level, slot)
                        .into_iter()
                        .map(|t| layout.enc_value_id(side, level - 1, t)),
                );
                debug_assert_eq!(b.len(), layout.enc_id(side, level, slot));
                b.push(VertexKind::Add, Some(level), vpart, &preds);
            }
        }
    }
    if matches!(part, Part::Full | Part::Dec) {
        for slot in 0..layout.slots(k + 1) {
            preds.clear();
            if part == Part::Full {
                preds.push(layout.enc_value_id(SIDE_A, k + 1, slot));
                preds.push(layout.enc_value_id(SIDE_B, k + 1, slot));
            }
            b.push(dec_kind(k + 1, k), Some(k + 1), Part::Dec, &preds);
        }
        for level in (1..=k).rev() {
            for slot in 0..layout.slots(level) {
                preds.clear();
                preds.extend(
                    layout
                        .dec_operand_slots(level, slot)
                        .into_iter()
                        .map(|t| layout.dec_id(level + 1, t)),
                );
                b.push(dec_kind(level, k), Some(level), Part::Dec, &preds);
            }
        }
    }
    b.finish(meta, layout.output_ids())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strassen() -> Vec<BilinearScheme> {
        vec![BilinearScheme::strassen()]
    }

    #[test]
    fn dec1_counts() {
        let g = build_dec(&strassen(), 1).unwrap();
        assert_eq!((g.num_vertices(), g.num_edges()), (11, 12));
        assert_eq!((g.inputs().len(), g.outputs().len()), (7, 4));
        let c = build_dec(&[BilinearScheme::classical(2)], 1).unwrap();
        assert_eq!((c.num_vertices(), c.num_edges(), c.weak_components()), (12, 8, 4));
    }

    #[test]
    fn dec2_levels() {
        let g = build_dec(&strassen(), 2).unwrap();
        assert_eq!(g.level_sizes(), vec![16, 28, 49]);
        assert_eq!(g.num_vertices(), 93);
        assert!(g.ids_are_topological());
    }

    #[test]
    fn top_down_matches_layout() {
        for schemes in [
            strassen(),
            vec![BilinearScheme::winograd()],
            vec![BilinearScheme::strassen(), BilinearScheme::classical(2), BilinearScheme::winograd()],
            vec![BilinearScheme::classical(3), BilinearScheme::strassen()],
        ] {
            let k = if schemes.len() == 1 { 3 } else { schemes.len() };
            let a = build_dec(&schemes, k).unwrap();
            let b = build_part(&schemes, k, Part::Dec, BuildOptions::default()).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn enc1_counts() {
        for part in [Part::EncA, Part::EncB] {
            let g = build_enc(&strassen(), 1, part, BuildOptions::default()).unwrap();
            assert_eq!((g.inputs().len(), g.outputs().len()), (4, 7));
            assert_eq!((g.num_vertices(), g.num_edges()), (9, 10));
            let plain =
                build_enc(&strassen(), 1, part, BuildOptions { identify_unit_rows: false }).unwrap();
            assert_eq!((plain.num_vertices(), plain.num_edges()), (11, 12));
            assert_eq!((plain.inputs().len(), plain.outputs().len()), (4, 7));
        }
    }

    #[test]
    fn enc_out_degree_grows() {
        let degs: Vec<usize> = (1..=4)
            .map(|k| {
                build_enc(&strassen(), k, Part::EncA, BuildOptions::default()).unwrap().max_out_degree()
            })
            .collect();
        assert!(degs.windows(2).all(|w| w[1] > w[0]), "{degs:?}");
    }

    #[test]
    fn full_h1() {
        let g = build_full(&strassen(), 1, BuildOptions::default()).unwrap();
        assert_eq!(g.count_kind(VertexKind::Product), 7);
        assert_eq!(g.count_kind(VertexKind::Input), 8);
        assert_eq!(g.outputs().len(), 4);
        for v in 0..g.num_vertices() {
            if g.kind(v) == VertexKind::Product {
                let p = g.preds(v);
                assert_eq!(p.len(), 2);
                assert_eq!(g.part_of(p[0]), Part::EncA);
                assert_eq!(g.part_of(p[1]), Part::EncB);
            }
        }
        assert!(g.ids_are_topological());
    }

    #[test]
    fn dec_fraction_of_full() {
        for k in 1..=6 {
            let dec = build_dec(&strassen(), k).unwrap().num_vertices();
            let full = build_full(&strassen(), k, BuildOptions::default()).unwrap().num_vertices();
            assert!(3 * dec >= full, "k={k}");
        }
    }

    #[test]
    fn errors() {
        assert!(matches!(build_dec(&[], 1), Err(CdagError::EmptySchemes)));
        assert!(matches!(build_dec(&strassen(), 0), Err(CdagError::ZeroDepth)));
        let two = vec![BilinearScheme::strassen(); 2];
        assert!(matches!(build_dec(&two, 3), Err(CdagError::SchemeCount { .. })));
    }
}
