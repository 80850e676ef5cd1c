use super::build::materialize;
use super::layout::Layout;
use super::{expand_binary, Cdag, CdagError, Meta, Part, TreeShape};

/// One copy of the base graph inside a decomposition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphCopy {
    /// Lowest decoding level (output side) the copy touches.
    pub base_level: usize,
    pub vertices: Vec<usize>,
    pub edges: Vec<(usize, usize)>,
    /// `map[b]` is the vertex of this copy playing the role of base vertex `b`,
    /// where the base is `Dec_b C` numbered canonically (and expanded with a
    /// left chain when the decomposed graph is). `None` when the expansion
    /// trees are random and copies need not be isomorphic.
    pub map: Option<Vec<usize>>,
}

/// Split `Dec_k C` into edge-disjoint copies of `Dec_b C`, one per
/// `(span, path prefix, inner offset)`: span `c` covers levels
/// `c*b + 1 ..= c*b + b + 1`. Requires `b | k`.
pub fn decompose(g: &Cdag, base_depth: usize) -> Result<Vec<GraphCopy>, CdagError> {
    if g.meta.part != Part::Dec {
        return Err(CdagError::NotDec(g.meta.part));
    }
    let k = g.meta.k;
    let b = base_depth;
    if b == 0 || b > k || !k.is_multiple_of(b) {
        return Err(CdagError::BaseDepth { b, k });
    }
    let levels = g.meta.level_schemes();
    let spans: Vec<&[crate::scheme::BilinearScheme]> = levels.chunks(b).collect();
    if b > 1 && spans.iter().any(|s| *s != spans[0]) {
        return Err(CdagError::MixedSchemes(b));
    }
    let layout = Layout::from_level_schemes(levels.clone(), Part::Dec, true);
    let expanded = g.meta.expanded.is_some();
    let orig: Vec<usize> = if expanded { g.original_ids() } else { Vec::new() };
    let chains = if expanded { g.chains() } else { Vec::new() };
    let image = |v: usize| if expanded { orig[v] } else { v };

    let mut copies = Vec::new();
    for (c, span) in spans.iter().enumerate() {
        let i0 = c * b + 1;
        let base = Layout::from_level_schemes(span.to_vec(), Part::Dec, true);
        let base_graph = match g.meta.expanded {
            Some(TreeShape::LeftChain) => {
                let mut meta = Meta::custom();
                meta.part = Part::Dec;
                meta.k = b;
                meta.schemes = span.to_vec();
                let collapsed = materialize(&base, meta)?;
                Some(expand_binary(&collapsed, TreeShape::LeftChain))
            }
            _ => None,
        };
        let inner = layout.dim(i0 + b);
        for path in 0..layout.paths(i0) {
            for e in 0..inner * inner {
                let (er, ec) = (e / inner, e % inner);
                let mut collapsed_map = Vec::with_capacity(base.num_vertices());
                for beta in (1..=b + 1).rev() {
                    let bd = base.dim(beta);
                    let l = i0 + beta - 1;
                    let gd = layout.dim(l);
                    for slot in 0..base.slots(beta) {
                        let (bp, be) = (slot / (bd * bd), slot % (bd * bd));
                        let (br, bc) = (be / bd, be % bd);
                        let gpath = path * base.paths(beta) + bp;
                        let gslot = gpath * gd * gd + (br * inner + er) * gd + bc * inner + ec;
                        collapsed_map.push(image(layout.dec_id(l, gslot)));
                    }
                }
                let sources = base.slots(b + 1);
                let mut vertices = collapsed_map.clone();
                let mut edges = Vec::new();
                for &v in &collapsed_map[sources..] {
                    if expanded {
                        for &t in &chains[v] {
                            vertices.push(t);
                            edges.extend(g.preds(t).iter().map(|&p| (p, t)));
                        }
                    }
                    edges.extend(g.preds(v).iter().map(|&p| (p, v)));
                }
                let map = match (&base_graph, expanded) {
                    (_, false) => Some(collapsed_map),
                    (Some(bg), true) => {
                        let base_orig_of = bg.original_ids();
                        let mut map = vec![usize::MAX; bg.num_vertices()];
                        let base_chains = bg.chains();
                        for (x, &bx) in base_orig_of.iter().enumerate() {
                            let gx = collapsed_map[x];
                            map[bx] = gx;
                            for (r, &t) in base_chains[bx].iter().enumerate() {
                                map[t] = chains[gx][r];
                            }
                        }
                        Some(map)
                    }
                    (None, true) => None,
                };
                vertices.sort_unstable();
                copies.push(GraphCopy { base_level: i0, vertices, edges, map });
            }
        }
    }
    Ok(copies)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cdag::{build_dec, regularize};
    use crate::scheme::BilinearScheme;

    fn check_partition(g: &Cdag, copies: &[GraphCopy]) {
        let mut all: Vec<(usize, usize)> = copies.iter().flat_map(|c| c.edges.clone()).collect();
        let mut want: Vec<(usize, usize)> = g.edges().collect();
        all.sort_unstable();
        want.sort_unstable();
        assert_eq!(all, want);
        let mut covered = vec![false; g.num_vertices()];
        for c in copies {
            for &v in &c.vertices {
                covered[v] = true;
            }
        }
        assert!(covered.iter().all(|&x| x));
    }

    fn check_iso(base: &Cdag, copy: &GraphCopy) {
        let map = copy.map.as_ref().unwrap();
        assert_eq!(map.len(), base.num_vertices());
        let mut mapped: Vec<(usize, usize)> = base.edges().map(|(a, b)| (map[a], map[b])).collect();
        let mut edges = copy.edges.clone();
        mapped.sort_unstable();
        edges.sort_unstable();
        assert_eq!(mapped, edges);
        let mut verts = map.clone();
        verts.sort_unstable();
        assert_eq!(verts, copy.vertices);
    }

    #[test]
    fn strassen_copy_counts() {
        let s = [BilinearScheme::strassen()];
        let base = build_dec(&s, 1).unwrap();
        for (k, want) in [(1, 1), (2, 11), (3, 93)] {
            let g = build_dec(&s, k).unwrap();
            let copies = decompose(&g, 1).unwrap();
            assert_eq!(copies.len(), want);
            check_partition(&g, &copies);
            for c in &copies {
                check_iso(&base, c);
            }
        }
    }

    #[test]
    fn expanded_copies_are_isomorphic() {
        let s = [BilinearScheme::strassen()];
        let base = expand_binary(&build_dec(&s, 1).unwrap(), TreeShape::LeftChain);
        let g = expand_binary(&build_dec(&s, 3).unwrap(), TreeShape::LeftChain);
        let g = regularize(&g, 6).unwrap();
        let copies = decompose(&g, 1).unwrap();
        assert_eq!(copies.len(), 93);
        check_partition(&g, &copies);
        for c in &copies {
            check_iso(&base, c);
        }
        let r = expand_binary(&build_dec(&s, 2).unwrap(), TreeShape::Random(5));
        let copies = decompose(&r, 1).unwrap();
        check_partition(&r, &copies);
        assert!(copies.iter().all(|c| c.map.is_none()));
    }

    #[test]
    fn deeper_bases() {
        let s = [BilinearScheme::strassen()];
        let g = build_dec(&s, 4).unwrap();
        let base = build_dec(&s, 2).unwrap();
        let copies = decompose(&g, 2).unwrap();
        assert_eq!(copies.len(), 256 / 16 + 784 / 16);
        check_partition(&g, &copies);
        for c in &copies {
            check_iso(&base, c);
        }
        let whole = decompose(&g, 4).unwrap();
        assert_eq!(whole.len(), 1);
        assert_eq!(whole[0].vertices, (0..g.num_vertices()).collect::<Vec<_>>());
        assert!(matches!(decompose(&g, 3), Err(CdagError::BaseDepth { .. })));
    }

    #[test]
    fn mixed_schemes() {
        let mixed = [BilinearScheme::strassen(), BilinearScheme::winograd()];
        let g = build_dec(&mixed, 2).unwrap();
        let copies = decompose(&g, 1).unwrap();
        check_partition(&g, &copies);
        let base_w = build_dec(&mixed[1..], 1).unwrap();
        for c in copies.iter().filter(|c| c.base_level == 2) {
            check_iso(&base_w, c);
        }
        assert!(matches!(decompose(&g, 2), Ok(v) if v.len() == 1));
        let g = build_dec(&[mixed[0].clone(), mixed[1].clone(), mixed[0].clone(), mixed[0].clone()], 4)
            .unwrap();
        assert!(matches!(decompose(&g, 2), Err(CdagError::MixedSchemes(2))));
    }
}
