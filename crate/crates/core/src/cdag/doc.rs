//! Graph documents: JSON with one record per line.
//!
//! ```text
//! {
//! "format": "fmm-io-cdag/1",
//! "meta": {"schemes": [...], "k": 2, "part": "dec", "identify_unit_rows": true, "expanded": null, "regular_degree": null},
//! "vertices": [
//! {"id": 0, "kind": "product", "level": 3, "part": "dec", "loops": 0, "origin": null},
//! ...
//! ],
//! "edges": [
//! [src, dst],
//! ...
//! ],
//! "outputs": [...]
//! }
//! ```
//!
//! Ids must be dense and listed in order. Edges are grouped by destination in
//! operand order. `expanded` is `null`, `"left_chain"` or `{"random": seed}`.

use std::fmt::Write as _;

use serde_json::{json, Value};

use super::{Cdag, CdagError, GraphBuilder, Meta, Part, TreeShape, VertexKind};
use crate::scheme::BilinearScheme;

pub const FORMAT: &str = "fmm-io-cdag/1";

fn meta_json(m: &Meta) -> Value {
    let expanded = match m.expanded {
        None => Value::Null,
        Some(TreeShape::LeftChain) => json!("left_chain"),
        Some(TreeShape::Random(seed)) => json!({ "random": seed }),
    };
    json!({
        "schemes": m.schemes.iter().map(BilinearScheme::to_json).collect::<Vec<_>>(),
        "k": m.k,
        "part": m.part,
        "identify_unit_rows": m.identify_unit_rows,
        "expanded": expanded,
        "regular_degree": m.regular_degree,
    })
}

pub fn export(g: &Cdag) -> String {
    let mut out = String::with_capacity(64 * (g.num_vertices() + g.num_edges()));
    out.push_str("{\n");
    let _ = writeln!(out, "\"format\": \"{FORMAT}\",");
    let _ = writeln!(out, "\"meta\": {},", meta_json(&g.meta));
    out.push_str("\"vertices\": [\n");
    let n = g.num_vertices();
    for v in g.vertices() {
        let rec = json!({
            "id": v.id,
            "kind": v.kind,
            "level": v.level,
            "part": v.part,
            "loops": g.loops(v.id),
            "origin": g.origin(v.id),
        });
        let sep = if v.id + 1 < n { "," } else { "" };
        let _ = writeln!(out, "{rec}{sep}");
    }
    out.push_str("],\n\"edges\": [\n");
    let m = g.num_edges();
    for (i, (a, b)) in g.edges().enumerate() {
        let sep = if i + 1 < m { "," } else { "" };
        let _ = writeln!(out, "[{a}, {b}]{sep}");
    }
    out.push_str("],\n");
    let _ = writeln!(out, "\"outputs\": {}", json!(g.outputs()));
    out.push_str("}\n");
    out
}

fn bad(msg: impl Into<String>) -> CdagError {
    CdagError::Malformed(msg.into())
}

fn parse_meta(v: &Value) -> Result<Meta, CdagError> {
    let schemes = v["schemes"]
        .as_array()
        .ok_or_else(|| bad("meta.schemes must be an array"))?
        .iter()
        .map(BilinearScheme::from_json)
        .collect::<Result<Vec<_>, _>>()?;
    let k = v["k"].as_u64().ok_or_else(|| bad("meta.k must be an integer"))? as usize;
    let part: Part =
        serde_json::from_value(v["part"].clone()).map_err(|e| bad(format!("meta.part: {e}")))?;
    let identify_unit_rows = v["identify_unit_rows"].as_bool().unwrap_or(true);
    let expanded = match &v["expanded"] {
        Value::Null => None,
        Value::String(s) if s == "left_chain" => Some(TreeShape::LeftChain),
        Value::Object(o) => Some(TreeShape::Random(
            o.get("random").and_then(Value::as_u64).ok_or_else(|| bad("meta.expanded.random"))?,
        )),
        other => return Err(bad(format!("meta.expanded: unexpected {other}"))),
    };
    let regular_degree = match &v["regular_degree"] {
        Value::Null => None,
        x => Some(x.as_u64().ok_or_else(|| bad("meta.regular_degree"))? as usize),
    };
    Ok(Meta { schemes, k, part, identify_unit_rows, expanded, regular_degree })
}

fn index(v: &Value, what: &str) -> Result<usize, CdagError> {
    v.as_u64().map(|x| x as usize).ok_or_else(|| bad(format!("{what} must be a vertex id")))
}

pub fn import(text: &str) -> Result<Cdag, CdagError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    if doc["format"] != FORMAT {
        return Err(bad(format!("expected format `{FORMAT}`")));
    }
    let meta = parse_meta(&doc["meta"])?;
    let verts = doc["vertices"].as_array().ok_or_else(|| bad("vertices must be an array"))?;
    let n = verts.len();
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let edges = doc["edges"].as_array().ok_or_else(|| bad("edges must be an array"))?;
    for e in edges {
        let pair = e.as_array().filter(|p| p.len() == 2).ok_or_else(|| bad("edge must be [src, dst]"))?;
        let (a, b) = (index(&pair[0], "edge source")?, index(&pair[1], "edge target")?);
        if a >= n {
            return Err(CdagError::DanglingEdge(a));
        }
        if b >= n {
            return Err(CdagError::DanglingEdge(b));
        }
        preds[b].push(a);
    }
    let mut builder = GraphBuilder::with_capacity(n, edges.len());
    for (i, rec) in verts.iter().enumerate() {
        let id = index(&rec["id"], "vertex id")?;
        if id != i {
            return Err(bad(format!("vertex ids must be dense and ordered; found {id} at position {i}")));
        }
        let kind: VertexKind = serde_json::from_value(rec["kind"].clone())
            .map_err(|e| bad(format!("vertex {id} kind: {e}")))?;
        let level = match &rec["level"] {
            Value::Null => None,
            x => Some(index(x, "level")?),
        };
        let part: Part = match &rec["part"] {
            Value::Null => Part::Custom,
            x => serde_json::from_value(x.clone()).map_err(|e| bad(format!("vertex {id} part: {e}")))?,
        };
        let loops = rec["loops"].as_u64().unwrap_or(0) as usize;
        let origin = match &rec["origin"] {
            Value::Null => None,
            x => Some(index(x, "origin")?),
        };
        builder.push_full(kind, level, part, &preds[i], loops, origin);
    }
    let outputs = doc["outputs"]
        .as_array()
        .ok_or_else(|| bad("outputs must be an array"))?
        .iter()
        .map(|v| index(v, "output"))
        .collect::<Result<Vec<_>, _>>()?;
    builder.finish(meta, outputs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cdag::{build_dec, build_full, expand_binary, regularize, BuildOptions};

    #[test]
    fn round_trips() {
        let s = [BilinearScheme::strassen()];
        let g = build_dec(&s, 2).unwrap();
        assert_eq!(import(&export(&g)).unwrap(), g);
        let e = regularize(&expand_binary(&g, TreeShape::Random(9)), 6).unwrap();
        assert_eq!(import(&export(&e)).unwrap(), e);
        let h = build_full(&[BilinearScheme::winograd()], 2, BuildOptions::default()).unwrap();
        assert_eq!(import(&export(&h)).unwrap(), h);
    }

    #[test]
    fn rejects_bad_documents() {
        let g = build_dec(&[BilinearScheme::strassen()], 1).unwrap();
        let text = export(&g);
        let dangling = text.replace("[0, 7]", "[0, 99]");
        assert!(matches!(import(&dangling), Err(CdagError::DanglingEdge(99))));
        let cyclic = text.replace("[0, 7]", "[0, 7],\n[7, 0]");
        assert!(matches!(import(&cyclic), Err(CdagError::Cycle(_))));
        assert!(matches!(import("{}"), Err(CdagError::Malformed(_))));
        assert!(matches!(import("nope"), Err(CdagError::Malformed(_))));
    }
}
