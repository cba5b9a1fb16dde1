//! Line-oriented Markov-system spec files.
//!
//! ```text
//! # comment
//! VERTEX <id> <dim>
//! REGION <vertex-id> <lo_1> <hi_1> ... <lo_n> <hi_n>
//! EDGE <src> <dst> <prob> A <dst_dim * src_dim entries, row-major> B <dst_dim entries>
//! ```
//!
//! Parsing checks syntax and arities only; call [`super::validate`] for the
//! structural invariants.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{AffineMap, Edge, MarkovSystemSpec, Region, Vertex};
use crate::error::{Error, Result};

pub fn read_spec(path: impl AsRef<Path>) -> Result<MarkovSystemSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_spec(&text)
}

pub fn parse_spec(text: &str) -> Result<MarkovSystemSpec> {
    let mut spec = MarkovSystemSpec::new();
    let mut ids: HashMap<String, usize> = HashMap::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse { line, message };
        let toks: Vec<&str> = content.split_whitespace().collect();
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| err(format!("expected a number, found `{s}`")))
        };
        let vertex = |s: &str| -> Result<usize> {
            ids.get(s)
                .copied()
                .ok_or_else(|| err(format!("unknown vertex `{s}`")))
        };

        match toks[0] {
            "VERTEX" => {
                if toks.len() != 3 {
                    return Err(err("VERTEX takes <id> <dim>".into()));
                }
                let dim: usize = toks[2]
                    .parse()
                    .ok()
                    .filter(|d| *d > 0)
                    .ok_or_else(|| err(format!("invalid dimension `{}`", toks[2])))?;
                if ids.contains_key(toks[1]) {
                    return Err(err(format!("duplicate vertex `{}`", toks[1])));
                }
                ids.insert(toks[1].to_string(), spec.vertices.len());
                spec.vertices.push(Vertex {
                    label: toks[1].to_string(),
                    dim,
                    region: None,
                });
            }
            "REGION" => {
                if toks.len() < 2 {
                    return Err(err("REGION needs a vertex id".into()));
                }
                let v = vertex(toks[1])?;
                let dim = spec.vertices[v].dim;
                if toks.len() != 2 + 2 * dim {
                    return Err(err(format!(
                        "REGION for {dim}-dimensional vertex needs {} bounds, found {}",
                        2 * dim,
                        toks.len() - 2
                    )));
                }
                if spec.vertices[v].region.is_some() {
                    return Err(err(format!("duplicate region for vertex `{}`", toks[1])));
                }
                let bounds = toks[2..].iter().map(|t| num(t)).collect::<Result<Vec<_>>>()?;
                let lo = bounds.iter().step_by(2).copied().collect();
                let hi = bounds.iter().skip(1).step_by(2).copied().collect();
                spec.vertices[v].region = Some(Region::new(lo, hi));
            }
            "EDGE" => {
                if toks.len() < 5 {
                    return Err(err("EDGE takes <src> <dst> <prob> A .. B ..".into()));
                }
                let source = vertex(toks[1])?;
                let target = vertex(toks[2])?;
                let prob = num(toks[3])?;
                let a_pos = toks.iter().position(|t| *t == "A");
                let b_pos = toks.iter().position(|t| *t == "B");
                let (Some(a), Some(b)) = (a_pos, b_pos) else {
                    return Err(err("EDGE needs `A` and `B` sections".into()));
                };
                if a != 4 || b < a {
                    return Err(err("EDGE sections must read <prob> A .. B ..".into()));
                }
                let matrix = toks[a + 1..b].iter().map(|t| num(t)).collect::<Result<Vec<_>>>()?;
                let offset = toks[b + 1..].iter().map(|t| num(t)).collect::<Result<Vec<_>>>()?;
                let (rows, cols) = (spec.vertices[target].dim, spec.vertices[source].dim);
                let map = AffineMap::new(rows, cols, matrix, offset).map_err(|e| match e {
                    Error::Domain(m) => err(m),
                    other => other,
                })?;
                spec.edges.push(Edge {
                    source,
                    target,
                    prob,
                    map,
                });
            }
            other => return Err(err(format!("unknown record `{other}`"))),
        }
    }
    Ok(spec)
}

impl MarkovSystemSpec {
    /// Renders the spec in the text format read by [`parse_spec`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            let _ = writeln!(out, "VERTEX {} {}", v.label, v.dim);
        }
        for v in &self.vertices {
            if let Some(r) = &v.region {
                let _ = write!(out, "REGION {}", v.label);
                for (lo, hi) in r.lo.iter().zip(&r.hi) {
                    let _ = write!(out, " {lo:?} {hi:?}");
                }
                out.push('\n');
            }
        }
        for e in &self.edges {
            let _ = write!(
                out,
                "EDGE {} {} {:?} A",
                self.vertices[e.source].label, self.vertices[e.target].label, e.prob
            );
            for a in e.map.matrix() {
                let _ = write!(out, " {a:?}");
            }
            out.push_str(" B");
            for b in e.map.offset() {
                let _ = write!(out, " {b:?}");
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::validate;

    const BERNOULLI: &str = "\
# Bernoulli convolution on [0, 1]
VERTEX 1 1
REGION 1 0 1

EDGE 1 1 0.5 A 0.5 B 0
EDGE 1 1 0.5 A 0.5 B 0.5   # upper half
";

    #[test]
    fn parses_ifs() {
        let spec = parse_spec(BERNOULLI).unwrap();
        assert_eq!(spec.vertex_count(), 1);
        assert_eq!(spec.edges.len(), 2);
        assert_eq!(spec.edges[1].map.offset(), &[0.5]);
        assert!(validate(&spec).is_empty());
    }

    #[test]
    fn two_dimensional_records() {
        let text = "VERTEX a 2\nREGION a 0 1 -1 1\nEDGE a a 1 A 0.5 0 0 0.5 B 0 0\n";
        let spec = parse_spec(text).unwrap();
        let r = spec.vertices[0].region.as_ref().unwrap();
        assert_eq!(r.lo, vec![0.0, -1.0]);
        assert_eq!(r.hi, vec![1.0, 1.0]);
        assert!(validate(&spec).is_empty());
    }

    #[test]
    fn malformed_edge_names_line() {
        let text = "VERTEX 1 1\nREGION 1 0 1\n\nEDGE 1 1 0.5 A 0.5 0.1 B 0\n";
        match parse_spec(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        for (text, line) in [
            ("VERTEX 1 1\nEDGE 1 2 1 A 1 B 0\n", 2),
            ("VERTEX 1 1\nREGION 1 0\n", 2),
            ("VERTEX 1 x\n", 1),
            ("VERTEX 1 1\nVERTEX 1 1\n", 2),
            ("# ok\nFOO\n", 2),
            ("VERTEX 1 1\nEDGE 1 1 half A 1 B 0\n", 2),
            ("VERTEX 1 1\nEDGE 1 1 1 B 0 A 1\n", 2),
        ] {
            match parse_spec(text) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn text_roundtrip() {
        let spec = parse_spec(BERNOULLI).unwrap();
        assert_eq!(parse_spec(&spec.to_text()).unwrap(), spec);
    }
}
