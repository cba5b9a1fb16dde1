//! Markov systems on box-partitioned state spaces.
//!
//! A system is a finite directed multigraph whose vertices own pairwise disjoint
//! boxes of the state space and whose edges carry an affine map from the source
//! box into the target box together with a constant selection probability. This
//! module holds the data model and its validation; graph diagnostics, the
//! stochastic dynamics and the text format live in the submodules.

mod dynamics;
mod graph;
mod parse;
mod report;

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::PROB_SUM_TOL;

pub use dynamics::{
    average_contraction, coupling_probe, push_forward, simulate, ContractionEstimate,
    CouplingTrace, Trajectory,
};
pub use graph::{is_primitive, strongly_connected, wielandt_bound, Primitivity};
pub use parse::{parse_spec, read_spec};
pub use report::{ErgodicityReport, Verdict};

/// Closed axis-aligned box `[lo_1, hi_1] x .. x [lo_n, hi_n]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Region {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        Region { lo, hi }
    }

    pub fn interval(lo: f64, hi: f64) -> Self {
        Region::new(vec![lo], vec![hi])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.contains_with_tol(x, 0.0)
    }

    fn contains_with_tol(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (lo, hi))| *v >= lo - tol && *v <= hi + tol)
    }

    /// All `2^n` corner points.
    pub fn corners(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..1usize << n)
            .map(|mask| {
                (0..n)
                    .map(|k| if mask >> k & 1 == 1 { self.hi[k] } else { self.lo[k] })
                    .collect()
            })
            .collect()
    }

    fn interiors_overlap(&self, other: &Region) -> bool {
        self.dim() == other.dim()
            && (0..self.dim()).all(|k| self.lo[k].max(other.lo[k]) < self.hi[k].min(other.hi[k]))
    }
}

/// `x -> A x + b` with `A` stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    rows: usize,
    cols: usize,
    matrix: Vec<f64>,
    offset: Vec<f64>,
}

impl AffineMap {
    pub fn new(rows: usize, cols: usize, matrix: Vec<f64>, offset: Vec<f64>) -> Result<Self> {
        if matrix.len() != rows * cols || offset.len() != rows {
            return Err(Error::domain(format!(
                "affine map {rows}x{cols} needs {} matrix and {rows} offset entries, got {} and {}",
                rows * cols,
                matrix.len(),
                offset.len()
            )));
        }
        Ok(AffineMap {
            rows,
            cols,
            matrix,
            offset,
        })
    }

    /// One-dimensional `x -> a x + b`.
    pub fn scalar(a: f64, b: f64) -> Self {
        AffineMap {
            rows: 1,
            cols: 1,
            matrix: vec![a],
            offset: vec![b],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut matrix = vec![0.0; n * n];
        for i in 0..n {
            matrix[i * n + i] = 1.0;
        }
        AffineMap {
            rows: n,
            cols: n,
            matrix,
            offset: vec![0.0; n],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.cols
    }

    pub fn output_dim(&self) -> usize {
        self.rows
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.linear(x);
        for (o, b) in out.iter_mut().zip(&self.offset) {
            *o += b;
        }
        out
    }

    /// `A x` without the offset.
    pub fn linear(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        self.matrix
            .chunks_exact(self.cols.max(1))
            .take(self.rows)
            .map(|row| row.iter().zip(x).map(|(a, v)| a * v).sum())
            .collect()
    }

    /// Spectral norm of `A`, the Lipschitz constant under the Euclidean metric.
    pub fn lipschitz(&self) -> f64 {
        if self.rows == 1 && self.cols == 1 {
            return self.matrix[0].abs();
        }
        let m = DMatrix::from_row_slice(self.rows, self.cols, &self.matrix);
        m.singular_values().iter().fold(0.0_f64, |a, s| a.max(*s))
    }

    fn is_finite(&self) -> bool {
        self.matrix.iter().chain(&self.offset).all(|v| v.is_finite())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub label: String,
    pub dim: usize,
    pub region: Option<Region>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub prob: f64,
    pub map: AffineMap,
}

/// Raw description of a Markov system. Construct freely, then [`validate`] or
/// promote to a [`MarkovSystem`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MarkovSystemSpec {
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
}

impl MarkovSystemSpec {
    pub fn new() -> Self {
        Self::default()
    }

    /// Single-region system (an iterated function system) with `(prob, map)` pairs.
    pub fn ifs(region: Region, maps: impl IntoIterator<Item = (f64, AffineMap)>) -> Self {
        let mut spec = Self::new();
        let v = spec.add_vertex("1", region);
        for (p, m) in maps {
            spec.edges.push(Edge {
                source: v,
                target: v,
                prob: p,
                map: m,
            });
        }
        spec
    }

    pub fn add_vertex(&mut self, label: impl Into<String>, region: Region) -> usize {
        self.vertices.push(Vertex {
            label: label.into(),
            dim: region.dim(),
            region: Some(region),
        });
        self.vertices.len() - 1
    }

    pub fn add_edge(&mut self, source: usize, target: usize, prob: f64, map: AffineMap) -> Result<usize> {
        let n = self.vertices.len();
        if source >= n || target >= n {
            return Err(Error::domain(format!(
                "edge {source}->{target} references a vertex outside 0..{n}"
            )));
        }
        self.edges.push(Edge {
            source,
            target,
            prob,
            map,
        });
        Ok(self.edges.len() - 1)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn outgoing(&self, v: usize) -> impl Iterator<Item = (usize, &Edge)> {
        self.edges.iter().enumerate().filter(move |(_, e)| e.source == v)
    }

    /// Index of the first vertex whose region contains `x`.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        self.vertices
            .iter()
            .position(|v| v.region.as_ref().is_some_and(|r| r.contains(x)))
    }

    fn label(&self, v: usize) -> &str {
        &self.vertices[v].label
    }
}

/// One violated structural invariant of a [`MarkovSystemSpec`].
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Violation {
    NoVertices,
    DanglingEdge { edge: usize },
    MissingRegion { vertex: String },
    RegionShape { vertex: String, dim: usize, lo: usize, hi: usize },
    EmptyRegion { vertex: String, axis: usize },
    RegionOverlap { first: String, second: String },
    MapShape { edge: usize, expected: (usize, usize), found: (usize, usize) },
    NonFiniteMap { edge: usize },
    NegativeProbability { edge: usize, prob: f64 },
    ProbabilitySum { vertex: String, sum: f64 },
    Containment { edge: usize, corner: Vec<f64>, image: Vec<f64> },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoVertices => write!(f, "system has no vertices"),
            Violation::DanglingEdge { edge } => write!(f, "edge {edge} references an unknown vertex"),
            Violation::MissingRegion { vertex } => write!(f, "vertex {vertex} has no region"),
            Violation::RegionShape { vertex, dim, lo, hi } => write!(
                f,
                "vertex {vertex} is {dim}-dimensional but its region has {lo} lower and {hi} upper bounds"
            ),
            Violation::EmptyRegion { vertex, axis } => {
                write!(f, "region of vertex {vertex} is empty along axis {axis}")
            }
            Violation::RegionOverlap { first, second } => {
                write!(f, "regions of vertices {first} and {second} overlap")
            }
            Violation::MapShape { edge, expected, found } => write!(
                f,
                "edge {edge}: map is {}x{}, expected {}x{}",
                found.0, found.1, expected.0, expected.1
            ),
            Violation::NonFiniteMap { edge } => write!(f, "edge {edge}: map has non-finite entries"),
            Violation::NegativeProbability { edge, prob } => {
                write!(f, "edge {edge}: probability {prob} is not a non-negative number")
            }
            Violation::ProbabilitySum { vertex, sum } => {
                write!(f, "outgoing probabilities of vertex {vertex} sum to {sum}, not 1")
            }
            Violation::Containment { edge, corner, image } => write!(
                f,
                "edge {edge}: corner {corner:?} maps to {image:?}, outside the target region"
            ),
        }
    }
}

/// Reports every violated invariant; an empty list means the spec is valid.
pub fn validate(spec: &MarkovSystemSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    if spec.vertices.is_empty() {
        out.push(Violation::NoVertices);
        return out;
    }

    let mut regions_ok = vec![false; spec.vertices.len()];
    for (i, v) in spec.vertices.iter().enumerate() {
        let Some(r) = &v.region else {
            out.push(Violation::MissingRegion { vertex: v.label.clone() });
            continue;
        };
        if r.lo.len() != v.dim || r.hi.len() != v.dim {
            out.push(Violation::RegionShape {
                vertex: v.label.clone(),
                dim: v.dim,
                lo: r.lo.len(),
                hi: r.hi.len(),
            });
            continue;
        }
        let mut ok = true;
        for k in 0..v.dim {
            if !(r.lo[k] <= r.hi[k]) {
                out.push(Violation::EmptyRegion { vertex: v.label.clone(), axis: k });
                ok = false;
            }
        }
        regions_ok[i] = ok;
    }

    for a in 0..spec.vertices.len() {
        for b in a + 1..spec.vertices.len() {
            if let (Some(ra), Some(rb)) = (&spec.vertices[a].region, &spec.vertices[b].region) {
                if regions_ok[a] && regions_ok[b] && ra.interiors_overlap(rb) {
                    out.push(Violation::RegionOverlap {
                        first: spec.label(a).to_string(),
                        second: spec.label(b).to_string(),
                    });
                }
            }
        }
    }

    let mut sums = vec![0.0; spec.vertices.len()];
    for (idx, e) in spec.edges.iter().enumerate() {
        if e.source >= spec.vertices.len() || e.target >= spec.vertices.len() {
            out.push(Violation::DanglingEdge { edge: idx });
            continue;
        }
        if !(e.prob >= 0.0) || !e.prob.is_finite() {
            out.push(Violation::NegativeProbability { edge: idx, prob: e.prob });
        } else {
            sums[e.source] += e.prob;
        }
        let expected = (spec.vertices[e.target].dim, spec.vertices[e.source].dim);
        let found = (e.map.output_dim(), e.map.input_dim());
        if expected != found {
            out.push(Violation::MapShape { edge: idx, expected, found });
            continue;
        }
        if !e.map.is_finite() {
            out.push(Violation::NonFiniteMap { edge: idx });
            continue;
        }
        if !(regions_ok[e.source] && regions_ok[e.target]) {
            continue;
        }
        let (src, dst) = (
            spec.vertices[e.source].region.as_ref().unwrap(),
            spec.vertices[e.target].region.as_ref().unwrap(),
        );
        // affine images of a box are hulls of the corner images
        let scale = dst
            .lo
            .iter()
            .chain(&dst.hi)
            .fold(1.0_f64, |m, v| m.max(v.abs()));
        for corner in src.corners() {
            let image = e.map.apply(&corner);
            if !dst.contains_with_tol(&image, 1e-12 * scale) {
                out.push(Violation::Containment { edge: idx, corner, image });
                break;
            }
        }
    }

    for (v, sum) in sums.iter().enumerate() {
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            out.push(Violation::ProbabilitySum {
                vertex: spec.label(v).to_string(),
                sum: *sum,
            });
        }
    }
    out
}

/// A validated, immutable Markov system with per-vertex edge tables.
#[derive(Clone, Debug)]
pub struct MarkovSystem {
    spec: MarkovSystemSpec,
    out_edges: Vec<Vec<usize>>,
    out_probs: Vec<Vec<f64>>,
}

impl MarkovSystem {
    pub fn new(spec: MarkovSystemSpec) -> Result<Self> {
        let violations = validate(&spec);
        if !violations.is_empty() {
            return Err(Error::Invalid(violations));
        }
        let n = spec.vertex_count();
        let mut out_edges = vec![Vec::new(); n];
        let mut out_probs = vec![Vec::new(); n];
        for (i, e) in spec.edges.iter().enumerate() {
            out_edges[e.source].push(i);
            out_probs[e.source].push(e.prob);
        }
        Ok(MarkovSystem {
            spec,
            out_edges,
            out_probs,
        })
    }

    pub fn spec(&self) -> &MarkovSystemSpec {
        &self.spec
    }

    pub fn vertex_count(&self) -> usize {
        self.spec.vertex_count()
    }

    pub fn region(&self, v: usize) -> &Region {
        self.spec.vertices[v].region.as_ref().expect("validated")
    }

    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        self.spec.locate(x)
    }

    pub(crate) fn out_edges(&self, v: usize) -> &[usize] {
        &self.out_edges[v]
    }

    pub(crate) fn out_probs(&self, v: usize) -> &[f64] {
        &self.out_probs[v]
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.spec.edges[e]
    }

    /// Largest Lipschitz constant over all edge maps.
    pub fn max_lipschitz(&self) -> f64 {
        self.spec
            .edges
            .iter()
            .map(|e| e.map.lipschitz())
            .fold(0.0, f64::max)
    }

    /// True when every vertex has exactly one outgoing edge.
    pub fn is_deterministic(&self) -> bool {
        self.out_edges.iter().all(|e| e.len() == 1)
    }
}
