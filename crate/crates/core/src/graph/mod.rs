//! Metric graphs and the constructions built on the complete graph with pendant edges.

mod perturb;

use std::collections::{HashMap, HashSet};
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use crate::error::{Error, Result};

pub use perturb::{transport_density, PerturbationPoint, SampledFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VertexKind {
    Interior,
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VertexCondition {
    Dirichlet,
    Neumann,
    /// Continuity plus vanishing sum of outgoing derivatives.
    Kirchhoff,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub id: u64,
    pub kind: VertexKind,
    pub condition: VertexCondition,
}

/// An edge is the interval `[0, length]`, with `t = 0` at `tail`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub tail: u64,
    pub head: u64,
    #[serde(serialize_with = "serialize_length")]
    pub length: f64,
}

fn serialize_length<S: serde::Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    // 17 significant digits round-trips every f64
    let raw = RawValue::from_string(format!("{v:.16e}")).map_err(serde::ser::Error::custom)?;
    raw.serialize(s)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GraphDocument {
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
}

/// Which end of an edge touches a vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum End {
    Tail,
    Head,
}

/// A finite metric graph with Dirichlet/Neumann boundary vertices and Kirchhoff interior vertices.
///
/// Vertices are addressed by position (`0..vertex_count()`); the `id` field is only used for
/// interchange. Every boundary vertex has degree one and every edge length is positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphDocument", into = "GraphDocument")]
pub struct MetricGraph {
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    /// edge endpoints as vertex positions
    ends: Vec<(usize, usize)>,
    /// incident edge ends per vertex
    incidence: Vec<Vec<(usize, End)>>,
}

impl From<MetricGraph> for GraphDocument {
    fn from(g: MetricGraph) -> Self {
        GraphDocument { vertices: g.vertices, edges: g.edges }
    }
}

impl TryFrom<GraphDocument> for MetricGraph {
    type Error = Error;

    fn try_from(doc: GraphDocument) -> Result<Self> {
        MetricGraph::new(doc.vertices, doc.edges)
    }
}

impl MetricGraph {
    pub fn new(vertices: Vec<Vertex>, edges: Vec<Edge>) -> Result<Self> {
        let mut position = HashMap::with_capacity(vertices.len());
        for (i, v) in vertices.iter().enumerate() {
            if position.insert(v.id, i).is_some() {
                return Err(Error::InvalidGraph(format!("duplicate vertex id {}", v.id)));
            }
        }
        let mut ends = Vec::with_capacity(edges.len());
        let mut incidence = vec![Vec::new(); vertices.len()];
        for (e, edge) in edges.iter().enumerate() {
            if !(edge.length.is_finite() && edge.length > 0.0) {
                return Err(Error::InvalidGraph(format!(
                    "edge {e} has non-positive length {}",
                    edge.length
                )));
            }
            let lookup = |id: u64| {
                position
                    .get(&id)
                    .copied()
                    .ok_or_else(|| Error::InvalidGraph(format!("edge {e} references unknown vertex {id}")))
            };
            let (t, h) = (lookup(edge.tail)?, lookup(edge.head)?);
            ends.push((t, h));
            incidence[t].push((e, End::Tail));
            incidence[h].push((e, End::Head));
        }
        for (i, v) in vertices.iter().enumerate() {
            let degree = incidence[i].len();
            match (v.kind, v.condition) {
                (VertexKind::Boundary, VertexCondition::Dirichlet | VertexCondition::Neumann) => {
                    if degree != 1 {
                        return Err(Error::InvalidGraph(format!(
                            "boundary vertex {} has degree {degree}, expected 1",
                            v.id
                        )));
                    }
                }
                (VertexKind::Interior, VertexCondition::Kirchhoff) => {}
                (kind, cond) => {
                    return Err(Error::InvalidGraph(format!(
                        "vertex {} of kind {kind:?} cannot carry condition {cond:?}",
                        v.id
                    )))
                }
            }
        }
        Ok(Self { vertices, edges, ends, incidence })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn length(&self, edge: usize) -> f64 {
        self.edges[edge].length
    }

    pub fn lengths(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.length).collect()
    }

    pub fn max_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).fold(0.0, f64::max)
    }

    /// Endpoints of an edge as vertex positions `(tail, head)`.
    pub fn endpoints(&self, edge: usize) -> (usize, usize) {
        self.ends[edge]
    }

    pub fn incident(&self, vertex: usize) -> &[(usize, End)] {
        &self.incidence[vertex]
    }

    pub fn degree(&self, vertex: usize) -> usize {
        self.incidence[vertex].len()
    }

    pub fn condition(&self, vertex: usize) -> VertexCondition {
        self.vertices[vertex].condition
    }

    /// Connected components as lists of vertex positions.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.vertices.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut stack = vec![start];
            let mut comp = Vec::new();
            seen[start] = true;
            while let Some(v) = stack.pop() {
                comp.push(v);
                for &(e, _) in &self.incidence[v] {
                    let (a, b) = self.ends[e];
                    for w in [a, b] {
                        if !seen[w] {
                            seen[w] = true;
                            stack.push(w);
                        }
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Same combinatorics with new edge lengths.
    pub fn with_lengths(&self, lengths: &[f64]) -> Result<Self> {
        if lengths.len() != self.edges.len() {
            return Err(Error::DimensionMismatch { expected: self.edges.len(), got: lengths.len() });
        }
        let edges = self
            .edges
            .iter()
            .zip(lengths)
            .map(|(e, &l)| Edge { length: l, ..e.clone() })
            .collect();
        Self::new(self.vertices.clone(), edges)
    }

    /// All lengths multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidArgument(format!("scale factor must be positive, got {c}")));
        }
        let lengths: Vec<f64> = self.edges.iter().map(|e| e.length * c).collect();
        self.with_lengths(&lengths)
    }

    /// Disjoint union; vertex ids of later graphs are shifted past the earlier ones.
    pub fn disjoint_union(parts: &[MetricGraph]) -> Result<Self> {
        let mut vertices = Vec::new();
        let mut edges = Vec::new();
        let mut offset = 0u64;
        for g in parts {
            let remap: HashMap<u64, u64> =
                g.vertices.iter().enumerate().map(|(i, v)| (v.id, offset + i as u64)).collect();
            vertices.extend(g.vertices.iter().map(|v| Vertex { id: remap[&v.id], ..v.clone() }));
            edges.extend(g.edges.iter().map(|e| Edge {
                tail: remap[&e.tail],
                head: remap[&e.head],
                length: e.length,
            }));
            offset += g.vertices.len() as u64;
        }
        Self::new(vertices, edges)
    }

    /// Components that contain no Dirichlet vertex (those carry a zero eigenvalue).
    pub fn components_without_dirichlet(&self) -> Vec<Vec<usize>> {
        let dirichlet: HashSet<usize> = (0..self.vertices.len())
            .filter(|&v| self.vertices[v].condition == VertexCondition::Dirichlet)
            .collect();
        self.components()
            .into_iter()
            .filter(|c| !c.iter().any(|v| dirichlet.contains(v)))
            .collect()
    }
}

fn interior(id: u64) -> Vertex {
    Vertex { id, kind: VertexKind::Interior, condition: VertexCondition::Kirchhoff }
}

fn boundary(id: u64, condition: VertexCondition) -> Vertex {
    Vertex { id, kind: VertexKind::Boundary, condition }
}

/// Edge numbering of `G_N`: the `N(N-1)/2` interior edges `(v_i, v_j)`, `i < j`, in
/// lexicographic order, followed by the `N` pendant edges `(u_k, v_k)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PendantLayout {
    pub n: usize,
}

impl PendantLayout {
    pub fn new(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidArgument(format!("N must be at least 3, got {n}")));
        }
        Ok(Self { n })
    }

    pub fn interior_count(&self) -> usize {
        self.n * (self.n - 1) / 2
    }

    pub fn edge_count(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    /// Index of the interior edge between `v_i` and `v_j` (0-based, any order, `i != j`).
    pub fn interior_edge(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        debug_assert!(j < self.n && i != j);
        // edges before row i: sum_{r<i} (n-1-r)
        i * (2 * self.n - i - 1) / 2 + (j - i - 1)
    }

    pub fn pendant_edge(&self, k: usize) -> usize {
        debug_assert!(k < self.n);
        self.interior_count() + k
    }

    /// Interior pairs `(i, j)`, `i < j`, in edge order.
    pub fn interior_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.interior_count());
        for i in 0..self.n {
            for j in i + 1..self.n {
                out.push((i, j));
            }
        }
        out
    }
}

/// `G_N`: the complete graph on `N` interior vertices with one Dirichlet pendant edge per
/// vertex, all lengths 1.
///
/// Interior vertex `v_i` has id `i`, boundary vertex `u_k` has id `N + k`. Pendant edges run
/// `u_k -> v_k`; interior edges run `v_i -> v_j` for `i < j`.
pub fn complete_pendant(n: usize) -> Result<MetricGraph> {
    let layout = PendantLayout::new(n)?;
    let mut vertices: Vec<Vertex> = (0..n as u64).map(interior).collect();
    vertices.extend((0..n as u64).map(|k| boundary(n as u64 + k, VertexCondition::Dirichlet)));
    let mut edges = Vec::with_capacity(layout.edge_count());
    for (i, j) in layout.interior_pairs() {
        edges.push(Edge { tail: i as u64, head: j as u64, length: 1.0 });
    }
    for k in 0..n as u64 {
        edges.push(Edge { tail: n as u64 + k, head: k, length: 1.0 });
    }
    MetricGraph::new(vertices, edges)
}

/// The star obtained by cutting the interior edges of `G_N` at their midpoints and keeping
/// the piece around `v_1`: a Dirichlet pendant of length 1 and `N - 1` Neumann half-edges
/// of length 1/2.
pub fn cut_star(n: usize) -> Result<MetricGraph> {
    PendantLayout::new(n)?;
    let mut vertices = vec![interior(0), boundary(1, VertexCondition::Dirichlet)];
    let mut edges = vec![Edge { tail: 1, head: 0, length: 1.0 }];
    for i in 0..(n - 1) as u64 {
        vertices.push(boundary(2 + i, VertexCondition::Neumann));
        edges.push(Edge { tail: 2 + i, head: 0, length: 0.5 });
    }
    MetricGraph::new(vertices, edges)
}

/// `arccos((N-1)/N)`, the square root of the first eigenvalue of `G_N`.
pub fn first_frequency(n: usize) -> f64 {
    ((n as f64 - 1.0) / n as f64).acos()
}

/// `arccos(-1/N)`, the square root of the second distinct eigenvalue of `G_N`.
pub fn second_frequency(n: usize) -> f64 {
    (-1.0 / n as f64).acos()
}

/// Whether `a_1 (k_2/k_1)^2 > a_m + 1` holds for `G_N`.
pub fn admissible(a: &[f64], n: usize) -> bool {
    if n < 3 || a.is_empty() {
        return false;
    }
    let ratio = second_frequency(n) / first_frequency(n);
    a[0] * ratio * ratio > a[a.len() - 1] + 1.0
}

pub(crate) fn check_strictly_increasing(a: &[f64]) -> Result<()> {
    if a.is_empty() {
        return Err(Error::InvalidArgument("target sequence is empty".into()));
    }
    if a.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(Error::InvalidArgument("targets must be positive and finite".into()));
    }
    if a.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("targets must be strictly increasing".into()));
    }
    Ok(())
}

/// Disjoint union of `m` copies of `G_N`, copy `i` scaled so its first eigenvalue is `a_i`.
pub fn build_scaled_union(a: &[f64], n: usize) -> Result<MetricGraph> {
    check_strictly_increasing(a)?;
    if !admissible(a, n) {
        return Err(Error::InvalidArgument(format!(
            "N = {n} is not admissible for targets {a:?}"
        )));
    }
    let base = complete_pendant(n)?;
    let k1 = first_frequency(n);
    let copies = a.iter().map(|ai| base.scaled(k1 / ai.sqrt())).collect::<Result<Vec<_>>>()?;
    MetricGraph::disjoint_union(&copies)
}

/// A single edge `[0, length]` with the given end conditions.
pub fn interval(length: f64, left: VertexCondition, right: VertexCondition) -> Result<MetricGraph> {
    MetricGraph::new(
        vec![boundary(0, left), boundary(1, right)],
        vec![Edge { tail: 0, head: 1, length }],
    )
}

/// Default scan step bound `pi / (4 L_max)` for a graph.
pub fn default_scan_step(g: &MetricGraph) -> f64 {
    PI / (4.0 * g.max_length())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g3_has_six_vertices_and_edges() {
        let g = complete_pendant(3).unwrap();
        assert_eq!(g.vertex_count(), 6);
        assert_eq!(g.edge_count(), 6);
        assert!(g.lengths().iter().all(|&l| l == 1.0));
    }

    #[test]
    fn g4_has_ten_edges() {
        let g = complete_pendant(4).unwrap();
        assert_eq!(g.vertex_count(), 8);
        assert_eq!(g.edge_count(), 10);
    }

    #[test]
    fn n_below_three_rejected() {
        assert!(complete_pendant(2).is_err());
        assert!(cut_star(2).is_err());
    }

    #[test]
    fn layout_indices_match_construction() {
        let n = 5;
        let g = complete_pendant(n).unwrap();
        let layout = PendantLayout::new(n).unwrap();
        for (i, j) in layout.interior_pairs() {
            let e = layout.interior_edge(i, j);
            assert_eq!(layout.interior_edge(j, i), e);
            assert_eq!(g.endpoints(e), (i, j));
        }
        for k in 0..n {
            assert_eq!(g.endpoints(layout.pendant_edge(k)), (n + k, k));
        }
    }

    #[test]
    fn boundary_degree_enforced() {
        let v = vec![boundary(0, VertexCondition::Dirichlet), interior(1), interior(2)];
        let e = vec![
            Edge { tail: 0, head: 1, length: 1.0 },
            Edge { tail: 0, head: 2, length: 1.0 },
        ];
        let err = MetricGraph::new(v, e).unwrap_err();
        assert!(err.to_string().contains("degree 2"));
    }

    #[test]
    fn non_positive_length_rejected() {
        let err = interval(0.0, VertexCondition::Dirichlet, VertexCondition::Dirichlet).unwrap_err();
        assert!(err.to_string().contains("non-positive length"));
        assert!(interval(-1.0, VertexCondition::Dirichlet, VertexCondition::Neumann).is_err());
    }

    #[test]
    fn interior_vertex_cannot_be_dirichlet() {
        let v = vec![Vertex { id: 0, kind: VertexKind::Interior, condition: VertexCondition::Dirichlet }];
        assert!(MetricGraph::new(v, vec![]).is_err());
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let g = complete_pendant(3).unwrap().scaled(first_frequency(3) / 7f64.sqrt()).unwrap();
        let text = g.to_json().unwrap();
        assert!(text.contains("\"kind\": \"boundary\""));
        let back = MetricGraph::from_json(&text).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn malformed_json_names_the_violation() {
        let text = r#"{"vertices":[{"id":0,"kind":"boundary","condition":"dirichlet"}],
                       "edges":[{"tail":0,"head":5,"length":1.0}]}"#;
        let err = MetricGraph::from_json(text).unwrap_err();
        assert!(err.to_string().contains("unknown vertex 5"), "{err}");
    }

    #[test]
    fn scaled_union_lengths() {
        let g = build_scaled_union(&[1.0], 3).unwrap();
        assert_eq!(g.edge_count(), 6);
        assert!((g.length(0) - 0.841_068_670_567_930_1).abs() < 1e-12);
        let g = build_scaled_union(&[1.0, 4.0], 3).unwrap();
        assert_eq!(g.edge_count(), 12);
        assert_eq!(g.components().len(), 2);
        assert!((g.length(6) - 0.420_534_335_283_965).abs() < 1e-12);
        assert!(build_scaled_union(&[1.0, 1.0], 3).is_err());
    }

    #[test]
    fn scaled_union_rejects_inadmissible_n() {
        // a_1 (k2/k1)^2 = 0.01 * 5.16 < 101
        assert!(build_scaled_union(&[0.01, 100.0], 3).is_err());
    }
}
