//! Compact metric graphs with local vertex conditions.
//!
//! A [`MetricGraph`] is a plain value: every operation that edits the graph
//! returns a new graph and leaves the input untouched. Vertex and edge ids are
//! stable integers chosen by the caller; fresh ids are always `max + 1`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type VertexId = usize;
pub type EdgeId = usize;

/// Local vertex condition.
///
/// `Delta(0.0)` is the same condition as `Kirchhoff`. A Dirichlet vertex
/// imposes `ψ = 0` on every incident edge end separately, so it decouples the
/// edges meeting there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    Kirchhoff,
    Dirichlet,
    Delta(f64),
}

impl BoundaryCondition {
    pub fn is_kirchhoff(&self) -> bool {
        match *self {
            BoundaryCondition::Kirchhoff => true,
            BoundaryCondition::Delta(chi) => chi == 0.0,
            BoundaryCondition::Dirichlet => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub id: VertexId,
    pub bc: BoundaryCondition,
}

/// A metrized edge `[0, length]` running from `tail` (x = 0) to `head` (x = length).
///
/// `alpha` is the line integral of the magnetic potential along the edge in
/// the tail-to-head direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub id: EdgeId,
    pub tail: VertexId,
    pub head: VertexId,
    pub length: f64,
    #[serde(default)]
    pub alpha: f64,
}

impl Edge {
    pub fn endpoint(&self, end: End) -> VertexId {
        match end {
            End::Tail => self.tail,
            End::Head => self.head,
        }
    }

    pub fn is_loop(&self) -> bool {
        self.tail == self.head
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum End {
    Tail,
    Head,
}

impl End {
    pub fn opposite(self) -> End {
        match self {
            End::Tail => End::Head,
            End::Head => End::Tail,
        }
    }
}

/// One end of one edge, i.e. a single (edge, vertex) incidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeEndpoint {
    pub edge: EdgeId,
    pub end: End,
}

impl EdgeEndpoint {
    pub fn new(edge: EdgeId, end: End) -> Self {
        EdgeEndpoint { edge, end }
    }

    pub fn tail(edge: EdgeId) -> Self {
        EdgeEndpoint::new(edge, End::Tail)
    }

    pub fn head(edge: EdgeId) -> Self {
        EdgeEndpoint::new(edge, End::Head)
    }
}

impl fmt::Display for EdgeEndpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let end = match self.end {
            End::Tail => "tail",
            End::Head => "head",
        };
        write!(f, "{}:{}", self.edge, end)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricGraph {
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
}

/// First violated invariant, if any.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub message: Option<String>,
}

impl ValidationReport {
    fn pass() -> Self {
        ValidationReport { ok: true, message: None }
    }

    fn fail(message: String) -> Self {
        ValidationReport { ok: false, message: Some(message) }
    }

    pub fn into_result(self) -> Result<()> {
        match self.message {
            None => Ok(()),
            Some(m) => Err(Error::Validation(m)),
        }
    }
}

/// Checks every structural invariant of `g` and reports the first failure.
pub fn validate(g: &MetricGraph) -> ValidationReport {
    let mut seen = BTreeMap::new();
    for v in &g.vertices {
        if seen.insert(v.id, ()).is_some() {
            return ValidationReport::fail(format!("duplicate vertex id {}", v.id));
        }
        if let BoundaryCondition::Delta(chi) = v.bc {
            if !chi.is_finite() {
                return ValidationReport::fail(format!("non-finite delta strength at vertex {}", v.id));
            }
        }
    }
    let mut edge_ids = BTreeMap::new();
    for e in &g.edges {
        if edge_ids.insert(e.id, ()).is_some() {
            return ValidationReport::fail(format!("duplicate edge id {}", e.id));
        }
        for end in [e.tail, e.head] {
            if !seen.contains_key(&end) {
                return ValidationReport::fail(format!(
                    "dangling incidence: edge {} references missing vertex id {}",
                    e.id, end
                ));
            }
        }
        if !e.length.is_finite() {
            return ValidationReport::fail(format!("non-finite length on edge {}", e.id));
        }
        if e.length <= 0.0 {
            return ValidationReport::fail(format!("nonpositive length on edge {}", e.id));
        }
        if !e.alpha.is_finite() {
            return ValidationReport::fail(format!("non-finite alpha on edge {}", e.id));
        }
    }
    if !(g.total_length() > 0.0) {
        return ValidationReport::fail("total length must be positive".into());
    }
    ValidationReport::pass()
}

/// Sum of all edge lengths.
pub fn total_length(g: &MetricGraph) -> f64 {
    g.total_length()
}

impl MetricGraph {
    /// Builds a graph and validates it.
    pub fn new(vertices: Vec<Vertex>, edges: Vec<Edge>) -> Result<Self> {
        let g = MetricGraph { vertices, edges };
        validate(&g).into_result()?;
        Ok(g)
    }

    /// Builds a graph without validation; [`validate`] reports what is wrong with it.
    pub fn unchecked(vertices: Vec<Vertex>, edges: Vec<Edge>) -> Self {
        MetricGraph { vertices, edges }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let g: MetricGraph = serde_json::from_str(text)?;
        validate(&g).into_result()?;
        Ok(g)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graph serializes")
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn total_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).sum()
    }

    pub fn vertex(&self, id: VertexId) -> Option<&Vertex> {
        self.vertices.iter().find(|v| v.id == id)
    }

    pub fn edge(&self, id: EdgeId) -> Option<&Edge> {
        self.edges.iter().find(|e| e.id == id)
    }

    pub fn edge_index(&self, id: EdgeId) -> Result<usize> {
        self.edges
            .iter()
            .position(|e| e.id == id)
            .ok_or_else(|| Error::Precondition(format!("no edge with id {id}")))
    }

    pub fn vertex_index(&self, id: VertexId) -> Result<usize> {
        self.vertices
            .iter()
            .position(|v| v.id == id)
            .ok_or_else(|| Error::Precondition(format!("no vertex with id {id}")))
    }

    /// Number of edge ends at `v`; a loop contributes two.
    pub fn degree(&self, v: VertexId) -> usize {
        self.edges
            .iter()
            .map(|e| usize::from(e.tail == v) + usize::from(e.head == v))
            .sum()
    }

    /// All edge ends attached to `v`, in edge order (tail before head).
    pub fn incident_ends(&self, v: VertexId) -> Vec<EdgeEndpoint> {
        let mut ends = Vec::new();
        for e in &self.edges {
            if e.tail == v {
                ends.push(EdgeEndpoint::tail(e.id));
            }
            if e.head == v {
                ends.push(EdgeEndpoint::head(e.id));
            }
        }
        ends
    }

    /// Degree of every vertex, keyed by id.
    pub fn degree_sequence(&self) -> BTreeMap<VertexId, usize> {
        self.vertices.iter().map(|v| (v.id, self.degree(v.id))).collect()
    }

    /// Edge lengths sorted ascending.
    pub fn length_multiset(&self) -> Vec<f64> {
        let mut lengths: Vec<f64> = self.edges.iter().map(|e| e.length).collect();
        lengths.sort_by(f64::total_cmp);
        lengths
    }

    pub fn next_vertex_id(&self) -> VertexId {
        self.vertices.iter().map(|v| v.id + 1).max().unwrap_or(0)
    }

    pub fn next_edge_id(&self) -> EdgeId {
        self.edges.iter().map(|e| e.id + 1).max().unwrap_or(0)
    }

    pub fn endpoint_vertex(&self, p: EdgeEndpoint) -> Result<VertexId> {
        let e = self
            .edge(p.edge)
            .ok_or_else(|| Error::Precondition(format!("no edge with id {}", p.edge)))?;
        Ok(e.endpoint(p.end))
    }

    pub(crate) fn edges_mut(&mut self) -> &mut Vec<Edge> {
        &mut self.edges
    }

    /// Copy with vertices and edges relabeled `0..n` in ascending id order.
    pub fn canonical(&self) -> MetricGraph {
        let mut vs = self.vertices.clone();
        vs.sort_by_key(|v| v.id);
        let vmap: BTreeMap<VertexId, VertexId> =
            vs.iter().enumerate().map(|(i, v)| (v.id, i)).collect();
        let mut es = self.edges.clone();
        es.sort_by_key(|e| e.id);
        let vertices = vs
            .iter()
            .map(|v| Vertex { id: vmap[&v.id], bc: v.bc })
            .collect();
        let edges = es
            .iter()
            .enumerate()
            .map(|(i, e)| Edge {
                id: i,
                tail: vmap[&e.tail],
                head: vmap[&e.head],
                length: e.length,
                alpha: e.alpha,
            })
            .collect();
        MetricGraph { vertices, edges }
    }

    /// Canonical JSON text; two graphs that differ only in id labels
    /// (with the same relative id order) serialize identically.
    pub fn canonical_json(&self) -> String {
        self.canonical().to_json()
    }

    /// Compares canonical forms, allowing `rel_tol` on lengths and alphas.
    pub fn approx_eq_canonical(&self, other: &MetricGraph, rel_tol: f64) -> bool {
        let a = self.canonical();
        let b = other.canonical();
        if a.vertices != b.vertices || a.edges.len() != b.edges.len() {
            return false;
        }
        let close = |x: f64, y: f64| (x - y).abs() <= rel_tol * x.abs().max(y.abs()).max(1.0);
        a.edges.iter().zip(&b.edges).all(|(x, y)| {
            x.tail == y.tail && x.head == y.head && close(x.length, y.length) && close(x.alpha, y.alpha)
        })
    }

    /// Connected components over edges; each entry lists vertex ids.
    /// Isolated vertices form singleton components.
    pub fn components(&self) -> Vec<Vec<VertexId>> {
        let n = self.vertices.len();
        let index: BTreeMap<VertexId, usize> =
            self.vertices.iter().enumerate().map(|(i, v)| (v.id, i)).collect();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for e in &self.edges {
            let a = find(&mut parent, index[&e.tail]);
            let b = find(&mut parent, index[&e.head]);
            if a != b {
                parent[a] = b;
            }
        }
        let mut groups: BTreeMap<usize, Vec<VertexId>> = BTreeMap::new();
        for (i, v) in self.vertices.iter().enumerate() {
            let r = find(&mut parent, i);
            groups.entry(r).or_default().push(v.id);
        }
        groups.into_values().collect()
    }

    /// Splits edge `e` at distance `s` from its tail, joining the pieces at a
    /// new vertex with condition `bc`. The tail piece keeps id `e`; the head
    /// piece and the vertex get fresh ids, which are returned.
    pub fn split_edge(
        &self,
        e: EdgeId,
        s: f64,
        bc: BoundaryCondition,
    ) -> Result<(MetricGraph, VertexId, EdgeId)> {
        let idx = self.edge_index(e)?;
        let edge = self.edges[idx];
        if !(s > 0.0 && s < edge.length) {
            return Err(Error::Domain(format!(
                "cut position {s} must lie strictly inside (0, {}) on edge {e}",
                edge.length
            )));
        }
        let v = self.next_vertex_id();
        let new_edge = self.next_edge_id();
        let frac = s / edge.length;
        let mut g = self.clone();
        g.vertices.push(Vertex { id: v, bc });
        g.edges[idx] = Edge {
            id: e,
            tail: edge.tail,
            head: v,
            length: s,
            alpha: edge.alpha * frac,
        };
        g.edges.push(Edge {
            id: new_edge,
            tail: v,
            head: edge.head,
            length: edge.length - s,
            alpha: edge.alpha * (edge.length - s) / edge.length,
        });
        Ok((g, v, new_edge))
    }
}

/// Inserts a degree-2 Kirchhoff vertex at distance `s` from the tail of `e`.
pub fn insert_kirchhoff_vertex(g: &MetricGraph, e: EdgeId, s: f64) -> Result<MetricGraph> {
    g.split_edge(e, s, BoundaryCondition::Kirchhoff).map(|(g, _, _)| g)
}

/// Removes a degree-2 Kirchhoff vertex, merging its two edges into one.
///
/// The merged edge keeps the smaller of the two edge ids and runs from the far
/// end of that edge, through `v`, to the far end of the other.
pub fn remove_kirchhoff_degree2(g: &MetricGraph, v: VertexId) -> Result<MetricGraph> {
    let vertex = g
        .vertex(v)
        .ok_or_else(|| Error::Precondition(format!("no vertex with id {v}")))?;
    if !vertex.bc.is_kirchhoff() {
        return Err(Error::Precondition(format!("vertex {v} is not a Kirchhoff vertex")));
    }
    let ends = g.incident_ends(v);
    if ends.len() != 2 {
        return Err(Error::Precondition(format!(
            "vertex {v} has degree {}, expected 2",
            ends.len()
        )));
    }
    if ends[0].edge == ends[1].edge {
        return Err(Error::UnsupportedMerge(format!(
            "vertex {v} carries a loop of edge {}; cannot merge an edge with itself",
            ends[0].edge
        )));
    }
    let (first, second) = if ends[0].edge < ends[1].edge {
        (ends[0], ends[1])
    } else {
        (ends[1], ends[0])
    };
    let e1 = *g.edge(first.edge).expect("incident edge exists");
    let e2 = *g.edge(second.edge).expect("incident edge exists");
    // Orient e1 as (far → v) and e2 as (v → far).
    let (a, alpha1) = match first.end {
        End::Head => (e1.tail, e1.alpha),
        End::Tail => (e1.head, -e1.alpha),
    };
    let (b, alpha2) = match second.end {
        End::Tail => (e2.head, e2.alpha),
        End::Head => (e2.tail, -e2.alpha),
    };
    let merged = Edge {
        id: e1.id,
        tail: a,
        head: b,
        length: e1.length + e2.length,
        alpha: alpha1 + alpha2,
    };
    let mut out = g.clone();
    out.vertices.retain(|x| x.id != v);
    out.edges.retain(|x| x.id != e2.id);
    let i = out.edge_index(e1.id)?;
    out.edges[i] = merged;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn minimal_loop_is_valid() {
        let g = fixtures::loop_graph(1.0, 0.0);
        assert!(validate(&g).ok);
        assert_eq!(total_length(&g), 1.0);
    }

    #[test]
    fn zero_length_fails() {
        let g = MetricGraph::unchecked(
            vec![Vertex { id: 0, bc: BoundaryCondition::Kirchhoff }],
            vec![Edge { id: 0, tail: 0, head: 0, length: 0.0, alpha: 0.0 }],
        );
        let r = validate(&g);
        assert!(!r.ok);
        assert!(r.message.unwrap().contains("nonpositive length"));
    }

    #[test]
    fn dangling_incidence_fails() {
        let g = MetricGraph::unchecked(
            vec![Vertex { id: 0, bc: BoundaryCondition::Kirchhoff }],
            vec![Edge { id: 0, tail: 0, head: 7, length: 1.0, alpha: 0.0 }],
        );
        let r = validate(&g);
        assert!(!r.ok);
        let msg = r.message.unwrap();
        assert!(msg.contains("dangling incidence"), "{msg}");
        assert!(msg.contains('7'));
    }

    #[test]
    fn empty_graph_has_no_length() {
        let g = MetricGraph::unchecked(vec![Vertex { id: 0, bc: BoundaryCondition::Kirchhoff }], vec![]);
        assert!(!validate(&g).ok);
    }

    #[test]
    fn tetrahedron_total_length() {
        let g = fixtures::complete4(&[1.1, 1.3, 1.7, 1.9, 2.3, 2.9]);
        assert!((total_length(&g) - 11.2).abs() < 1e-12);
    }

    #[test]
    fn split_loop_gives_two_cycle() {
        let g = fixtures::loop_graph(1.0, 0.0);
        let h = insert_kirchhoff_vertex(&g, 0, 0.5).unwrap();
        assert_eq!(h.vertices().len(), 2);
        assert_eq!(h.edges().len(), 2);
        assert!(h.edges().iter().all(|e| e.length == 0.5));
        assert!(validate(&h).ok);
    }

    #[test]
    fn split_outside_edge_is_domain_error() {
        let g = fixtures::loop_graph(1.0, 0.0);
        assert!(matches!(insert_kirchhoff_vertex(&g, 0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(insert_kirchhoff_vertex(&g, 0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(insert_kirchhoff_vertex(&g, 0, -0.2), Err(Error::Domain(_))));
    }

    #[test]
    fn alpha_splits_proportionally() {
        let g = fixtures::loop_graph(2.0, 1.0);
        let (h, _, e2) = g.split_edge(0, 0.5, BoundaryCondition::Kirchhoff).unwrap();
        assert!((h.edge(0).unwrap().alpha - 0.25).abs() < 1e-15);
        assert!((h.edge(e2).unwrap().alpha - 0.75).abs() < 1e-15);
    }

    #[test]
    fn two_cycle_merges_to_loop() {
        let g = fixtures::cycle(&[0.5, 0.5]);
        let h = remove_kirchhoff_degree2(&g, 1).unwrap();
        assert_eq!(h.edges().len(), 1);
        let e = h.edges()[0];
        assert!(e.is_loop());
        assert_eq!(e.length, 1.0);
    }

    #[test]
    fn path_merge_sums_alpha() {
        let g = MetricGraph::new(
            vec![
                Vertex { id: 0, bc: BoundaryCondition::Dirichlet },
                Vertex { id: 1, bc: BoundaryCondition::Kirchhoff },
                Vertex { id: 2, bc: BoundaryCondition::Dirichlet },
            ],
            vec![
                Edge { id: 0, tail: 0, head: 1, length: 0.3, alpha: 0.2 },
                Edge { id: 1, tail: 2, head: 1, length: 0.7, alpha: 0.5 },
            ],
        )
        .unwrap();
        let h = remove_kirchhoff_degree2(&g, 1).unwrap();
        let e = h.edges()[0];
        assert_eq!((e.tail, e.head), (0, 2));
        assert!((e.length - 1.0).abs() < 1e-15);
        // second edge is traversed against its orientation
        assert!((e.alpha - (0.2 - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn remove_rejects_degree_three() {
        let g = fixtures::complete4(&[1.0; 6]);
        assert!(matches!(remove_kirchhoff_degree2(&g, 0), Err(Error::Precondition(_))));
    }

    #[test]
    fn remove_rejects_dirichlet_and_loops() {
        let g = fixtures::interval(1.0);
        let (h, v, _) = g.split_edge(0, 0.4, BoundaryCondition::Dirichlet).unwrap();
        assert!(matches!(remove_kirchhoff_degree2(&h, v), Err(Error::Precondition(_))));
        let l = fixtures::loop_graph(1.0, 0.0);
        assert!(matches!(remove_kirchhoff_degree2(&l, 0), Err(Error::UnsupportedMerge(_))));
    }

    #[test]
    fn insert_then_remove_is_identity() {
        let g = fixtures::complete4(&[1.1, 1.3, 1.7, 1.9, 2.3, 2.9]);
        for e in 0..6 {
            let (h, v, _) = g.split_edge(e, 0.37, BoundaryCondition::Kirchhoff).unwrap();
            let back = remove_kirchhoff_degree2(&h, v).unwrap();
            assert!(back.approx_eq_canonical(&g, 1e-12), "edge {e}");
        }
    }

    #[test]
    fn json_round_trip_matches_contract() {
        let text = r#"{"vertices":[{"id":0,"bc":"kirchhoff"},{"id":1,"bc":"dirichlet"},{"id":2,"bc":{"delta":2.5}}],
            "edges":[{"id":0,"tail":0,"head":1,"length":1.5,"alpha":0.0},{"id":1,"tail":0,"head":2,"length":1.0}]}"#;
        let g = MetricGraph::from_json(text).unwrap();
        assert_eq!(g.vertex(2).unwrap().bc, BoundaryCondition::Delta(2.5));
        assert_eq!(g.edge(1).unwrap().alpha, 0.0);
        let again = MetricGraph::from_json(&g.to_json()).unwrap();
        assert_eq!(g, again);
    }

    #[test]
    fn malformed_json_is_rejected() {
        assert!(matches!(MetricGraph::from_json("{\"vertices\": 3}"), Err(Error::Parse(_))));
        let bad = r#"{"vertices":[{"id":0,"bc":"kirchhoff"}],"edges":[{"id":0,"tail":0,"head":0,"length":-1}]}"#;
        assert!(matches!(MetricGraph::from_json(bad), Err(Error::Validation(_))));
    }
}
