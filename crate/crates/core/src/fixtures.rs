//! Named graphs used throughout the tests and the CLI, plus a seeded random
//! metric-graph generator.

use rand::Rng;

use crate::graph::{BoundaryCondition, Edge, MetricGraph, Vertex};

fn kirchhoff(id: usize) -> Vertex {
    Vertex { id, bc: BoundaryCondition::Kirchhoff }
}

/// Single loop of length `length` at one Kirchhoff vertex, carrying flux `alpha`.
pub fn loop_graph(length: f64, alpha: f64) -> MetricGraph {
    MetricGraph::new(
        vec![kirchhoff(0)],
        vec![Edge { id: 0, tail: 0, head: 0, length, alpha }],
    )
    .expect("valid loop")
}

/// Interval `[0, length]` with Dirichlet conditions at both ends.
pub fn interval(length: f64) -> MetricGraph {
    MetricGraph::new(
        vec![
            Vertex { id: 0, bc: BoundaryCondition::Dirichlet },
            Vertex { id: 1, bc: BoundaryCondition::Dirichlet },
        ],
        vec![Edge { id: 0, tail: 0, head: 1, length, alpha: 0.0 }],
    )
    .expect("valid interval")
}

/// Cycle through Kirchhoff vertices `0 → 1 → … → n-1 → 0`, edge `i` joining `i` and `i+1`.
pub fn cycle(lengths: &[f64]) -> MetricGraph {
    let n = lengths.len();
    let vertices = (0..n).map(kirchhoff).collect();
    let edges = lengths
        .iter()
        .enumerate()
        .map(|(i, &l)| Edge { id: i, tail: i, head: (i + 1) % n, length: l, alpha: 0.0 })
        .collect();
    MetricGraph::new(vertices, edges).expect("valid cycle")
}

/// Star with a Kirchhoff center (id 0) and one tip per length (ids 1..), edges pointing outwards.
pub fn star(lengths: &[f64], tip: BoundaryCondition) -> MetricGraph {
    let mut vertices = vec![kirchhoff(0)];
    vertices.extend((1..=lengths.len()).map(|id| Vertex { id, bc: tip }));
    let edges = lengths
        .iter()
        .enumerate()
        .map(|(i, &l)| Edge { id: i, tail: 0, head: i + 1, length: l, alpha: 0.0 })
        .collect();
    MetricGraph::new(vertices, edges).expect("valid star")
}

/// Complete graph on four Kirchhoff vertices. Edge order:
/// (0,1), (0,2), (0,3), (1,2), (1,3), (2,3).
pub fn complete4(lengths: &[f64]) -> MetricGraph {
    assert_eq!(lengths.len(), 6, "a tetrahedron has six edges");
    let pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
    let edges = pairs
        .iter()
        .zip(lengths)
        .enumerate()
        .map(|(i, (&(t, h), &l))| Edge { id: i, tail: t, head: h, length: l, alpha: 0.0 })
        .collect();
    MetricGraph::new((0..4).map(kirchhoff).collect(), edges).expect("valid tetrahedron")
}

/// Total length of the reference tetrahedron.
pub const TETRAHEDRON_TOTAL_LENGTH: f64 = 11.2;

/// Edge lengths of the reference tetrahedron: √2, √3, √5, √6, √7, √10
/// rescaled to a total of 11.2 (rationally independent).
pub fn tetrahedron_lengths() -> [f64; 6] {
    let raw = [2.0f64, 3.0, 5.0, 6.0, 7.0, 10.0].map(f64::sqrt);
    let sum: f64 = raw.iter().sum();
    raw.map(|x| x * TETRAHEDRON_TOTAL_LENGTH / sum)
}

/// The reference tetrahedron (graph Laplacian, Kirchhoff everywhere, no flux).
pub fn tetrahedron() -> MetricGraph {
    complete4(&tetrahedron_lengths())
}

/// Triangle 0-1-2 with a pendant edge 2-3; four edges, all Kirchhoff.
pub fn lollipop(lengths: &[f64; 4]) -> MetricGraph {
    let pairs = [(0, 1), (1, 2), (2, 0), (2, 3)];
    let edges = pairs
        .iter()
        .zip(lengths)
        .enumerate()
        .map(|(i, (&(t, h), &l))| Edge { id: i, tail: t, head: h, length: l, alpha: 0.0 })
        .collect();
    MetricGraph::new((0..4).map(kirchhoff).collect(), edges).expect("valid lollipop")
}

/// Parameters of [`random_graph`].
#[derive(Debug, Clone)]
pub struct RandomGraphOptions {
    pub edges: (usize, usize),
    pub vertices: (usize, usize),
    pub length_range: (f64, f64),
    /// Probability that a vertex is Dirichlet; the same probability is used for δ vertices.
    pub p_dirichlet: f64,
    pub p_delta: f64,
    pub delta_range: (f64, f64),
    /// Probability that an edge carries a nonzero flux.
    pub p_flux: f64,
}

impl Default for RandomGraphOptions {
    fn default() -> Self {
        RandomGraphOptions {
            edges: (5, 8),
            vertices: (2, 5),
            length_range: (0.5, 3.0),
            p_dirichlet: 0.15,
            p_delta: 0.15,
            delta_range: (0.1, 5.0),
            p_flux: 0.3,
        }
    }
}

/// Random metric graph: loops and multi-edges allowed, not necessarily connected.
pub fn random_graph<R: Rng + ?Sized>(rng: &mut R, opts: &RandomGraphOptions) -> MetricGraph {
    let n_edges = rng.random_range(opts.edges.0..=opts.edges.1);
    let n_vertices = rng.random_range(opts.vertices.0..=opts.vertices.1);
    let vertices = (0..n_vertices)
        .map(|id| {
            let u: f64 = rng.random();
            let bc = if u < opts.p_dirichlet {
                BoundaryCondition::Dirichlet
            } else if u < opts.p_dirichlet + opts.p_delta {
                BoundaryCondition::Delta(rng.random_range(opts.delta_range.0..opts.delta_range.1))
            } else {
                BoundaryCondition::Kirchhoff
            };
            Vertex { id, bc }
        })
        .collect();
    let edges = (0..n_edges)
        .map(|id| {
            let alpha = if rng.random::<f64>() < opts.p_flux {
                rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)
            } else {
                0.0
            };
            Edge {
                id,
                tail: rng.random_range(0..n_vertices),
                head: rng.random_range(0..n_vertices),
                length: rng.random_range(opts.length_range.0..opts.length_range.1),
                alpha,
            }
        })
        .collect();
    MetricGraph::new(vertices, edges).expect("generator produces valid graphs")
}
