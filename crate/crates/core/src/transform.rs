//! Edge switch and the transformations generated by switches together with
//! degree-2 vertex insertion and removal.
//!
//! Composite edits (crossing, segment exchange) are defined by their
//! decomposition into insert / switch / remove steps and are applied by
//! replaying that decomposition.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{
    insert_kirchhoff_vertex, remove_kirchhoff_degree2, EdgeEndpoint, EdgeId, End, MetricGraph,
    VertexId,
};

/// A replayable edit of a metric graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transformation {
    Switch { p: EdgeEndpoint, q: EdgeEndpoint },
    Crossing { e: EdgeId, s_e: f64, f: EdgeId, s_f: f64 },
    Reversal { edge: EdgeId },
    Swap { e: EdgeId, f: EdgeId },
    SegmentExchange { e: EdgeId, s: [f64; 2], f: EdgeId, t: [f64; 2] },
    Insert { edge: EdgeId, s: f64 },
    Remove { vertex: VertexId },
}

impl Transformation {
    pub fn apply(&self, g: &MetricGraph) -> Result<MetricGraph> {
        match *self {
            Transformation::Switch { p, q } => edge_switch(g, p, q),
            Transformation::Crossing { .. } | Transformation::SegmentExchange { .. } => {
                replay(g, &self.decompose(g)?)
            }
            Transformation::Reversal { edge } => edge_reversal(g, edge),
            Transformation::Swap { e, f } => edge_swap(g, e, f),
            Transformation::Insert { edge, s } => insert_kirchhoff_vertex(g, edge, s),
            Transformation::Remove { vertex } => remove_kirchhoff_degree2(g, vertex),
        }
    }

    pub fn is_primitive(&self) -> bool {
        !matches!(self, Transformation::Crossing { .. } | Transformation::SegmentExchange { .. })
    }

    /// Insert / switch / remove steps whose replay on `g` equals applying `self`.
    /// The ids of inserted vertices and edges depend on `g`, hence the argument.
    /// Primitive transformations decompose to themselves.
    pub fn decompose(&self, g: &MetricGraph) -> Result<Vec<Transformation>> {
        match *self {
            Transformation::Crossing { e, s_e, f, s_f } => crossing_steps(g, e, s_e, f, s_f),
            Transformation::SegmentExchange { e, s, f, t } => {
                check_segment(g, e, s, f, t)?;
                let first = Transformation::Crossing { e, s_e: s[0], f, s_f: t[0] };
                let mut steps = first.decompose(g)?;
                let mid = replay(g, &steps)?;
                // After the first crossing the original t[1] point of f sits on e
                // and the original s[1] point of e sits on f.
                let second = Transformation::Crossing {
                    e,
                    s_e: s[0] + (t[1] - t[0]),
                    f,
                    s_f: t[0] + (s[1] - s[0]),
                };
                steps.extend(second.decompose(&mid)?);
                Ok(steps)
            }
            _ => Ok(vec![self.clone()]),
        }
    }

    /// Interlacing degree guaranteed for a single application.
    pub fn interlacing_bound(&self) -> usize {
        match self {
            Transformation::Switch { .. }
            | Transformation::Crossing { .. }
            | Transformation::Reversal { .. } => 1,
            Transformation::Swap { .. } | Transformation::SegmentExchange { .. } => 2,
            Transformation::Insert { .. } | Transformation::Remove { .. } => 0,
        }
    }

    pub fn describe(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Transformation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transformation::Switch { p, q } => write!(f, "switch endpoints {p} and {q}"),
            Transformation::Crossing { e, s_e, f: g, s_f } => {
                write!(f, "cross edge {e} at {s_e} with edge {g} at {s_f}")
            }
            Transformation::Reversal { edge } => write!(f, "reverse edge {edge}"),
            Transformation::Swap { e, f: g } => write!(f, "swap edges {e} and {g}"),
            Transformation::SegmentExchange { e, s, f: g, t } => write!(
                f,
                "exchange segment [{}, {}] of edge {e} with [{}, {}] of edge {g}",
                s[0], s[1], t[0], t[1]
            ),
            Transformation::Insert { edge, s } => {
                write!(f, "insert Kirchhoff vertex on edge {edge} at {s}")
            }
            Transformation::Remove { vertex } => write!(f, "remove degree-2 vertex {vertex}"),
        }
    }
}

/// Applies `steps` in order.
pub fn replay(g: &MetricGraph, steps: &[Transformation]) -> Result<MetricGraph> {
    steps.iter().try_fold(g.clone(), |acc, t| t.apply(&acc))
}

/// Sum of the per-step interlacing bounds.
pub fn composed_bound(steps: &[Transformation]) -> usize {
    steps.iter().map(Transformation::interlacing_bound).sum()
}

/// Parses a JSON-lines transformation log; blank lines are skipped.
pub fn read_log(text: &str) -> Result<Vec<Transformation>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse(format!("log line {}: {e}", i + 1)))
        })
        .collect()
}

pub fn write_log(steps: &[Transformation]) -> String {
    let mut out = String::new();
    for t in steps {
        out.push_str(&serde_json::to_string(t).expect("transformation serializes"));
        out.push('\n');
    }
    out
}

/// Exchanges the vertex attachment of endpoints `p` and `q`. Each moved
/// endpoint keeps its role, so edge orientations and alphas are unchanged.
pub fn edge_switch(g: &MetricGraph, p: EdgeEndpoint, q: EdgeEndpoint) -> Result<MetricGraph> {
    if p.edge == q.edge {
        return Err(Error::Precondition(format!(
            "switch needs endpoints of two distinct edges, got {p} and {q}; use a reversal"
        )));
    }
    let u = g.endpoint_vertex(p)?;
    let w = g.endpoint_vertex(q)?;
    let mut out = g.clone();
    let ip = out.edge_index(p.edge)?;
    let iq = out.edge_index(q.edge)?;
    let edges = out.edges_mut();
    set_end(&mut edges[ip], p.end, w);
    set_end(&mut edges[iq], q.end, u);
    Ok(out)
}

fn set_end(e: &mut crate::graph::Edge, end: End, v: VertexId) {
    match end {
        End::Tail => e.tail = v,
        End::Head => e.head = v,
    }
}

/// Cuts `e` at `s_e` and `f` at `s_f` and reconnects the pieces crosswise: the
/// tail piece of `e` continues into the head piece of `f` and vice versa.
pub fn edge_crossing(g: &MetricGraph, e: EdgeId, s_e: f64, f: EdgeId, s_f: f64) -> Result<MetricGraph> {
    Transformation::Crossing { e, s_e, f, s_f }.apply(g)
}

fn crossing_steps(g: &MetricGraph, e: EdgeId, s_e: f64, f: EdgeId, s_f: f64) -> Result<Vec<Transformation>> {
    if e == f {
        return Err(Error::Precondition(format!("crossing needs two distinct edges, got {e} twice")));
    }
    for (id, s) in [(e, s_e), (f, s_f)] {
        let len = g
            .edge(id)
            .ok_or_else(|| Error::Precondition(format!("no edge with id {id}")))?
            .length;
        if !(s > 0.0 && s < len) {
            return Err(Error::Domain(format!(
                "cut position {s} must lie strictly inside (0, {len}) on edge {id}"
            )));
        }
    }
    // Fresh ids assigned by the two insertions, in order.
    let x = g.next_vertex_id();
    let y = x + 1;
    let ne = g.next_edge_id();
    let nf = ne + 1;
    Ok(vec![
        Transformation::Insert { edge: e, s: s_e },
        Transformation::Insert { edge: f, s: s_f },
        Transformation::Switch { p: EdgeEndpoint::tail(ne), q: EdgeEndpoint::tail(nf) },
        Transformation::Remove { vertex: x },
        Transformation::Remove { vertex: y },
    ])
}

/// Reverses the parametrization of `edge`: tail and head swap and alpha changes sign.
pub fn edge_reversal(g: &MetricGraph, edge: EdgeId) -> Result<MetricGraph> {
    let mut out = g.clone();
    let i = out.edge_index(edge)?;
    let e = &mut out.edges_mut()[i];
    std::mem::swap(&mut e.tail, &mut e.head);
    e.alpha = -e.alpha;
    Ok(out)
}

/// Exchanges the (length, alpha) payloads of two edges; incidences stay put.
pub fn edge_swap(g: &MetricGraph, e: EdgeId, f: EdgeId) -> Result<MetricGraph> {
    if e == f {
        return Err(Error::Precondition(format!("swap needs two distinct edges, got {e} twice")));
    }
    let mut out = g.clone();
    let i = out.edge_index(e)?;
    let j = out.edge_index(f)?;
    let edges = out.edges_mut();
    let (li, ai) = (edges[i].length, edges[i].alpha);
    edges[i].length = edges[j].length;
    edges[i].alpha = edges[j].alpha;
    edges[j].length = li;
    edges[j].alpha = ai;
    Ok(out)
}

fn check_segment(g: &MetricGraph, e: EdgeId, s: [f64; 2], f: EdgeId, t: [f64; 2]) -> Result<()> {
    if e == f {
        return Err(Error::Precondition(format!("segment exchange needs two distinct edges, got {e} twice")));
    }
    for (id, [a, b]) in [(e, s), (f, t)] {
        let len = g
            .edge(id)
            .ok_or_else(|| Error::Precondition(format!("no edge with id {id}")))?
            .length;
        if !(0.0 < a && a < b && b < len) {
            return Err(Error::Domain(format!(
                "segment [{a}, {b}] on edge {id} must satisfy 0 < a < b < {len}"
            )));
        }
    }
    Ok(())
}

/// Exchanges the segment `s` of edge `e` with the segment `t` of edge `f`,
/// realized as two crossings.
pub fn segment_exchange(g: &MetricGraph, e: EdgeId, s: [f64; 2], f: EdgeId, t: [f64; 2]) -> Result<MetricGraph> {
    Transformation::SegmentExchange { e, s, f, t }.apply(g)
}
