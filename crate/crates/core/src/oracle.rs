//! Finite-difference discretization of a metric graph: an independent check on
//! the low eigenvalues of the scattering solver, and the only path that accepts
//! a potential `V(x)`.
//!
//! Each edge of length `L` becomes a chain of `m = round(L/h)` segments of
//! length `h_e = L/m`. The default stencil is the lumped-mass (half-cell)
//! scheme `K ψ = E M ψ`: stiffness `1/h_e` per segment, mass `h_e` at chain
//! points and `Σ h_e/2` over incident edges at a vertex. The plain stencil
//! uses the unweighted row `(deg(v) ψ_v − Σ ψ_nb)/h²` at a vertex.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discrete::{Coupling, DiscreteGraph, HermitianOperator};
use crate::error::{Error, Result};
use crate::graph::{BoundaryCondition, EdgeId, End, MetricGraph};
use crate::linalg::{hermitian_eigenvalues, CMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stencil {
    #[default]
    HalfCell,
    Plain,
}

/// Piecewise-constant potential. Each edge lists `(start, value)` pieces in
/// increasing `start`; a piece holds until the next start. Edges not listed,
/// and positions before the first start, take `default`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PiecewisePotential {
    #[serde(default)]
    pub default: f64,
    #[serde(default)]
    pub edges: BTreeMap<EdgeId, Vec<(f64, f64)>>,
}

impl PiecewisePotential {
    pub fn constant(value: f64) -> Self {
        PiecewisePotential { default: value, edges: BTreeMap::new() }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: PiecewisePotential = serde_json::from_str(text)?;
        v.validate()?;
        Ok(v)
    }

    fn validate(&self) -> Result<()> {
        if !self.default.is_finite() {
            return Err(Error::Validation("potential default must be finite".into()));
        }
        for (e, pieces) in &self.edges {
            if pieces.windows(2).any(|w| w[1].0 < w[0].0) || pieces.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
                return Err(Error::Validation(format!("potential pieces on edge {e} must be finite with increasing starts")));
            }
        }
        Ok(())
    }

    /// `∫_a^b V(x) dx` along edge `e` (`a ≤ b`).
    fn integral(&self, e: EdgeId, a: f64, b: f64) -> f64 {
        let Some(pieces) = self.edges.get(&e) else {
            return self.default * (b - a);
        };
        let mut total = 0.0;
        let mut start = f64::NEG_INFINITY;
        let mut value = self.default;
        for &(s, v) in pieces.iter().chain(std::iter::once(&(f64::INFINITY, 0.0))) {
            let lo = start.max(a);
            let hi = s.min(b);
            if hi > lo {
                total += value * (hi - lo);
            }
            start = s;
            value = v;
        }
        total
    }
}

#[derive(Debug, Clone)]
struct Chain {
    /// Index of the first interior point; interior points are consecutive.
    start: usize,
    len: usize,
    tail: Option<usize>,
    head: Option<usize>,
    /// Coupling magnitude along the chain.
    c: f64,
    /// Phase per hop, `α/m`.
    phase: f64,
    alpha: f64,
}

/// Assembled finite-difference problem `K ψ = E M ψ` with diagonal `M`.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub stencil: Stencil,
    /// Segments per edge, in edge order.
    pub segments: Vec<usize>,
    /// Unknown index of each vertex (in vertex order); `None` for Dirichlet or isolated vertices.
    pub vertex_unknowns: Vec<Option<usize>>,
    vertex_count: usize,
    mass: Vec<f64>,
    /// Diagonal of `K` plus the potential term.
    diag: Vec<f64>,
    chains: Vec<Chain>,
}

/// Discretizes `g` with target step `h` (`h ≤ min L_e / 4`).
pub fn discretize(g: &MetricGraph, h: f64, v: Option<&PiecewisePotential>, stencil: Stencil) -> Result<Discretization> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Domain(format!("step must be positive, got {h}")));
    }
    let min_len = g.edges().iter().map(|e| e.length).fold(f64::INFINITY, f64::min);
    if g.edges().is_empty() {
        return Err(Error::Precondition("graph has no edges".into()));
    }
    if h > min_len / 4.0 * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!("step {h} exceeds a quarter of the shortest edge ({min_len})")));
    }
    let segments = g.edges().iter().map(|e| ((e.length / h).round() as usize).max(4)).collect();
    discretize_with_segments(g, segments, v, stencil)
}

/// Discretization with explicit segment counts per edge (each at least 4).
pub fn discretize_with_segments(
    g: &MetricGraph,
    segments: Vec<usize>,
    v: Option<&PiecewisePotential>,
    stencil: Stencil,
) -> Result<Discretization> {
    if segments.len() != g.edges().len() || segments.iter().any(|&m| m < 4) {
        return Err(Error::Precondition("need at least 4 segments on every edge".into()));
    }
    if let Some(v) = v {
        v.validate()?;
    }
    let zero = PiecewisePotential::default();
    let v = v.unwrap_or(&zero);
    if stencil == Stencil::Plain {
        if g.vertices().iter().any(|x| matches!(x.bc, BoundaryCondition::Delta(chi) if chi != 0.0)) {
            return Err(Error::Unsupported("the plain stencil has no δ vertex row".into()));
        }
        let h0 = g.edges()[0].length / segments[0] as f64;
        if g.edges().iter().zip(&segments).any(|(e, &m)| ((e.length / m as f64) - h0).abs() > 1e-9 * h0) {
            return Err(Error::Unsupported("the plain stencil needs the same step on every edge".into()));
        }
    }
    let mut vertex_unknowns = Vec::with_capacity(g.vertices().len());
    let mut n = 0;
    for x in g.vertices() {
        if x.bc == BoundaryCondition::Dirichlet || g.degree(x.id) == 0 {
            vertex_unknowns.push(None);
        } else {
            vertex_unknowns.push(Some(n));
            n += 1;
        }
    }
    let vertex_count = n;
    let mut mass = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut vertex_pot = vec![0.0; n];
    let mut chains = Vec::with_capacity(g.edges().len());
    for (e, &m) in g.edges().iter().zip(&segments) {
        let he = e.length / m as f64;
        let (c, interior_mass) = match stencil {
            Stencil::HalfCell => (1.0 / he, he),
            Stencil::Plain => (1.0 / (he * he), 1.0),
        };
        let tail = vertex_unknowns[g.vertex_index(e.tail)?];
        let head = vertex_unknowns[g.vertex_index(e.head)?];
        for (u, a, b) in [(tail, 0.0, he / 2.0), (head, e.length - he / 2.0, e.length)] {
            if let Some(u) = u {
                diag[u] += c;
                match stencil {
                    Stencil::HalfCell => {
                        mass[u] += he / 2.0;
                        vertex_pot[u] += v.integral(e.id, a, b);
                    }
                    Stencil::Plain => {
                        mass[u] = 1.0;
                        vertex_pot[u] += v.integral(e.id, a, b) / (he / 2.0);
                    }
                }
            }
        }
        let start = mass.len();
        for i in 1..m {
            let x = i as f64 * he;
            let pot = v.integral(e.id, x - he / 2.0, x + he / 2.0) / he;
            mass.push(interior_mass);
            diag.push(2.0 * c + pot * interior_mass);
        }
        chains.push(Chain { start, len: m - 1, tail, head, c, phase: e.alpha / m as f64, alpha: e.alpha });
    }
    for (i, x) in g.vertices().iter().enumerate() {
        if let Some(u) = vertex_unknowns[i] {
            if let BoundaryCondition::Delta(chi) = x.bc {
                diag[u] += chi;
            }
            diag[u] += match stencil {
                Stencil::HalfCell => vertex_pot[u],
                Stencil::Plain => vertex_pot[u] / g.degree(x.id) as f64,
            };
        }
    }
    Ok(Discretization { stencil, segments, vertex_unknowns, vertex_count, mass, diag, chains })
}

/// Discretized operator `M^{-1/2} K M^{-1/2}` as a dense matrix.
pub fn discretize_operator(g: &MetricGraph, h: f64, v: Option<&PiecewisePotential>) -> Result<HermitianOperator> {
    discretize(g, h, v, Stencil::HalfCell)?.operator()
}

impl Discretization {
    pub fn dim(&self) -> usize {
        self.mass.len()
    }

    /// Index of the interior point `i` (1-based from the tail) of edge position `edge_pos`.
    pub fn chain_point(&self, edge_pos: usize, i: usize) -> usize {
        let ch = &self.chains[edge_pos];
        assert!(i >= 1 && i <= ch.len, "interior point {i} outside 1..={}", ch.len);
        ch.start + i - 1
    }

    /// Chain endpoint next to the given end of an edge, with its neighbour along
    /// the chain and its vertex-side neighbour (if that vertex is an unknown).
    pub fn chain_end(&self, edge_pos: usize, end: End) -> (usize, usize, Option<usize>) {
        let ch = &self.chains[edge_pos];
        match end {
            End::Tail => (ch.start, ch.start + 1, ch.tail),
            End::Head => (ch.start + ch.len - 1, ch.start + ch.len - 2, ch.head),
        }
    }

    /// Off-diagonal entries `K(u, v)` with `u` the tail-side point, each listed once.
    fn hops(&self) -> Vec<(usize, usize, Complex64)> {
        let mut out = Vec::new();
        for ch in &self.chains {
            let k = Complex64::from_polar(-ch.c, ch.phase);
            if let Some(t) = ch.tail {
                out.push((t, ch.start, k));
            }
            for i in 0..ch.len - 1 {
                out.push((ch.start + i, ch.start + i + 1, k));
            }
            if let Some(h) = ch.head {
                out.push((ch.start + ch.len - 1, h, k));
            }
        }
        out
    }

    /// `M^{-1/2} K M^{-1/2}` as a dense Hermitian matrix.
    pub fn operator(&self) -> Result<HermitianOperator> {
        let n = self.dim();
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(self.diag[i] / self.mass[i], 0.0);
        }
        for (u, v, k) in self.hops() {
            let z = k / (self.mass[u] * self.mass[v]).sqrt();
            m[(u, v)] += z;
            m[(v, u)] += z.conj();
        }
        HermitianOperator::new(m)
    }

    /// The same operator as a discrete graph: `J = c/√(M_u M_v)` and
    /// `θ = α/m + π` on every hop.
    pub fn to_discrete_graph(&self) -> DiscreteGraph {
        let couplings = self
            .hops()
            .into_iter()
            .map(|(u, v, k)| Coupling {
                u,
                v,
                j: k.norm() / (self.mass[u] * self.mass[v]).sqrt(),
                theta: k.arg(),
            })
            .collect();
        let potential = self.diag.iter().zip(&self.mass).map(|(d, m)| d / m).collect();
        DiscreteGraph { n: self.dim(), couplings, potential }
    }

    /// Number of eigenvalues of `K ψ = E M ψ` strictly below `energy`, by
    /// Sylvester inertia: LDL* along each chain, then the Schur complement on
    /// the vertex unknowns.
    pub fn count(&self, energy: f64) -> usize {
        let nv = self.vertex_count;
        let mut schur = CMatrix::zeros(nv, nv);
        for u in 0..nv {
            schur[(u, u)] = Complex64::new(self.diag[u] - energy * self.mass[u], 0.0);
        }
        let mut negatives = 0;
        let mut fwd = Vec::new();
        for ch in &self.chains {
            let c2 = ch.c * ch.c;
            fwd.clear();
            let mut prev: Option<f64> = None;
            for i in 0..ch.len {
                let p = ch.start + i;
                let mut d = self.diag[p] - energy * self.mass[p];
                if let Some(q) = prev {
                    d -= c2 / q;
                }
                if d == 0.0 {
                    d = f64::MIN_POSITIVE;
                }
                if d < 0.0 {
                    negatives += 1;
                }
                fwd.push(d);
                prev = Some(d);
            }
            if ch.tail.is_none() && ch.head.is_none() {
                continue;
            }
            let g_last = 1.0 / fwd[ch.len - 1];
            let mut back = 0.0;
            for i in (0..ch.len).rev() {
                let p = ch.start + i;
                let mut d = self.diag[p] - energy * self.mass[p];
                if i + 1 < ch.len {
                    d -= c2 / back;
                }
                if d == 0.0 {
                    d = f64::MIN_POSITIVE;
                }
                back = d;
            }
            let g_first = 1.0 / back;
            if let Some(t) = ch.tail {
                schur[(t, t)] -= c2 * g_first;
            }
            if let Some(h) = ch.head {
                schur[(h, h)] -= c2 * g_last;
            }
            if let (Some(t), Some(h)) = (ch.tail, ch.head) {
                // c^{m} e^{iα} / Π d_i, accumulated in log form.
                let log_mag = (ch.len + 1) as f64 * ch.c.ln() - fwd.iter().map(|d| d.abs().ln()).sum::<f64>();
                let sign = if fwd.iter().filter(|d| **d < 0.0).count() % 2 == 0 { 1.0 } else { -1.0 };
                let cross = Complex64::from_polar(sign * log_mag.exp(), ch.alpha);
                if t == h {
                    schur[(t, t)] -= 2.0 * cross.re;
                } else {
                    schur[(t, h)] -= cross;
                    schur[(h, t)] -= cross.conj();
                }
            }
        }
        if nv > 0 {
            negatives += hermitian_eigenvalues(&schur).iter().filter(|&&x| x < 0.0).count();
        }
        negatives
    }

    /// Gershgorin interval containing the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.dim();
        let mut radius = vec![0.0; n];
        for (u, v, k) in self.hops() {
            let r = k.norm() / (self.mass[u] * self.mass[v]).sqrt();
            radius[u] += r;
            radius[v] += r;
        }
        (0..n).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), i| {
            let d = self.diag[i] / self.mass[i];
            (lo.min(d - radius[i]), hi.max(d + radius[i]))
        })
    }

    /// The lowest `n` eigenvalues by bisection on [`Discretization::count`].
    pub fn lowest(&self, n: usize) -> Result<Vec<f64>> {
        if n > self.dim() {
            return Err(Error::Domain(format!("asked for {n} levels of a {}-point discretization", self.dim())));
        }
        let lo = self.gershgorin().0 - 1.0;
        let mut hi = lo.abs().max(1.0);
        while self.count(hi) < n {
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(Error::Numerical("could not bracket the discrete levels".into()));
            }
        }
        (1..=n)
            .map(|j| {
                let (mut a, mut b) = (lo, hi);
                while b - a > 1e-13 * b.abs().max(1.0) {
                    let mid = 0.5 * (a + b);
                    if self.count(mid) >= j {
                        b = mid;
                    } else {
                        a = mid;
                    }
                }
                Ok(0.5 * (a + b))
            })
            .collect()
    }

    /// Same discretization with every segment count doubled.
    pub fn refined(&self, g: &MetricGraph, v: Option<&PiecewisePotential>) -> Result<Discretization> {
        discretize_with_segments(g, self.segments.iter().map(|m| 2 * m).collect(), v, self.stencil)
    }
}

/// One extrapolated level.
#[derive(Debug, Clone, Serialize)]
pub struct OracleLevel {
    pub index: usize,
    /// Raw eigenvalues at steps `h`, `h/2`, `h/4`.
    pub raw: [f64; 3],
    /// Richardson value `(4 E_{h/4} − E_{h/2})/3`.
    pub energy: f64,
    /// `|E_{h/2} − E_{h/4}|/3`.
    pub error_estimate: f64,
    /// `log2(|E_h − E_{h/2}| / |E_{h/2} − E_{h/4}|)`, when both differences are resolved.
    pub order: Option<f64>,
}

/// Differences below `ORACLE_NOISE·max(1, |E|) + 16 ε ‖H_{h/4}‖` are treated as converged.
pub const ORACLE_NOISE: f64 = 1e-9;

/// The lowest `n_levels` eigenvalues from runs at `h`, `h/2` and `h/4`,
/// extrapolated over the two finest runs.
pub fn oracle_eigenvalues(
    g: &MetricGraph,
    n_levels: usize,
    h: f64,
    v: Option<&PiecewisePotential>,
) -> Result<Vec<OracleLevel>> {
    let d0 = discretize(g, h, v, Stencil::HalfCell)?;
    let d1 = d0.refined(g, v)?;
    let d2 = d1.refined(g, v)?;
    let (lo, hi) = d2.gershgorin();
    let roundoff = 16.0 * f64::EPSILON * lo.abs().max(hi.abs());
    let runs: Vec<Vec<f64>> = [d0, d1, d2].par_iter().map(|d| d.lowest(n_levels)).collect::<Result<_>>()?;
    (0..n_levels)
        .map(|i| {
            let raw = [runs[0][i], runs[1][i], runs[2][i]];
            let d01 = (raw[0] - raw[1]).abs();
            let d12 = (raw[1] - raw[2]).abs();
            let floor = ORACLE_NOISE * raw[2].abs().max(1.0) + roundoff;
            let order = (d01 > floor && d12 > floor).then(|| (d01 / d12).log2());
            if d12 > floor && d12 >= d01 {
                return Err(Error::Refinement(format!(
                    "level {}: successive differences {d01:e}, {d12:e} do not shrink",
                    i + 1
                )));
            }
            Ok(OracleLevel {
                index: i + 1,
                raw,
                energy: (4.0 * raw[2] - raw[1]) / 3.0,
                error_estimate: d12 / 3.0,
                order,
            })
        })
        .collect()
}
